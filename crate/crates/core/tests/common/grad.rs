//! Finite-difference gradient checks in f64, one function per layer or loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use reconad::models::{ArchitectureSpec, Autoencoder, ConvSpec, Variant};
use reconad::nn::{
    Activation, Conv1d, ConvTranspose1d, Dense, ForwardCache, GradientTape, Layer, Matrix, Parameterized, Sequential,
};
use reconad::training::{batch_loss_and_grad, recon_loss};
use reconad_oracle::{compare_rel, fd_gradient};

pub type Check = Result<(), String>;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-3;

fn randn(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn act(rng: &mut ChaCha8Rng) -> Activation {
    if rng.random_bool(0.5) {
        Activation::Selu
    } else {
        Activation::Identity
    }
}

fn flat<P: Parameterized<f64>>(p: &P) -> Vec<f64> {
    p.parameters().concat()
}

fn set_flat<P: Parameterized<f64>>(p: &mut P, theta: &[f64]) {
    let mut at = 0;
    for buf in p.parameters_mut() {
        buf.copy_from_slice(&theta[at..at + buf.len()]);
        at += buf.len();
    }
}

fn close(analytic: &[f64], numeric: &[f64], what: &str) -> Check {
    if analytic.len() != numeric.len() {
        return Err(format!("{what}: {} analytic entries, {} numeric", analytic.len(), numeric.len()));
    }
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        if !compare_rel(a, n, TOL, FLOOR).passed {
            return Err(format!("{what}: entry {i}: analytic {a} vs finite difference {n}"));
        }
    }
    Ok(())
}

/// Loss with a non-trivial output gradient: `Σ c·y + ½ Σ y²`.
fn probe_loss(y: &Matrix<f64>, c: &[f64]) -> (f64, Matrix<f64>) {
    let mut g = Matrix::zeros(y.rows(), y.cols());
    let mut loss = 0.0;
    for (i, (&v, gi)) in y.as_slice().iter().zip(g.as_mut_slice()).enumerate() {
        loss += c[i] * v + 0.5 * v * v;
        *gi = c[i] + v;
    }
    (loss, g)
}

/// Checks parameter and input gradients of a network under the probe loss.
fn check_network(net: &Sequential<f64>, x: &Matrix<f64>, c: &[f64], what: &str) -> Check {
    let mut cache = ForwardCache::default();
    let y = net.forward_cached(x, &mut cache).unwrap();
    let (_, g) = probe_loss(&y, c);
    let mut tape = GradientTape::zeros_like(net);
    let gx = net.backward(&cache, &g, tape.buffers_mut(), true).unwrap().unwrap();

    let theta = flat(net);
    let mut probe = net.clone();
    let numeric = fd_gradient(
        |t| {
            set_flat(&mut probe, t);
            probe_loss(&probe.forward(x).unwrap(), c).0
        },
        &theta,
        H,
    );
    close(&tape.buffers().concat(), &numeric, &format!("{what} parameters"))?;

    let numeric_x = fd_gradient(
        |v| {
            let xm = Matrix::from_vec(x.rows(), x.cols(), v.to_vec()).unwrap();
            probe_loss(&net.forward(&xm).unwrap(), c).0
        },
        x.as_slice(),
        H,
    );
    close(gx.as_slice(), &numeric_x, &format!("{what} input"))
}

pub fn dense(trials: u64) -> Check {
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (i, o) = (rng.random_range(1..=3), rng.random_range(1..=2));
        let layer = Dense::new(i, o, randn(&mut rng, i * o), randn(&mut rng, o), act(&mut rng)).unwrap();
        let net = Sequential::new(vec![Layer::Dense(layer)]).unwrap();
        let rows = rng.random_range(1..=3);
        let x = Matrix::from_vec(rows, i, randn(&mut rng, rows * i)).unwrap();
        let c = randn(&mut rng, rows * o);
        check_network(&net, &x, &c, &format!("dense seed {seed}"))?;
    }
    Ok(())
}

pub fn conv1d(trials: u64) -> Check {
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (cin, cout, k, s) = (1, 2, rng.random_range(1..=2), rng.random_range(1..=2));
        let len = rng.random_range(k..=5);
        let layer = Conv1d::new(
            len,
            cin,
            cout,
            k,
            s,
            randn(&mut rng, cout * k * cin),
            randn(&mut rng, cout),
            act(&mut rng),
        )
        .unwrap();
        let net = Sequential::new(vec![Layer::Conv1d(layer)]).unwrap();
        let x = Matrix::from_vec(2, len * cin, randn(&mut rng, 2 * len * cin)).unwrap();
        let c = randn(&mut rng, 2 * net.output_width().unwrap());
        check_network(&net, &x, &c, &format!("conv1d seed {seed}"))?;
    }
    Ok(())
}

pub fn conv_transpose(trials: u64) -> Check {
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let (cin, cout, k, s) = (2, 1, rng.random_range(1..=3), rng.random_range(1..=2));
        let len = rng.random_range(1..=3);
        let natural = (len - 1) * s + k;
        let out_len = natural + rng.random_range(0..s);
        let layer = ConvTranspose1d::new(
            len,
            cin,
            cout,
            k,
            s,
            out_len,
            randn(&mut rng, cin * k * cout),
            randn(&mut rng, cout),
            act(&mut rng),
        )
        .unwrap();
        let net = Sequential::new(vec![Layer::ConvTranspose1d(layer)]).unwrap();
        let x = Matrix::from_vec(2, len * cin, randn(&mut rng, 2 * len * cin)).unwrap();
        let c = randn(&mut rng, 2 * out_len * cout);
        check_network(&net, &x, &c, &format!("conv_transpose seed {seed}"))?;
    }
    Ok(())
}

pub fn two_layer_selu(trials: u64) -> Check {
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let a = Dense::new(2, 2, randn(&mut rng, 4), randn(&mut rng, 2), Activation::Selu).unwrap();
        let b = Dense::new(2, 1, randn(&mut rng, 2), randn(&mut rng, 1), Activation::Identity).unwrap();
        let net = Sequential::new(vec![Layer::Dense(a), Layer::Dense(b)]).unwrap();
        let x = Matrix::from_vec(2, 2, randn(&mut rng, 4)).unwrap();
        let c = randn(&mut rng, 2);
        check_network(&net, &x, &c, &format!("two-layer seed {seed}"))?;
    }
    Ok(())
}

pub fn recon_loss_dense(trials: u64) -> Check {
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
        let layer = Dense::new(3, 3, randn(&mut rng, 9), randn(&mut rng, 3), Activation::Selu).unwrap();
        let net = Sequential::new(vec![Layer::Dense(layer)]).unwrap();
        let x = randn(&mut rng, 3);
        let xm = Matrix::from_row(&x);
        let loss = |n: &Sequential<f64>| recon_loss(&x, n.forward(&xm).unwrap().as_slice()).unwrap();

        let mut cache = ForwardCache::default();
        let y = net.forward_cached(&xm, &mut cache).unwrap();
        let eps = loss(&net);
        let g: Vec<f64> = y.as_slice().iter().zip(&x).map(|(a, b)| (a - b) / eps).collect();
        let mut tape = GradientTape::zeros_like(&net);
        net.backward(&cache, &Matrix::from_row(&g), tape.buffers_mut(), false).unwrap();

        let mut probe = net.clone();
        let numeric = fd_gradient(
            |t| {
                set_flat(&mut probe, t);
                loss(&probe)
            },
            &flat(&net),
            H,
        );
        close(&tape.buffers().concat(), &numeric, &format!("recon seed {seed}"))?;
    }
    Ok(())
}

fn tiny_spec(variant: Variant) -> ArchitectureSpec {
    match variant {
        Variant::VaeCnn => ArchitectureSpec {
            variant,
            window_len: 9,
            n_channels: 1,
            hidden_widths: vec![3],
            latent_dim: 2,
            conv: vec![
                ConvSpec {
                    out_channels: 2,
                    kernel: 3,
                    stride: 2,
                },
                ConvSpec {
                    out_channels: 2,
                    kernel: 2,
                    stride: 1,
                },
            ],
        },
        _ => ArchitectureSpec {
            variant,
            window_len: 3,
            n_channels: 2,
            hidden_widths: vec![3, 2],
            latent_dim: 2,
            conv: Vec::new(),
        },
    }
}

pub fn model(variant: Variant, trials: u64) -> Check {
    let base_seed = 5000 + 1000 * variant as u64;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed + seed);
        let spec = tiny_spec(variant);
        let model = Autoencoder::<f64>::build(&spec, seed).unwrap();
        let x = Matrix::from_vec(2, spec.input_dim(), randn(&mut rng, 2 * spec.input_dim())).unwrap();
        let noise = Matrix::from_vec(2, spec.latent_dim, randn(&mut rng, 2 * spec.latent_dim)).unwrap();
        let noise = variant.is_variational().then_some(&noise);
        let beta = rng.random_range(0.1..2.0);

        let mut tape = GradientTape::zeros_like(&model);
        batch_loss_and_grad(&model, &x, noise, beta, &mut tape).unwrap();

        let mut probe = model.clone();
        let numeric = fd_gradient(
            |t| {
                set_flat(&mut probe, t);
                let mut scratch = GradientTape::zeros_like(&probe);
                batch_loss_and_grad(&probe, &x, noise, beta, &mut scratch).unwrap().total
            },
            &flat(&model),
            H,
        );
        close(&tape.buffers().concat(), &numeric, &format!("{variant} seed {seed}"))?;
    }
    Ok(())
}
