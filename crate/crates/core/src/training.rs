//! Losses and the epoch/batch training loop.
//!
//! The reconstruction loss of a window is the Euclidean norm of the
//! difference between the flattened window and its reconstruction. Variational
//! models add `β · KL(q(z|x) ‖ N(0, I))`. A batch loss is the mean of its
//! per-window losses; a trailing partial batch is dropped.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::models::{ArchitectureSpec, Autoencoder, ModelBundle, TrainingMeta, Variant};
use crate::nn::{Adam, AdamConfig, GradientTape, Matrix, Parameterized, Real};
use crate::preprocessing::{fit_norm, Channel, NormStats, TimeSeries, WindowSet};
use crate::{Error, Result};

/// `sqrt(Σ (x_j − x'_j)²)`, accumulated in `f64`.
pub fn recon_loss<F: Real>(x: &[F], x_prime: &[F]) -> Result<f64> {
    if x.len() != x_prime.len() {
        return Err(Error::input(format!(
            "reconstruction has length {}, input {}",
            x_prime.len(),
            x.len()
        )));
    }
    let sum: f64 = x
        .iter()
        .zip(x_prime)
        .map(|(&a, &b)| {
            let d = a.as_f64() - b.as_f64();
            d * d
        })
        .sum();
    Ok(sum.sqrt())
}

/// KL divergence of `N(mu, exp(log_var))` from the standard normal:
/// `−½ Σ (1 + log σ² − μ² − σ²)`.
pub fn kl_loss<F: Real>(mu: &[F], log_var: &[F]) -> Result<f64> {
    if mu.len() != log_var.len() {
        return Err(Error::input("mu and log_var must have equal lengths"));
    }
    let sum: f64 = mu
        .iter()
        .zip(log_var)
        .map(|(&m, &lv)| {
            let (m, lv) = (m.as_f64(), lv.as_f64());
            1.0 + lv - m * m - lv.exp()
        })
        .sum();
    Ok(-0.5 * sum)
}

/// Per-window objective: reconstruction loss, plus `β · KL` for variational
/// variants. Passing latent statistics for the plain autoencoder is an error.
pub fn total_loss<F: Real>(
    variant: Variant,
    x: &[F],
    x_prime: &[F],
    latent: Option<(&[F], &[F])>,
    kl_weight: f64,
) -> Result<f64> {
    let recon = recon_loss(x, x_prime)?;
    match (variant.is_variational(), latent) {
        (false, None) => Ok(recon),
        (false, Some(_)) => Err(Error::input("the plain autoencoder has no KL term")),
        (true, Some((mu, lv))) => Ok(recon + kl_weight * kl_loss(mu, lv)?),
        (true, None) => Err(Error::input("variational loss needs mu and log_var")),
    }
}

/// Mean losses of one batch.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BatchLoss {
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

/// Forward and backward pass for one batch; gradients of the mean batch loss
/// are accumulated into `tape`.
pub fn batch_loss_and_grad<F: Real>(
    model: &Autoencoder<F>,
    x: &Matrix<F>,
    noise: Option<&Matrix<F>>,
    kl_weight: f64,
    tape: &mut GradientTape<F>,
) -> Result<BatchLoss> {
    let pass = model.forward_train(x, noise)?;
    let recon = pass.reconstruction();
    let rows = x.rows();
    let inv_b = 1.0 / rows as f64;
    let mut grad_recon = Matrix::zeros(rows, x.cols());
    let mut loss = BatchLoss::default();
    for r in 0..rows {
        let eps = recon_loss(x.row(r), recon.row(r))?;
        loss.recon += eps * inv_b;
        if eps > 0.0 {
            let scale = F::from_f64_lossy(inv_b / eps);
            for ((g, &a), &b) in grad_recon.row_mut(r).iter_mut().zip(recon.row(r)).zip(x.row(r)) {
                *g = (a - b) * scale;
            }
        }
    }
    let (grad_mu, grad_lv) = match pass.log_var() {
        Some(lv) => {
            let mu = pass.mu();
            let latent = mu.cols();
            let mut gm = Matrix::zeros(rows, latent);
            let mut gl = Matrix::zeros(rows, latent);
            let w = kl_weight * inv_b;
            for r in 0..rows {
                loss.kl += kl_loss(mu.row(r), lv.row(r))? * inv_b;
                for j in 0..latent {
                    let (m, l) = (mu.row(r)[j].as_f64(), lv.row(r)[j].as_f64());
                    gm.row_mut(r)[j] = F::from_f64_lossy(w * m);
                    gl.row_mut(r)[j] = F::from_f64_lossy(w * 0.5 * (l.exp() - 1.0));
                }
            }
            (Some(gm), Some(gl))
        }
        None => (None, None),
    };
    loss.total = loss.recon + kl_weight * loss.kl;
    model.backward(&pass, &grad_recon, grad_mu.as_ref(), grad_lv.as_ref(), tape)?;
    Ok(loss)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub window_len: usize,
    /// Step between consecutive training windows.
    pub stride: usize,
    pub learning_rate: f64,
    pub kl_weight: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 25,
            window_len: 100,
            stride: 1,
            learning_rate: 1e-3,
            kl_weight: 1.0,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.window_len < 2 || self.stride == 0 {
            return Err(Error::input(
                "training needs epochs >= 1, batch_size >= 1, window_len >= 2 and stride >= 1",
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || !(self.kl_weight >= 0.0) {
            return Err(Error::input("learning rate must be positive and kl_weight non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub recon_loss: f64,
    pub kl_loss: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epochs: Vec<EpochRecord>,
}

impl TrainRecord {
    pub fn recon_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.recon_loss).collect()
    }

    pub fn kl_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.kl_loss).collect()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.recon_loss + e.kl_loss)
    }

    /// `epoch,recon_loss,kl_loss,seconds` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,recon_loss,kl_loss,seconds")?;
        for e in &self.epochs {
            writeln!(out, "{},{},{},{:.6}", e.epoch, e.recon_loss, e.kl_loss, e.seconds)?;
        }
        Ok(())
    }
}

/// Trains `model` in place on `windows`.
pub fn fit<F: Real>(model: &mut Autoencoder<F>, config: &TrainConfig, windows: &WindowSet) -> Result<TrainRecord> {
    config.validate()?;
    if windows.input_dim() != model.spec().input_dim() {
        return Err(Error::input("training windows do not match the model input"));
    }
    if windows.len() < config.batch_size {
        return Err(Error::input(format!(
            "{} training windows is fewer than one batch of {}",
            windows.len(),
            config.batch_size
        )));
    }
    let variational = model.spec().variant.is_variational();
    let latent = model.spec().latent_dim;
    let dim = windows.input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_7a1e_d0c5_u64);
    let mut adam = Adam::for_params(
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
        &model.parameters(),
    );
    let mut tape = GradientTape::zeros_like(&*model);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let batches = windows.len() / config.batch_size;
    let mut batch = Matrix::<F>::zeros(config.batch_size, dim);
    let mut noise = Matrix::<F>::zeros(config.batch_size, latent);
    let mut record = TrainRecord::default();

    for epoch in 0..config.epochs {
        let started = Instant::now();
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let (mut recon_sum, mut kl_sum) = (0.0, 0.0);
        for b in 0..batches {
            for (r, &i) in order[b * config.batch_size..(b + 1) * config.batch_size].iter().enumerate() {
                for (dst, &src) in batch.row_mut(r).iter_mut().zip(windows.window(i)) {
                    *dst = F::from_f64_lossy(src as f64);
                }
            }
            if variational {
                for v in noise.as_mut_slice() {
                    *v = F::from_f64_lossy(StandardNormal.sample(&mut rng));
                }
            }
            tape.zero();
            let loss = batch_loss_and_grad(model, &batch, variational.then_some(&noise), config.kl_weight, &mut tape)?;
            if !loss.total.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch: b,
                    detail: format!("loss is {} (recon {}, kl {})", loss.total, loss.recon, loss.kl),
                });
            }
            adam.step(model.parameters_mut(), &tape)?;
            recon_sum += loss.recon;
            kl_sum += loss.kl;
        }
        record.epochs.push(EpochRecord {
            epoch,
            recon_loss: recon_sum / batches as f64,
            kl_loss: kl_sum / batches as f64,
            seconds: started.elapsed().as_secs_f64(),
        });
        log::debug!(
            "epoch {epoch}: recon {:.5} kl {:.5}",
            recon_sum / batches as f64,
            kl_sum / batches as f64
        );
    }
    Ok(record)
}

/// Normalization statistics and windows of the nominal training runs.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub channels: Vec<Channel>,
    pub norm: NormStats,
    pub windows: WindowSet,
}

impl TrainingData {
    pub fn from_series(series: &[TimeSeries], window_len: usize, stride: usize) -> Result<Self> {
        let norm = fit_norm(series)?;
        let windows = WindowSet::new(series, &norm, window_len, stride)?;
        Ok(Self {
            channels: series[0].channels().to_vec(),
            norm,
            windows,
        })
    }
}

/// Builds a model for `spec`, trains it and packages it with its
/// normalization statistics.
pub fn train(spec: &ArchitectureSpec, config: &TrainConfig, data: &TrainingData) -> Result<(ModelBundle, TrainRecord)> {
    if spec.window_len != config.window_len || spec.window_len != data.windows.window_len() {
        return Err(Error::input("window length differs between architecture, config and data"));
    }
    let mut model = Autoencoder::<f32>::build(spec, config.seed)?;
    let record = fit(&mut model, config, &data.windows)?;
    let meta = TrainingMeta {
        seed: config.seed,
        epochs: config.epochs,
        final_loss: record.final_loss().unwrap_or(f64::NAN),
        train_windows: data.windows.len(),
        ..TrainingMeta::default()
    };
    let bundle = ModelBundle::new(model, data.channels.clone(), data.norm.clone(), meta)?;
    Ok((bundle, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recon_loss_values() {
        assert_eq!(recon_loss(&[1.0f64, -2.0], &[1.0, -2.0]).unwrap(), 0.0);
        assert_eq!(recon_loss(&[3.0f64, 0.0], &[0.0, 4.0]).unwrap(), 5.0);
        assert!(recon_loss(&[1.0f32], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kl_values() {
        assert_eq!(kl_loss(&[0.0f64; 4], &[0.0; 4]).unwrap(), 0.0);
        assert_eq!(kl_loss(&[1.0f64], &[0.0]).unwrap(), 0.5);
        assert!(kl_loss(&[0.3f64, -0.2], &[0.1, -0.4]).unwrap() > 0.0);
    }

    #[test]
    fn total_loss_composition() {
        let x = [3.0f64, 0.0];
        let y = [0.0f64, 4.0];
        assert_eq!(total_loss(Variant::Ae, &x, &y, None, 1.0).unwrap(), 5.0);
        assert_eq!(total_loss(Variant::Vae, &x, &y, Some((&[1.0], &[0.0])), 0.0).unwrap(), 5.0);
        let x2 = [2.0f64, 0.0];
        let y2 = [0.0f64, 0.0];
        assert_eq!(total_loss(Variant::Vae, &x2, &y2, Some((&[1.0], &[0.0])), 1.0).unwrap(), 2.5);
        assert!(total_loss(Variant::Ae, &x, &y, Some((&[1.0], &[0.0])), 1.0).is_err());
        assert!(total_loss(Variant::Vae, &x, &y, None, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { epochs: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { window_len: 1, ..TrainConfig::default() }.validate().is_err());
    }

    #[test]
    fn too_few_windows_is_rejected() {
        let mut spec = ArchitectureSpec::new(Variant::Ae, 4, 2);
        spec.latent_dim = 2;
        let mut model = Autoencoder::<f32>::build(&spec, 0).unwrap();
        let windows = WindowSet::from_windows(&vec![vec![0.0; 8]; 3], 4, 2).unwrap();
        let config = TrainConfig {
            window_len: 4,
            batch_size: 5,
            epochs: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(fit(&mut model, &config, &windows), Err(Error::Input(_))));
    }

    #[test]
    fn csv_export_header() {
        let rec = TrainRecord {
            epochs: vec![EpochRecord {
                epoch: 0,
                recon_loss: 1.5,
                kl_loss: 0.25,
                seconds: 0.1,
            }],
        };
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epoch,recon_loss,kl_loss,seconds\n0,1.5,0.25,"));
    }
}
