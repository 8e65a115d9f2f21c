//! Autoencoder variants sharing one encoder/decoder contract.
//!
//! * `Ae`: deterministic latent code, reconstruction loss only.
//! * `Vae`: Gaussian latent with reparameterized sampling during training.
//! * `VaeCnn`: the VAE with two strided time convolutions ahead of the dense
//!   stack, mirrored by transposed convolutions in the decoder.
//!
//! The decoder mirrors the encoder: every encoder dense layer `(in, out)` has a
//! decoder counterpart `(out, in)`. Inference always uses the latent mean, so
//! scores are reproducible; noise is drawn only while training.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::nn::{
    Activation, Conv1d, ConvTranspose1d, Dense, ForwardCache, GradientTape, Layer, Matrix, Parameterized, Real,
    Sequential,
};
use crate::preprocessing::{Channel, NormStats, Window};
use crate::{Error, Result};

/// Bounds applied to the encoder's log-variance output.
pub const LOG_VAR_CLAMP: (f64, f64) = (-10.0, 10.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Ae,
    Vae,
    VaeCnn,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Ae, Variant::Vae, Variant::VaeCnn];

    pub fn is_variational(self) -> bool {
        !matches!(self, Variant::Ae)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Ae => "ae",
            Variant::Vae => "vae",
            Variant::VaeCnn => "vae_cnn",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ae" => Ok(Variant::Ae),
            "vae" => Ok(Variant::Vae),
            "vae_cnn" | "vaecnn" => Ok(Variant::VaeCnn),
            other => Err(Error::input(format!("unknown model variant '{other}' (ae, vae, vae_cnn)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub variant: Variant,
    pub window_len: usize,
    pub n_channels: usize,
    pub hidden_widths: Vec<usize>,
    pub latent_dim: usize,
    /// Time convolutions ahead of the dense stack; used by `VaeCnn` only.
    #[serde(default)]
    pub conv: Vec<ConvSpec>,
}

impl ArchitectureSpec {
    /// Three SELU layers of 30 units, a 15-dimensional latent space, and for
    /// `VaeCnn` two convolutions `(16, k=5, s=2)` and `(32, k=5, s=2)`.
    pub fn new(variant: Variant, window_len: usize, n_channels: usize) -> Self {
        let conv = match variant {
            Variant::VaeCnn => vec![
                ConvSpec {
                    out_channels: 16,
                    kernel: 5,
                    stride: 2,
                },
                ConvSpec {
                    out_channels: 32,
                    kernel: 5,
                    stride: 2,
                },
            ],
            _ => Vec::new(),
        };
        Self {
            variant,
            window_len,
            n_channels,
            hidden_widths: vec![30, 30, 30],
            latent_dim: 15,
            conv,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.window_len * self.n_channels
    }

    /// Sequence lengths through the convolution stack, starting with the
    /// window length.
    pub fn conv_lengths(&self) -> Result<Vec<usize>> {
        let mut lens = vec![self.window_len];
        for c in &self.conv {
            let last = *lens.last().expect("non-empty");
            let next = crate::nn::conv_output_len(last, c.kernel, c.stride).ok_or_else(|| {
                Error::Spec(format!(
                    "convolution (k={}, s={}) does not fit a sequence of length {last}",
                    c.kernel, c.stride
                ))
            })?;
            lens.push(next);
        }
        Ok(lens)
    }

    /// Width of the flattened convolution output feeding the dense stack.
    pub fn dense_input_dim(&self) -> Result<usize> {
        let lens = self.conv_lengths()?;
        let channels = self.conv.last().map_or(self.n_channels, |c| c.out_channels);
        Ok(lens.last().expect("non-empty") * channels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 || self.n_channels == 0 {
            return Err(Error::Spec("window length must be at least 2 with at least one channel".into()));
        }
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return Err(Error::Spec("hidden widths must be non-empty and positive".into()));
        }
        if self.latent_dim == 0 || self.latent_dim >= self.input_dim() {
            return Err(Error::Spec(format!(
                "latent dimension {} must be in [1, input_dim={})",
                self.latent_dim,
                self.input_dim()
            )));
        }
        match (self.variant, self.conv.is_empty()) {
            (Variant::VaeCnn, true) => return Err(Error::Spec("vae_cnn needs convolution layers".into())),
            (Variant::Ae | Variant::Vae, false) => {
                return Err(Error::Spec("convolution layers are only used by vae_cnn".into()))
            }
            _ => {}
        }
        if self.conv.iter().any(|c| c.out_channels == 0) {
            return Err(Error::Spec("convolution channels must be positive".into()));
        }
        self.conv_lengths()?;
        Ok(())
    }
}

/// Latent code for one input row.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderOutput<F> {
    pub mu: Vec<F>,
    /// Clamped log-variance; `None` for the plain autoencoder.
    pub log_var: Option<Vec<F>>,
    pub z: Vec<F>,
    /// Standard-normal draw used for `z`, when one was used.
    pub noise: Option<Vec<F>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Autoencoder<F> {
    spec: ArchitectureSpec,
    encoder: Sequential<F>,
    mu_head: Dense<F>,
    log_var_head: Option<Dense<F>>,
    decoder: Sequential<F>,
}

impl<F: Real> Autoencoder<F> {
    /// Untrained model with LeCun-normal weights drawn from `seed`.
    pub fn build(spec: &ArchitectureSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lens = spec.conv_lengths()?;

        let mut enc_layers = Vec::new();
        let mut channels = spec.n_channels;
        for (i, c) in spec.conv.iter().enumerate() {
            enc_layers.push(Layer::Conv1d(Conv1d::init(
                lens[i],
                channels,
                c.out_channels,
                c.kernel,
                c.stride,
                Activation::Selu,
                &mut rng,
            )?));
            channels = c.out_channels;
        }
        let dense_in = spec.dense_input_dim()?;
        let mut width = dense_in;
        for &h in &spec.hidden_widths {
            enc_layers.push(Layer::Dense(Dense::init(width, h, Activation::Selu, &mut rng)));
            width = h;
        }
        let encoder = Sequential::new(enc_layers)?;
        let mu_head = Dense::init(width, spec.latent_dim, Activation::Identity, &mut rng);
        let log_var_head = spec
            .variant
            .is_variational()
            .then(|| Dense::init(width, spec.latent_dim, Activation::Identity, &mut rng));

        let mut dec_layers = Vec::new();
        let mut width = spec.latent_dim;
        for &h in spec.hidden_widths.iter().rev() {
            dec_layers.push(Layer::Dense(Dense::init(width, h, Activation::Selu, &mut rng)));
            width = h;
        }
        if spec.conv.is_empty() {
            dec_layers.push(Layer::Dense(Dense::init(width, dense_in, Activation::Identity, &mut rng)));
        } else {
            dec_layers.push(Layer::Dense(Dense::init(width, dense_in, Activation::Selu, &mut rng)));
            for i in (0..spec.conv.len()).rev() {
                let c = spec.conv[i];
                let out_channels = if i == 0 { spec.n_channels } else { spec.conv[i - 1].out_channels };
                let activation = if i == 0 { Activation::Identity } else { Activation::Selu };
                dec_layers.push(Layer::ConvTranspose1d(ConvTranspose1d::init(
                    lens[i + 1],
                    c.out_channels,
                    out_channels,
                    c.kernel,
                    c.stride,
                    lens[i],
                    activation,
                    &mut rng,
                )?));
            }
        }
        let decoder = Sequential::new(dec_layers)?;
        Ok(Self {
            spec: spec.clone(),
            encoder,
            mu_head,
            log_var_head,
            decoder,
        })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn encoder(&self) -> &Sequential<F> {
        &self.encoder
    }

    pub fn mu_head(&self) -> &Dense<F> {
        &self.mu_head
    }

    pub fn log_var_head(&self) -> Option<&Dense<F>> {
        self.log_var_head.as_ref()
    }

    pub fn decoder(&self) -> &Sequential<F> {
        &self.decoder
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    fn check_input(&self, width: usize) -> Result<()> {
        if width != self.spec.input_dim() {
            return Err(Error::input(format!(
                "model expects flattened windows of length {}, got {width}",
                self.spec.input_dim()
            )));
        }
        Ok(())
    }

    fn clamp_log_var(values: &mut [F]) {
        let (lo, hi) = (F::from_f64_lossy(LOG_VAR_CLAMP.0), F::from_f64_lossy(LOG_VAR_CLAMP.1));
        for v in values {
            *v = v.max(lo).min(hi);
        }
    }

    fn encode_batch(&self, x: &Matrix<F>) -> Result<(Matrix<F>, Option<Matrix<F>>)> {
        self.check_input(x.cols())?;
        let h = self.encoder.forward(x)?;
        let mu = self.mu_head.forward(&h)?;
        let log_var = match &self.log_var_head {
            Some(head) => {
                let mut lv = head.forward(&h)?;
                Self::clamp_log_var(lv.as_mut_slice());
                Some(lv)
            }
            None => None,
        };
        Ok((mu, log_var))
    }

    /// Inference-mode encoding: `z = mu`.
    pub fn encode(&self, x: &[F]) -> Result<EncoderOutput<F>> {
        let (mu, log_var) = self.encode_batch(&Matrix::from_row(x))?;
        let mu = mu.into_vec();
        Ok(EncoderOutput {
            z: mu.clone(),
            mu,
            log_var: log_var.map(Matrix::into_vec),
            noise: None,
        })
    }

    /// Training-mode encoding with an explicit standard-normal draw:
    /// `z = mu + exp(log_var / 2) · noise`. For the plain autoencoder the
    /// noise is ignored and `z = mu`.
    pub fn encode_with_noise(&self, x: &[F], noise: &[F]) -> Result<EncoderOutput<F>> {
        let mut out = self.encode(x)?;
        if let Some(lv) = &out.log_var {
            if noise.len() != lv.len() {
                return Err(Error::input("noise length must equal the latent dimension"));
            }
            out.z = reparameterize(&out.mu, lv, noise);
            out.noise = Some(noise.to_vec());
        }
        Ok(out)
    }

    /// Training-mode encoding that draws its own noise from `rng`.
    pub fn encode_sampled<R: Rng + ?Sized>(&self, x: &[F], rng: &mut R) -> Result<EncoderOutput<F>> {
        let noise: Vec<F> = (0..self.spec.latent_dim)
            .map(|_| F::from_f64_lossy(StandardNormal.sample(rng)))
            .collect();
        self.encode_with_noise(x, &noise)
    }

    pub fn decode(&self, z: &[F]) -> Result<Vec<F>> {
        if z.len() != self.spec.latent_dim {
            return Err(Error::input(format!(
                "latent vector has length {}, expected {}",
                z.len(),
                self.spec.latent_dim
            )));
        }
        Ok(self.decoder.forward(&Matrix::from_row(z))?.into_vec())
    }

    /// Inference-mode reconstruction of a batch of flattened windows.
    pub fn reconstruct_batch(&self, x: &Matrix<F>) -> Result<Matrix<F>> {
        let (mu, _) = self.encode_batch(x)?;
        self.decoder.forward(&mu)
    }

    pub fn reconstruct_flat(&self, x: &[F]) -> Result<Vec<F>> {
        Ok(self.reconstruct_batch(&Matrix::from_row(x))?.into_vec())
    }

    /// Forward pass that keeps everything [`Autoencoder::backward`] needs.
    /// `noise` must be given for variational models and is ignored otherwise.
    pub fn forward_train(&self, x: &Matrix<F>, noise: Option<&Matrix<F>>) -> Result<TrainingPass<F>> {
        self.check_input(x.cols())?;
        let mut enc_cache = ForwardCache::default();
        let hidden = self.encoder.forward_cached(x, &mut enc_cache)?;
        let mu = self.mu_head.forward(&hidden)?;
        let (log_var_raw, log_var, noise, z) = match &self.log_var_head {
            Some(head) => {
                let noise = noise
                    .ok_or_else(|| Error::input("variational training pass needs a noise matrix"))?
                    .clone();
                if noise.rows() != x.rows() || noise.cols() != self.spec.latent_dim {
                    return Err(Error::input("noise matrix shape must be batch x latent_dim"));
                }
                let raw = head.forward(&hidden)?;
                let mut lv = raw.clone();
                Self::clamp_log_var(lv.as_mut_slice());
                let mut z = Matrix::zeros(x.rows(), self.spec.latent_dim);
                for r in 0..x.rows() {
                    let zr = reparameterize(mu.row(r), lv.row(r), noise.row(r));
                    z.row_mut(r).copy_from_slice(&zr);
                }
                (Some(raw), Some(lv), Some(noise), z)
            }
            None => (None, None, None, mu.clone()),
        };
        let mut dec_cache = ForwardCache::default();
        let recon = self.decoder.forward_cached(&z, &mut dec_cache)?;
        Ok(TrainingPass {
            enc_cache,
            hidden,
            mu,
            log_var_raw,
            log_var,
            noise,
            z,
            dec_cache,
            recon,
        })
    }

    /// Backpropagates loss gradients through a recorded pass into `tape`
    /// (accumulating). `grad_mu` and `grad_log_var` are direct loss gradients
    /// with respect to the latent statistics (the KL term); the path through
    /// the sampled `z` is added here.
    pub fn backward(
        &self,
        pass: &TrainingPass<F>,
        grad_recon: &Matrix<F>,
        grad_mu: Option<&Matrix<F>>,
        grad_log_var: Option<&Matrix<F>>,
        tape: &mut GradientTape<F>,
    ) -> Result<()> {
        if !tape.matches(self) {
            return Err(Error::State("gradient tape does not match the model parameters".into()));
        }
        let n_enc = self.encoder.parameters().len();
        let n_dec = self.decoder.parameters().len();
        let bufs = tape.buffers_mut();
        let total = bufs.len();
        let (enc_bufs, rest) = bufs.split_at_mut(n_enc);
        let (head_bufs, dec_bufs) = rest.split_at_mut(total - n_enc - n_dec);

        let grad_z = self
            .decoder
            .backward(&pass.dec_cache, grad_recon, dec_bufs, true)?
            .expect("input gradient requested");

        let rows = grad_z.rows();
        let latent = self.spec.latent_dim;
        let mut d_mu = grad_z.clone();
        if let Some(g) = grad_mu {
            for (a, b) in d_mu.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *a += *b;
            }
        }
        let (mu_bufs, lv_bufs) = head_bufs.split_at_mut(2);
        let [mu_w, mu_b] = mu_bufs else { unreachable!() };
        let mut d_hidden = self
            .mu_head
            .backward(&pass.hidden, &pass.mu, &d_mu, mu_w, mu_b, true)
            .expect("input gradient requested");

        if let (Some(head), Some(raw), Some(lv), Some(noise)) =
            (&self.log_var_head, &pass.log_var_raw, &pass.log_var, &pass.noise)
        {
            let (lo, hi) = (F::from_f64_lossy(LOG_VAR_CLAMP.0), F::from_f64_lossy(LOG_VAR_CLAMP.1));
            let half = F::from_f64_lossy(0.5);
            let mut d_lv = Matrix::zeros(rows, latent);
            for r in 0..rows {
                for j in 0..latent {
                    let raw_v = raw.row(r)[j];
                    if raw_v < lo || raw_v > hi {
                        continue;
                    }
                    let mut g = grad_z.row(r)[j] * half * (half * lv.row(r)[j]).exp() * noise.row(r)[j];
                    if let Some(extra) = grad_log_var {
                        g += extra.row(r)[j];
                    }
                    d_lv.row_mut(r)[j] = g;
                }
            }
            let [lv_w, lv_b] = lv_bufs else { unreachable!() };
            let d_h2 = head
                .backward(&pass.hidden, raw, &d_lv, lv_w, lv_b, true)
                .expect("input gradient requested");
            for (a, b) in d_hidden.as_mut_slice().iter_mut().zip(d_h2.as_slice()) {
                *a += *b;
            }
        }
        self.encoder.backward(&pass.enc_cache, &d_hidden, enc_bufs, false)?;
        Ok(())
    }
}

fn reparameterize<F: Real>(mu: &[F], log_var: &[F], noise: &[F]) -> Vec<F> {
    let half = F::from_f64_lossy(0.5);
    mu.iter()
        .zip(log_var)
        .zip(noise)
        .map(|((&m, &lv), &e)| m + (half * lv).exp() * e)
        .collect()
}

impl<F: Real> Parameterized<F> for Autoencoder<F> {
    fn parameters(&self) -> Vec<&[F]> {
        let mut p = self.encoder.parameters();
        p.extend(self.mu_head.parameters());
        if let Some(h) = &self.log_var_head {
            p.extend(h.parameters());
        }
        p.extend(self.decoder.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut [F]> {
        let mut p = self.encoder.parameters_mut();
        p.extend(self.mu_head.parameters_mut());
        if let Some(h) = &mut self.log_var_head {
            p.extend(h.parameters_mut());
        }
        p.extend(self.decoder.parameters_mut());
        p
    }
}

/// Intermediates of a training-mode forward pass.
#[derive(Clone, Debug)]
pub struct TrainingPass<F> {
    enc_cache: ForwardCache<F>,
    hidden: Matrix<F>,
    mu: Matrix<F>,
    log_var_raw: Option<Matrix<F>>,
    log_var: Option<Matrix<F>>,
    noise: Option<Matrix<F>>,
    z: Matrix<F>,
    dec_cache: ForwardCache<F>,
    recon: Matrix<F>,
}

impl<F> TrainingPass<F> {
    pub fn reconstruction(&self) -> &Matrix<F> {
        &self.recon
    }

    pub fn mu(&self) -> &Matrix<F> {
        &self.mu
    }

    pub fn log_var(&self) -> Option<&Matrix<F>> {
        self.log_var.as_ref()
    }

    pub fn z(&self) -> &Matrix<F> {
        &self.z
    }
}

/// Provenance recorded at training time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub final_loss: f64,
    pub train_windows: usize,
    #[serde(default)]
    pub train_runs: Vec<String>,
    #[serde(default)]
    pub holdout_runs: Vec<String>,
    #[serde(default)]
    pub config_digest: String,
    #[serde(default)]
    pub corpus_digest: String,
}

/// A trained model together with everything needed to score raw frames.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub model: Autoencoder<f32>,
    /// Input channels in model order.
    pub channels: Vec<Channel>,
    pub norm: NormStats,
    pub meta: TrainingMeta,
}

impl ModelBundle {
    pub fn new(model: Autoencoder<f32>, channels: Vec<Channel>, norm: NormStats, meta: TrainingMeta) -> Result<Self> {
        if channels.len() != model.spec().n_channels || norm.n_channels() != channels.len() {
            return Err(Error::input("channel list, normalization and architecture disagree"));
        }
        if channels.iter().map(|c| &c.name).ne(norm.channels.iter()) {
            return Err(Error::input("normalization channels are out of order"));
        }
        Ok(Self {
            model,
            channels,
            norm,
            meta,
        })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        self.model.spec()
    }

    pub fn window_len(&self) -> usize {
        self.spec().window_len
    }

    pub fn n_channels(&self) -> usize {
        self.spec().n_channels
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.name.clone()).collect()
    }

    /// Inference-mode reconstruction of a window in normalized units.
    pub fn reconstruct(&self, w: &Window) -> Result<Window> {
        if w.window_len != self.window_len() || w.n_channels != self.n_channels() {
            return Err(Error::input("window shape does not match the model"));
        }
        Ok(Window {
            end_index: w.end_index,
            window_len: w.window_len,
            n_channels: w.n_channels,
            values: self.model.reconstruct_flat(&w.values)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_dims<F: Real>(net: &Sequential<F>) -> Vec<(usize, usize)> {
        net.layers()
            .iter()
            .filter_map(|l| match l {
                Layer::Dense(d) => Some((d.inputs(), d.outputs())),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn default_dense_stack_and_mirror() {
        for variant in Variant::ALL {
            let spec = ArchitectureSpec::new(variant, 100, 19);
            let m = Autoencoder::<f32>::build(&spec, 1).unwrap();
            let mut enc = dense_dims(m.encoder());
            enc.push((m.mu_head().inputs(), m.mu_head().outputs()));
            let dec = dense_dims(m.decoder());
            let mirrored: Vec<_> = enc.iter().rev().map(|&(i, o)| (o, i)).collect();
            assert_eq!(dec, mirrored, "{variant}");
            if variant != Variant::VaeCnn {
                assert_eq!(enc, vec![(1900, 30), (30, 30), (30, 30), (30, 15)]);
            }
            assert_eq!(m.log_var_head().is_some(), variant.is_variational());
        }
    }

    #[test]
    fn cnn_convolutions_precede_dense_and_restore_shape() {
        let spec = ArchitectureSpec::new(Variant::VaeCnn, 100, 19);
        assert_eq!(spec.conv_lengths().unwrap(), vec![100, 48, 22]);
        let m = Autoencoder::<f32>::build(&spec, 2).unwrap();
        let layers = m.encoder().layers();
        assert!(matches!(layers[0], Layer::Conv1d(_)));
        assert!(matches!(layers[1], Layer::Conv1d(_)));
        assert!(layers[2..].iter().all(|l| matches!(l, Layer::Dense(_))));
        assert_eq!(layers[2].input_width(), 22 * 32);
        let out = m.decoder().layers().last().unwrap();
        assert!(matches!(out, Layer::ConvTranspose1d(_)));
        assert_eq!(out.output_width(), 1900);
    }

    #[test]
    fn latent_must_be_smaller_than_input() {
        let mut spec = ArchitectureSpec::new(Variant::Vae, 2, 2);
        spec.latent_dim = 4;
        assert!(matches!(Autoencoder::<f32>::build(&spec, 0), Err(Error::Spec(_))));
    }

    #[test]
    fn same_seed_same_parameters() {
        let spec = ArchitectureSpec::new(Variant::Vae, 20, 3);
        assert_eq!(Autoencoder::<f32>::build(&spec, 9).unwrap(), Autoencoder::<f32>::build(&spec, 9).unwrap());
        assert_ne!(Autoencoder::<f32>::build(&spec, 9).unwrap(), Autoencoder::<f32>::build(&spec, 10).unwrap());
    }

    #[test]
    fn encode_modes() {
        let spec = ArchitectureSpec::new(Variant::Vae, 20, 3);
        let m = Autoencoder::<f64>::build(&spec, 4).unwrap();
        let x: Vec<f64> = (0..60).map(|i| (i as f64 * 0.2).sin()).collect();
        let a = m.encode(&x).unwrap();
        assert_eq!(a, m.encode(&x).unwrap());
        assert_eq!(a.z, a.mu);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = m.encode_sampled(&x, &mut rng).unwrap();
        let lv = s.log_var.as_ref().unwrap();
        let eps = s.noise.as_ref().unwrap();
        for j in 0..spec.latent_dim {
            assert_eq!(s.z[j], s.mu[j] + (lv[j] / 2.0).exp() * eps[j]);
        }
        assert!(m.encode(&x[..10]).is_err());
    }

    #[test]
    fn decode_shape_and_finiteness() {
        let spec = ArchitectureSpec::new(Variant::VaeCnn, 100, 4);
        let m = Autoencoder::<f32>::build(&spec, 3).unwrap();
        let y = m.decode(&[1.0; 15]).unwrap();
        assert_eq!(y.len(), 400);
        assert!(y.iter().all(|v| v.is_finite()));
        assert_eq!(y, m.decode(&[1.0; 15]).unwrap());
        assert!(m.decode(&[1.0; 14]).is_err());
    }
}
