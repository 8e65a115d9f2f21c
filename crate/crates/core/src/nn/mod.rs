//! Minimal dense neural-network substrate.
//!
//! Parameter containers, batched forward passes, reverse-mode gradients and
//! the Adam optimizer, sized for small encoder/decoder stacks. Everything is
//! generic over [`Real`] so the same code runs in `f32` for training and in
//! `f64` for finite-difference gradient checks.
//!
//! Activations travel as batch-major [`Matrix`] rows. Convolutional layers read
//! and write time-major flattened rows (`index = t * channels + c`), which is
//! the same layout as a flattened window, so dense and convolutional layers
//! compose without reshaping.

mod activation;
mod adam;
mod conv;
mod dense;
mod kernels;
mod matrix;
mod sequential;

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub use activation::{selu, selu_scalar, Activation, SELU_ALPHA, SELU_LAMBDA};
pub use adam::{Adam, AdamConfig};
pub use conv::{conv_output_len, Conv1d, ConvTranspose1d};
pub use dense::Dense;
pub use matrix::Matrix;
pub use sequential::{ForwardCache, GradientTape, Layer, Parameterized, Sequential};

/// Floating-point element type for parameters and activations.
pub trait Real:
    Float + NumAssign + FromPrimitive + ToPrimitive + Default + Debug + Send + Sync + 'static
{
    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite f64 converts")
    }

    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Draws LeCun-normal initial weights, `N(0, 1 / fan_in)`.
pub(crate) fn lecun_normal<F: Real, R: rand::Rng + ?Sized>(
    count: usize,
    fan_in: usize,
    rng: &mut R,
) -> Vec<F> {
    use rand_distr::{Distribution, StandardNormal};
    let scale = (1.0 / fan_in as f64).sqrt();
    (0..count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            F::from_f64_lossy(z * scale)
        })
        .collect()
}
