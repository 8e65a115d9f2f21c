use serde::{Deserialize, Serialize};

use super::Real;

/// Scale constant of the self-normalizing SELU activation.
pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
/// Negative-branch saturation constant of SELU.
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Selu,
    Identity,
}

#[inline]
pub fn selu_scalar<F: Real>(x: F) -> F {
    let lambda = F::from_f64_lossy(SELU_LAMBDA);
    if x > F::zero() {
        lambda * x
    } else {
        lambda * F::from_f64_lossy(SELU_ALPHA) * x.exp_m1()
    }
}

/// Elementwise SELU.
pub fn selu<F: Real>(x: &[F]) -> Vec<F> {
    x.iter().map(|&v| selu_scalar(v)).collect()
}

impl Activation {
    #[inline]
    pub(crate) fn apply<F: Real>(self, values: &mut [F]) {
        if let Activation::Selu = self {
            for v in values {
                *v = selu_scalar(*v);
            }
        }
    }

    /// Multiplies `grad` by the activation derivative, expressed through the
    /// activation *output* so callers only need to cache outputs.
    #[inline]
    pub(crate) fn backprop<F: Real>(self, output: &[F], grad: &mut [F]) {
        if let Activation::Selu = self {
            let lambda = F::from_f64_lossy(SELU_LAMBDA);
            let lambda_alpha = F::from_f64_lossy(SELU_LAMBDA * SELU_ALPHA);
            for (g, &y) in grad.iter_mut().zip(output) {
                // y = λα(eˣ − 1) on the negative branch, so dy/dx = y + λα.
                *g *= if y > F::zero() { lambda } else { y + lambda_alpha };
            }
        }
    }
}
