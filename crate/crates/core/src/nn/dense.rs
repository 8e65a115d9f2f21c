use rand::Rng;

use super::kernels::{axpy, dot};
use super::{lecun_normal, Activation, Matrix, Real};
use crate::{Error, Result};

/// Fully connected layer, `activation(W·x + b)`.
///
/// `weights` is row-major `[outputs × inputs]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<F> {
    inputs: usize,
    outputs: usize,
    weights: Vec<F>,
    bias: Vec<F>,
    activation: Activation,
}

impl<F: Real> Dense<F> {
    pub fn new(
        inputs: usize,
        outputs: usize,
        weights: Vec<F>,
        bias: Vec<F>,
        activation: Activation,
    ) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::input("dense layer needs nonzero widths"));
        }
        if weights.len() != inputs * outputs || bias.len() != outputs {
            return Err(Error::input(format!(
                "dense {inputs}->{outputs}: got {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::input("dense parameters must be finite"));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
            activation,
        })
    }

    /// LeCun-normal weights and zero bias.
    pub fn init<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        Self {
            inputs,
            outputs,
            weights: lecun_normal(inputs * outputs, inputs, rng),
            bias: vec![F::zero(); outputs],
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn bias(&self) -> &[F] {
        &self.bias
    }

    pub(crate) fn params_mut(&mut self) -> [&mut [F]; 2] {
        [&mut self.weights, &mut self.bias]
    }

    /// Expanding layers run column-wise over a transposed weight copy so the
    /// inner loops stay long. The choice depends only on the shape, so every
    /// row is computed the same way whatever the batch.
    fn expanding(&self) -> bool {
        self.inputs < self.outputs
    }

    fn transposed(&self) -> Vec<F> {
        let mut t = vec![F::zero(); self.weights.len()];
        for o in 0..self.outputs {
            for i in 0..self.inputs {
                t[i * self.outputs + o] = self.weights[o * self.inputs + i];
            }
        }
        t
    }

    pub fn forward(&self, x: &Matrix<F>) -> Result<Matrix<F>> {
        if x.cols() != self.inputs {
            return Err(Error::input(format!(
                "dense layer expects width {}, got {}",
                self.inputs,
                x.cols()
            )));
        }
        let mut out = Matrix::zeros(x.rows(), self.outputs);
        if self.expanding() {
            let wt = self.transposed();
            for r in 0..x.rows() {
                let y = out.row_mut(r);
                y.copy_from_slice(&self.bias);
                for (i, &xi) in x.row(r).iter().enumerate() {
                    axpy(xi, &wt[i * self.outputs..(i + 1) * self.outputs], y);
                }
            }
        } else {
            for r in 0..x.rows() {
                let xr = x.row(r);
                for (o, y) in out.row_mut(r).iter_mut().enumerate() {
                    *y = dot(&self.weights[o * self.inputs..(o + 1) * self.inputs], xr) + self.bias[o];
                }
            }
        }
        for r in 0..x.rows() {
            self.activation.apply(out.row_mut(r));
        }
        Ok(out)
    }

    /// Accumulates parameter gradients into `grad_w`/`grad_b` and, when asked,
    /// returns the gradient with respect to the layer input.
    pub(crate) fn backward(
        &self,
        input: &Matrix<F>,
        output: &Matrix<F>,
        grad_out: &Matrix<F>,
        grad_w: &mut [F],
        grad_b: &mut [F],
        want_input_grad: bool,
    ) -> Option<Matrix<F>> {
        let (rows, n_in, n_out) = (input.rows(), self.inputs, self.outputs);
        let mut delta = grad_out.clone();
        for r in 0..rows {
            self.activation.backprop(output.row(r), delta.row_mut(r));
            for (gb, &d) in grad_b.iter_mut().zip(delta.row(r)) {
                *gb += d;
            }
        }
        if self.expanding() {
            let mut gwt = vec![F::zero(); n_in * n_out];
            for r in 0..rows {
                let d = delta.row(r);
                for (i, &xi) in input.row(r).iter().enumerate() {
                    if xi != F::zero() {
                        axpy(xi, d, &mut gwt[i * n_out..(i + 1) * n_out]);
                    }
                }
            }
            for o in 0..n_out {
                for i in 0..n_in {
                    grad_w[o * n_in + i] += gwt[i * n_out + o];
                }
            }
            want_input_grad.then(|| {
                let wt = self.transposed();
                let mut gi = Matrix::zeros(rows, n_in);
                for r in 0..rows {
                    let d = delta.row(r);
                    for (i, g) in gi.row_mut(r).iter_mut().enumerate() {
                        *g = dot(d, &wt[i * n_out..(i + 1) * n_out]);
                    }
                }
                gi
            })
        } else {
            for o in 0..n_out {
                let gw = &mut grad_w[o * n_in..(o + 1) * n_in];
                for r in 0..rows {
                    let d = delta.row(r)[o];
                    if d != F::zero() {
                        axpy(d, input.row(r), gw);
                    }
                }
            }
            want_input_grad.then(|| {
                let mut gi = Matrix::zeros(rows, n_in);
                for r in 0..rows {
                    let g = gi.row_mut(r);
                    for (o, &d) in delta.row(r).iter().enumerate() {
                        if d != F::zero() {
                            axpy(d, &self.weights[o * n_in..(o + 1) * n_in], g);
                        }
                    }
                }
                gi
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_input_through() {
        let layer = Dense::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], Activation::Identity).unwrap();
        let y = layer.forward(&Matrix::from_row(&[1.0f64, 2.0])).unwrap();
        assert_eq!(y.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn hand_arithmetic() {
        let layer = Dense::new(2, 1, vec![1.0, 1.0], vec![0.5], Activation::Identity).unwrap();
        let y = layer.forward(&Matrix::from_row(&[1.0f64, 2.0])).unwrap();
        assert_eq!(y.row(0), &[3.5]);
    }

    #[test]
    fn selu_composes_with_affine_map() {
        let layer = Dense::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], Activation::Selu).unwrap();
        let y = layer.forward(&Matrix::from_row(&[-1.0f64, 2.0])).unwrap();
        assert_eq!(y.row(0), &[super::super::selu_scalar(-1.0), super::super::selu_scalar(2.0)]);
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let layer = Dense::<f32>::new(3, 1, vec![0.0; 3], vec![0.0], Activation::Identity).unwrap();
        assert!(matches!(layer.forward(&Matrix::from_row(&[1.0, 2.0])), Err(Error::Input(_))));
        assert!(Dense::<f32>::new(3, 1, vec![0.0; 2], vec![0.0], Activation::Identity).is_err());
        assert!(Dense::<f32>::new(1, 1, vec![f32::NAN], vec![0.0], Activation::Identity).is_err());
    }

    #[test]
    fn squared_error_gradient_is_closed_form() {
        // L = ||W x + b - y||², dL/dW = 2 (ŷ - y) xᵀ
        let layer = Dense::new(2, 2, vec![0.5, -1.0, 2.0, 0.25], vec![0.1, -0.2], Activation::Identity).unwrap();
        let x = Matrix::from_row(&[1.5f64, -2.0]);
        let target = [0.3, 0.7];
        let y = layer.forward(&x).unwrap();
        let resid: Vec<f64> = y.row(0).iter().zip(&target).map(|(a, b)| a - b).collect();
        let grad_out = Matrix::from_row(&resid.iter().map(|r| 2.0 * r).collect::<Vec<_>>());
        let mut gw = vec![0.0; 4];
        let mut gb = vec![0.0; 2];
        layer.backward(&x, &y, &grad_out, &mut gw, &mut gb, false);
        for o in 0..2 {
            for i in 0..2 {
                assert!((gw[o * 2 + i] - 2.0 * resid[o] * x.row(0)[i]).abs() < 1e-12);
            }
            assert!((gb[o] - 2.0 * resid[o]).abs() < 1e-12);
        }
    }
}
