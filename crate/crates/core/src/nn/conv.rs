//! One-dimensional convolutions over the time axis.
//!
//! Rows are time-major flattened sequences: element `(t, c)` of a sequence
//! with `C` channels lives at `t * C + c`. Both layers use valid (unpadded)
//! windows; [`ConvTranspose1d`] is the adjoint of [`Conv1d`] and can restore
//! the exact pre-convolution length through its configured output length.

use rand::Rng;

use super::kernels::{axpy, dot};
use super::{lecun_normal, Activation, Matrix, Real};
use crate::{Error, Result};

/// Output length of a valid convolution, if at least one window fits.
pub fn conv_output_len(input_len: usize, kernel: usize, stride: usize) -> Option<usize> {
    (kernel >= 1 && stride >= 1 && input_len >= kernel).then(|| (input_len - kernel) / stride + 1)
}

/// Valid cross-correlation along time followed by an activation.
///
/// Kernels are stored tap-major, `[out_channels][kernel][in_channels]`, so a
/// single output is one contiguous dot product with the input row.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d<F> {
    input_len: usize,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    output_len: usize,
    kernels: Vec<F>,
    bias: Vec<F>,
    activation: Activation,
}

impl<F: Real> Conv1d<F> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        input_len: usize,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        kernels: Vec<F>,
        bias: Vec<F>,
        activation: Activation,
    ) -> Result<Self> {
        let output_len = conv_output_len(input_len, kernel, stride).ok_or_else(|| {
            Error::input(format!(
                "conv1d: input length {input_len} shorter than kernel {kernel} (stride {stride})"
            ))
        })?;
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::input("conv1d needs nonzero channel counts"));
        }
        if kernels.len() != out_channels * kernel * in_channels || bias.len() != out_channels {
            return Err(Error::input("conv1d parameter lengths do not match the shape"));
        }
        if kernels.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::input("conv1d parameters must be finite"));
        }
        Ok(Self {
            input_len,
            in_channels,
            out_channels,
            kernel,
            stride,
            output_len,
            kernels,
            bias,
            activation,
        })
    }

    pub fn init<R: Rng + ?Sized>(
        input_len: usize,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let kernels = lecun_normal(out_channels * kernel * in_channels, in_channels * kernel, rng);
        Self::new(
            input_len,
            in_channels,
            out_channels,
            kernel,
            stride,
            kernels,
            vec![F::zero(); out_channels],
            activation,
        )
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Weight connecting input channel `c` at tap `j` to output channel `o`.
    pub fn weight(&self, o: usize, c: usize, j: usize) -> F {
        self.kernels[(o * self.kernel + j) * self.in_channels + c]
    }

    pub fn bias(&self) -> &[F] {
        &self.bias
    }

    pub fn input_width(&self) -> usize {
        self.input_len * self.in_channels
    }

    pub fn output_width(&self) -> usize {
        self.output_len * self.out_channels
    }

    pub(crate) fn params(&self) -> [&[F]; 2] {
        [&self.kernels, &self.bias]
    }

    pub(crate) fn params_mut(&mut self) -> [&mut [F]; 2] {
        [&mut self.kernels, &mut self.bias]
    }

    fn tap_len(&self) -> usize {
        self.kernel * self.in_channels
    }

    pub(crate) fn forward_row(&self, x: &[F], out: &mut [F]) {
        let span = self.tap_len();
        for t in 0..self.output_len {
            let start = t * self.stride * self.in_channels;
            let patch = &x[start..start + span];
            for o in 0..self.out_channels {
                let k = &self.kernels[o * span..(o + 1) * span];
                out[t * self.out_channels + o] = dot(k, patch) + self.bias[o];
            }
        }
        self.activation.apply(out);
    }

    /// Forward pass over a batch of flattened sequences.
    pub fn forward(&self, x: &Matrix<F>) -> Result<Matrix<F>> {
        if x.cols() != self.input_width() {
            return Err(Error::input(format!(
                "conv1d expects {} x {} inputs, got width {}",
                self.input_len,
                self.in_channels,
                x.cols()
            )));
        }
        let mut out = Matrix::zeros(x.rows(), self.output_width());
        for r in 0..x.rows() {
            self.forward_row(x.row(r), out.row_mut(r));
        }
        Ok(out)
    }

    pub(crate) fn backward(
        &self,
        input: &Matrix<F>,
        output: &Matrix<F>,
        grad_out: &Matrix<F>,
        grad_k: &mut [F],
        grad_b: &mut [F],
        want_input_grad: bool,
    ) -> Option<Matrix<F>> {
        let span = self.tap_len();
        let mut grad_in = want_input_grad.then(|| Matrix::zeros(input.rows(), self.input_width()));
        let mut delta = vec![F::zero(); self.output_width()];
        for r in 0..input.rows() {
            delta.copy_from_slice(grad_out.row(r));
            self.activation.backprop(output.row(r), &mut delta);
            let x = input.row(r);
            for t in 0..self.output_len {
                let start = t * self.stride * self.in_channels;
                for o in 0..self.out_channels {
                    let d = delta[t * self.out_channels + o];
                    if d == F::zero() {
                        continue;
                    }
                    grad_b[o] += d;
                    axpy(d, &x[start..start + span], &mut grad_k[o * span..(o + 1) * span]);
                    if let Some(gi) = grad_in.as_mut() {
                        axpy(
                            d,
                            &self.kernels[o * span..(o + 1) * span],
                            &mut gi.row_mut(r)[start..start + span],
                        );
                    }
                }
            }
        }
        grad_in
    }
}

/// Transposed convolution: each input step scatters a kernel-wide patch into
/// the output. Used by decoders to undo a [`Conv1d`] exactly.
///
/// Kernels are stored `[in_channels][kernel][out_channels]`. Output positions
/// past `(input_len - 1) * stride + kernel` receive only the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvTranspose1d<F> {
    input_len: usize,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    output_len: usize,
    kernels: Vec<F>,
    bias: Vec<F>,
    activation: Activation,
}

impl<F: Real> ConvTranspose1d<F> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        input_len: usize,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        output_len: usize,
        kernels: Vec<F>,
        bias: Vec<F>,
        activation: Activation,
    ) -> Result<Self> {
        if input_len == 0 || kernel == 0 || stride == 0 || in_channels == 0 || out_channels == 0 {
            return Err(Error::input("transposed conv needs nonzero shape parameters"));
        }
        let natural = (input_len - 1) * stride + kernel;
        if output_len < natural || output_len - natural >= stride {
            return Err(Error::input(format!(
                "transposed conv: output length {output_len} not reachable from {input_len} steps \
                 (kernel {kernel}, stride {stride})"
            )));
        }
        if kernels.len() != in_channels * kernel * out_channels || bias.len() != out_channels {
            return Err(Error::input("transposed conv parameter lengths do not match the shape"));
        }
        if kernels.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::input("transposed conv parameters must be finite"));
        }
        Ok(Self {
            input_len,
            in_channels,
            out_channels,
            kernel,
            stride,
            output_len,
            kernels,
            bias,
            activation,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn init<R: Rng + ?Sized>(
        input_len: usize,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        output_len: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let kernels = lecun_normal(in_channels * kernel * out_channels, in_channels * kernel, rng);
        Self::new(
            input_len,
            in_channels,
            out_channels,
            kernel,
            stride,
            output_len,
            kernels,
            vec![F::zero(); out_channels],
            activation,
        )
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Weight from input channel `c` to output channel `o` at tap `j`.
    pub fn weight(&self, c: usize, o: usize, j: usize) -> F {
        self.kernels[(c * self.kernel + j) * self.out_channels + o]
    }

    pub fn bias(&self) -> &[F] {
        &self.bias
    }

    pub fn input_width(&self) -> usize {
        self.input_len * self.in_channels
    }

    pub fn output_width(&self) -> usize {
        self.output_len * self.out_channels
    }

    pub(crate) fn params(&self) -> [&[F]; 2] {
        [&self.kernels, &self.bias]
    }

    pub(crate) fn params_mut(&mut self) -> [&mut [F]; 2] {
        [&mut self.kernels, &mut self.bias]
    }

    fn patch_len(&self) -> usize {
        self.kernel * self.out_channels
    }

    pub(crate) fn forward_row(&self, x: &[F], out: &mut [F]) {
        for t in 0..self.output_len {
            out[t * self.out_channels..(t + 1) * self.out_channels].copy_from_slice(&self.bias);
        }
        let span = self.patch_len();
        for t in 0..self.input_len {
            let start = t * self.stride * self.out_channels;
            for c in 0..self.in_channels {
                let v = x[t * self.in_channels + c];
                axpy(v, &self.kernels[c * span..(c + 1) * span], &mut out[start..start + span]);
            }
        }
        self.activation.apply(out);
    }

    pub fn forward(&self, x: &Matrix<F>) -> Result<Matrix<F>> {
        if x.cols() != self.input_width() {
            return Err(Error::input(format!(
                "transposed conv expects width {}, got {}",
                self.input_width(),
                x.cols()
            )));
        }
        let mut out = Matrix::zeros(x.rows(), self.output_width());
        for r in 0..x.rows() {
            self.forward_row(x.row(r), out.row_mut(r));
        }
        Ok(out)
    }

    pub(crate) fn backward(
        &self,
        input: &Matrix<F>,
        output: &Matrix<F>,
        grad_out: &Matrix<F>,
        grad_k: &mut [F],
        grad_b: &mut [F],
        want_input_grad: bool,
    ) -> Option<Matrix<F>> {
        let span = self.patch_len();
        let mut grad_in = want_input_grad.then(|| Matrix::zeros(input.rows(), self.input_width()));
        let mut delta = vec![F::zero(); self.output_width()];
        for r in 0..input.rows() {
            delta.copy_from_slice(grad_out.row(r));
            self.activation.backprop(output.row(r), &mut delta);
            for t in 0..self.output_len {
                for o in 0..self.out_channels {
                    grad_b[o] += delta[t * self.out_channels + o];
                }
            }
            let x = input.row(r);
            for t in 0..self.input_len {
                let start = t * self.stride * self.out_channels;
                let d = &delta[start..start + span];
                for c in 0..self.in_channels {
                    let v = x[t * self.in_channels + c];
                    axpy(v, d, &mut grad_k[c * span..(c + 1) * span]);
                    if let Some(gi) = grad_in.as_mut() {
                        gi.row_mut(r)[t * self.in_channels + c] = dot(&self.kernels[c * span..(c + 1) * span], d);
                    }
                }
            }
        }
        grad_in
    }
}
