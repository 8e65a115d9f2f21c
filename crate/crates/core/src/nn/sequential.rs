use super::{Conv1d, ConvTranspose1d, Dense, Matrix, Real};
use crate::{Error, Result};

/// Anything that owns an ordered list of parameter tensors.
///
/// The order returned by [`Parameterized::parameters`] and
/// [`Parameterized::parameters_mut`] must agree; gradient tapes and optimizer
/// state are aligned to it.
pub trait Parameterized<F> {
    fn parameters(&self) -> Vec<&[F]>;
    fn parameters_mut(&mut self) -> Vec<&mut [F]>;
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<F> {
    Dense(Dense<F>),
    Conv1d(Conv1d<F>),
    ConvTranspose1d(ConvTranspose1d<F>),
}

impl<F: Real> Layer<F> {
    pub fn input_width(&self) -> usize {
        match self {
            Layer::Dense(l) => l.inputs(),
            Layer::Conv1d(l) => l.input_width(),
            Layer::ConvTranspose1d(l) => l.input_width(),
        }
    }

    pub fn output_width(&self) -> usize {
        match self {
            Layer::Dense(l) => l.outputs(),
            Layer::Conv1d(l) => l.output_width(),
            Layer::ConvTranspose1d(l) => l.output_width(),
        }
    }

    pub fn forward(&self, x: &Matrix<F>) -> Result<Matrix<F>> {
        match self {
            Layer::Dense(l) => l.forward(x),
            Layer::Conv1d(l) => l.forward(x),
            Layer::ConvTranspose1d(l) => l.forward(x),
        }
    }

    fn params(&self) -> [&[F]; 2] {
        match self {
            Layer::Dense(l) => [l.weights(), l.bias()],
            Layer::Conv1d(l) => l.params(),
            Layer::ConvTranspose1d(l) => l.params(),
        }
    }

    fn params_mut(&mut self) -> [&mut [F]; 2] {
        match self {
            Layer::Dense(l) => l.params_mut(),
            Layer::Conv1d(l) => l.params_mut(),
            Layer::ConvTranspose1d(l) => l.params_mut(),
        }
    }

    fn backward(
        &self,
        input: &Matrix<F>,
        output: &Matrix<F>,
        grad_out: &Matrix<F>,
        grads: &mut [Vec<F>],
        want_input_grad: bool,
    ) -> Option<Matrix<F>> {
        let [gw, gb] = grads else {
            unreachable!("every layer owns exactly two parameter tensors")
        };
        match self {
            Layer::Dense(l) => l.backward(input, output, grad_out, gw, gb, want_input_grad),
            Layer::Conv1d(l) => l.backward(input, output, grad_out, gw, gb, want_input_grad),
            Layer::ConvTranspose1d(l) => l.backward(input, output, grad_out, gw, gb, want_input_grad),
        }
    }
}

/// Intermediate activations recorded by [`Sequential::forward_cached`].
#[derive(Clone, Debug, Default)]
pub struct ForwardCache<F> {
    // activations[0] is the input, activations[i + 1] the output of layer i.
    activations: Vec<Matrix<F>>,
}

impl<F> ForwardCache<F> {
    pub fn is_empty(&self) -> bool {
        self.activations.is_empty()
    }

    pub fn clear(&mut self) {
        self.activations.clear();
    }
}

/// Layers applied in order.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequential<F> {
    layers: Vec<Layer<F>>,
}

impl<F: Real> Sequential<F> {
    pub fn new(layers: Vec<Layer<F>>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(Error::input(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].output_width(),
                    pair[1].input_width()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    pub fn input_width(&self) -> Option<usize> {
        self.layers.first().map(Layer::input_width)
    }

    pub fn output_width(&self) -> Option<usize> {
        self.layers.last().map(Layer::output_width)
    }

    pub fn forward(&self, x: &Matrix<F>) -> Result<Matrix<F>> {
        let mut current = x.clone();
        for layer in &self.layers {
            current = layer.forward(&current)?;
        }
        Ok(current)
    }

    /// Forward pass that records every intermediate activation for a later
    /// [`Sequential::backward`].
    pub fn forward_cached(&self, x: &Matrix<F>, cache: &mut ForwardCache<F>) -> Result<Matrix<F>> {
        cache.activations.clear();
        cache.activations.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward(cache.activations.last().expect("input pushed"))?;
            cache.activations.push(next);
        }
        Ok(cache.activations.last().expect("input pushed").clone())
    }

    /// Reverse-mode pass. `grads` holds this network's parameter gradient
    /// buffers in [`Parameterized`] order and is accumulated into.
    pub fn backward(
        &self,
        cache: &ForwardCache<F>,
        grad_out: &Matrix<F>,
        grads: &mut [Vec<F>],
        want_input_grad: bool,
    ) -> Result<Option<Matrix<F>>> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::State("backward called without a matching forward pass".into()));
        }
        if grads.len() != 2 * self.layers.len() {
            return Err(Error::State(format!(
                "gradient tape has {} buffers, network has {}",
                grads.len(),
                2 * self.layers.len()
            )));
        }
        let last = cache.activations.last().expect("checked length");
        if grad_out.rows() != last.rows() || grad_out.cols() != last.cols() {
            return Err(Error::input("output gradient shape does not match the cached output"));
        }
        let mut grad = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let need_input = want_input_grad || i > 0;
            let g = layer.backward(
                &cache.activations[i],
                &cache.activations[i + 1],
                &grad,
                &mut grads[2 * i..2 * i + 2],
                need_input,
            );
            match g {
                Some(g) => grad = g,
                None => return Ok(None),
            }
        }
        Ok(Some(grad))
    }
}

impl<F: Real> Parameterized<F> for Sequential<F> {
    fn parameters(&self) -> Vec<&[F]> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut [F]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

impl<F: Real> Parameterized<F> for Dense<F> {
    fn parameters(&self) -> Vec<&[F]> {
        vec![self.weights(), self.bias()]
    }

    fn parameters_mut(&mut self) -> Vec<&mut [F]> {
        self.params_mut().into()
    }
}

/// Per-parameter gradient buffers aligned one-to-one with a model's
/// [`Parameterized::parameters`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientTape<F> {
    grads: Vec<Vec<F>>,
}

impl<F: Real> GradientTape<F> {
    pub fn zeros_like<P: Parameterized<F> + ?Sized>(model: &P) -> Self {
        Self {
            grads: model.parameters().iter().map(|p| vec![F::zero(); p.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for g in &mut self.grads {
            g.iter_mut().for_each(|v| *v = F::zero());
        }
    }

    pub fn buffers(&self) -> &[Vec<F>] {
        &self.grads
    }

    pub fn buffers_mut(&mut self) -> &mut [Vec<F>] {
        &mut self.grads
    }

    /// True when every buffer has the same length as the matching parameter.
    pub fn matches<P: Parameterized<F> + ?Sized>(&self, model: &P) -> bool {
        let params = model.parameters();
        params.len() == self.grads.len() && params.iter().zip(&self.grads).all(|(p, g)| p.len() == g.len())
    }

    pub fn is_zero(&self) -> bool {
        self.grads.iter().flatten().all(|v| *v == F::zero())
    }
}
