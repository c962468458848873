use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::Scalar;

use super::{Matrix, NnError, Result};

/// Units in each hidden layer of every actor and critic.
pub const HIDDEN_UNITS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Self::Identity => z,
            Self::Relu => z.max(T::zero()),
            Self::Tanh => z.tanh(),
        }
    }

    /// Derivative from the pre-activation `z` and the activation `y`.
    fn derivative<T: Scalar>(self, z: T, y: T) -> T {
        match self {
            Self::Identity => T::one(),
            Self::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::Tanh => T::one() - y * y,
        }
    }
}

/// Squashing applied to the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    /// Critics and pure-logit actors.
    Identity,
    /// Continuous actors with bounds `[-1, 1]`.
    Tanh,
    /// `tanh` on the first `n` outputs, identity (logits) on the rest.
    SplitTanh(usize),
}

impl OutputActivation {
    fn for_column(self, col: usize) -> Activation {
        match self {
            Self::Identity => Activation::Identity,
            Self::Tanh => Activation::Tanh,
            Self::SplitTanh(n) if col < n => Activation::Tanh,
            Self::SplitTanh(_) => Activation::Identity,
        }
    }
}

/// Layer widths and activations of a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub hidden_activation: Activation,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    /// Two ReLU hidden layers of [`HIDDEN_UNITS`]; `movement` bounded outputs
    /// followed by `logits` unbounded ones.
    pub fn actor(input: usize, movement: usize, logits: usize) -> Self {
        Self {
            input,
            hidden: vec![HIDDEN_UNITS; 2],
            output: movement + logits,
            hidden_activation: Activation::Relu,
            output_activation: if logits == 0 {
                OutputActivation::Tanh
            } else {
                OutputActivation::SplitTanh(movement)
            },
        }
    }

    /// Two ReLU hidden layers of [`HIDDEN_UNITS`] and one linear output.
    pub fn critic(input: usize) -> Self {
        Self {
            input,
            hidden: vec![HIDDEN_UNITS; 2],
            output: 1,
            hidden_activation: Activation::Relu,
            output_activation: OutputActivation::Identity,
        }
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input];
        w.extend(&self.hidden);
        w.push(self.output);
        w
    }
}

/// One affine map; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    pub fn weight(&self, out: usize, inp: usize) -> T {
        self.weights[out * self.inputs + inp]
    }

    fn same_shape(&self, other: &Layer<T>) -> bool {
        self.inputs == other.inputs && self.outputs == other.outputs
    }
}

/// Feed-forward network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Layer<T>>,
    hidden_activation: Activation,
    output_activation: OutputActivation,
}

/// Parameters of one actor or critic.
pub type MlpParams<T> = Mlp<T>;

/// Intermediate values of a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// Input to each layer; entry 0 is the network input.
    pub inputs: Vec<Matrix<T>>,
    /// Pre-activation of each layer.
    pub pre: Vec<Matrix<T>>,
    pub output: Matrix<T>,
}

/// Gradients shaped like the network they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// Uniform fan-in initialization: every weight and bias of a layer with
    /// `n` inputs is drawn from `U(-1/sqrt(n), 1/sqrt(n))`.
    pub fn new<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = T::lit(rng.random_range(-bound..bound));
            }
        }
        Ok(net)
    }

    pub fn zeros(spec: &MlpSpec) -> Result<Self> {
        let widths = spec.widths();
        if widths.contains(&0) {
            return Err(NnError::Shape(format!("zero-width layer in {widths:?}")));
        }
        if let OutputActivation::SplitTanh(n) = spec.output_activation {
            if n > spec.output {
                return Err(NnError::Shape(format!("{n} squashed outputs of {}", spec.output)));
            }
        }
        let layers = widths.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Ok(Self {
            layers,
            hidden_activation: spec.hidden_activation,
            output_activation: spec.output_activation,
        })
    }

    /// Builds a network from explicit layers, checking that shapes chain.
    pub fn from_layers(
        layers: Vec<Layer<T>>,
        hidden_activation: Activation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(NnError::Shape("network without layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(NnError::Shape(format!(
                    "layer {i}: {} weights and {} biases for {}x{}",
                    l.weights.len(),
                    l.bias.len(),
                    l.outputs,
                    l.inputs
                )));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(NnError::Shape(format!(
                    "layer {i} emits {} values, layer {} takes {}",
                    pair[0].outputs,
                    i + 1,
                    pair[1].inputs
                )));
            }
        }
        Ok(Self {
            layers,
            hidden_activation,
            output_activation,
        })
    }

    pub fn spec(&self) -> MlpSpec {
        MlpSpec {
            input: self.input_dim(),
            hidden: self.layers[..self.layers.len() - 1].iter().map(|l| l.outputs).collect(),
            output: self.output_dim(),
            hidden_activation: self.hidden_activation,
            output_activation: self.output_activation,
        }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Every parameter, layer by layer, weights before biases.
    pub fn params(&self) -> impl Iterator<Item = &T> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    pub fn same_shape(&self, other: &Mlp<T>) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| a.same_shape(b))
    }

    pub(crate) fn activation(&self, layer: usize, col: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output_activation.for_column(col)
        } else {
            self.hidden_activation
        }
    }

    /// Output for a single input vector.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
        Ok(self.forward_batch(&x)?.output.into_vec())
    }

    /// Batched forward pass keeping everything the backward pass needs.
    pub fn forward_batch(&self, input: &Matrix<T>) -> Result<ForwardCache<T>> {
        if input.cols() != self.input_dim() {
            return Err(NnError::Shape(format!(
                "input of width {} for a network taking {}",
                input.cols(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = affine(layer, &x);
            let y = self.activate(l, &z);
            inputs.push(x);
            pre.push(z);
            x = y;
        }
        Ok(ForwardCache { inputs, pre, output: x })
    }

    /// Continues a forward pass from the pre-activations of layer `layer`.
    pub(crate) fn forward_from(&self, layer: usize, pre: Matrix<T>) -> (Matrix<T>, Vec<Matrix<T>>) {
        let mut pres = Vec::with_capacity(self.layers.len() - layer);
        let mut y = self.activate(layer, &pre);
        pres.push(pre);
        for l in layer + 1..self.layers.len() {
            let z = affine(&self.layers[l], &y);
            y = self.activate(l, &z);
            pres.push(z);
        }
        (y, pres)
    }

    fn activate(&self, layer: usize, z: &Matrix<T>) -> Matrix<T> {
        let mut y = z.clone();
        for r in 0..y.rows() {
            for (c, v) in y.row_mut(r).iter_mut().enumerate() {
                *v = self.activation(layer, c).apply(*v);
            }
        }
        y
    }

    /// Reverse-mode gradients of `sum_b <upstream_b, output_b>` with respect to
    /// every parameter and, when `want_input`, the batch input.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache<T>,
        upstream: &Matrix<T>,
        want_input: bool,
    ) -> Result<(GradientSet<T>, Option<Matrix<T>>)> {
        let out = &cache.output;
        if upstream.rows() != out.rows() || upstream.cols() != out.cols() {
            return Err(NnError::Shape(format!(
                "upstream gradient {}x{} for output {}x{}",
                upstream.rows(),
                upstream.cols(),
                out.rows(),
                out.cols()
            )));
        }
        let batch = out.rows();
        let mut grads = GradientSet::zeros_like(self);
        let mut delta = upstream.clone();
        let mut input_grad = None;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let z = &cache.pre[l];
            let y = if l + 1 == self.layers.len() {
                &cache.output
            } else {
                &cache.inputs[l + 1]
            };
            for r in 0..batch {
                let (zr, yr) = (z.row(r), y.row(r));
                for (c, d) in delta.row_mut(r).iter_mut().enumerate() {
                    *d *= self.activation(l, c).derivative(zr[c], yr[c]);
                }
            }
            let x = &cache.inputs[l];
            let g = &mut grads.layers[l];
            // dW = delta^T x
            T::gemm(
                layer.outputs,
                batch,
                layer.inputs,
                T::one(),
                delta.data(),
                (1, layer.outputs as isize),
                x.data(),
                (layer.inputs as isize, 1),
                T::zero(),
                &mut g.weights,
                (layer.inputs as isize, 1),
            );
            for r in 0..batch {
                for (b, &d) in g.bias.iter_mut().zip(delta.row(r)) {
                    *b += d;
                }
            }
            if l > 0 || want_input {
                // dX = delta W
                let mut dx = Matrix::zeros(batch, layer.inputs);
                T::gemm(
                    batch,
                    layer.outputs,
                    layer.inputs,
                    T::one(),
                    delta.data(),
                    (layer.outputs as isize, 1),
                    &layer.weights,
                    (layer.inputs as isize, 1),
                    T::zero(),
                    dx.data_mut(),
                    (layer.inputs as isize, 1),
                );
                if l == 0 {
                    input_grad = Some(dx);
                } else {
                    delta = dx;
                }
            }
        }
        Ok((grads, input_grad))
    }

    /// Single-sample backward pass; see [`Mlp::backward_batch`].
    pub fn backward(
        &self,
        input: &[T],
        upstream: &[T],
        want_input: bool,
    ) -> Result<(GradientSet<T>, Option<Vec<T>>)> {
        let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
        let cache = self.forward_batch(&x)?;
        let up = Matrix::from_vec(1, upstream.len(), upstream.to_vec())?;
        let (g, dx) = self.backward_batch(&cache, &up, want_input)?;
        Ok((g, dx.map(Matrix::into_vec)))
    }
}

/// `x W^T + b` for a batch of row vectors.
fn affine<T: Scalar>(layer: &Layer<T>, x: &Matrix<T>) -> Matrix<T> {
    let mut z = Matrix::zeros(x.rows(), layer.outputs);
    for r in 0..x.rows() {
        z.row_mut(r).copy_from_slice(&layer.bias);
    }
    T::gemm(
        x.rows(),
        layer.inputs,
        layer.outputs,
        T::one(),
        x.data(),
        (layer.inputs as isize, 1),
        &layer.weights,
        (1, layer.inputs as isize),
        T::one(),
        z.data_mut(),
        (layer.outputs as isize, 1),
    );
    z
}

impl<T: Scalar> GradientSet<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            layers: net.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &T> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn matches(&self, net: &Mlp<T>) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(a, b)| a.same_shape(b))
            && self.layers.iter().all(|l| {
                l.weights.len() == l.inputs * l.outputs && l.bias.len() == l.outputs
            })
    }

    pub fn norm(&self) -> T {
        self.values().map(|&g| g * g).sum::<T>().sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        for g in self.values_mut() {
            *g *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|g| g.is_finite())
    }
}
