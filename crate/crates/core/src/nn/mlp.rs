use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, NnError};
use crate::scalar::Scalar;

/// Per-layer activation tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
    Tanh,
    Softmax,
}

impl Activation {
    fn apply<T: Scalar>(self, row: &mut [T]) {
        match self {
            Activation::Relu => row.iter_mut().for_each(|x| *x = x.max(T::zero())),
            Activation::Linear => {}
            Activation::Tanh => row.iter_mut().for_each(|x| *x = x.tanh()),
            Activation::Softmax => softmax_in_place(row),
        }
    }

    /// Maps the gradient w.r.t. the activation output to the gradient w.r.t.
    /// the pre-activation, in place.
    fn backprop<T: Scalar>(self, pre: &[T], post: &[T], grad: &mut [T]) {
        match self {
            Activation::Relu => {
                for (g, &z) in grad.iter_mut().zip(pre) {
                    if z <= T::zero() {
                        *g = T::zero();
                    }
                }
            }
            Activation::Linear => {}
            Activation::Tanh => {
                for (g, &y) in grad.iter_mut().zip(post) {
                    *g *= T::one() - y * y;
                }
            }
            Activation::Softmax => {
                let dot: T = grad.iter().zip(post).map(|(&g, &y)| g * y).sum();
                for (g, &y) in grad.iter_mut().zip(post) {
                    *g = y * (*g - dot);
                }
            }
        }
    }
}

pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    row.iter_mut().for_each(|x| *x /= sum);
}

/// Fully connected layer with row-major `outputs x inputs` weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> Dense<T> {
    fn forward_row(&self, x: &[T], pre: &mut [T]) {
        for (o, z) in pre.iter_mut().enumerate() {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            *z = self.bias[o] + w.iter().zip(x).map(|(&a, &b)| a * b).sum::<T>();
        }
    }
}

/// Dense feed-forward network.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
    /// Bumped on every parameter mutation; forward caches remember it.
    #[serde(skip)]
    version: u64,
}

impl<T: PartialEq> PartialEq for Mlp<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Intermediates of one forward pass, consumed by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    version: u64,
    input: Matrix<T>,
    pre: Vec<Matrix<T>>,
    post: Vec<Matrix<T>>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn output(&self) -> &Matrix<T> {
        self.post.last().expect("network has at least one layer")
    }
}

/// Parameter gradients, shaped like the network's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(mlp: &Mlp<T>) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| (vec![T::zero(); l.weights.len()], vec![T::zero(); l.bias.len()]))
                .collect(),
        }
    }

    pub fn scale(&mut self, c: T) {
        for (w, b) in &mut self.layers {
            w.iter_mut().chain(b.iter_mut()).for_each(|x| *x *= c);
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.iter_mut().zip(ow).for_each(|(x, &y)| *x += y);
            b.iter_mut().zip(ob).for_each(|(x, &y)| *x += y);
        }
    }

    pub fn flat(&self) -> Vec<T> {
        self.layers.iter().flat_map(|(w, b)| w.iter().chain(b.iter()).copied()).collect()
    }

    pub fn max_abs(&self) -> T {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
            .fold(T::zero(), |m, &x| m.max(x.abs()))
    }
}

impl<T: Scalar> Mlp<T> {
    /// Builds a network with ReLU hidden layers and the given output
    /// activation. Hidden layers use He-uniform initialisation, the output
    /// layer Xavier-uniform; biases start at zero.
    pub fn init(layer_sizes: &[usize], output: Activation, seed: u64) -> Result<Self, NnError> {
        if layer_sizes.len() < 3 {
            return Err(NnError::Architecture("need an input, at least one hidden and an output layer".into()));
        }
        if layer_sizes.contains(&0) {
            return Err(NnError::Architecture(format!("zero-width layer in {layer_sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = layer_sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (layer_sizes[i], layer_sizes[i + 1]);
                let is_output = i + 1 == n;
                let limit = if is_output {
                    (6.0 / (fan_in + fan_out) as f64).sqrt()
                } else {
                    (6.0 / fan_in as f64).sqrt()
                };
                let weights = (0..fan_in * fan_out).map(|_| T::of(rng.random_range(-limit..limit))).collect();
                Dense {
                    inputs: fan_in,
                    outputs: fan_out,
                    weights,
                    bias: vec![T::zero(); fan_out],
                    activation: if is_output { output } else { Activation::Relu },
                }
            })
            .collect();
        Ok(Self { layers, version: 0 })
    }

    /// Assembles a network from explicit layers, checking that shapes chain.
    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Architecture("no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.inputs == 0 || l.outputs == 0 {
                return Err(NnError::Architecture(format!("layer {i} has zero width")));
            }
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(NnError::Architecture(format!("layer {i} parameter shape mismatch")));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return Err(NnError::Architecture(format!("layer {i} does not chain")));
            }
        }
        Ok(Self { layers, version: 0 })
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    /// Mutable access to the layers; invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        self.version += 1;
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs).chain(self.layers.iter().map(|l| l.outputs)).collect()
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|x| x.is_finite()))
    }

    fn check_input(&self, input: &Matrix<T>) -> Result<(), NnError> {
        if input.cols() != self.input_size() {
            return Err(NnError::Shape { expected: self.input_size(), got: input.cols() });
        }
        Ok(())
    }

    pub fn forward(&self, input: &Matrix<T>) -> Result<Matrix<T>, NnError> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            let mut out = Matrix::zeros(x.rows(), layer.outputs);
            for r in 0..x.rows() {
                let row = out.row_mut(r);
                layer.forward_row(x.row(r), row);
                layer.activation.apply(row);
            }
            x = out;
        }
        Ok(x)
    }

    /// Single-sample convenience wrapper around [`Mlp::forward`].
    pub fn forward_one(&self, input: &[T]) -> Result<Vec<T>, NnError> {
        Ok(self.forward(&Matrix::row_vector(input))?.into_vec())
    }

    pub fn forward_cached(&self, input: &Matrix<T>) -> Result<ForwardCache<T>, NnError> {
        self.check_input(input)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Matrix<T>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = post.last().unwrap_or(input);
            let mut z = Matrix::zeros(x.rows(), layer.outputs);
            for r in 0..x.rows() {
                layer.forward_row(x.row(r), z.row_mut(r));
            }
            let mut y = z.clone();
            for r in 0..y.rows() {
                layer.activation.apply(y.row_mut(r));
            }
            pre.push(z);
            post.push(y);
        }
        Ok(ForwardCache { version: self.version, input: input.clone(), pre, post })
    }

    /// Backpropagates `grad_output` (dL/d output, one row per sample) and
    /// returns parameter gradients summed over the batch together with the
    /// gradient w.r.t. the network input.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        grad_output: &Matrix<T>,
    ) -> Result<(Gradients<T>, Matrix<T>), NnError> {
        if cache.version != self.version || cache.pre.len() != self.layers.len() {
            return Err(NnError::StaleCache);
        }
        let out = cache.output();
        if grad_output.rows() != out.rows() || grad_output.cols() != out.cols() {
            return Err(NnError::Shape { expected: out.rows() * out.cols(), got: grad_output.rows() * grad_output.cols() });
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = grad_output.clone();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let x = if li == 0 { &cache.input } else { &cache.post[li - 1] };
            let (z, y) = (&cache.pre[li], &cache.post[li]);
            let mut dx = Matrix::zeros(x.rows(), layer.inputs);
            let (gw, gb) = &mut grads.layers[li];
            for r in 0..x.rows() {
                let d = delta.row_mut(r);
                layer.activation.backprop(z.row(r), y.row(r), d);
                let xr = x.row(r);
                let dxr = dx.row_mut(r);
                for (o, &dz) in d.iter().enumerate() {
                    if dz == T::zero() {
                        continue;
                    }
                    gb[o] += dz;
                    let w = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    let gwo = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for i in 0..layer.inputs {
                        gwo[i] += dz * xr[i];
                        dxr[i] += dz * w[i];
                    }
                }
            }
            delta = dx;
        }
        Ok((grads, delta))
    }

    /// Polyak averaging: `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update(&mut self, online: &Self, tau: T) {
        self.version += 1;
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            for (a, &b) in t.weights.iter_mut().zip(&o.weights).chain(t.bias.iter_mut().zip(&o.bias)) {
                *a = tau * b + (T::one() - tau) * *a;
            }
        }
    }
}
