//! Dense multilayer perceptrons with hand-written backpropagation.
//!
//! Weights are stored row-major with `rows = out_dim`, `cols = in_dim`, so
//! layer `k` maps `dims[k] -> dims[k + 1]`. Every network in the crate (MoE
//! experts, the gate, RND and ICM predictors) is built from [`DenseNet`].

mod adam;
pub mod checkpoint;

pub use adam::{AdamConfig, AdamState};

use crate::error::{check_len, Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative given the pre-activation `z`.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    UniformGlorot,
    Orthogonal,
}

impl InitScheme {
    pub fn tag(self) -> &'static str {
        match self {
            InitScheme::UniformGlorot => "glorot",
            InitScheme::Orthogonal => "orthogonal",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "glorot" => Some(InitScheme::UniformGlorot),
            "orthogonal" => Some(InitScheme::Orthogonal),
            _ => None,
        }
    }
}

/// One affine map followed by an elementwise activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major, `out_dim x in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Dense>,
    init: InitScheme,
}

/// Intermediate values kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input fed to each layer; `inputs[0]` is the network input.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Parameter gradients with the same layout as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|x| *x *= k);
            l.bias.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|&g| g == 0.0))
    }
}

impl DenseNet {
    /// Randomly initialized network. `activations[k]` follows layer `k`, so
    /// `activations.len() == dims.len() - 1`. Biases start at zero.
    pub fn new(dims: &[usize], activations: &[Activation], init: InitScheme, rng: &mut SeededRng) -> Result<Self> {
        validate_dims(dims, activations)?;
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| {
                let (in_dim, out_dim) = (w[0], w[1]);
                let weights = match init {
                    InitScheme::UniformGlorot => {
                        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
                        (0..in_dim * out_dim)
                            .map(|_| rng.uniform_range(-limit, limit))
                            .collect()
                    }
                    InitScheme::Orthogonal => orthogonal(out_dim, in_dim, rng),
                };
                Dense {
                    in_dim,
                    out_dim,
                    weights,
                    bias: vec![0.0; out_dim],
                    activation: act,
                }
            })
            .collect();
        Ok(Self { layers, init })
    }

    pub fn from_layers(layers: Vec<Dense>, init: InitScheme) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("layers", "network needs at least one layer"));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(Error::config(format!("layers[{k}]"), "zero width"));
            }
            check_len("layer weights", l.in_dim * l.out_dim, l.weights.len())?;
            check_len("layer bias", l.out_dim, l.bias.len())?;
        }
        for pair in layers.windows(2) {
            check_len("layer chaining", pair[0].out_dim, pair[1].in_dim)?;
        }
        Ok(Self { layers, init })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn init_scheme(&self) -> InitScheme {
        self.init
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].in_dim)
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", self.input_dim(), x.len())?;
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer
                .pre_activation(&h)
                .into_iter()
                .map(|z| layer.activation.apply(z))
                .collect();
        }
        Ok(h)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        check_len("network input", self.input_dim(), x.len())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for layer in &self.layers {
            let z = layer.pre_activation(&h);
            let next = z.iter().map(|&v| layer.activation.apply(v)).collect();
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        Ok(Trace { inputs, pre, output: h })
    }

    /// Parameter gradients of a scalar loss whose gradient with respect to the
    /// network output is `upstream`.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Gradients> {
        let trace = self.forward_trace(x)?;
        Ok(self.backward_trace(&trace, upstream)?.0)
    }

    /// Backpropagates through a stored trace, returning parameter gradients
    /// and the gradient with respect to the network input.
    pub fn backward_trace(&self, trace: &Trace, upstream: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        check_len("upstream gradient", self.output_dim(), upstream.len())?;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta_out = upstream.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let delta: Vec<f64> = delta_out
                .iter()
                .zip(&trace.pre[k])
                .map(|(g, &z)| g * layer.activation.derivative(z))
                .collect();
            let input = &trace.inputs[k];
            let mut gw = vec![0.0; layer.weights.len()];
            for (row, &d) in gw.chunks_exact_mut(layer.in_dim).zip(&delta) {
                for (g, &xi) in row.iter_mut().zip(input) {
                    *g = d * xi;
                }
            }
            let mut gin = vec![0.0; layer.in_dim];
            for (row, &d) in layer.weights.chunks_exact(layer.in_dim).zip(&delta) {
                for (g, &w) in gin.iter_mut().zip(row) {
                    *g += w * d;
                }
            }
            grads.push(LayerGrad {
                weights: gw,
                bias: delta,
            });
            delta_out = gin;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, delta_out))
    }
}

fn validate_dims(dims: &[usize], activations: &[Activation]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::config("layer_dims", "need at least input and output widths"));
    }
    if let Some(k) = dims.iter().position(|&d| d == 0) {
        return Err(Error::config(format!("layer_dims[{k}]"), "widths must be positive"));
    }
    check_len("activation list", dims.len() - 1, activations.len())
}

/// Orthogonal `rows x cols` matrix: orthonormal rows when `rows <= cols`,
/// orthonormal columns otherwise. Built from a Gaussian draw by modified
/// Gram-Schmidt, applied twice for numerical orthogonality.
pub fn orthogonal(rows: usize, cols: usize, rng: &mut SeededRng) -> Vec<f64> {
    let (n_vec, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut vecs: Vec<Vec<f64>> = (0..n_vec).map(|_| (0..len).map(|_| rng.normal()).collect()).collect();
    for _ in 0..2 {
        for i in 0..n_vec {
            for j in 0..i {
                let dot: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                let (head, tail) = vecs.split_at_mut(i);
                tail[0].iter_mut().zip(&head[j]).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = vecs[i].iter().map(|a| a * a).sum::<f64>().sqrt();
            vecs[i].iter_mut().for_each(|a| *a /= norm);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = if rows <= cols { vecs[r][c] } else { vecs[c][r] };
        }
    }
    out
}

/// Mean over dimensions of squared differences.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len("mse operands", a.len(), b.len())?;
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Gradient of [`mse`] with respect to `pred`.
pub fn mse_grad(pred: &[f64], target: &[f64]) -> Vec<f64> {
    let n = pred.len() as f64;
    pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
