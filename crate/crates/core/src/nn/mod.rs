//! Minimal differentiable building blocks: dense layers, activations, binary
//! cross-entropy and Adam, all with analytic gradients.
//!
//! Batches are row-major: one sample per row.

mod adam;
mod loss;

pub use adam::{adam_step, AdamState};
pub use loss::{bce_loss, mean_log_complement, Loss, PROB_CLAMP};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::rng::Rng;
use crate::{Error, Result};

/// Negative-side slope of [`Activation::LeakyRelu`].
pub const LEAKY_RELU_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Sigmoid,
    Linear,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_RELU_SLOPE * z
                }
            }
            Activation::Sigmoid => sigmoid(z),
            Activation::Linear => z,
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative at pre-activation `z`, given the already computed output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer computing `activation(x · Wᵀ + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    weights: Array2<f64>,
    biases: Array1<f64>,
    activation: Activation,
}

impl DenseLayer {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new(inputs: usize, outputs: usize, activation: Activation, rng: &mut Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = Array2::from_shape_fn((outputs, inputs), |_| rng.random_range(-limit..=limit));
        Self {
            weights,
            biases: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn from_parts(weights: Array2<f64>, biases: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() != biases.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weight rows but {} biases",
                weights.nrows(),
                biases.len()
            )));
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("layer parameters must be finite".into()));
        }
        Ok(Self {
            weights,
            biases,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn biases(&self) -> &Array1<f64> {
        &self.biases
    }

    fn pre_activation(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights.t()) + &self.biases
    }
}

/// Gradient of a scalar loss with respect to one layer's parameters.
#[derive(Clone, Debug)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Output of [`Mlp::backward`]: per-layer parameter gradients plus the gradient
/// with respect to the network input (needed to chain a generator through a
/// discriminator).
#[derive(Clone, Debug)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
    pub input: Array2<f64>,
}

impl Gradients {
    /// Adds `other`'s parameter gradients into `self` (input gradients are left untouched).
    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::ShapeMismatch("gradients of different networks".into()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if a.weights.dim() != b.weights.dim() || a.biases.len() != b.biases.len() {
                return Err(Error::ShapeMismatch("gradients of different networks".into()));
            }
            a.weights += &b.weights;
            a.biases += &b.biases;
        }
        Ok(())
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|g| {
                [
                    g.weights.as_slice().expect("standard layout"),
                    g.biases.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }
}

/// Activations recorded by [`Mlp::forward`] for a later [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    revision: u64,
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

/// A sequential stack of dense layers.
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    // Bumped on every parameter update so backward can reject stale caches.
    revision: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Mlp {
    /// Builds a network with layer widths `dims` (`dims.len() - 1` layers).
    pub fn new(dims: &[usize], activations: &[Activation], rng: &mut Rng) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} widths need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| DenseLayer::new(w[0], w[1], act, rng))
            .collect();
        Ok(Self { layers, revision: 0 })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("an MLP needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        Ok(Self { layers, revision: 0 })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Inference without recording a cache.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut a = x.to_owned();
        for layer in &self.layers {
            let act = layer.activation;
            a = layer.pre_activation(a.view()).mapv_into(|z| act.apply(z));
        }
        Ok(a)
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for layer in &self.layers {
            let z = layer.pre_activation(a.view());
            let act = layer.activation;
            let next = z.mapv(|v| act.apply(v));
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok(ForwardCache {
            revision: self.revision,
            inputs,
            pre,
            output: a,
        })
    }

    /// Backpropagates `grad_output` (dLoss/dOutput, same shape as the output batch).
    pub fn backward(&self, cache: &ForwardCache, grad_output: ArrayView2<f64>) -> Result<Gradients> {
        if cache.revision != self.revision || cache.pre.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        if grad_output.dim() != cache.output.dim() {
            return Err(Error::ShapeMismatch(format!(
                "output gradient {:?} vs output {:?}",
                grad_output.dim(),
                cache.output.dim()
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut upstream = grad_output.to_owned();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre[idx];
            let a = if idx + 1 == self.layers.len() {
                &cache.output
            } else {
                &cache.inputs[idx + 1]
            };
            let act = layer.activation;
            let mut delta = upstream;
            ndarray::Zip::from(&mut delta)
                .and(z)
                .and(a)
                .for_each(|d, &z, &a| *d *= act.derivative(z, a));
            let weights = delta.t().dot(&cache.inputs[idx]).as_standard_layout().into_owned();
            let biases = delta.sum_axis(Axis(0));
            upstream = delta.dot(&layer.weights);
            layers.push(LayerGradient { weights, biases });
        }
        layers.reverse();
        Ok(Gradients {
            layers,
            input: upstream,
        })
    }

    /// Flat views of all parameters, ordered `[W0, b0, W1, b1, ...]`.
    pub fn parameters(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weights.as_slice().expect("standard layout"),
                    l.biases.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    /// Mutable flat views, same order as [`Mlp::parameters`]. Invalidates outstanding caches.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.revision += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weights.as_slice_mut().expect("standard layout"),
                    l.biases.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn apply_adam(&mut self, grads: &Gradients, state: &mut AdamState) -> Result<()> {
        let g = grads.slices();
        let mut params = self.parameters_mut();
        adam_step(&mut params, &g, state)
    }

    pub fn to_document(&self) -> MlpDocument {
        MlpDocument {
            format: MLP_FORMAT.to_string(),
            version: MLP_VERSION,
            layers: self
                .layers
                .iter()
                .map(|l| LayerDocument {
                    inputs: l.inputs(),
                    outputs: l.outputs(),
                    activation: l.activation,
                    weights: l.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
                    biases: l.biases.to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: MlpDocument) -> Result<Self> {
        if doc.format != MLP_FORMAT || doc.version != MLP_VERSION {
            return Err(Error::Format(format!(
                "expected {MLP_FORMAT} v{MLP_VERSION}, found {} v{}",
                doc.format, doc.version
            )));
        }
        let layers = doc
            .layers
            .into_iter()
            .map(|l| {
                if l.weights.len() != l.outputs || l.weights.iter().any(|r| r.len() != l.inputs) {
                    return Err(Error::ShapeMismatch(format!(
                        "declared {}x{} layer has mismatched weight rows",
                        l.outputs, l.inputs
                    )));
                }
                let flat: Vec<f64> = l.weights.into_iter().flatten().collect();
                let weights = Array2::from_shape_vec((l.outputs, l.inputs), flat)
                    .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
                DenseLayer::from_parts(weights, Array1::from(l.biases), l.activation)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub const MLP_FORMAT: &str = "pgsc-mlp";
pub const MLP_VERSION: u32 = 1;

/// Portable text form of an [`Mlp`]. Floats are written with shortest
/// round-trip precision, so save/load is lossless.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MlpDocument {
    pub format: String,
    pub version: u32,
    pub layers: Vec<LayerDocument>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerDocument {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;

    fn single(weights: Array2<f64>, biases: Array1<f64>, act: Activation) -> Mlp {
        Mlp::from_layers(vec![DenseLayer::from_parts(weights, biases, act).unwrap()]).unwrap()
    }

    #[test]
    fn identity_linear_layer_passes_input_through() {
        let net = single(Array2::eye(2), Array1::zeros(2), Activation::Linear);
        let x = array![[1.5, -2.0], [0.0, 3.0]];
        assert_eq!(net.predict(x.view()).unwrap(), x);
    }

    #[test]
    fn relu_and_leaky_relu() {
        let x = array![[-1.0, 2.0]];
        let relu = single(Array2::eye(2), Array1::zeros(2), Activation::Relu);
        assert_eq!(relu.predict(x.view()).unwrap(), array![[0.0, 2.0]]);
        let leaky = single(Array2::eye(2), Array1::zeros(2), Activation::LeakyRelu);
        assert_eq!(leaky.predict(x.view()).unwrap(), array![[-0.2, 2.0]]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = single(Array2::eye(2), Array1::zeros(2), Activation::Linear);
        assert!(matches!(
            net.forward(array![[1.0, 2.0, 3.0]].view()),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn layers_must_chain() {
        let mut rng = seeded(1);
        let a = DenseLayer::new(3, 4, Activation::Relu, &mut rng);
        let b = DenseLayer::new(5, 1, Activation::Sigmoid, &mut rng);
        assert!(Mlp::from_layers(vec![a, b]).is_err());
    }

    #[test]
    fn glorot_limit_respected() {
        let mut rng = seeded(3);
        let layer = DenseLayer::new(10, 6, Activation::Tanh, &mut rng);
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(layer.weights().iter().all(|w| w.abs() <= limit));
        assert!(layer.biases().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradients() {
        let mut rng = seeded(5);
        let net = Mlp::new(&[3, 4, 2], &[Activation::Tanh, Activation::Sigmoid], &mut rng).unwrap();
        let x = array![[0.1, -0.3, 0.7], [1.0, 0.2, -0.4]];
        let cache = net.forward(x.view()).unwrap();
        let grads = net.backward(&cache, Array2::zeros((2, 2)).view()).unwrap();
        for g in grads.slices() {
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn linear_squared_error_gradient_matches_residual_formula() {
        // Loss = 1/2 * sum (W x + b - t)^2, so dW = r xᵀ and db = r with r the residual.
        let w = array![[1.0, 2.0], [-1.0, 0.5]];
        let b = array![0.5, -0.5];
        let net = single(w.clone(), b.clone(), Activation::Linear);
        let x = array![[2.0, -1.0]];
        let t = array![[1.0, 1.0]];
        let cache = net.forward(x.view()).unwrap();
        let residual = cache.output() - &t;
        // Hand computation: Wx + b = (0.5, -3.0), residual = (-0.5, -4.0).
        assert_eq!(residual, array![[-0.5, -4.0]]);
        let grads = net.backward(&cache, residual.view()).unwrap();
        assert_eq!(grads.layers[0].weights, array![[-1.0, 0.5], [-8.0, 4.0]]);
        assert_eq!(grads.layers[0].biases, array![-0.5, -4.0]);
        assert_eq!(grads.input, array![[3.5, -3.0]]);
    }

    #[test]
    fn backward_after_update_is_stale() {
        let mut rng = seeded(9);
        let mut net = Mlp::new(&[2, 2], &[Activation::Linear], &mut rng).unwrap();
        let x = array![[1.0, 1.0]];
        let cache = net.forward(x.view()).unwrap();
        let grads = net.backward(&cache, array![[1.0, 1.0]].view()).unwrap();
        let mut adam = AdamState::new(0.01);
        net.apply_adam(&grads, &mut adam).unwrap();
        assert!(matches!(
            net.backward(&cache, array![[1.0, 1.0]].view()),
            Err(Error::StaleCache)
        ));
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let mut rng = seeded(11);
        let net = Mlp::new(
            &[4, 8, 3],
            &[Activation::LeakyRelu, Activation::Tanh],
            &mut rng,
        )
        .unwrap();
        let back = Mlp::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn json_rejects_unknown_format() {
        let mut rng = seeded(11);
        let net = Mlp::new(&[2, 1], &[Activation::Sigmoid], &mut rng).unwrap();
        let mut doc = net.to_document();
        doc.version = 99;
        assert!(matches!(Mlp::from_document(doc), Err(Error::Format(_))));
    }
}
