//! The dynamic/static discriminator: a small fully connected network with
//! rectifier hidden layers and a two-way softmax output.
//!
//! Inputs are `(e_I, e_D, e_Re)` after zero-mean normalization with
//! statistics stored in the model. Output index 0 is static, 1 is dynamic.

mod io;
mod train;

pub use io::{read_model, write_model};
pub use train::{train, Adam, EpochStats, TrainConfig, TrainOutcome};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::features::FeatureVector;
use crate::metrics::{DYNAMIC, STATIC};
use crate::{Error, Result};

/// Default layer widths: 3 inputs, two hidden layers of 10, 2 outputs.
pub const DEFAULT_LAYER_SIZES: [usize; 4] = [3, 10, 10, 2];

/// Probabilities are clamped to `[BCE_EPSILON, 1 - BCE_EPSILON]` in the loss.
pub const BCE_EPSILON: f64 = 1e-12;

/// Zero-mean, unit-variance feature scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            mean: [0.0; 3],
            std: [1.0; 3],
        }
    }
}

impl Normalization {
    /// Population mean and standard deviation per feature. A constant
    /// feature cannot be scaled and is rejected.
    pub fn fit(data: &[FeatureVector]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InsufficientData(
                "cannot fit normalization on an empty set".into(),
            ));
        }
        let n = data.len() as f64;
        let mut mean = [0.0; 3];
        for v in data {
            for (m, x) in mean.iter_mut().zip(v.to_array()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; 3];
        for v in data {
            for j in 0..3 {
                let d = v.to_array()[j] - mean[j];
                var[j] += d * d;
            }
        }
        let std = var.map(|s| (s / n).sqrt());
        if let Some(j) = (0..3).find(|&j| !(std[j] > 0.0 && std[j].is_finite())) {
            return Err(Error::InsufficientData(format!(
                "feature {j} is constant (or non-finite) in the training data"
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, v: &FeatureVector) -> [f64; 3] {
        normalize(v, &self.mean, &self.std)
    }
}

pub fn normalize(v: &FeatureVector, mean: &[f64; 3], std: &[f64; 3]) -> [f64; 3] {
    let a = v.to_array();
    [
        (a[0] - mean[0]) / std[0],
        (a[1] - mean[1]) / std[1],
        (a[2] - mean[2]) / std[2],
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out x in`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: DMatrix::zeros(outputs, inputs),
            bias: DVector::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// `[static, dynamic]`, summing to 1.
    pub probs: [f64; 2],
    pub label: u8,
}

impl Prediction {
    fn from_logits(z0: f64, z1: f64) -> Self {
        let m = z0.max(z1);
        let (e0, e1) = ((z0 - m).exp(), (z1 - m).exp());
        let s = e0 + e1;
        let probs = [e0 / s, e1 / s];
        // Ties go to static.
        let label = if probs[1] > probs[0] { DYNAMIC } else { STATIC };
        Self { probs, label }
    }

    pub fn p_dynamic(&self) -> f64 {
        self.probs[1]
    }
}

/// Binary cross-entropy on the dynamic-class probability.
pub fn bce_loss(y_true: u8, p_dynamic: f64) -> f64 {
    let p = p_dynamic.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    if y_true == DYNAMIC {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<DenseLayer>,
    pub norm: Normalization,
}

/// Gradient with the same layout as [`MlpModel::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weights.norm_squared() + l.bias.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Flattened in [`MlpModel::params`] order.
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers(layers: &[DenseLayer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(l.weights.as_slice());
        out.extend_from_slice(l.bias.as_slice());
    }
    out
}

impl MlpModel {
    /// Zero weights and biases with identity normalization.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes[0] != 3 || *sizes.last().unwrap() != 2 || sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layer sizes must start at 3 inputs and end at 2 outputs, got {sizes:?}"
            )));
        }
        let layers = sizes
            .windows(2)
            .map(|w| DenseLayer::zeros(w[0], w[1]))
            .collect();
        Ok(Self {
            layers,
            norm: Normalization::default(),
        })
    }

    /// Uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(sizes)?;
        for layer in &mut model.layers {
            let limit = (6.0 / (layer.inputs() + layer.outputs()) as f64).sqrt();
            // Row-major draw order so the stream does not depend on storage layout.
            for r in 0..layer.outputs() {
                for c in 0..layer.inputs() {
                    layer.weights[(r, c)] = rng.random_range(-limit..limit);
                }
            }
        }
        Ok(model)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs()];
        sizes.extend(self.layers.iter().map(|l| l.outputs()));
        sizes
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
            && self.norm.mean.iter().all(|m| m.is_finite())
            && self.norm.std.iter().all(|s| *s > 0.0 && s.is_finite())
    }

    /// All parameters, layer by layer: weights (column-major) then bias.
    pub fn params(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter count mismatch");
        let mut offset = 0;
        for l in &mut self.layers {
            let n = l.weights.len();
            l.weights.as_mut_slice().copy_from_slice(&params[offset..offset + n]);
            offset += n;
            let n = l.bias.len();
            l.bias.as_mut_slice().copy_from_slice(&params[offset..offset + n]);
            offset += n;
        }
    }

    fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    /// Pre-activations of every layer for one input.
    fn activations(&self, x: &[f64; 3]) -> Vec<DVector<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = DVector::from_column_slice(x);
        for (i, l) in self.layers.iter().enumerate() {
            let z = &l.weights * &a + &l.bias;
            if i + 1 < self.layers.len() {
                a = z.map(relu);
            }
            pre.push(z);
        }
        pre
    }

    /// Forward pass on an already-normalized input.
    pub fn forward(&self, x: &[f64; 3]) -> Prediction {
        let pre = self.activations(x);
        let z = pre.last().expect("model has at least one layer");
        Prediction::from_logits(z[0], z[1])
    }

    /// Mean BCE over a batch of normalized inputs.
    pub fn loss(&self, xs: &[[f64; 3]], ys: &[u8]) -> f64 {
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| bce_loss(y, self.forward(x).p_dynamic()))
            .sum();
        total / xs.len() as f64
    }

    /// Mean batch BCE and its exact gradient with respect to every weight
    /// and bias.
    pub fn backward(&self, xs: &[[f64; 3]], ys: &[u8]) -> (f64, Gradients) {
        assert_eq!(xs.len(), ys.len());
        assert!(!xs.is_empty(), "empty batch");
        let mut grads = self.zero_gradients();
        let mut loss = 0.0;
        let scale = 1.0 / xs.len() as f64;
        for (x, &y) in xs.iter().zip(ys) {
            let pre = self.activations(x);
            let out = pre.last().unwrap();
            let pred = Prediction::from_logits(out[0], out[1]);
            loss += bce_loss(y, pred.p_dynamic());

            // d(loss)/d(logits) for softmax followed by BCE on the dynamic output.
            let r = pred.p_dynamic() - f64::from(y);
            let mut delta = DVector::from_column_slice(&[-r * scale, r * scale]);
            for i in (0..self.layers.len()).rev() {
                let input = if i == 0 {
                    DVector::from_column_slice(x)
                } else {
                    pre[i - 1].map(relu)
                };
                let g = &mut grads.layers[i];
                g.weights.ger(1.0, &delta, &input, 1.0);
                g.bias += &delta;
                if i > 0 {
                    let back = self.layers[i].weights.transpose() * &delta;
                    delta = back.zip_map(&pre[i - 1], |d, z| if z > 0.0 { d } else { 0.0 });
                }
            }
        }
        (loss * scale, grads)
    }

    /// Normalizes with the stored statistics and classifies each vector.
    pub fn predict_batch(&self, xs: &[FeatureVector]) -> Vec<Prediction> {
        xs.iter().map(|v| self.predict(v)).collect()
    }

    pub fn predict(&self, v: &FeatureVector) -> Prediction {
        self.forward(&self.norm.apply(v))
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}
