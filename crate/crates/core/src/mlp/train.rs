use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{bce_loss, Gradients, MlpModel, Normalization, DEFAULT_LAYER_SIZES};
use crate::features::{FeatureVector, LabeledFeature};
use crate::metrics::DYNAMIC;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative decay applied at every milestone.
    pub lr_decay_gamma: f64,
    /// Epoch indices (0-based) at which the decay kicks in.
    pub lr_milestones: Vec<usize>,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub layer_sizes: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch_size: 8,
            learning_rate: 0.1,
            lr_decay_gamma: 0.1,
            lr_milestones: vec![75, 120],
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            layer_sizes: DEFAULT_LAYER_SIZES.to_vec(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad(format!(
                "epochs and batch size must be positive (epochs={}, batch_size={})",
                self.epochs, self.batch_size
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lr_decay_gamma > 0.0 && self.lr_decay_gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.lr_decay_gamma));
        }
        if self.lr_milestones.windows(2).any(|w| w[0] >= w[1])
            || self.lr_milestones.iter().any(|&m| m >= self.epochs)
        {
            return bad(format!(
                "milestones must be strictly increasing and below {} epochs, got {:?}",
                self.epochs, self.lr_milestones
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        Ok(())
    }

    /// Step schedule: `lr * gamma^(number of milestones <= epoch)`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let passed = self.lr_milestones.iter().filter(|&&m| m <= epoch).count();
        self.learning_rate * self.lr_decay_gamma.powi(passed as i32)
    }
}

/// Adaptive-moment optimizer state with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(param_count: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            beta1,
            beta2,
            epsilon,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean mini-batch loss over the epoch.
    pub train_loss: f64,
    /// Accuracy of the predictions made during the epoch's forward passes.
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the selected epoch.
    pub model: MlpModel,
    pub history: Vec<EpochStats>,
    /// 1-based epoch the model was taken from.
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn best(&self) -> &EpochStats {
        &self.history[self.best_epoch - 1]
    }
}

fn evaluate(model: &MlpModel, xs: &[[f64; 3]], ys: &[u8]) -> (f64, f64) {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (x, &y) in xs.iter().zip(ys) {
        let p = model.forward(x);
        loss += bce_loss(y, p.p_dynamic());
        correct += usize::from(p.label == y);
    }
    let n = xs.len() as f64;
    (loss / n, correct as f64 / n)
}

/// Trains a discriminator on `train`, selecting the epoch with the best
/// validation accuracy (ties: lower validation loss, then earlier epoch).
///
/// Normalization statistics come from `train` only. All randomness
/// (initialization and per-epoch shuffling) derives from `cfg.seed`.
pub fn train(train: &[LabeledFeature], val: &[LabeledFeature], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let positives = train.iter().filter(|s| s.label == DYNAMIC).count();
    if positives == 0 || positives == train.len() {
        return Err(Error::InsufficientData(
            "training data must contain both static and dynamic samples".into(),
        ));
    }
    if val.is_empty() {
        return Err(Error::InsufficientData("validation set is empty".into()));
    }

    let vectors: Vec<FeatureVector> = train.iter().map(|s| s.vector).collect();
    let norm = Normalization::fit(&vectors)?;
    let train_x: Vec<[f64; 3]> = vectors.iter().map(|v| norm.apply(v)).collect();
    let train_y: Vec<u8> = train.iter().map(|s| s.label).collect();
    let val_x: Vec<[f64; 3]> = val.iter().map(|s| norm.apply(&s.vector)).collect();
    let val_y: Vec<u8> = val.iter().map(|s| s.label).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::init(&cfg.layer_sizes, &mut rng)?;
    model.norm = norm;
    let mut params = model.params();
    let mut adam = Adam::new(params.len(), cfg.beta1, cfg.beta2, cfg.adam_epsilon);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch_x = Vec::with_capacity(cfg.batch_size);
    let mut batch_y = Vec::with_capacity(cfg.batch_size);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, f64, MlpModel)> = None;

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            batch_x.clear();
            batch_y.clear();
            batch_x.extend(chunk.iter().map(|&i| train_x[i]));
            batch_y.extend(chunk.iter().map(|&i| train_y[i]));
            correct += batch_x
                .iter()
                .zip(&batch_y)
                .filter(|(x, &y)| model.forward(x).label == y)
                .count();
            let (loss, grads): (f64, Gradients) = model.backward(&batch_x, &batch_y);
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "training loss became non-finite in epoch {}",
                    epoch + 1
                )));
            }
            loss_sum += loss;
            batches += 1;
            adam.update(&mut params, &grads.flatten(), lr);
            model.set_params(&params);
        }
        if !model.is_finite() {
            return Err(Error::Numerical(format!(
                "parameters became non-finite in epoch {}",
                epoch + 1
            )));
        }

        let (val_loss, val_accuracy) = evaluate(&model, &val_x, &val_y);
        let stats = EpochStats {
            epoch: epoch + 1,
            learning_rate: lr,
            train_loss: loss_sum / batches as f64,
            train_accuracy: correct as f64 / train.len() as f64,
            val_loss,
            val_accuracy,
        };
        history.push(stats);

        let better = match &best {
            None => true,
            Some((_, acc, loss, _)) => {
                val_accuracy > *acc || (val_accuracy == *acc && val_loss < *loss)
            }
        };
        if better {
            best = Some((epoch + 1, val_accuracy, val_loss, model.clone()));
        }
    }

    let (best_epoch, _, _, model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}
