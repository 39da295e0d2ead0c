use serde::{Deserialize, Serialize};

use super::features::{extract_features, FeatureMap, NUM_FEATURES};
use super::model::{ModelParams, Weights};
use crate::error::{Error, Result};
use crate::metrics::{loss_and_logit_grad, softmax_in_place};
use crate::tensor::{LabelMap, Volume, NUM_CLASSES};

/// Minimum decrease of the objective that resets the patience counter.
pub const IMPROVEMENT_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            max_epochs: 200,
            patience: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

/// Feature maps and labels of every 2D slice of a labeled set, in input order.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    slices: Vec<(FeatureMap, LabelMap)>,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a labeled case; 3D cases contribute one entry per axial slice.
    pub fn push(&mut self, volume: &Volume, labels: &LabelMap) -> Result<()> {
        if volume.dims() != labels.dims() {
            return Err(Error::DimMismatch {
                left: volume.dims().to_vec(),
                right: labels.dims().to_vec(),
            });
        }
        for (v, l) in volume.axial_slices().iter().zip(labels.axial_slices()) {
            self.slices.push((extract_features(v)?, l));
        }
        Ok(())
    }

    pub fn from_pairs(pairs: &[(Volume, LabelMap)]) -> Result<Self> {
        let mut set = Self::new();
        for (v, l) in pairs {
            set.push(v, l)?;
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }
}

/// Mean soft-Dice loss over all slices and its gradient with respect to the weights.
pub fn loss_and_weight_grad(weights: &Weights, set: &TrainingSet) -> (f64, Weights) {
    let model = ModelParams {
        weights: *weights,
        trained_epochs: 0,
        rng_seed: 0,
    };
    let mut grad = [[0.0; NUM_FEATURES]; NUM_CLASSES];
    let mut total = 0.0;
    let mut buf = Vec::new();
    for (features, labels) in &set.slices {
        model.logits_into(features, &mut buf);
        softmax_in_place(&mut buf);
        let (loss, dz) = loss_and_logit_grad(&buf, labels.data());
        total += loss.value;
        for (px, dzp) in features
            .data()
            .chunks_exact(NUM_FEATURES)
            .zip(dz.chunks_exact(NUM_CLASSES))
        {
            for (row, &d) in grad.iter_mut().zip(dzp) {
                for (g, &x) in row.iter_mut().zip(px) {
                    *g += d * x;
                }
            }
        }
    }
    let n = set.len().max(1) as f64;
    grad.iter_mut().flatten().for_each(|g| *g /= n);
    (total / n, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Best-seen weights.
    pub model: ModelParams,
    /// Objective at the start of every evaluated epoch.
    pub losses: Vec<f64>,
    pub best_loss: f64,
    pub best_epoch: usize,
}

/// Full-batch gradient descent on the mean soft-Dice loss with early stopping.
pub fn train_set(init: &ModelParams, set: &TrainingSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(Error::invariant("cannot train on an empty labeled set"));
    }
    if !init.is_finite() {
        return Err(Error::invariant("initial weights are not finite"));
    }
    let mut weights = init.weights;
    let mut best = (f64::INFINITY, weights, 0usize);
    let mut stale = 0;
    let mut losses = Vec::new();
    for epoch in 0..cfg.max_epochs {
        let (loss, grad) = loss_and_weight_grad(&weights, set);
        if !loss.is_finite() || grad.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        losses.push(loss);
        if loss < best.0 - IMPROVEMENT_THRESHOLD {
            best = (loss, weights, epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience.max(1) {
                break;
            }
        }
        for (row, grow) in weights.iter_mut().zip(&grad) {
            for (w, g) in row.iter_mut().zip(grow) {
                *w -= cfg.learning_rate * g;
            }
        }
    }
    if losses.is_empty() {
        let (loss, _) = loss_and_weight_grad(&weights, set);
        best = (loss, weights, 0);
    }
    let epochs = u32::try_from(losses.len()).unwrap_or(u32::MAX);
    Ok(TrainOutcome {
        model: ModelParams {
            weights: best.1,
            trained_epochs: init.trained_epochs.saturating_add(epochs),
            rng_seed: init.rng_seed,
        },
        losses,
        best_loss: best.0,
        best_epoch: best.2,
    })
}

/// Train from `init` (pass [`ModelParams::fresh`] for a cold start) on labeled pairs.
pub fn train(init: &ModelParams, labeled: &[(Volume, LabelMap)], cfg: &TrainConfig) -> Result<ModelParams> {
    if labeled.is_empty() {
        return Err(Error::invariant("cannot train on an empty labeled set"));
    }
    Ok(train_set(init, &TrainingSet::from_pairs(labeled)?, cfg)?.model)
}
