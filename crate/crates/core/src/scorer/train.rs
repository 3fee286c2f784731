use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{loss_and_grad, ScorerModel, DEFAULT_HIDDEN};
use super::oracle::in_window_labels;
use super::{window_inputs, InputRow};
use crate::domain::{Ranking, Scene};
use crate::error::{Error, Result};
use crate::preprocess::FeatureVector;
use crate::rankcore::acb_sequences;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Multiply the learning rate by `lr_decay` every `lr_decay_every` epochs.
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    /// Weight of the ranking term.
    pub alpha: f64,
    pub margin: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr_decay: 0.1,
            lr_decay_every: 10,
            alpha: 1.0,
            margin: 0.0,
            epochs: 30,
            seed: 7,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "lr must be non-negative, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0,1), got {}",
                self.momentum
            )));
        }
        if self.weight_decay < 0.0 || self.alpha < 0.0 || self.lr_decay <= 0.0 {
            return Err(Error::Config(
                "weight_decay, alpha and lr_decay must be non-negative".into(),
            ));
        }
        if self.lr_decay_every == 0 || self.hidden == 0 {
            return Err(Error::Config(
                "lr_decay_every and hidden must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.powi((epoch / self.lr_decay_every) as i32)
    }
}

/// One window with its target in-window labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub inputs: Vec<InputRow>,
    pub labels: Vec<usize>,
    pub dummy: Vec<bool>,
}

/// One example per circular window of the scene; targets come from `gt`
/// re-ranked inside each window.
pub fn build_examples(
    scene: &Scene,
    features: &[FeatureVector],
    gt: &Ranking,
    window: usize,
) -> Result<Vec<TrainingExample>> {
    if features.len() != scene.proposals.len() {
        return Err(Error::ShapeMismatch(format!(
            "scene {} has {} proposals but {} feature vectors",
            scene.scene_id,
            scene.proposals.len(),
            features.len()
        )));
    }
    let windows = acb_sequences(scene.proposals.len(), window)?;
    Ok(windows
        .iter()
        .map(|w| {
            let orders: Vec<u32> = w
                .members
                .iter()
                .map(|&m| {
                    let p = &scene.proposals[m];
                    if p.is_dummy {
                        0
                    } else {
                        gt.get(p.id).unwrap_or(0)
                    }
                })
                .collect();
            TrainingExample {
                inputs: window_inputs(features, &w.members),
                labels: in_window_labels(&orders),
                dummy: w
                    .members
                    .iter()
                    .map(|&m| scene.proposals[m].is_dummy)
                    .collect(),
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ScorerModel,
    /// Mean loss over the examples seen in each epoch.
    pub epoch_losses: Vec<f64>,
}

/// SGD with momentum and decoupled-from-loss L2 decay, one step per window
/// in a seeded shuffled order.
pub fn train(examples: &[TrainingExample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let Some(first) = examples.first() else {
        return Err(Error::EmptyDataset);
    };
    let window = first.inputs.len();
    if examples.iter().any(|e| e.inputs.len() != window) {
        return Err(Error::ShapeMismatch("examples mix window sizes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = ScorerModel::for_window(window, cfg.hidden, cfg.seed);
    let mut velocity = ScorerModel::zeros(model.d_in, model.hidden, model.classes);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let ex = &examples[i];
            let (loss, grad) = loss_and_grad(
                &model, &ex.inputs, &ex.labels, &ex.dummy, cfg.alpha, cfg.margin,
            )?;
            total += loss;
            if lr == 0.0 {
                continue;
            }
            for ((p, v), g) in model
                .tensors_mut()
                .into_iter()
                .zip(velocity.tensors_mut())
                .zip(grad.tensors())
            {
                for k in 0..p.len() {
                    v[k] = cfg.momentum * v[k] + g[k] + cfg.weight_decay * p[k];
                    p[k] -= lr * v[k];
                }
            }
        }
        let mean = total / examples.len() as f64;
        log::debug!("epoch {} lr {lr:e} loss {mean:.5}", epoch + 1);
        epoch_losses.push(mean);
    }
    if !model.is_finite() {
        return Err(Error::invariant("model", "training diverged"));
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::mlp::tests::random_inputs;

    fn toy_examples(n: usize) -> Vec<TrainingExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        (0..n)
            .map(|_| {
                let mut inputs = random_inputs(&mut rng, 5);
                // feature 0 drives the target order
                let mut idx: Vec<usize> = (0..5).collect();
                idx.sort_by(|&a, &b| inputs[b][0].total_cmp(&inputs[a][0]));
                let mut labels = vec![0; 5];
                for (rank, &r) in idx.iter().take(3).enumerate() {
                    labels[r] = rank + 1;
                }
                inputs.iter_mut().for_each(|row| row[1] = 1.0);
                TrainingExample {
                    inputs,
                    labels,
                    dummy: vec![false; 5],
                }
            })
            .collect()
    }

    #[test]
    fn empty_dataset() {
        assert!(matches!(
            train(&[], &TrainConfig::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn zero_lr_keeps_init() {
        let cfg = TrainConfig {
            lr: 0.0,
            epochs: 3,
            ..TrainConfig::default()
        };
        let out = train(&toy_examples(20), &cfg).unwrap();
        assert_eq!(out.model, ScorerModel::for_window(5, cfg.hidden, cfg.seed));
        assert_eq!(out.epoch_losses.len(), 3);
    }

    #[test]
    fn deterministic_and_decreasing() {
        let cfg = TrainConfig {
            lr: 0.01,
            epochs: 6,
            ..TrainConfig::default()
        };
        let ex = toy_examples(200);
        let a = train(&ex, &cfg).unwrap();
        let b = train(&ex, &cfg).unwrap();
        assert_eq!(a.model.to_bytes(), b.model.to_bytes());
        assert!(
            a.epoch_losses[3] < a.epoch_losses[0],
            "{:?}",
            a.epoch_losses
        );
    }

    #[test]
    fn lr_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr_at(0), 0.001);
        assert!((cfg.lr_at(10) - 1e-4).abs() < 1e-15);
        assert!((cfg.lr_at(29) - 1e-5).abs() < 1e-16);
    }

    #[test]
    fn invalid_config() {
        let cfg = TrainConfig {
            momentum: 1.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
