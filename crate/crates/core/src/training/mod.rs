//! Gradient computation, optimization and the training loop.

mod adam;
mod backward;
mod gradcheck;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use backward::{backward, Gradients};
pub use gradcheck::{
    finite_difference_grad, gradient_check, GradCheckConfig, GradCheckReport, ParameterCheck,
};

use crate::error::{Error, Result};
use crate::network::{default_levels, DespawnModel, LossBreakdown, SharingMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub gamma: f64,
    pub shuffle: bool,
    /// Depth of the cascade; `None` picks the nearest `log2` of the first
    /// training signal's length.
    pub levels: Option<usize>,
    pub kernel_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 8,
            seed: 0,
            gamma: 1.0,
            shuffle: true,
            levels: None,
            kernel_size: 8,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        self.adam().validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean objective over each epoch, measured before each batch update.
    pub loss_history: Vec<LossBreakdown>,
    pub final_model: DespawnModel,
    pub wall_time: f64,
}

/// Builds a fresh model for `mode` and trains it on `signals`.
pub fn train(signals: &[Vec<f64>], mode: SharingMode, config: &TrainConfig) -> Result<TrainReport> {
    train_with_observer(signals, mode, config, |_, _| {})
}

/// Like [`train`], calling `observer(epoch, mean_loss)` after every epoch.
pub fn train_with_observer(
    signals: &[Vec<f64>],
    mode: SharingMode,
    config: &TrainConfig,
    observer: impl FnMut(usize, &LossBreakdown),
) -> Result<TrainReport> {
    let first = signals
        .first()
        .ok_or_else(|| Error::Config("training set is empty".into()))?;
    let levels = config.levels.unwrap_or_else(|| default_levels(first.len()));
    let model = DespawnModel::new(levels, config.kernel_size, mode, config.gamma)?;
    train_model(model, signals, config, observer)
}

/// Trains an existing model in place of a fresh one.
pub fn train_model(
    mut model: DespawnModel,
    signals: &[Vec<f64>],
    config: &TrainConfig,
    mut observer: impl FnMut(usize, &LossBreakdown),
) -> Result<TrainReport> {
    config.validate()?;
    if signals.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let started = Instant::now();
    let adam = config.adam();
    let mut state = AdamState::new(model.parameter_count());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..signals.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_sum = LossBreakdown::default();
        for batch in order.chunks(config.batch_size) {
            // Per-signal passes run in parallel; the reduction below is
            // sequential in batch order so results do not depend on threads.
            let results: Vec<(LossBreakdown, Gradients)> = batch
                .par_iter()
                .map(|&i| backward(&signals[i], &model, config.gamma))
                .collect::<Result<_>>()?;
            let mut grad = Gradients::zeros(model.parameter_count());
            for (l, g) in &results {
                epoch_sum.total += l.total;
                epoch_sum.recon += l.recon;
                epoch_sum.sparsity += l.sparsity;
                grad.add_assign(g);
            }
            grad.scale(1.0 / batch.len() as f64);
            if model.parameter_count() > 0 {
                adam_step(&mut model, &grad, &mut state, &adam)?;
            }
        }
        let n = signals.len() as f64;
        let mean = LossBreakdown {
            total: epoch_sum.total / n,
            recon: epoch_sum.recon / n,
            sparsity: epoch_sum.sparsity / n,
        };
        observer(epoch, &mean);
        loss_history.push(mean);
    }

    Ok(TrainReport {
        loss_history,
        final_model: model,
        wall_time: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sinusoids(count: usize, len: usize, noise: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                (0..len)
                    .map(|t| {
                        let t = t as f64;
                        0.6 * (0.05 * std::f64::consts::TAU * t + phase).sin()
                            + noise * rng.random_range(-1.0..1.0)
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn rejects_empty_data_and_zero_epochs() {
        let cfg = TrainConfig::default();
        assert!(matches!(
            train(&[], SharingMode::PerLevelCqfHt, &cfg),
            Err(Error::Config(_))
        ));
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(train(&sinusoids(2, 64, 0.0, 0), SharingMode::PerLevelCqfHt, &cfg).is_err());
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let data = sinusoids(4, 128, 0.1, 1);
        let cfg = TrainConfig {
            epochs: 1,
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let report = train(&data, SharingMode::PerLevelCqfHt, &cfg).unwrap();
        let init = DespawnModel::new(7, 8, SharingMode::PerLevelCqfHt, 1.0).unwrap();
        assert_eq!(report.final_model, init);
        assert_eq!(report.loss_history.len(), 1);
        let mean_init: f64 = data
            .iter()
            .map(|s| init.evaluate(s).unwrap().total)
            .sum::<f64>()
            / data.len() as f64;
        assert!((report.loss_history[0].total - mean_init).abs() < 1e-12);
    }

    #[test]
    fn training_reduces_loss() {
        let data = sinusoids(16, 256, 0.05, 2);
        let cfg = TrainConfig {
            epochs: 50,
            seed: 3,
            ..TrainConfig::default()
        };
        let report = train(&data, SharingMode::PerLevelCqfHt, &cfg).unwrap();
        let first = report.loss_history.first().unwrap().total;
        let last = report.loss_history.last().unwrap().total;
        assert!(last < first, "{last} !< {first}");
    }

    #[test]
    fn thresholds_activate_on_noisy_data() {
        let data = sinusoids(16, 256, 0.2, 4);
        let cfg = TrainConfig {
            epochs: 30,
            learning_rate: 1e-2,
            seed: 5,
            ..TrainConfig::default()
        };
        let model = train(&data, SharingMode::Db4FixedHt, &cfg)
            .unwrap()
            .final_model;
        assert!(model.thresholds()[0].b_plus > 0.0);
        assert!(model.thresholds()[0].b_minus > 0.0);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let data = sinusoids(10, 128, 0.1, 6);
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 3,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train(&data, SharingMode::PerLevelTwoKernelHt, &cfg).unwrap();
        let b = train(&data, SharingMode::PerLevelTwoKernelHt, &cfg).unwrap();
        assert_eq!(a.final_model, b.final_model);
        assert_eq!(a.loss_history, b.loss_history);
    }

    #[test]
    fn constraints_hold_after_training() {
        let data = sinusoids(8, 128, 0.1, 7);
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let model = train(&data, SharingMode::SharedCqfHt, &cfg)
            .unwrap()
            .final_model;
        let h = &model.kernels()[0];
        let expected = crate::wavelet::cqf_from_scaling(h).unwrap();
        for bank in model.banks().unwrap() {
            assert_eq!(bank, expected);
        }
    }

    #[test]
    fn free_mode_exposes_gain_ratios() {
        let data = sinusoids(8, 128, 0.1, 8);
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let model = train(&data, SharingMode::FreeHt, &cfg).unwrap().final_model;
        let ratios = model.synthesis_gain_ratios().unwrap();
        assert_eq!(ratios.len(), model.levels());
        assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0));
    }
}
