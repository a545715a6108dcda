use serde::{Deserialize, Serialize};

use crate::data::AugmentConfig;
use crate::error::{Error, Result};
use crate::model::{CodeNorm, DaaMode, EncoderConfig, ModelConfig};
use crate::nn::STATS_EPS;

/// Intervals accepted for test-time style-age sampling.
pub const EVAL_INTERVALS: [usize; 6] = [1, 2, 5, 10, 20, 50];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub encoder: EncoderConfig,
    pub daa_mode: DaaMode,
    pub code_norm: CodeNorm,
    pub eval_intervals: Vec<usize>,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    /// Desk-scale recipe: 30 epochs, batch 32.
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            base_lr: 0.001,
            weight_decay: 0.0005,
            seed: 0,
            encoder: EncoderConfig::tiny(32),
            daa_mode: DaaMode::Binary,
            code_norm: CodeNorm::ColumnStandardize,
            eval_intervals: EVAL_INTERVALS.to_vec(),
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    /// 200 epochs with batch 128.
    pub fn full_schedule() -> Self {
        Self {
            epochs: 200,
            batch_size: 128,
            ..Self::default()
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            code_norm: self.code_norm,
            eps: STATS_EPS,
            ..ModelConfig::new(self.encoder.clone(), self.daa_mode)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return Err(Error::config("base_lr", "must be positive"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay", "must be non-negative"));
        }
        validate_intervals(&self.eval_intervals)?;
        self.encoder.validate()?;
        self.augment.validate()
    }
}

pub fn validate_intervals(intervals: &[usize]) -> Result<()> {
    if intervals.is_empty() {
        return Err(Error::config("eval_intervals", "needs at least one interval"));
    }
    for &d in intervals {
        if !EVAL_INTERVALS.contains(&d) {
            return Err(Error::config(
                "eval_intervals",
                format!("{d} is not one of {EVAL_INTERVALS:?}"),
            ));
        }
    }
    Ok(())
}
