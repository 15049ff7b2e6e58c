use diglossia_model::LoraConfig;
use serde::{Deserialize, Serialize};

use crate::{Result, TrainError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the translation objective; batches come from the
    /// translation pool with this probability.
    pub lambda: f64,
    pub learning_rate: f64,
    /// Passes over the generation pool (over the translation pool when
    /// `lambda == 1`).
    pub epochs: f64,
    pub per_device_batch: usize,
    pub grad_accum: usize,
    pub eval_batch: usize,
    pub warmup_ratio: f64,
    pub weight_decay: f64,
    pub grad_clip_norm: f64,
    /// Optimizer steps between dev evaluations and checkpoints.
    pub eval_every: usize,
    pub seed: u64,
    /// Shrinks `per_device_batch`, `eval_batch` and `eval_every` for small
    /// runs; 1 keeps the reference values.
    pub scale_factor: f64,
    pub max_steps: Option<usize>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub lora: Option<LoraConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.5,
            learning_rate: 5e-5,
            epochs: 4.0,
            per_device_batch: 16,
            grad_accum: 8,
            eval_batch: 8,
            warmup_ratio: 0.03,
            weight_decay: 0.01,
            grad_clip_norm: 1.0,
            eval_every: 1000,
            seed: 42,
            scale_factor: 1.0,
            max_steps: None,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            lora: None,
        }
    }
}

/// Learning rates of the reference sweep.
pub const LEARNING_RATE_SWEEP: [f64; 4] = [2e-5, 3e-5, 5e-5, 6e-5];

fn scaled(n: usize, s: f64) -> usize {
    ((n as f64 * s).round() as usize).max(1)
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda must be in [0, 1], got {}", self.lambda));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.epochs > 0.0 && self.epochs.is_finite()) {
            return bad(format!("epochs must be positive, got {}", self.epochs));
        }
        if self.per_device_batch == 0 || self.grad_accum == 0 || self.eval_batch == 0 || self.eval_every == 0 {
            return bad("batch sizes, grad_accum and eval_every must be positive".into());
        }
        if self.max_steps == Some(0) {
            return bad("max_steps must be positive".into());
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return bad(format!("warmup_ratio must be in [0, 1), got {}", self.warmup_ratio));
        }
        if self.weight_decay < 0.0 || self.grad_clip_norm <= 0.0 {
            return bad("weight_decay must be non-negative and grad_clip_norm positive".into());
        }
        if !(self.scale_factor > 0.0 && self.scale_factor <= 1.0) {
            return bad(format!("scale_factor must be in (0, 1], got {}", self.scale_factor));
        }
        if let Some(lora) = &self.lora {
            lora.validate()?;
        }
        Ok(())
    }

    /// The configuration actually run, with `scale_factor` applied.
    pub fn effective(&self) -> TrainConfig {
        let s = self.scale_factor;
        TrainConfig {
            per_device_batch: scaled(self.per_device_batch, s),
            eval_batch: scaled(self.eval_batch, s),
            eval_every: scaled(self.eval_every, s),
            scale_factor: 1.0,
            ..self.clone()
        }
    }

    /// Probability that a micro-batch comes from the pool that defines an
    /// epoch.
    pub fn defining_share(&self) -> f64 {
        if self.lambda < 1.0 {
            1.0 - self.lambda
        } else {
            1.0
        }
    }

    /// Optimizer steps needed for `epochs` expected passes over a defining
    /// pool of `pool_size` examples, capped by `max_steps`.
    pub fn total_steps(&self, pool_size: usize, share: f64) -> usize {
        let per_epoch = pool_size.div_ceil(self.per_device_batch) as f64;
        let micro = (self.epochs * per_epoch / share).ceil();
        let steps = ((micro / self.grad_accum as f64).ceil() as usize).max(1);
        match self.max_steps {
            Some(m) => steps.min(m),
            None => steps,
        }
    }
}
