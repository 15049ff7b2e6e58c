//! Training for the joint objective `λ·L_MT + (1−λ)·L_GEN`: task mixing at
//! the batch level, AdamW with warmup-then-cosine learning rate and global
//! norm clipping, periodic dev evaluation with checkpointing, and ChrF++-based
//! checkpoint selection.

pub mod config;
pub mod evaluator;
pub mod mixing;
pub mod optim;
pub mod schedule;
pub mod trainer;

pub use config::TrainConfig;
pub use evaluator::{DevEvaluator, EvalRecord, EvalSet, Evaluator, RowLabel};
pub use mixing::{encode_pool, BatchStream, MicroBatch, MixStream, PoolCycle, TrainExample};
pub use optim::{clip_grad_norm, AdamW};
pub use schedule::CosineSchedule;
pub use trainer::{
    argmax_later, run_single_task, run_training, select_best_checkpoint, CheckpointRef, LogRecord,
    TrainLog, TrainOutcome,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("the {0} pool is empty but the mixing weight requires it")]
    EmptyPool(&'static str),
    #[error("non-finite loss {loss} at step {step}, micro-batch {micro} (examples: {ids})")]
    NonFiniteLoss {
        step: usize,
        micro: usize,
        loss: f64,
        ids: String,
    },
    #[error("writing {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("resume: {0}")]
    Resume(String),
    #[error(transparent)]
    Model(#[from] diglossia_model::ModelError),
    #[error(transparent)]
    Metric(#[from] diglossia_core::metrics::MetricError),
}

pub type Result<T> = std::result::Result<T, TrainError>;
