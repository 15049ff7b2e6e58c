//! End-to-end experiments: data preparation, training sweeps over the
//! mixing weight and learning rate, decoding-grid evaluation, trade-off
//! records with per-model best selection, and side-by-side tables against
//! published reference numbers.

pub mod data;
pub mod experiment;
pub mod manifest;
pub mod reference;
pub mod spec;
pub mod tradeoff;

pub use experiment::{run_experiment, ExperimentOutcome};
pub use spec::ExperimentSpec;
pub use tradeoff::{emit_tradeoff, ModelTag, TradeoffRecord};

use std::path::PathBuf;

use thiserror::Error;

/// Environment variable holding the root that relative output directories
/// are resolved against.
pub const OUTPUT_ROOT_ENV: &str = "DIGLOSSIA_OUTPUT_ROOT";

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad input: malformed spec, missing file, schema mismatch.
    #[error("{0}")]
    Validation(String),
    #[error("{stage}: {message}")]
    Stage { stage: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Train(#[from] diglossia_training::TrainError),
    #[error(transparent)]
    Model(#[from] diglossia_model::ModelError),
    #[error(transparent)]
    Metric(#[from] diglossia_core::metrics::MetricError),
    #[error(transparent)]
    Corpus(#[from] diglossia_core::CorpusError),
    #[error(transparent)]
    Template(#[from] diglossia_core::templating::TemplateError),
    #[error(transparent)]
    Synth(#[from] diglossia_core::synthlang::SynthError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn is_validation(&self) -> bool {
        matches!(self, HarnessError::Validation(_))
    }

    /// Process exit code: 1 for invalid input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            1
        } else {
            2
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

/// Writes through a temporary file so readers never see a partial file.
pub(crate) fn write_atomic(path: &std::path::Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}
