//! Evaluation metrics: ChrF++ for translation quality, a classifier-backed
//! dialect-fidelity score, and the macro-averaging protocol that turns rows of
//! scores into one number per dimension.

mod chrf;
mod classifier;
mod report;

pub use chrf::{chrf_pp, corpus_chrf, ChrfParams, ChrfStats, OrderStats};
pub use classifier::{
    adi2, train_classifier, ClassifierParams, FidelityScorer, VarietyClassifier,
    CLASSIFIER_FORMAT_VERSION, FIDELITY_SCORER_LABEL,
};
pub use report::{macro_average, Dimension, EvalReport, EvalRow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("{hypotheses} hypotheses for {references} references")]
    LengthMismatch {
        hypotheses: usize,
        references: usize,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("insufficient classifier data: {0}")]
    InsufficientData(String),
    #[error("variety `{0}` is not covered by the classifier")]
    UnknownVariety(String),
    #[error("fidelity target `{0}` is not a dialect")]
    NotADialect(String),
    #[error("no rows carry a {0} score")]
    NoRows(Dimension),
    #[error("classifier file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, MetricError>;
