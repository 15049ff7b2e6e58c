//! Data-side building blocks for dialect-aware translation and generation
//! experiments: corpus loading, synthetic diglossic languages, chat templates
//! for the translation and sentence-completion tasks, and the evaluation
//! metrics (ChrF++, classifier-based dialect fidelity, macro-averaging).

pub mod corpus;
pub mod metrics;
pub mod rng;
pub mod synthlang;
pub mod templating;

pub use corpus::{
    BitextExample, CorpusError, DatasetSplit, Format, LoadOptions, MonoExample, SplitRatios,
    Variety, VarietyKind, VarietyRegistry,
};
pub use templating::{ChatExample, ChatSegment, InstructionLanguage, Role, Task};
