//! A small pre-norm decoder-only transformer in `f64` with hand-written
//! backpropagation, LoRA adapters, checkpoint I/O and temperature / nucleus
//! sampling. Sized for CPU experiments on synthetic languages.

pub mod checkpoint;
pub mod config;
pub mod decoding;
pub mod gradcheck;
mod lora;
mod ops;
pub mod params;
pub mod tokenizer;
pub mod transformer;

pub use config::{LoraConfig, LoraTarget, ModelConfig};
pub use decoding::{decode_grid, generate, sample_next, DecodeConfig, Generation, StopReason};
pub use params::{Param, ParamStore};
pub use tokenizer::{Encoded, Tokenizer, TokenizerMode};
pub use transformer::{KvCache, Model};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("encoding: {0}")]
    Encoding(String),
    #[error("{id}: sequence of {len} tokens exceeds the context of {max}")]
    SequenceTooLong { id: String, len: usize, max: usize },
    #[error("batch has no supervised positions")]
    NoSupervision,
    #[error("token id {0} is outside the vocabulary")]
    TokenOutOfRange(u32),
    #[error("LoRA: {0}")]
    Lora(String),
    #[error("invalid decoding configuration: {0}")]
    Decoding(String),
    #[error("no finite logits to sample from")]
    NoFiniteLogits,
    #[error("checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
