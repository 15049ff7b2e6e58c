//! Experiment specification, read from TOML.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use diglossia_core::synthlang::SynthConfig;
use diglossia_core::SplitRatios;
use diglossia_model::{ModelConfig, TokenizerMode};
use diglossia_training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result, OUTPUT_ROOT_ENV};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitextFile {
    pub path: PathBuf,
    /// Needed for TSV files; JSONL rows carry their own varieties.
    #[serde(default)]
    pub src: Option<String>,
    #[serde(default)]
    pub tgt: Option<String>,
    /// Dataset id in reports; defaults to the file stem.
    #[serde(default)]
    pub dataset: Option<String>,
    #[serde(default)]
    pub header: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonoFile {
    pub path: PathBuf,
    #[serde(default)]
    pub variety: Option<String>,
    #[serde(default)]
    pub dataset: Option<String>,
    #[serde(default)]
    pub header: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synth,
    Files,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    pub source: DataSource,
    /// Used when `source = "synth"`.
    pub synth: SynthConfig,
    /// The remaining file fields are used when `source = "files"`.
    pub registry: Option<PathBuf>,
    pub bitext: Vec<BitextFile>,
    pub mono: Vec<MonoFile>,
    pub split: [f64; 3],
    /// Share of completion examples whose instruction is in English rather
    /// than in the target dialect.
    pub english_fraction: f64,
    /// Append the "output only the translation" clause to translation
    /// instructions.
    pub strict_output_clause: bool,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            source: DataSource::Synth,
            synth: SynthConfig::default(),
            registry: None,
            bitext: Vec::new(),
            mono: Vec::new(),
            split: [0.8, 0.1, 0.1],
            english_fraction: 1.0,
            strict_output_clause: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerSpec {
    pub mode: TokenizerMode,
    pub min_word_count: usize,
}

impl Default for TokenizerSpec {
    fn default() -> Self {
        TokenizerSpec {
            mode: TokenizerMode::Word,
            min_word_count: 1,
        }
    }
}

/// Model hyperparameters; the vocabulary size comes from the tokenizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_seq_len: usize,
    pub dropout: f64,
    pub init_std: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        let m = ModelConfig::default();
        ModelSpec {
            d_model: m.d_model,
            n_layers: m.n_layers,
            n_heads: m.n_heads,
            d_ff: m.d_ff,
            max_seq_len: m.max_seq_len,
            dropout: m.dropout,
            init_std: m.init_std,
        }
    }
}

impl ModelSpec {
    pub fn config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            d_model: self.d_model,
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            d_ff: self.d_ff,
            max_seq_len: self.max_seq_len,
            dropout: self.dropout,
            init_std: self.init_std,
            ..ModelConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub lambdas: Vec<f64>,
    pub learning_rates: Vec<f64>,
    /// Also evaluate the untrained model (decoding search only).
    pub baseline: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            lambdas: vec![0.0, 0.5, 1.0],
            learning_rates: vec![TrainConfig::default().learning_rate],
            baseline: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    /// Evaluate fidelity over the 25-point decoding grid (greedy only when
    /// false).
    pub grid: bool,
    /// Also evaluate translation over the grid instead of greedy only.
    pub grid_diglossia: bool,
    pub max_new_tokens: usize,
    /// Caps on examples per dataset and task; 0 keeps everything.
    pub dev_limit: usize,
    pub test_limit: usize,
    /// Cap on dev translation examples scored at each checkpoint.
    pub selection_limit: usize,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            grid: true,
            grid_diglossia: false,
            max_new_tokens: 48,
            dev_limit: 0,
            test_limit: 0,
            selection_limit: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataSpec,
    pub tokenizer: TokenizerSpec,
    pub model: ModelSpec,
    /// Shared training settings; `lambda` and `learning_rate` are replaced
    /// per variant.
    pub train: TrainConfig,
    pub sweep: SweepSpec,
    pub eval: EvalSpec,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "experiment".into(),
            seed: 42,
            output_dir: PathBuf::from("runs/experiment"),
            data: DataSpec::default(),
            tokenizer: TokenizerSpec::default(),
            model: ModelSpec::default(),
            train: TrainConfig::default(),
            sweep: SweepSpec::default(),
            eval: EvalSpec::default(),
        }
    }
}

/// One training run of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub lambda: f64,
    pub learning_rate: f64,
}

impl Variant {
    pub fn dir_name(&self) -> String {
        format!("lambda{}_lr{:e}", self.lambda, self.learning_rate)
    }
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Validation(msg.into())
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(format!("experiment spec: {e}")))
    }

    /// Reads a spec; relative data paths are resolved against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let mut spec = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let data = &mut spec.data;
        data.registry.iter_mut().for_each(fix);
        data.bitext.iter_mut().for_each(|b| fix(&mut b.path));
        data.mono.iter_mut().for_each(|m| fix(&mut m.path));
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    /// Replaces the global seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self.data.synth.seed = seed;
        self
    }

    /// Output directory, resolved against the output-root environment
    /// variable when relative.
    pub fn resolved_output_dir(&self) -> PathBuf {
        resolve_output(&self.output_dir)
    }

    pub fn variants(&self) -> Vec<Variant> {
        let mut out = Vec::new();
        for &lambda in &self.sweep.lambdas {
            for &learning_rate in &self.sweep.learning_rates {
                out.push(Variant { lambda, learning_rate });
            }
        }
        out
    }

    pub fn train_config(&self, v: &Variant) -> TrainConfig {
        TrainConfig {
            lambda: v.lambda,
            learning_rate: v.learning_rate,
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn split_ratios(&self) -> Result<SplitRatios> {
        let r = SplitRatios(self.data.split);
        r.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        self.split_ratios()?;
        if !(0.0..=1.0).contains(&self.data.english_fraction) {
            return Err(invalid("data.english_fraction must be in [0, 1]"));
        }
        let data = &self.data;
        match data.source {
            DataSource::Synth => data.synth.validate()?,
            DataSource::Files => {
                let registry = data
                    .registry
                    .as_ref()
                    .ok_or_else(|| invalid("data.registry is required for file data"))?;
                let files = std::iter::once(registry)
                    .chain(data.bitext.iter().map(|b| &b.path))
                    .chain(data.mono.iter().map(|m| &m.path));
                for f in files {
                    if !f.is_file() {
                        return Err(invalid(format!("{} does not exist", f.display())));
                    }
                }
                if data.bitext.is_empty() && data.mono.is_empty() {
                    return Err(invalid("data lists no bitext or monolingual files"));
                }
            }
        }
        self.model
            .config(1)
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        if self.sweep.lambdas.is_empty() || self.sweep.learning_rates.is_empty() {
            return Err(invalid("sweep needs at least one lambda and one learning rate"));
        }
        let mut seen = BTreeSet::new();
        for v in self.variants() {
            if !seen.insert((v.lambda.to_bits(), v.learning_rate.to_bits())) {
                return Err(invalid(format!(
                    "duplicate (lambda, lr) combination ({}, {})",
                    v.lambda, v.learning_rate
                )));
            }
            self.train_config(&v)
                .validate()
                .map_err(|e| invalid(e.to_string()))?;
        }
        if self.eval.max_new_tokens == 0 {
            return Err(invalid("eval.max_new_tokens must be positive"));
        }
        Ok(())
    }
}

pub fn resolve_output(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}
