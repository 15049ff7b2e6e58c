//! Data preparation: load or synthesize corpora, split them, render chat
//! examples, fit the tokenizer and the variety classifier, and lay everything
//! out on disk so later stages (and reruns) read the same inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use diglossia_core::corpus::{self, BitextExample, Format, LoadOptions, MonoExample};
use diglossia_core::metrics::{train_classifier, ClassifierParams, VarietyClassifier};
use diglossia_core::synthlang::build_corpora;
use diglossia_core::templating::{self, render_gen_pool, render_mt_pool};
use diglossia_core::{ChatExample, VarietyRegistry};
use diglossia_model::Tokenizer;
use diglossia_training::EvalSet;
use serde::{Deserialize, Serialize};

use crate::spec::{DataSource, ExperimentSpec};
use crate::{io_err, read_to_string, write_atomic, HarnessError, Result};

pub const REGISTRY_FILE: &str = "registry.tsv";
pub const TOKENIZER_FILE: &str = "tokenizer.json";
pub const CLASSIFIER_FILE: &str = "classifier.json";
pub const SUMMARY_FILE: &str = "prepared.json";

/// Rendered evaluation sets of one split.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitSets {
    pub mt: Vec<EvalSet>,
    pub gen: Vec<EvalSet>,
}

impl SplitSets {
    /// Keeps at most `limit` examples per set; 0 keeps everything.
    pub fn limited(&self, limit: usize) -> SplitSets {
        let cut = |sets: &[EvalSet]| -> Vec<EvalSet> {
            sets.iter()
                .map(|s| {
                    let n = if limit == 0 { s.examples.len() } else { limit.min(s.examples.len()) };
                    EvalSet::new(s.dataset.clone(), s.examples[..n].to_vec())
                })
                .collect()
        };
        SplitSets {
            mt: cut(&self.mt),
            gen: cut(&self.gen),
        }
    }

    fn save(&self, dir: &Path, registry: &VarietyRegistry) -> Result<()> {
        for (task, sets) in [("mt", &self.mt), ("gen", &self.gen)] {
            for set in sets {
                let path = dir.join(task).join(format!("{}.jsonl", set.dataset));
                write_atomic(&path, templating::to_jsonl(&set.examples))?;
            }
        }
        let path = dir.join(REGISTRY_FILE);
        write_atomic(&path, registry.to_tsv())
    }

    /// Reads `mt/*.jsonl` and `gen/*.jsonl` under `dir`, datasets in name
    /// order.
    pub fn load(dir: &Path) -> Result<SplitSets> {
        let read_sets = |task: &str| -> Result<Vec<EvalSet>> {
            let sub = dir.join(task);
            if !sub.is_dir() {
                return Ok(Vec::new());
            }
            let mut files: Vec<PathBuf> = std::fs::read_dir(&sub)
                .map_err(io_err(&sub))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            files.sort();
            files
                .iter()
                .map(|p| {
                    let examples = templating::from_jsonl(&read_to_string(p)?)?;
                    let dataset = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    Ok(EvalSet::new(dataset, examples))
                })
                .collect()
        };
        let sets = SplitSets {
            mt: read_sets("mt")?,
            gen: read_sets("gen")?,
        };
        if sets.mt.is_empty() && sets.gen.is_empty() {
            return Err(HarnessError::Validation(format!(
                "{}: no mt/*.jsonl or gen/*.jsonl evaluation files",
                dir.display()
            )));
        }
        Ok(sets)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepSummary {
    pub train_mt: usize,
    pub train_gen: usize,
    pub dev_mt: usize,
    pub dev_gen: usize,
    pub test_mt: usize,
    pub test_gen: usize,
    pub vocab_size: usize,
    pub classifier_heldout_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub registry: VarietyRegistry,
    pub tokenizer: Tokenizer,
    pub classifier: VarietyClassifier,
    pub train_mt: Vec<ChatExample>,
    pub train_gen: Vec<ChatExample>,
    pub dev: SplitSets,
    pub test: SplitSets,
    pub summary: PrepSummary,
}

/// Raw examples grouped by dataset id.
struct RawData {
    registry: VarietyRegistry,
    bitext: BTreeMap<String, Vec<BitextExample>>,
    mono: BTreeMap<String, Vec<MonoExample>>,
}

fn file_stem(path: &Path) -> String {
    path.file_stem().unwrap_or_default().to_string_lossy().into_owned()
}

fn format_of(path: &Path) -> Result<Format> {
    Format::from_path(path).ok_or_else(|| {
        HarnessError::Validation(format!("{}: unknown file format (use .tsv or .jsonl)", path.display()))
    })
}

fn load_raw(spec: &ExperimentSpec) -> Result<RawData> {
    let data = &spec.data;
    match data.source {
        DataSource::Synth => {
            let c = build_corpora(&data.synth)?;
            Ok(RawData {
                registry: c.registry,
                bitext: BTreeMap::from([("synth".to_string(), c.bitext)]),
                mono: BTreeMap::from([("synth".to_string(), c.mono)]),
            })
        }
        DataSource::Files => {
            let path = data
                .registry
                .as_ref()
                .ok_or_else(|| HarnessError::Validation("data.registry is required".into()))?;
            let registry = VarietyRegistry::load(path)?;
            let mut bitext: BTreeMap<String, Vec<BitextExample>> = BTreeMap::new();
            for f in &data.bitext {
                let opts = LoadOptions {
                    header: f.header,
                    varieties: f.src.clone().zip(f.tgt.clone()),
                };
                let rows = corpus::load_bitext(&f.path, format_of(&f.path)?, &opts, &registry)?;
                let name = f.dataset.clone().unwrap_or_else(|| file_stem(&f.path));
                bitext.entry(name).or_default().extend(rows);
            }
            let mut mono: BTreeMap<String, Vec<MonoExample>> = BTreeMap::new();
            for f in &data.mono {
                let opts = LoadOptions {
                    header: f.header,
                    varieties: f.variety.clone().map(|v| (v, String::new())),
                };
                let rows = corpus::load_mono(&f.path, format_of(&f.path)?, &opts, &registry)?;
                let name = f.dataset.clone().unwrap_or_else(|| file_stem(&f.path));
                mono.entry(name).or_default().extend(rows);
            }
            Ok(RawData { registry, bitext, mono })
        }
    }
}

/// Builds every prepared artifact in memory.
pub fn prepare(spec: &ExperimentSpec) -> Result<PreparedData> {
    let raw = load_raw(spec)?;
    let ratios = spec.split_ratios()?;
    let registry = raw.registry;
    let d = &spec.data;

    let mut train_mt = Vec::new();
    let mut train_gen = Vec::new();
    let mut dev = SplitSets::default();
    let mut test = SplitSets::default();
    let mut texts: BTreeMap<String, Vec<String>> = BTreeMap::new();

    for (name, rows) in &raw.bitext {
        let s = corpus::split(rows, ratios, spec.seed)?;
        for ex in &s.train {
            texts.entry(ex.src_variety.clone()).or_default().push(ex.src_text.clone());
            texts.entry(ex.tgt_variety.clone()).or_default().push(ex.tgt_text.clone());
        }
        train_mt.extend(render_mt_pool(&s.train, &registry, d.strict_output_clause)?);
        dev.mt.push(EvalSet::new(name, render_mt_pool(&s.dev, &registry, d.strict_output_clause)?));
        test.mt.push(EvalSet::new(name, render_mt_pool(&s.test, &registry, d.strict_output_clause)?));
    }
    for (name, rows) in &raw.mono {
        let s = corpus::split(rows, ratios, spec.seed)?;
        for ex in &s.train {
            texts.entry(ex.variety.clone()).or_default().push(ex.text.clone());
        }
        let render = |rows: &[MonoExample]| render_gen_pool(rows, &registry, d.english_fraction, spec.seed);
        train_gen.extend(render(&s.train)?);
        dev.gen.push(EvalSet::new(name, render(&s.dev)?));
        test.gen.push(EvalSet::new(name, render(&s.test)?));
    }

    let all_train: Vec<ChatExample> = train_mt.iter().chain(&train_gen).cloned().collect();
    if all_train.is_empty() {
        return Err(HarnessError::Validation("no training examples after splitting".into()));
    }
    let tokenizer = Tokenizer::fit_chats(&all_train, spec.tokenizer.mode, spec.tokenizer.min_word_count);
    let classifier = train_classifier(&texts, &registry, ClassifierParams::default())?;
    log::info!(
        "prepared {} translation and {} completion training examples; classifier held-out accuracy {:.3}",
        train_mt.len(),
        train_gen.len(),
        classifier.heldout_accuracy()
    );
    let count = |sets: &[EvalSet]| sets.iter().map(|s| s.examples.len()).sum::<usize>();
    let summary = PrepSummary {
        train_mt: train_mt.len(),
        train_gen: train_gen.len(),
        dev_mt: count(&dev.mt),
        dev_gen: count(&dev.gen),
        test_mt: count(&test.mt),
        test_gen: count(&test.gen),
        vocab_size: tokenizer.vocab_size(),
        classifier_heldout_accuracy: classifier.heldout_accuracy(),
    };
    Ok(PreparedData {
        registry,
        tokenizer,
        classifier,
        train_mt,
        train_gen,
        dev,
        test,
        summary,
    })
}

impl PreparedData {
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(REGISTRY_FILE), self.registry.to_tsv())?;
        write_atomic(&dir.join(TOKENIZER_FILE), self.tokenizer.to_json())?;
        write_atomic(&dir.join(CLASSIFIER_FILE), self.classifier.to_json())?;
        write_atomic(&dir.join("train").join("mt.jsonl"), templating::to_jsonl(&self.train_mt))?;
        write_atomic(&dir.join("train").join("gen.jsonl"), templating::to_jsonl(&self.train_gen))?;
        self.dev.save(&dir.join("dev"), &self.registry)?;
        self.test.save(&dir.join("test"), &self.registry)?;
        // written last: its presence marks a complete preparation
        let summary = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        write_atomic(&dir.join(SUMMARY_FILE), summary + "\n")
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let registry = VarietyRegistry::load(&dir.join(REGISTRY_FILE))?;
        let tokenizer = Tokenizer::from_json(&read_to_string(&dir.join(TOKENIZER_FILE))?)?;
        let classifier = VarietyClassifier::from_json(&read_to_string(&dir.join(CLASSIFIER_FILE))?)?;
        let chats = |name: &str| -> Result<Vec<ChatExample>> {
            Ok(templating::from_jsonl(&read_to_string(&dir.join("train").join(name))?)?)
        };
        let summary_path = dir.join(SUMMARY_FILE);
        let summary = serde_json::from_str(&read_to_string(&summary_path)?)
            .map_err(|e| HarnessError::Validation(format!("{}: {e}", summary_path.display())))?;
        Ok(PreparedData {
            registry,
            tokenizer,
            classifier,
            train_mt: chats("mt.jsonl")?,
            train_gen: chats("gen.jsonl")?,
            dev: SplitSets::load(&dir.join("dev"))?,
            test: SplitSets::load(&dir.join("test"))?,
            summary,
        })
    }
}

/// Loads the prepared data in `dir`, preparing it first if it is missing.
pub fn prepare_or_load(spec: &ExperimentSpec, dir: &Path) -> Result<PreparedData> {
    if dir.join(SUMMARY_FILE).is_file() {
        return PreparedData::load(dir);
    }
    let data = prepare(spec)?;
    data.save(dir)?;
    Ok(data)
}
