//! Dev-set evaluation: greedy translation scored with ChrF++, completion
//! fidelity, and held-out perplexity.

use std::collections::BTreeMap;

use diglossia_core::metrics::{
    corpus_chrf, macro_average, ChrfParams, Dimension, EvalRow, FidelityScorer,
};
use diglossia_core::rng;
use diglossia_core::templating::{self, GenOutput, GenTemplate};
use diglossia_core::{ChatExample, InstructionLanguage, Task, VarietyKind, VarietyRegistry};
use diglossia_model::{generate, DecodeConfig, Encoded, Model, Tokenizer};
use serde::{Deserialize, Serialize};

use crate::{Result, TrainError};

/// One named evaluation dataset of rendered chat examples.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub dataset: String,
    pub examples: Vec<ChatExample>,
}

impl EvalSet {
    pub fn new(dataset: impl Into<String>, examples: Vec<ChatExample>) -> Self {
        EvalSet {
            dataset: dataset.into(),
            examples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: usize,
    pub macro_chrf: Option<f64>,
    pub perplexity: Option<f64>,
}

pub trait Evaluator {
    fn evaluate(&self, model: &Model, tokenizer: &Tokenizer, step: usize) -> Result<EvalRecord>;
}

/// Identifies the rows produced by one evaluation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RowLabel {
    pub model: String,
    pub checkpoint: u64,
    pub split: String,
}

fn prompt_rng(seed: u64, id: &str) -> rng::Rng {
    rng::stream(seed, rng::label(id))
}

fn run_prompt(
    model: &Model,
    tokenizer: &Tokenizer,
    chat: &ChatExample,
    config: &DecodeConfig,
    seed: u64,
) -> Result<String> {
    let prompt = tokenizer.encode_prompt(chat.user_text());
    let mut r = prompt_rng(seed, chat.id());
    Ok(generate(model, tokenizer, &prompt, config, &mut r)?.text)
}

/// Decodes the translation of one rendered translation example.
pub fn translate(
    model: &Model,
    tokenizer: &Tokenizer,
    chat: &ChatExample,
    config: &DecodeConfig,
    seed: u64,
) -> Result<String> {
    Ok(templating::parse_mt_output(&run_prompt(model, tokenizer, chat, config, seed)?))
}

/// Completion template the example was rendered with.
pub fn gen_template(chat: &ChatExample, registry: &VarietyRegistry) -> Result<GenTemplate> {
    let variety = registry
        .get(&chat.meta.target_variety)
        .map_err(|e| TrainError::Config(e.to_string()))?;
    let language = chat.meta.instruction_language.unwrap_or(InstructionLanguage::English);
    GenTemplate::for_variety(variety, language).map_err(|e| TrainError::Config(e.to_string()))
}

/// Decodes and parses the completion of one rendered completion example.
pub fn complete(
    model: &Model,
    tokenizer: &Tokenizer,
    chat: &ChatExample,
    registry: &VarietyRegistry,
    config: &DecodeConfig,
    seed: u64,
) -> Result<GenOutput> {
    let template = gen_template(chat, registry)?;
    let raw = run_prompt(model, tokenizer, chat, config, seed)?;
    let prefix = chat.meta.prefix.as_deref().unwrap_or("");
    Ok(templating::parse_gen_output(&raw, prefix, &template))
}

fn is_dialect(registry: &VarietyRegistry, code: &str) -> bool {
    registry.get(code).map(|v| v.kind == VarietyKind::Dialect).unwrap_or(false)
}

/// Variety a translation pair is filed under: its dialect side, else its
/// target.
fn pair_variety<'a>(chat: &'a ChatExample, registry: &VarietyRegistry) -> &'a str {
    let tgt = chat.meta.target_variety.as_str();
    match chat.meta.source_variety.as_deref() {
        Some(src) if !is_dialect(registry, tgt) && is_dialect(registry, src) => src,
        _ => tgt,
    }
}

/// One corpus-level ChrF++ row per (dataset, variety, direction).
#[allow(clippy::too_many_arguments)]
pub fn translation_rows(
    model: &Model,
    tokenizer: &Tokenizer,
    sets: &[EvalSet],
    registry: &VarietyRegistry,
    config: &DecodeConfig,
    params: &ChrfParams,
    seed: u64,
    label: &RowLabel,
) -> Result<Vec<EvalRow>> {
    let mut rows = Vec::new();
    for set in sets {
        let mut groups: BTreeMap<(String, String), (Vec<String>, Vec<String>)> = BTreeMap::new();
        for chat in set.examples.iter().filter(|c| c.task == Task::Mt) {
            let hyp = translate(model, tokenizer, chat, config, seed)?;
            let direction = format!(
                "{}->{}",
                chat.meta.source_variety.as_deref().unwrap_or("?"),
                chat.meta.target_variety
            );
            let g = groups
                .entry((pair_variety(chat, registry).to_string(), direction))
                .or_default();
            g.0.push(hyp);
            g.1.push(chat.assistant_text().to_string());
        }
        for ((variety, direction), (hyps, refs)) in groups {
            rows.push(EvalRow {
                model: label.model.clone(),
                checkpoint: label.checkpoint,
                split: label.split.clone(),
                top_p: config.top_p,
                temperature: config.temperature,
                dataset: set.dataset.clone(),
                variety,
                direction,
                dimension: Dimension::Diglossia,
                score: corpus_chrf(&hyps, &refs, params)?,
                count: hyps.len(),
                prefix_kept: None,
                scorer: "chrf++".into(),
            });
        }
    }
    Ok(rows)
}

/// One mean-fidelity row per (dataset, target dialect). Completion prompts
/// for non-dialect targets are skipped.
#[allow(clippy::too_many_arguments)]
pub fn fidelity_rows(
    model: &Model,
    tokenizer: &Tokenizer,
    sets: &[EvalSet],
    registry: &VarietyRegistry,
    scorer: &dyn FidelityScorer,
    config: &DecodeConfig,
    seed: u64,
    label: &RowLabel,
) -> Result<Vec<EvalRow>> {
    let mut rows = Vec::new();
    for set in sets {
        // (score sum, kept count, n) per variety
        let mut groups: BTreeMap<String, (f64, usize, usize)> = BTreeMap::new();
        for chat in set.examples.iter().filter(|c| c.task == Task::Gen) {
            let target = chat.meta.target_variety.as_str();
            if !is_dialect(registry, target) {
                continue;
            }
            let out = complete(model, tokenizer, chat, registry, config, seed)?;
            let score = scorer.fidelity(&out.sentence, target)?;
            let g = groups.entry(target.to_string()).or_default();
            g.0 += score;
            g.1 += out.prefix_kept as usize;
            g.2 += 1;
        }
        for (variety, (sum, kept, n)) in groups {
            rows.push(EvalRow {
                model: label.model.clone(),
                checkpoint: label.checkpoint,
                split: label.split.clone(),
                top_p: config.top_p,
                temperature: config.temperature,
                dataset: set.dataset.clone(),
                variety,
                direction: String::new(),
                dimension: Dimension::Fidelity,
                score: sum / n as f64,
                count: n,
                prefix_kept: Some(kept as f64 / n as f64),
                scorer: scorer.label().to_string(),
            });
        }
    }
    Ok(rows)
}

/// Token-weighted perplexity over the supervised positions of `examples`.
pub fn perplexity(model: &Model, examples: &[Encoded], batch: usize) -> Result<f64> {
    let mut nll = 0.0;
    let mut tokens = 0usize;
    for chunk in examples.chunks(batch.max(1)) {
        let n: usize = chunk
            .iter()
            .map(|e| e.supervised.iter().skip(1).filter(|&&s| s).count())
            .sum();
        if n == 0 {
            continue;
        }
        nll += model.loss(chunk)? * n as f64;
        tokens += n;
    }
    if tokens == 0 {
        return Err(TrainError::Config("perplexity needs supervised tokens".into()));
    }
    Ok((nll / tokens as f64).exp())
}

/// Greedy macro ChrF++ on dev translation sets, plus perplexity over every
/// dev example (translation and completion).
#[derive(Debug, Clone)]
pub struct DevEvaluator {
    pub translation: Vec<EvalSet>,
    pub completion: Vec<EvalSet>,
    pub registry: VarietyRegistry,
    pub chrf: ChrfParams,
    pub max_new_tokens: usize,
    pub eval_batch: usize,
    pub seed: u64,
}

impl DevEvaluator {
    pub fn new(translation: Vec<EvalSet>, completion: Vec<EvalSet>, registry: VarietyRegistry) -> Self {
        DevEvaluator {
            translation,
            completion,
            registry,
            chrf: ChrfParams::default(),
            max_new_tokens: 64,
            eval_batch: 8,
            seed: 42,
        }
    }

    fn encoded(&self, tokenizer: &Tokenizer, max_len: usize) -> Result<Vec<Encoded>> {
        let mut out = Vec::new();
        for chat in self.translation.iter().chain(&self.completion).flat_map(|s| &s.examples) {
            out.push(tokenizer.encode_chat(chat, max_len)?);
        }
        Ok(out)
    }
}

impl Evaluator for DevEvaluator {
    fn evaluate(&self, model: &Model, tokenizer: &Tokenizer, step: usize) -> Result<EvalRecord> {
        let label = RowLabel {
            model: "dev".into(),
            checkpoint: step as u64,
            split: "dev".into(),
        };
        let has_mt = self.translation.iter().any(|s| !s.examples.is_empty());
        let macro_chrf = if has_mt {
            let rows = translation_rows(
                model,
                tokenizer,
                &self.translation,
                &self.registry,
                &DecodeConfig::greedy(self.max_new_tokens),
                &self.chrf,
                self.seed,
                &label,
            )?;
            Some(macro_average(&rows, Dimension::Diglossia)?)
        } else {
            None
        };
        let encoded = self.encoded(tokenizer, model.config().max_seq_len)?;
        let perplexity = if encoded.is_empty() {
            None
        } else {
            Some(perplexity(model, &encoded, self.eval_batch)?)
        };
        Ok(EvalRecord {
            step,
            macro_chrf,
            perplexity,
        })
    }
}
