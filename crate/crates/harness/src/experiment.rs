//! Full experiment: prepare data, evaluate the untrained baseline, train and
//! evaluate every (lambda, learning rate) variant, then emit trade-off
//! records and the reference comparison. Every stage writes its outputs
//! before the next starts, so a rerun skips whatever is already done.

use std::path::{Path, PathBuf};

use diglossia_core::metrics::{ChrfParams, EvalReport, FidelityScorer};
use diglossia_core::VarietyRegistry;
use diglossia_model::checkpoint;
use diglossia_model::{decode_grid, DecodeConfig, Model, Tokenizer};
use diglossia_training::evaluator::{fidelity_rows, translation_rows, RowLabel};
use diglossia_training::{encode_pool, run_training, DevEvaluator, TrainOutcome};
use serde::{Deserialize, Serialize};

use crate::data::{prepare_or_load, PreparedData, SplitSets};
use crate::manifest::{RunManifest, StageStatus};
use crate::reference::{compare_table, EMBEDDED_REFERENCE};
use crate::spec::{ExperimentSpec, Variant};
use crate::tradeoff::{self, emit_tradeoff, ModelTag, ReportSource, TradeoffRecord};
use crate::{read_to_string, write_atomic, HarnessError, Result};

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSONL: &str = "report.jsonl";
pub const RESULT_FILE: &str = "result.json";
pub const TRADEOFF_CSV: &str = "tradeoff.csv";
pub const COMPARISON_FILE: &str = "comparison.txt";
pub const BASELINE_DIR: &str = "baseline";

/// What a finished model directory records about itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub tag: ModelTag,
    pub lambda: Option<f64>,
    pub learning_rate: Option<f64>,
    pub checkpoint: u64,
    pub checkpoint_file: String,
    pub total_steps: usize,
}

impl ModelResult {
    pub fn source(&self) -> ReportSource {
        ReportSource {
            tag: self.tag,
            lambda: self.lambda,
            learning_rate: self.learning_rate,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub records: Vec<TradeoffRecord>,
    /// Models trained (not resumed) in this call.
    pub trained: usize,
    pub skipped: usize,
}

/// Decoding configurations for the two dimensions.
pub fn eval_configs(spec: &ExperimentSpec) -> (Vec<DecodeConfig>, Vec<DecodeConfig>) {
    let n = spec.eval.max_new_tokens;
    let greedy = vec![DecodeConfig::greedy(n)];
    let diglossia = if spec.eval.grid_diglossia { decode_grid(n) } else { greedy.clone() };
    let fidelity = if spec.eval.grid { decode_grid(n) } else { greedy };
    (diglossia, fidelity)
}

/// Scores one model on labeled splits: translation under each diglossia
/// configuration, completion fidelity under each fidelity configuration.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_model(
    model: &Model,
    tokenizer: &Tokenizer,
    registry: &VarietyRegistry,
    scorer: &dyn FidelityScorer,
    splits: &[(&str, &SplitSets)],
    diglossia_configs: &[DecodeConfig],
    fidelity_configs: &[DecodeConfig],
    model_id: &str,
    checkpoint: u64,
    seed: u64,
) -> Result<EvalReport> {
    let mut rows = Vec::new();
    for (split, sets) in splits {
        let label = RowLabel {
            model: model_id.to_string(),
            checkpoint,
            split: split.to_string(),
        };
        for cfg in diglossia_configs {
            rows.extend(translation_rows(
                model,
                tokenizer,
                &sets.mt,
                registry,
                cfg,
                &ChrfParams::default(),
                seed,
                &label,
            )?);
        }
        for cfg in fidelity_configs {
            rows.extend(fidelity_rows(model, tokenizer, &sets.gen, registry, scorer, cfg, seed, &label)?);
        }
    }
    Ok(EvalReport::new(rows))
}

fn evaluate_for_spec(
    spec: &ExperimentSpec,
    data: &PreparedData,
    model: &Model,
    model_id: &str,
    checkpoint: u64,
) -> Result<EvalReport> {
    let (dig, fid) = eval_configs(spec);
    let dev = data.dev.limited(spec.eval.dev_limit);
    let test = data.test.limited(spec.eval.test_limit);
    evaluate_model(
        model,
        &data.tokenizer,
        &data.registry,
        &data.classifier,
        &[("dev", &dev), ("test", &test)],
        &dig,
        &fid,
        model_id,
        checkpoint,
        spec.seed,
    )
}

fn save_report(dir: &Path, report: &EvalReport) -> Result<()> {
    write_atomic(&dir.join(REPORT_CSV), report.to_csv_string()?)?;
    write_atomic(&dir.join(REPORT_JSONL), report.to_jsonl())
}

fn save_result(dir: &Path, result: &ModelResult) -> Result<()> {
    let text = serde_json::to_string_pretty(result).expect("result serializes");
    write_atomic(&dir.join(RESULT_FILE), text + "\n")
}

/// A model directory is complete once its result file exists (written
/// after the report).
pub fn load_model_result(dir: &Path) -> Result<Option<(ModelResult, EvalReport)>> {
    let path = dir.join(RESULT_FILE);
    if !path.is_file() {
        return Ok(None);
    }
    let result: ModelResult = serde_json::from_str(&read_to_string(&path)?)
        .map_err(|e| HarnessError::Validation(format!("{}: {e}", path.display())))?;
    let report = EvalReport::load_csv(&dir.join(REPORT_CSV))?;
    Ok(Some((result, report)))
}

pub fn base_model(spec: &ExperimentSpec, data: &PreparedData) -> Result<Model> {
    Ok(Model::new(spec.model.config(data.tokenizer.vocab_size()), spec.seed)?)
}

/// Untrained model evaluated over the decoding grid.
pub fn run_baseline(spec: &ExperimentSpec, data: &PreparedData, dir: &Path) -> Result<(ModelResult, EvalReport)> {
    let model = base_model(spec, data)?;
    checkpoint::save(
        &dir.join("step-000000.ckpt"),
        &model,
        &data.tokenizer,
        None,
        &serde_json::json!({"step": 0, "baseline": true}),
    )?;
    let report = evaluate_for_spec(spec, data, &model, BASELINE_DIR, 0)?;
    let result = ModelResult {
        tag: ModelTag::Baseline,
        lambda: None,
        learning_rate: None,
        checkpoint: 0,
        checkpoint_file: "step-000000.ckpt".into(),
        total_steps: 0,
    };
    save_report(dir, &report)?;
    save_result(dir, &result)?;
    Ok((result, report))
}

/// Trains one variant into `dir/checkpoints` (resuming if interrupted) with
/// dev ChrF++ checkpoint selection.
pub fn train_variant(spec: &ExperimentSpec, data: &PreparedData, variant: &Variant, dir: &Path) -> Result<TrainOutcome> {
    let cfg = spec.train_config(variant);
    let max_len = spec.model.max_seq_len;
    let mt = encode_pool(&data.train_mt, &data.tokenizer, max_len)?;
    let gen = encode_pool(&data.train_gen, &data.tokenizer, max_len)?;
    let selection = data.dev.limited(spec.eval.selection_limit);
    let mut evaluator = DevEvaluator::new(selection.mt, selection.gen, data.registry.clone());
    evaluator.max_new_tokens = spec.eval.max_new_tokens;
    evaluator.eval_batch = cfg.effective().eval_batch;
    evaluator.seed = spec.seed;
    let model = base_model(spec, data)?;
    Ok(run_training(
        model,
        &data.tokenizer,
        &mt,
        &gen,
        &cfg,
        Some(&evaluator),
        Some(&dir.join("checkpoints")),
    )?)
}

/// Trains, selects the best checkpoint and evaluates it.
pub fn run_variant(
    spec: &ExperimentSpec,
    data: &PreparedData,
    variant: &Variant,
    dir: &Path,
) -> Result<(ModelResult, EvalReport)> {
    let outcome = train_variant(spec, data, variant, dir)?;
    let best = outcome.best().cloned().ok_or_else(|| HarnessError::Stage {
        stage: "select".into(),
        message: "training produced no checkpoint".into(),
    })?;
    let path = best.path.clone().ok_or_else(|| HarnessError::Stage {
        stage: "select".into(),
        message: "best checkpoint has no file".into(),
    })?;
    let model = checkpoint::load(&path)?.model;
    let name = variant.dir_name();
    let report = evaluate_for_spec(spec, data, &model, &name, best.step as u64)?;
    let result = ModelResult {
        tag: ModelTag::for_lambda(variant.lambda),
        lambda: Some(variant.lambda),
        learning_rate: Some(variant.learning_rate),
        checkpoint: best.step as u64,
        checkpoint_file: format!("checkpoints/{}", path.file_name().unwrap_or_default().to_string_lossy()),
        total_steps: outcome.total_steps,
    };
    save_report(dir, &report)?;
    save_result(dir, &result)?;
    Ok((result, report))
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let dir = spec.resolved_output_dir();
    std::fs::create_dir_all(&dir).map_err(crate::io_err(&dir))?;
    write_atomic(&dir.join("spec.toml"), spec.to_toml())?;
    let mut manifest = RunManifest::open(&dir)?;

    let data_dir = dir.join("data");
    let data = manifest.stage("prepare", &[data_dir.display().to_string()], || {
        prepare_or_load(spec, &data_dir)
    })?;

    let mut reports: Vec<(ReportSource, EvalReport)> = Vec::new();
    let (mut trained, mut skipped) = (0, 0);

    let mut jobs: Vec<(String, Option<Variant>)> = Vec::new();
    if spec.sweep.baseline {
        jobs.push((BASELINE_DIR.to_string(), None));
    }
    for v in spec.variants() {
        jobs.push((v.dir_name(), Some(v)));
    }
    for (name, variant) in jobs {
        let model_dir = dir.join(&name);
        let inputs = vec![model_dir.display().to_string()];
        if let Some((result, report)) = load_model_result(&model_dir)? {
            manifest.record(&name, StageStatus::Skipped, &inputs, None)?;
            reports.push((result.source(), report));
            skipped += 1;
            continue;
        }
        let (result, report) = manifest.stage(&name, &inputs, || match &variant {
            None => run_baseline(spec, &data, &model_dir),
            Some(v) => run_variant(spec, &data, v, &model_dir),
        })?;
        if variant.is_some() {
            trained += 1;
        }
        reports.push((result.source(), report));
    }

    let records = manifest.stage("tradeoff", &[dir.display().to_string()], || {
        let records = emit_tradeoff(&reports)?;
        write_atomic(&dir.join(TRADEOFF_CSV), tradeoff::to_csv(&records)?)?;
        write_atomic(&dir.join(COMPARISON_FILE), compare_table(&records, EMBEDDED_REFERENCE)?)?;
        Ok(records)
    })?;
    Ok(ExperimentOutcome {
        dir,
        records,
        trained,
        skipped,
    })
}

/// Rebuilds trade-off records from the model directories of a run.
pub fn collect_run(dir: &Path) -> Result<Vec<(ReportSource, EvalReport)>> {
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(crate::io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut out = Vec::new();
    for d in subdirs {
        if let Some((result, report)) = load_model_result(&d)? {
            out.push((result.source(), report));
        }
    }
    if out.is_empty() {
        return Err(HarnessError::Validation(format!("{}: no finished model directories", dir.display())));
    }
    Ok(out)
}
