//! The optimization loop: gradient accumulation over micro-batches, global
//! norm clipping, AdamW under the warmup-cosine schedule, and evaluation plus
//! checkpointing every `eval_every` optimizer steps and at the end.

use std::fs;
use std::path::{Path, PathBuf};

use diglossia_core::rng;
use diglossia_core::Task;
use diglossia_model::checkpoint::{self, OptimizerState};
use diglossia_model::{Model, Tokenizer};
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::evaluator::{EvalRecord, Evaluator};
use crate::mixing::{BatchStream, MixStream, PoolCycle, TrainExample};
use crate::optim::{clip_grad_norm, AdamW};
use crate::schedule::CosineSchedule;
use crate::{Result, TrainError};

pub const LOG_FILE: &str = "train_log.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    /// One micro-batch; `step` is the 1-based optimizer step it feeds.
    Micro {
        step: usize,
        micro: usize,
        task: Task,
        loss: f64,
    },
    Step {
        step: usize,
        lr: f64,
        grad_norm: f64,
        clipped_norm: f64,
        loss: f64,
    },
    Eval {
        step: usize,
        macro_chrf: Option<f64>,
        perplexity: Option<f64>,
        checkpoint: Option<String>,
    },
}

impl LogRecord {
    pub fn step(&self) -> usize {
        match self {
            LogRecord::Micro { step, .. } | LogRecord::Step { step, .. } | LogRecord::Eval { step, .. } => *step,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
}

impl TrainLog {
    /// Micro-batch losses in order.
    pub fn losses(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| match r {
                LogRecord::Micro { loss, .. } => Some(*loss),
                _ => None,
            })
            .collect()
    }

    pub fn tasks(&self) -> Vec<Task> {
        self.records
            .iter()
            .filter_map(|r| match r {
                LogRecord::Micro { task, .. } => Some(*task),
                _ => None,
            })
            .collect()
    }

    pub fn steps(&self) -> impl Iterator<Item = &LogRecord> {
        self.records.iter().filter(|r| matches!(r, LogRecord::Step { .. }))
    }

    pub fn evals(&self) -> impl Iterator<Item = &LogRecord> {
        self.records.iter().filter(|r| matches!(r, LogRecord::Eval { .. }))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("log record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| TrainError::Resume(format!("log line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainLog { records })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRef {
    pub step: usize,
    pub path: Option<PathBuf>,
    pub macro_chrf: Option<f64>,
    pub perplexity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: TrainLog,
    pub checkpoints: Vec<CheckpointRef>,
    pub total_steps: usize,
    /// True when the run was already complete on disk and nothing was trained.
    pub resumed_complete: bool,
}

impl TrainOutcome {
    pub fn best(&self) -> Option<&CheckpointRef> {
        select_best_checkpoint(&self.checkpoints)
    }
}

/// Index of the highest score; ties go to the later entry.
pub fn argmax_later(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| *s >= scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Checkpoint with the highest dev macro ChrF++, later step on ties.
/// Checkpoints without a score only win when none has one, in which case the
/// last checkpoint is returned. Perplexity does not take part.
pub fn select_best_checkpoint(checkpoints: &[CheckpointRef]) -> Option<&CheckpointRef> {
    let scored: Vec<&CheckpointRef> = checkpoints.iter().filter(|c| c.macro_chrf.is_some()).collect();
    if scored.is_empty() {
        return checkpoints.last();
    }
    let scores: Vec<f64> = scored.iter().map(|c| c.macro_chrf.unwrap()).collect();
    argmax_later(&scores).map(|i| scored[i])
}

pub fn checkpoint_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("step-{step:06}.ckpt"))
}

fn write_err(path: &Path, e: impl std::error::Error + Send + Sync + 'static) -> TrainError {
    TrainError::Write {
        path: path.to_path_buf(),
        source: Box::new(e),
    }
}

fn write_log(dir: &Path, log: &TrainLog) -> Result<()> {
    let path = dir.join(LOG_FILE);
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, log.to_jsonl()).map_err(|e| write_err(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| write_err(&path, e))
}

struct Loop<'a> {
    model: Model,
    tokenizer: &'a Tokenizer,
    config: TrainConfig,
    total_steps: usize,
    evaluator: Option<&'a dyn Evaluator>,
    out_dir: Option<&'a Path>,
}

struct ResumePoint {
    step: usize,
    model: Model,
    optimizer: OptimizerState,
    log: TrainLog,
}

fn find_resume(dir: &Path, total_steps: usize) -> Result<Option<ResumePoint>> {
    let log_path = dir.join(LOG_FILE);
    if !log_path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&log_path).map_err(|e| TrainError::Resume(e.to_string()))?;
    let log = TrainLog::from_jsonl(&text)?;
    let last = log
        .evals()
        .filter_map(|r| match r {
            LogRecord::Eval {
                step,
                checkpoint: Some(_),
                ..
            } if *step <= total_steps => Some(*step),
            _ => None,
        })
        .max();
    let Some(step) = last else {
        return Ok(None);
    };
    let path = checkpoint_path(dir, step);
    let ckpt = checkpoint::load(&path).map_err(|e| TrainError::Resume(format!("{}: {e}", path.display())))?;
    let optimizer = ckpt
        .optimizer
        .ok_or_else(|| TrainError::Resume(format!("{} has no optimizer state", path.display())))?;
    let records = log.records.into_iter().filter(|r| r.step() <= step).collect();
    Ok(Some(ResumePoint {
        step,
        model: ckpt.model,
        optimizer,
        log: TrainLog { records },
    }))
}

fn checkpoints_from_log(log: &TrainLog) -> Vec<CheckpointRef> {
    log.evals()
        .filter_map(|r| match r {
            LogRecord::Eval {
                step,
                macro_chrf,
                perplexity,
                checkpoint,
            } => Some(CheckpointRef {
                step: *step,
                path: checkpoint.as_ref().map(PathBuf::from),
                macro_chrf: *macro_chrf,
                perplexity: *perplexity,
            }),
            _ => None,
        })
        .collect()
}

impl Loop<'_> {
    fn run<S: BatchStream>(mut self, stream: &mut S) -> Result<TrainOutcome> {
        let cfg = self.config.clone();
        if let Some(lora) = &cfg.lora {
            if self.model.lora_config().is_none() {
                self.model.apply_lora(lora, cfg.seed)?;
            }
        }
        let schedule = CosineSchedule::new(cfg.learning_rate, cfg.warmup_ratio, self.total_steps);
        let mut opt = AdamW::new(
            self.model.params(),
            cfg.adam_beta1,
            cfg.adam_beta2,
            cfg.adam_eps,
            cfg.weight_decay,
        );
        let mut log = TrainLog::default();
        let mut start = 0;

        if let Some(dir) = self.out_dir {
            fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
            if let Some(point) = find_resume(dir, self.total_steps)? {
                if point.model.params().params.len() != opt.state.m.len() {
                    return Err(TrainError::Resume("checkpoint layout does not match the model".into()));
                }
                log::info!("resuming from step {}", point.step);
                self.model = point.model;
                opt.state = point.optimizer;
                log = point.log;
                start = point.step;
                for _ in 0..start * cfg.grad_accum {
                    stream.next_batch();
                }
            }
        }
        if start == self.total_steps && start > 0 {
            return Ok(TrainOutcome {
                model: self.model,
                checkpoints: checkpoints_from_log(&log),
                log,
                total_steps: self.total_steps,
                resumed_complete: true,
            });
        }

        let scale = 1.0 / cfg.grad_accum as f64;
        for s in start..self.total_steps {
            let step = s + 1;
            self.model.zero_grad();
            let mut step_loss = 0.0;
            for a in 0..cfg.grad_accum {
                let micro = s * cfg.grad_accum + a;
                let batch = stream.next_batch();
                let mut drop_rng = rng::stream(cfg.seed, rng::label(&format!("dropout-{micro}")));
                let loss = self.model.loss_and_grad(&batch.encoded(), Some(&mut drop_rng), scale)?;
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        step,
                        micro,
                        loss,
                        ids: batch.ids(),
                    });
                }
                step_loss += loss * scale;
                log.records.push(LogRecord::Micro {
                    step,
                    micro,
                    task: batch.task,
                    loss,
                });
            }
            let (grad_norm, clipped_norm) = clip_grad_norm(self.model.params_mut(), cfg.grad_clip_norm);
            let lr = schedule.lr(s);
            opt.step(self.model.params_mut(), lr);
            log.records.push(LogRecord::Step {
                step,
                lr,
                grad_norm,
                clipped_norm,
                loss: step_loss,
            });

            if step % cfg.eval_every == 0 || step == self.total_steps {
                let eval = match self.evaluator {
                    Some(e) => e.evaluate(&self.model, self.tokenizer, step)?,
                    None => EvalRecord {
                        step,
                        macro_chrf: None,
                        perplexity: None,
                    },
                };
                log::info!(
                    "step {step}/{}: loss {step_loss:.4}, dev chrf {:?}, ppl {:?}",
                    self.total_steps,
                    eval.macro_chrf,
                    eval.perplexity
                );
                let mut ckpt = None;
                if let Some(dir) = self.out_dir {
                    let path = checkpoint_path(dir, step);
                    let meta = serde_json::json!({
                        "step": step,
                        "lambda": cfg.lambda,
                        "learning_rate": cfg.learning_rate,
                        "macro_chrf": eval.macro_chrf,
                        "perplexity": eval.perplexity,
                    });
                    checkpoint::save(&path, &self.model, self.tokenizer, Some(&opt.state), &meta)
                        .map_err(|e| write_err(&path, e))?;
                    ckpt = Some(path.to_string_lossy().into_owned());
                }
                log.records.push(LogRecord::Eval {
                    step,
                    macro_chrf: eval.macro_chrf,
                    perplexity: eval.perplexity,
                    checkpoint: ckpt,
                });
                if let Some(dir) = self.out_dir {
                    write_log(dir, &log)?;
                }
            }
        }
        Ok(TrainOutcome {
            model: self.model,
            checkpoints: checkpoints_from_log(&log),
            log,
            total_steps: self.total_steps,
            resumed_complete: false,
        })
    }
}

/// Joint training: each micro-batch comes from the translation pool with
/// probability `lambda`. With `out_dir`, checkpoints and the log are written
/// there and an interrupted run picks up from its last checkpoint.
pub fn run_training(
    model: Model,
    tokenizer: &Tokenizer,
    mt: &[TrainExample],
    gen: &[TrainExample],
    config: &TrainConfig,
    evaluator: Option<&dyn Evaluator>,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let cfg = config.effective();
    let defining = if cfg.lambda < 1.0 { gen.len() } else { mt.len() };
    let mut stream = MixStream::new(mt, gen, cfg.lambda, cfg.per_device_batch, cfg.seed)?;
    let total_steps = cfg.total_steps(defining, cfg.defining_share());
    Loop {
        model,
        tokenizer,
        config: cfg,
        total_steps,
        evaluator,
        out_dir,
    }
    .run(&mut stream)
}

/// Single-objective training on one pool; `config.lambda` is ignored.
pub fn run_single_task(
    model: Model,
    tokenizer: &Tokenizer,
    task: Task,
    pool: &[TrainExample],
    config: &TrainConfig,
    evaluator: Option<&dyn Evaluator>,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let cfg = config.effective();
    let mut stream = PoolCycle::new(task, pool, cfg.per_device_batch, cfg.seed)?;
    let total_steps = cfg.total_steps(pool.len(), 1.0);
    Loop {
        model,
        tokenizer,
        config: cfg,
        total_steps,
        evaluator,
        out_dir,
    }
    .run(&mut stream)
}
