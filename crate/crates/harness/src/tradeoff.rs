//! Trade-off records (translation quality against dialect fidelity, one per
//! model, checkpoint and decoding configuration) and per-model best
//! selection.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use diglossia_core::metrics::{macro_average, Dimension, EvalReport, EvalRow};
use serde::{Deserialize, Serialize};

use crate::reference::grid_position;
use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelTag {
    Baseline,
    #[serde(rename = "MT")]
    Mt,
    #[serde(rename = "GEN")]
    Gen,
    #[serde(rename = "MT+GEN")]
    MtGen,
}

impl ModelTag {
    pub fn for_lambda(lambda: f64) -> Self {
        if lambda >= 1.0 {
            ModelTag::Mt
        } else if lambda <= 0.0 {
            ModelTag::Gen
        } else {
            ModelTag::MtGen
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelTag::Baseline => "Baseline",
            ModelTag::Mt => "MT",
            ModelTag::Gen => "GEN",
            ModelTag::MtGen => "MT+GEN",
        })
    }
}

impl FromStr for ModelTag {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Baseline" => Ok(ModelTag::Baseline),
            "MT" => Ok(ModelTag::Mt),
            "GEN" => Ok(ModelTag::Gen),
            "MT+GEN" => Ok(ModelTag::MtGen),
            _ => Err(HarnessError::Validation(format!("unknown model tag `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRecord {
    /// `dev` or `test`; best selection is made per split.
    pub split: String,
    pub tag: ModelTag,
    /// Empty for the baseline.
    pub lambda: Option<f64>,
    pub learning_rate: Option<f64>,
    pub checkpoint: u64,
    pub top_p: f64,
    pub temperature: f64,
    pub diglossia: f64,
    pub fidelity: f64,
    pub is_best: bool,
}

/// Identifies which model a report belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportSource {
    pub tag: ModelTag,
    pub lambda: Option<f64>,
    pub learning_rate: Option<f64>,
}

fn config_key(r: &EvalRow) -> (u64, u64) {
    (r.top_p.to_bits(), r.temperature.to_bits())
}

/// One record per (split, checkpoint, decoding configuration) of the report.
/// Configurations come from the fidelity rows; when translation was only
/// decoded greedily, that greedy score is paired with every configuration.
pub fn records_from_report(report: &EvalReport, source: ReportSource) -> Result<Vec<TradeoffRecord>> {
    let mut out = Vec::new();
    let mut groups: BTreeMap<(String, u64), Vec<&EvalRow>> = BTreeMap::new();
    for r in &report.rows {
        groups.entry((r.split.clone(), r.checkpoint)).or_default().push(r);
    }
    for ((split, checkpoint), rows) in groups {
        let of = |dim: Dimension, key: Option<(u64, u64)>| -> Vec<EvalRow> {
            rows.iter()
                .filter(|r| r.dimension == dim && key.is_none_or(|k| config_key(r) == k))
                .map(|r| (*r).clone())
                .collect()
        };
        let mut configs: Vec<(f64, f64)> = Vec::new();
        let basis = if of(Dimension::Fidelity, None).is_empty() {
            Dimension::Diglossia
        } else {
            Dimension::Fidelity
        };
        for r in rows.iter().filter(|r| r.dimension == basis) {
            if !configs.iter().any(|&(p, t)| p == r.top_p && t == r.temperature) {
                configs.push((r.top_p, r.temperature));
            }
        }
        let greedy: Vec<EvalRow> = rows
            .iter()
            .filter(|r| r.dimension == Dimension::Diglossia && r.temperature == 0.0)
            .map(|r| (*r).clone())
            .collect();
        for (top_p, temperature) in configs {
            let key = Some((top_p.to_bits(), temperature.to_bits()));
            let dig_rows = of(Dimension::Diglossia, key);
            let diglossia = if !dig_rows.is_empty() {
                macro_average(&dig_rows, Dimension::Diglossia)?
            } else if !greedy.is_empty() {
                macro_average(&greedy, Dimension::Diglossia)?
            } else {
                f64::NAN
            };
            let fid_rows = of(Dimension::Fidelity, key);
            let fidelity = if fid_rows.is_empty() {
                f64::NAN
            } else {
                macro_average(&fid_rows, Dimension::Fidelity)?
            };
            out.push(TradeoffRecord {
                split: split.clone(),
                tag: source.tag,
                lambda: source.lambda,
                learning_rate: source.learning_rate,
                checkpoint,
                top_p,
                temperature,
                diglossia,
                fidelity,
                is_best: false,
            });
        }
    }
    Ok(out)
}

/// Sets `is_best` on exactly one record per (split, model tag): the highest
/// diglossia among records whose fidelity is in the top decile of that
/// model's records, falling back to the highest diglossia when no record
/// has a fidelity score. Ties keep the earliest record.
pub fn select_best(records: &mut [TradeoffRecord]) {
    let mut groups: BTreeMap<(String, ModelTag), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter_mut().enumerate() {
        r.is_best = false;
        groups.entry((r.split.clone(), r.tag)).or_default().push(i);
    }
    for idx in groups.values() {
        let mut fid: Vec<f64> = idx
            .iter()
            .map(|&i| records[i].fidelity)
            .filter(|f| f.is_finite())
            .collect();
        let candidates: Vec<usize> = if fid.is_empty() {
            idx.clone()
        } else {
            fid.sort_by(|a, b| b.total_cmp(a));
            let k = fid.len().div_ceil(10);
            let cutoff = fid[k - 1];
            idx.iter()
                .copied()
                .filter(|&i| records[i].fidelity.is_finite() && records[i].fidelity >= cutoff)
                .collect()
        };
        let key = |i: usize| {
            let d = records[i].diglossia;
            if d.is_finite() {
                d
            } else {
                f64::NEG_INFINITY
            }
        };
        let mut best = candidates[0];
        for &i in &candidates[1..] {
            if key(i) > key(best) {
                best = i;
            }
        }
        records[best].is_best = true;
    }
}

/// Canonical record order: split, tag, lambda, learning rate, checkpoint,
/// then grid position.
pub fn record_order(a: &TradeoffRecord, b: &TradeoffRecord) -> std::cmp::Ordering {
    a.split
        .cmp(&b.split)
        .then(a.tag.cmp(&b.tag))
        .then(a.lambda.unwrap_or(-1.0).total_cmp(&b.lambda.unwrap_or(-1.0)))
        .then(a.learning_rate.unwrap_or(-1.0).total_cmp(&b.learning_rate.unwrap_or(-1.0)))
        .then(a.checkpoint.cmp(&b.checkpoint))
        .then(grid_position(a.top_p, a.temperature).cmp(&grid_position(b.top_p, b.temperature)))
}

/// Builds records from every report in canonical order and flags the best
/// per model.
pub fn emit_tradeoff(reports: &[(ReportSource, EvalReport)]) -> Result<Vec<TradeoffRecord>> {
    if reports.is_empty() {
        return Err(HarnessError::Validation("no reports to build trade-off records from".into()));
    }
    let mut records = Vec::new();
    for (source, report) in reports {
        records.extend(records_from_report(report, *source)?);
    }
    records.sort_by(record_order);
    select_best(&mut records);
    Ok(records)
}

pub const RECORD_COLUMNS: [&str; 10] = [
    "split",
    "tag",
    "lambda",
    "learning_rate",
    "checkpoint",
    "top_p",
    "temperature",
    "diglossia",
    "fidelity",
    "is_best",
];

pub fn to_csv(records: &[TradeoffRecord]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Validation(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn from_csv(text: &str) -> Result<Vec<TradeoffRecord>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RECORD_COLUMNS {
        return Err(HarnessError::Validation(format!(
            "trade-off CSV columns {header:?} do not match {RECORD_COLUMNS:?}"
        )));
    }
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row.map_err(|e| HarnessError::Validation(format!("trade-off CSV: {e}")))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(tag: ModelTag, dig: f64, fid: f64) -> TradeoffRecord {
        TradeoffRecord {
            split: "test".into(),
            tag,
            lambda: Some(0.5),
            learning_rate: Some(5e-5),
            checkpoint: 10,
            top_p: 1.0,
            temperature: 0.6,
            diglossia: dig,
            fidelity: fid,
            is_best: false,
        }
    }

    #[test]
    fn single_record_is_best() {
        let mut r = vec![rec(ModelTag::Mt, 10.0, 0.1)];
        select_best(&mut r);
        assert!(r[0].is_best);
    }

    #[test]
    fn dominant_record_wins() {
        let mut r = vec![rec(ModelTag::Mt, 10.0, 0.1), rec(ModelTag::Mt, 20.0, 0.3)];
        select_best(&mut r);
        assert_eq!(r.iter().map(|x| x.is_best).collect::<Vec<_>>(), vec![false, true]);
    }

    #[test]
    fn top_decile_then_diglossia() {
        // 20 records: the top decile is the two with fidelity 0.9 and 0.8
        let mut r: Vec<TradeoffRecord> = (0..18).map(|i| rec(ModelTag::Gen, 50.0 + i as f64, 0.1)).collect();
        r.push(rec(ModelTag::Gen, 5.0, 0.9));
        r.push(rec(ModelTag::Gen, 7.0, 0.8));
        select_best(&mut r);
        assert!(r[19].is_best);
        assert_eq!(r.iter().filter(|x| x.is_best).count(), 1);
    }

    #[test]
    fn one_best_per_tag_and_split() {
        let mut r = vec![rec(ModelTag::Gen, 1.0, 0.5), rec(ModelTag::Mt, 2.0, 0.1), rec(ModelTag::Mt, 3.0, 0.1)];
        r.push(TradeoffRecord {
            split: "dev".into(),
            ..rec(ModelTag::Mt, 1.0, 0.1)
        });
        select_best(&mut r);
        assert_eq!(r.iter().filter(|x| x.is_best).count(), 3);
        assert!(r[2].is_best);
    }

    #[test]
    fn no_fidelity_falls_back_to_diglossia() {
        let mut r = vec![rec(ModelTag::Mt, 2.0, f64::NAN), rec(ModelTag::Mt, 3.0, f64::NAN)];
        select_best(&mut r);
        assert!(r[1].is_best);
    }

    #[test]
    fn selection_is_a_pure_function_of_the_csv() {
        let mut r = vec![rec(ModelTag::Mt, 2.0, 0.2), rec(ModelTag::Gen, 3.0, 0.7), rec(ModelTag::Mt, 1.0, 0.3)];
        select_best(&mut r);
        let text = to_csv(&r).unwrap();
        let mut back = from_csv(&text).unwrap();
        assert_eq!(back, r);
        select_best(&mut back);
        assert_eq!(to_csv(&back).unwrap(), text);
    }

    #[test]
    fn wrong_columns_rejected() {
        assert!(from_csv("a,b\n1,2\n").unwrap_err().is_validation());
    }
}
