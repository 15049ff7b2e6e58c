use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MetricError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    /// Translation quality (ChrF++ on the translation task).
    Diglossia,
    /// Dialect fidelity of sentence completions.
    Fidelity,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Diglossia => "diglossia",
            Dimension::Fidelity => "fidelity",
        })
    }
}

/// One score for one (variety, dataset) cell under one model and decoding
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    pub checkpoint: u64,
    pub split: String,
    pub top_p: f64,
    pub temperature: f64,
    pub dataset: String,
    pub variety: String,
    /// `src->tgt` for translation rows, empty for completion rows.
    pub direction: String,
    pub dimension: Dimension,
    pub score: f64,
    pub count: usize,
    /// Share of completions that repeated the prompt prefix.
    pub prefix_kept: Option<f64>,
    pub scorer: String,
}

/// Mean over (variety, dataset) cells of the per-cell mean score, so a cell
/// with many directions or rows weighs the same as a cell with one.
pub fn macro_average(rows: &[EvalRow], dimension: Dimension) -> Result<f64> {
    let mut cells: BTreeMap<(&str, &str), (f64, usize)> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.dimension == dimension) {
        let cell = cells
            .entry((row.variety.as_str(), row.dataset.as_str()))
            .or_insert((0.0, 0));
        cell.0 += row.score;
        cell.1 += 1;
    }
    if cells.is_empty() {
        return Err(MetricError::NoRows(dimension));
    }
    let sum: f64 = cells.values().map(|(s, n)| s / *n as f64).sum();
    Ok(sum / cells.len() as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn new(rows: Vec<EvalRow>) -> Self {
        EvalReport { rows }
    }

    pub fn macro_average(&self, dimension: Dimension) -> Result<f64> {
        macro_average(&self.rows, dimension)
    }

    /// Rows of one split, for macro-averaging dev and test separately.
    pub fn split(&self, split: &str) -> Vec<EvalRow> {
        self.rows.iter().filter(|r| r.split == split).cloned().collect()
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| MetricError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<std::result::Result<Vec<EvalRow>, _>>()?;
        Ok(EvalReport { rows })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&serde_json::to_string(row).expect("row serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| MetricError::Format(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<EvalRow>>>()?;
        Ok(EvalReport { rows })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }
}
