//! Published reference numbers, kept apart from computed results and only
//! ever rendered next to them.

use std::fmt::Write as _;

use diglossia_model::decoding::GRID_VALUES;
use serde::{Deserialize, Serialize};

use crate::tradeoff::{record_order, TradeoffRecord};
use crate::{HarnessError, Result};

/// Best-configuration scores of four base models and two fine-tuned ones,
/// plus the full decoding grid of the four base models.
pub const EMBEDDED_REFERENCE: &str = include_str!("../data/paper_reference.csv");

pub const REFERENCE_COLUMNS: [&str; 8] = [
    "paper_reference",
    "table",
    "model",
    "variant",
    "top_p",
    "temperature",
    "diglossia",
    "fidelity",
];

pub const REFERENCE_LABEL: &str = "paper reference — not reproduced";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub paper_reference: bool,
    pub table: String,
    pub model: String,
    pub variant: String,
    pub top_p: Option<f64>,
    pub temperature: Option<f64>,
    pub diglossia: f64,
    pub fidelity: f64,
}

pub fn parse_reference(text: &str) -> Result<Vec<ReferenceRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != REFERENCE_COLUMNS {
        return Err(HarnessError::Validation(format!(
            "reference table columns {header:?} do not match {REFERENCE_COLUMNS:?}"
        )));
    }
    let mut rows = Vec::new();
    for row in r.deserialize::<ReferenceRow>() {
        let row = row.map_err(|e| HarnessError::Validation(format!("reference table: {e}")))?;
        if !row.paper_reference {
            return Err(HarnessError::Validation(format!(
                "reference row for {} is not tagged paper_reference=true",
                row.model
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Position of a decoding configuration in grid order (top-p outer,
/// temperature inner); configurations off the grid sort first.
pub fn grid_position(top_p: f64, temperature: f64) -> usize {
    let idx = |v: f64| GRID_VALUES.iter().position(|&g| g == v);
    match (idx(top_p), idx(temperature)) {
        (Some(p), Some(t)) => 1 + p * GRID_VALUES.len() + t,
        _ => 0,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

/// Computed records followed by the reference tables, each block in grid
/// order. The reference block is labeled as not reproduced.
pub fn compare_table(records: &[TradeoffRecord], reference: &str) -> Result<String> {
    let reference = parse_reference(reference)?;
    let mut out = String::new();
    if !records.is_empty() {
        let mut sorted: Vec<&TradeoffRecord> = records.iter().collect();
        sorted.sort_by(|a, b| record_order(a, b));
        writeln!(out, "## computed results").unwrap();
        writeln!(out, "split\ttag\tlambda\tlr\tcheckpoint\ttop_p\tT\tdiglossia\tfidelity\tbest").unwrap();
        for r in sorted {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.2}\t{:.3}\t{}",
                r.split,
                r.tag,
                opt(r.lambda),
                opt(r.learning_rate),
                r.checkpoint,
                r.top_p,
                r.temperature,
                r.diglossia,
                r.fidelity,
                if r.is_best { "*" } else { "" }
            )
            .unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "## {REFERENCE_LABEL}").unwrap();
    let mut tables: Vec<&str> = Vec::new();
    for r in &reference {
        if !tables.contains(&r.table.as_str()) {
            tables.push(&r.table);
        }
    }
    for table in tables {
        writeln!(out, "### table {table} ({REFERENCE_LABEL})").unwrap();
        writeln!(out, "model\tvariant\ttop_p\tT\tdiglossia\tfidelity").unwrap();
        let mut rows: Vec<&ReferenceRow> = reference.iter().filter(|r| r.table == table).collect();
        // stable: keeps file order within a model
        rows.sort_by_key(|r| {
            let model_rank = reference.iter().position(|x| x.model == r.model).unwrap_or(0);
            let pos = match (r.top_p, r.temperature) {
                (Some(p), Some(t)) => grid_position(p, t),
                _ => 0,
            };
            (model_rank, pos)
        });
        for r in rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.2}\t{:.3}",
                r.model,
                r.variant,
                opt(r.top_p),
                opt(r.temperature),
                r.diglossia,
                r.fidelity
            )
            .unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tradeoff::ModelTag;

    #[test]
    fn embedded_table_parses() {
        let rows = parse_reference(EMBEDDED_REFERENCE).unwrap();
        assert_eq!(rows.iter().filter(|r| r.table == "3").count(), 6);
        assert_eq!(rows.iter().filter(|r| r.table == "A.4").count(), 100);
        let find = |m: &str, v: &str| rows.iter().find(|r| r.table == "3" && r.model == m && r.variant == v).unwrap();
        assert_eq!((find("SmolLM3-3B", "base").diglossia, find("SmolLM3-3B", "base").fidelity), (22.23, 0.003));
        let s = find("SmolLM3-3B", "+MT+Instruction");
        assert_eq!((s.diglossia, s.fidelity), (33.65, 0.067));
        let l = find("Llama-3.1-8B-Instruct", "base");
        assert_eq!((l.diglossia, l.fidelity), (32.99, 0.065));
        let l = find("Llama-3.1-8B-Instruct", "+MT+Instruction");
        assert_eq!((l.diglossia, l.fidelity), (35.09, 0.233));
    }

    #[test]
    fn empty_records_give_reference_only() {
        let text = compare_table(&[], EMBEDDED_REFERENCE).unwrap();
        assert!(!text.contains("computed results"));
        assert!(text.contains(REFERENCE_LABEL));
    }

    #[test]
    fn grid_rows_in_reference_order() {
        let text = compare_table(&[], EMBEDDED_REFERENCE).unwrap();
        let smol: Vec<&str> = text
            .lines()
            .filter(|l| l.starts_with("SmolLM3-3B\tbase\t0") || l.starts_with("SmolLM3-3B\tbase\t1"))
            .collect();
        assert_eq!(smol.len(), 25);
        assert!(smol[0].starts_with("SmolLM3-3B\tbase\t0.1\t0.1\t21.96"));
        assert!(smol[1].starts_with("SmolLM3-3B\tbase\t0.1\t0.3\t"));
        assert!(smol[24].starts_with("SmolLM3-3B\tbase\t1\t1\t9.78"));
    }

    #[test]
    fn computed_rows_follow_grid_order() {
        let grid = diglossia_model::decode_grid(1);
        let recs: Vec<TradeoffRecord> = grid
            .iter()
            .rev()
            .map(|c| TradeoffRecord {
                split: "test".into(),
                tag: ModelTag::Baseline,
                lambda: None,
                learning_rate: None,
                checkpoint: 0,
                top_p: c.top_p,
                temperature: c.temperature,
                diglossia: 1.0,
                fidelity: 0.0,
                is_best: false,
            })
            .collect();
        let text = compare_table(&recs, EMBEDDED_REFERENCE).unwrap();
        let first = text.lines().find(|l| l.starts_with("test\tBaseline")).unwrap();
        assert!(first.contains("\t0.1\t0.1\t"), "{first}");
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let bad = "model,diglossia\nx,1\n";
        assert!(compare_table(&[], bad).unwrap_err().is_validation());
        let untagged = EMBEDDED_REFERENCE.replacen("\ntrue,", "\nfalse,", 1);
        assert!(compare_table(&[], &untagged).is_err());
    }
}
