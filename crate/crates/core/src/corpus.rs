//! Bilingual and monolingual corpora.
//!
//! Two on-disk layouts are accepted. TSV files carry `src<TAB>tgt` (or a single
//! text column for monolingual data) with varieties supplied out of band.
//! JSONL files carry one object per line with explicit variety fields. All text
//! is NFC-normalized on load and every record is validated before it is
//! returned, so downstream code never sees an invalid example.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::rng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: empty text")]
    EmptyText { line: usize },
    #[error("unknown variety code `{0}`")]
    UnknownVariety(String),
    #[error("line {line}: source and target variety are both `{code}`")]
    SameVariety { line: usize, code: String },
    #[error("line {line}: variety `{code}` has kind {kind}, expected standard or dialect")]
    MonoKind {
        line: usize,
        code: String,
        kind: VarietyKind,
    },
    #[error("TSV input needs varieties supplied out of band")]
    MissingVarieties,
    #[error("duplicate ids: {}", .0.join(", "))]
    DuplicateIds(Vec<String>),
    #[error("invalid split ratios {0:?}: need three non-negative fractions summing to 1")]
    InvalidRatios([f64; 3]),
    #[error("invalid registry: {0}")]
    Registry(String),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarietyKind {
    Standard,
    Dialect,
    Foreign,
}

impl fmt::Display for VarietyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarietyKind::Standard => "standard",
            VarietyKind::Dialect => "dialect",
            VarietyKind::Foreign => "foreign",
        })
    }
}

impl std::str::FromStr for VarietyKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" => Ok(VarietyKind::Standard),
            "dialect" => Ok(VarietyKind::Dialect),
            "foreign" => Ok(VarietyKind::Foreign),
            other => Err(CorpusError::Registry(format!("unknown variety kind `{other}`"))),
        }
    }
}

/// A language variety. The two optional strings hold the instruction and
/// completion preamble used when the sentence-completion task is phrased in
/// the variety itself rather than in English.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variety {
    pub code: String,
    pub display_name: String,
    pub kind: VarietyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_instruction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_preamble: Option<String>,
}

impl Variety {
    pub fn new(code: impl Into<String>, display_name: impl Into<String>, kind: VarietyKind) -> Self {
        Variety {
            code: code.into(),
            display_name: display_name.into(),
            kind,
            gen_instruction: None,
            gen_preamble: None,
        }
    }

    pub fn with_dialectal_templates(
        mut self,
        instruction: impl Into<String>,
        preamble: impl Into<String>,
    ) -> Self {
        self.gen_instruction = Some(instruction.into());
        self.gen_preamble = Some(preamble.into());
        self
    }
}

/// Ordered set of varieties with unique codes and at most one standard.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarietyRegistry {
    varieties: Vec<Variety>,
}

const REGISTRY_HEADER: [&str; 5] = [
    "code",
    "display_name",
    "kind",
    "gen_instruction",
    "gen_preamble",
];

impl VarietyRegistry {
    pub fn new(varieties: Vec<Variety>) -> Result<Self> {
        let mut seen = HashSet::new();
        for v in &varieties {
            if v.code.trim().is_empty() {
                return Err(CorpusError::Registry("empty variety code".into()));
            }
            if !seen.insert(v.code.as_str()) {
                return Err(CorpusError::Registry(format!("duplicate code `{}`", v.code)));
            }
        }
        let standards = varieties
            .iter()
            .filter(|v| v.kind == VarietyKind::Standard)
            .count();
        if standards > 1 {
            return Err(CorpusError::Registry(format!(
                "{standards} standard varieties, at most one allowed"
            )));
        }
        Ok(VarietyRegistry { varieties })
    }

    pub fn get(&self, code: &str) -> Result<&Variety> {
        self.varieties
            .iter()
            .find(|v| v.code == code)
            .ok_or_else(|| CorpusError::UnknownVariety(code.to_string()))
    }

    pub fn contains(&self, code: &str) -> bool {
        self.varieties.iter().any(|v| v.code == code)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Variety> {
        self.varieties.iter()
    }

    pub fn len(&self) -> usize {
        self.varieties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.varieties.is_empty()
    }

    pub fn standard(&self) -> Option<&Variety> {
        self.varieties.iter().find(|v| v.kind == VarietyKind::Standard)
    }

    pub fn dialects(&self) -> impl Iterator<Item = &Variety> {
        self.varieties.iter().filter(|v| v.kind == VarietyKind::Dialect)
    }

    /// Fidelity evaluation needs at least one dialect to aim for.
    pub fn require_dialect(&self) -> Result<()> {
        if self.dialects().next().is_none() {
            return Err(CorpusError::Registry("no dialect registered".into()));
        }
        Ok(())
    }

    /// Reads a tab-separated manifest with a header row. The last two columns
    /// are optional.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut varieties = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if idx == 0 {
                if !line.starts_with("code\t") {
                    return Err(CorpusError::Malformed {
                        line: 1,
                        message: "registry header must start with `code`".into(),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 3 {
                return Err(CorpusError::Malformed {
                    line: line_no,
                    message: "expected ≥3 fields".into(),
                });
            }
            let optional = |i: usize| {
                fields
                    .get(i)
                    .map(|s| s.nfc().collect::<String>())
                    .filter(|s| !s.trim().is_empty())
            };
            varieties.push(Variety {
                code: fields[0].trim().to_string(),
                display_name: fields[1].nfc().collect(),
                kind: fields[2].parse()?,
                gen_instruction: optional(3),
                gen_preamble: optional(4),
            });
        }
        Self::new(varieties)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = REGISTRY_HEADER.join("\t");
        out.push('\n');
        for v in &self.varieties {
            let row = [
                v.code.as_str(),
                v.display_name.as_str(),
                &v.kind.to_string(),
                v.gen_instruction.as_deref().unwrap_or(""),
                v.gen_preamble.as_deref().unwrap_or(""),
            ]
            .join("\t");
            out.push_str(&row);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write(path, &self.to_tsv())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitextExample {
    pub id: String,
    pub src_text: String,
    pub tgt_text: String,
    pub src_variety: String,
    pub tgt_variety: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonoExample {
    pub id: String,
    pub text: String,
    pub variety: String,
}

/// Anything with a stable identifier can be split.
pub trait HasId {
    fn id(&self) -> &str;
}

impl HasId for BitextExample {
    fn id(&self) -> &str {
        &self.id
    }
}

impl HasId for MonoExample {
    fn id(&self) -> &str {
        &self.id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Tsv,
    Jsonl,
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()? {
            "tsv" | "txt" => Some(Format::Tsv),
            "jsonl" | "json" => Some(Format::Jsonl),
            _ => None,
        }
    }
}

/// Out-of-band settings for the TSV layout.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Skip line 1.
    pub header: bool,
    /// `(src, tgt)` for bitext, only `src` is used for monolingual files.
    pub varieties: Option<(String, String)>,
}

impl LoadOptions {
    pub fn bitext(src: &str, tgt: &str) -> Self {
        LoadOptions {
            header: false,
            varieties: Some((src.to_string(), tgt.to_string())),
        }
    }

    pub fn mono(variety: &str) -> Self {
        LoadOptions {
            header: false,
            varieties: Some((variety.to_string(), String::new())),
        }
    }
}

#[derive(Deserialize)]
struct BitextRecord {
    id: Option<String>,
    src_text: String,
    tgt_text: String,
    src_variety: String,
    tgt_variety: String,
}

#[derive(Deserialize)]
struct MonoRecord {
    id: Option<String>,
    text: String,
    variety: String,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| CorpusError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    let mut file = fs::File::create(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(contents.as_bytes())
        .map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn nfc(text: &str) -> String {
    text.nfc().collect()
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Lines to parse as `(1-based line number, content)`.
fn content_lines(text: &str, header: bool) -> Vec<(usize, &str)> {
    let mut lines: Vec<(usize, &str)> = text
        .split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .collect();
    // a trailing newline produces one empty final piece
    if lines.last().is_some_and(|(_, l)| l.is_empty()) {
        lines.pop();
    }
    if header && !lines.is_empty() {
        lines.remove(0);
    }
    lines
}

/// Checks one bitext record against the type invariants.
pub fn validate_bitext(
    ex: &BitextExample,
    line: usize,
    registry: &VarietyRegistry,
) -> Result<()> {
    registry.get(&ex.src_variety)?;
    registry.get(&ex.tgt_variety)?;
    if ex.src_text.trim().is_empty() || ex.tgt_text.trim().is_empty() {
        return Err(CorpusError::EmptyText { line });
    }
    if ex.src_variety == ex.tgt_variety {
        return Err(CorpusError::SameVariety {
            line,
            code: ex.src_variety.clone(),
        });
    }
    Ok(())
}

pub fn validate_mono(ex: &MonoExample, line: usize, registry: &VarietyRegistry) -> Result<()> {
    let variety = registry.get(&ex.variety)?;
    if ex.text.trim().is_empty() {
        return Err(CorpusError::EmptyText { line });
    }
    if variety.kind == VarietyKind::Foreign {
        return Err(CorpusError::MonoKind {
            line,
            code: ex.variety.clone(),
            kind: variety.kind,
        });
    }
    Ok(())
}

pub fn load_bitext(
    path: &Path,
    format: Format,
    options: &LoadOptions,
    registry: &VarietyRegistry,
) -> Result<Vec<BitextExample>> {
    let text = read(path)?;
    parse_bitext(&text, &file_label(path), format, options, registry)
}

/// Parses bitext from an in-memory string. `label` seeds synthesized ids.
pub fn parse_bitext(
    text: &str,
    label: &str,
    format: Format,
    options: &LoadOptions,
    registry: &VarietyRegistry,
) -> Result<Vec<BitextExample>> {
    let mut out = Vec::new();
    for (line, content) in content_lines(text, options.header && format == Format::Tsv) {
        let ex = match format {
            Format::Tsv => {
                let (src_variety, tgt_variety) =
                    options.varieties.clone().ok_or(CorpusError::MissingVarieties)?;
                let fields: Vec<&str> = content.split('\t').collect();
                if fields.len() < 2 {
                    return Err(CorpusError::Malformed {
                        line,
                        message: "expected ≥2 fields".into(),
                    });
                }
                BitextExample {
                    id: fields
                        .get(2)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.to_string())
                        .unwrap_or_else(|| format!("{label}:{line}")),
                    src_text: nfc(fields[0]),
                    tgt_text: nfc(fields[1]),
                    src_variety,
                    tgt_variety,
                }
            }
            Format::Jsonl => {
                if content.trim().is_empty() {
                    continue;
                }
                let rec: BitextRecord =
                    serde_json::from_str(content).map_err(|e| CorpusError::Malformed {
                        line,
                        message: e.to_string(),
                    })?;
                BitextExample {
                    id: rec.id.unwrap_or_else(|| format!("{label}:{line}")),
                    src_text: nfc(&rec.src_text),
                    tgt_text: nfc(&rec.tgt_text),
                    src_variety: rec.src_variety,
                    tgt_variety: rec.tgt_variety,
                }
            }
        };
        validate_bitext(&ex, line, registry)?;
        out.push(ex);
    }
    Ok(out)
}

pub fn load_mono(
    path: &Path,
    format: Format,
    options: &LoadOptions,
    registry: &VarietyRegistry,
) -> Result<Vec<MonoExample>> {
    let text = read(path)?;
    parse_mono(&text, &file_label(path), format, options, registry)
}

pub fn parse_mono(
    text: &str,
    label: &str,
    format: Format,
    options: &LoadOptions,
    registry: &VarietyRegistry,
) -> Result<Vec<MonoExample>> {
    let mut out = Vec::new();
    for (line, content) in content_lines(text, options.header && format == Format::Tsv) {
        let ex = match format {
            Format::Tsv => {
                let (variety, _) = options.varieties.clone().ok_or(CorpusError::MissingVarieties)?;
                let fields: Vec<&str> = content.split('\t').collect();
                MonoExample {
                    id: fields
                        .get(1)
                        .filter(|s| !s.is_empty())
                        .map(|s| s.to_string())
                        .unwrap_or_else(|| format!("{label}:{line}")),
                    text: nfc(fields[0]),
                    variety,
                }
            }
            Format::Jsonl => {
                if content.trim().is_empty() {
                    continue;
                }
                let rec: MonoRecord =
                    serde_json::from_str(content).map_err(|e| CorpusError::Malformed {
                        line,
                        message: e.to_string(),
                    })?;
                MonoExample {
                    id: rec.id.unwrap_or_else(|| format!("{label}:{line}")),
                    text: nfc(&rec.text),
                    variety: rec.variety,
                }
            }
        };
        validate_mono(&ex, line, registry)?;
        out.push(ex);
    }
    Ok(out)
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("corpus records serialize"));
        out.push('\n');
    }
    out
}

pub fn bitext_to_jsonl(examples: &[BitextExample]) -> String {
    jsonl(examples)
}

pub fn mono_to_jsonl(examples: &[MonoExample]) -> String {
    jsonl(examples)
}

/// TSV with the id as third column so that a reload keeps ids.
pub fn bitext_to_tsv(examples: &[BitextExample]) -> String {
    examples
        .iter()
        .map(|e| format!("{}\t{}\t{}\n", e.src_text, e.tgt_text, e.id))
        .collect()
}

pub fn mono_to_tsv(examples: &[MonoExample]) -> String {
    examples
        .iter()
        .map(|e| format!("{}\t{}\n", e.text, e.id))
        .collect()
}

pub fn write_bitext(path: &Path, examples: &[BitextExample]) -> Result<()> {
    write(path, &bitext_to_jsonl(examples))
}

pub fn write_mono(path: &Path, examples: &[MonoExample]) -> Result<()> {
    write(path, &mono_to_jsonl(examples))
}

/// Three fractions for train, dev and test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios(pub [f64; 3]);

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios([0.8, 0.1, 0.1])
    }
}

impl SplitRatios {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self> {
        let r = SplitRatios([train, dev, test]);
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.0.iter().all(|r| r.is_finite() && *r >= 0.0)
            && (self.0.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(CorpusError::InvalidRatios(self.0))
        }
    }

    /// Largest-remainder apportionment of `n` items.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let exact: Vec<f64> = self.0.iter().map(|r| r * n as f64).collect();
        let mut sizes = [0usize; 3];
        for (s, e) in sizes.iter_mut().zip(&exact) {
            *s = (e + 1e-9).floor() as usize;
        }
        let assigned: usize = sizes.iter().sum();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - sizes[a] as f64;
            let rb = exact[b] - sizes[b] as f64;
            rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            sizes[i] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

/// Deterministic pseudorandom partition into train/dev/test.
pub fn split<T: HasId + Clone>(
    examples: &[T],
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetSplit<T>> {
    ratios.validate()?;
    let mut seen = HashSet::new();
    let mut dups = BTreeSet::new();
    for ex in examples {
        if !seen.insert(ex.id()) {
            dups.insert(ex.id().to_string());
        }
    }
    if !dups.is_empty() {
        return Err(CorpusError::DuplicateIds(dups.into_iter().collect()));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut rng::stream(seed, 0x5_0717));
    let [n_train, n_dev, _] = ratios.sizes(examples.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| examples[i].clone()).collect::<Vec<_>>();
    Ok(DatasetSplit {
        train: pick(&order[..n_train]),
        dev: pick(&order[n_train..n_train + n_dev]),
        test: pick(&order[n_train + n_dev..]),
        seed,
        ratios,
    })
}

/// Example counts per `(src, tgt)` direction.
pub fn bitext_stats(examples: &[BitextExample]) -> BTreeMap<(String, String), usize> {
    let mut table = BTreeMap::new();
    for ex in examples {
        *table
            .entry((ex.src_variety.clone(), ex.tgt_variety.clone()))
            .or_insert(0) += 1;
    }
    table
}

/// Example counts per variety.
pub fn mono_stats(examples: &[MonoExample]) -> BTreeMap<String, usize> {
    let mut table = BTreeMap::new();
    for ex in examples {
        *table.entry(ex.variety.clone()).or_insert(0) += 1;
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn registry() -> VarietyRegistry {
        VarietyRegistry::new(vec![
            Variety::new("eng", "English", VarietyKind::Foreign),
            Variety::new("msa", "Modern Standard Arabic", VarietyKind::Standard),
            Variety::new("syr", "Syrian Arabic", VarietyKind::Dialect),
            Variety::new("egy", "Egyptian Arabic", VarietyKind::Dialect),
        ])
        .unwrap()
    }

    fn bitext(text: &str) -> Result<Vec<BitextExample>> {
        parse_bitext(text, "f.tsv", Format::Tsv, &LoadOptions::bitext("eng", "syr"), &registry())
    }

    #[test]
    fn minimal_tsv_row() {
        let out = bitext("hello\tmarhaba\n").unwrap();
        assert_eq!(
            out,
            vec![BitextExample {
                id: "f.tsv:1".into(),
                src_text: "hello".into(),
                tgt_text: "marhaba".into(),
                src_variety: "eng".into(),
                tgt_variety: "syr".into(),
            }]
        );
    }

    #[test]
    fn empty_file_is_empty_collection() {
        assert!(bitext("").unwrap().is_empty());
    }

    #[test]
    fn single_field_row_names_line() {
        let err = bitext("hello\n").unwrap_err();
        assert_eq!(err.to_string(), "line 1: expected ≥2 fields");
    }

    #[test]
    fn header_flag_skips_first_line() {
        let mut opts = LoadOptions::bitext("eng", "syr");
        opts.header = true;
        let out = parse_bitext("src\ttgt\na\tb\n", "f", Format::Tsv, &opts, &registry()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, "f:2");
    }

    #[test]
    fn unknown_variety_is_named() {
        let err = parse_bitext(
            "a\tb\n",
            "f",
            Format::Tsv,
            &LoadOptions::bitext("eng", "xyz"),
            &registry(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("xyz"));
    }

    #[test]
    fn same_variety_rejected() {
        let err = parse_bitext(
            "a\tb\n",
            "f",
            Format::Tsv,
            &LoadOptions::bitext("eng", "eng"),
            &registry(),
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::SameVariety { .. }));
    }

    #[test]
    fn jsonl_mono_record() {
        let out = parse_mono(
            "{\"text\":\"t1\",\"variety\":\"egy\"}\n",
            "m.jsonl",
            Format::Jsonl,
            &LoadOptions::default(),
            &registry(),
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].text, "t1");
        assert_eq!(out[0].variety, "egy");
        assert_eq!(out[0].id, "m.jsonl:1");
    }

    #[test]
    fn blank_mono_text_names_line() {
        let text = "{\"text\":\"a\",\"variety\":\"egy\"}\n{\"text\":\"  \",\"variety\":\"egy\"}\n";
        let err = parse_mono(text, "m", Format::Jsonl, &LoadOptions::default(), &registry())
            .unwrap_err();
        assert_eq!(err.to_string(), "line 2: empty text");
    }

    #[test]
    fn mono_preserves_order() {
        let text = "c\nb\na\n";
        let out = parse_mono(text, "m", Format::Tsv, &LoadOptions::mono("syr"), &registry()).unwrap();
        let texts: Vec<_> = out.iter().map(|e| e.text.as_str()).collect();
        assert_eq!(texts, ["c", "b", "a"]);
    }

    #[test]
    fn mono_rejects_foreign_variety() {
        let err = parse_mono("x\n", "m", Format::Tsv, &LoadOptions::mono("eng"), &registry())
            .unwrap_err();
        assert!(matches!(err, CorpusError::MonoKind { .. }));
    }

    #[test]
    fn nfc_applied_on_load() {
        // e + combining acute
        let out = parse_mono("e\u{301}\n", "m", Format::Tsv, &LoadOptions::mono("syr"), &registry())
            .unwrap();
        assert_eq!(out[0].text, "\u{e9}");
    }

    #[test]
    fn registry_rejects_two_standards() {
        let err = VarietyRegistry::new(vec![
            Variety::new("a", "A", VarietyKind::Standard),
            Variety::new("b", "B", VarietyKind::Standard),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("standard"));
    }

    #[test]
    fn registry_tsv_round_trip() {
        let reg = VarietyRegistry::new(vec![
            Variety::new("msa", "Modern Standard Arabic", VarietyKind::Standard),
            Variety::new("egy", "Egyptian Arabic", VarietyKind::Dialect)
                .with_dialectal_templates("كمّل الجملة", "دي الجملة"),
        ])
        .unwrap();
        assert_eq!(VarietyRegistry::parse(&reg.to_tsv()).unwrap(), reg);
    }

    fn ids(n: usize) -> Vec<MonoExample> {
        (0..n)
            .map(|i| MonoExample {
                id: format!("m{i}"),
                text: format!("t{i}"),
                variety: "syr".into(),
            })
            .collect()
    }

    #[test]
    fn split_sizes_exact() {
        let s = split(&ids(10), SplitRatios::new(0.8, 0.1, 0.1).unwrap(), 42).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (8, 1, 1));
    }

    #[test]
    fn split_is_deterministic() {
        let r = SplitRatios::default();
        assert_eq!(split(&ids(37), r, 42).unwrap(), split(&ids(37), r, 42).unwrap());
    }

    #[test]
    fn split_all_train() {
        let s = split(&ids(7), SplitRatios::new(1.0, 0.0, 0.0).unwrap(), 1).unwrap();
        assert_eq!(s.train.len(), 7);
        assert!(s.dev.is_empty() && s.test.is_empty());
    }

    #[test]
    fn split_rejects_duplicates() {
        let mut data = ids(3);
        data.push(data[1].clone());
        let err = split(&data, SplitRatios::default(), 0).unwrap_err();
        assert_eq!(err.to_string(), "duplicate ids: m1");
    }

    #[test]
    fn split_rejects_bad_ratios() {
        assert!(SplitRatios::new(0.5, 0.5, 0.5).is_err());
        assert!(SplitRatios::new(1.2, -0.2, 0.0).is_err());
    }

    #[test]
    fn stats_by_direction() {
        let mk = |s: &str, t: &str| BitextExample {
            id: format!("{s}{t}{}", rand::random::<u32>()),
            src_text: "a".into(),
            tgt_text: "b".into(),
            src_variety: s.into(),
            tgt_variety: t.into(),
        };
        let table = bitext_stats(&[mk("eng", "syr"), mk("eng", "syr"), mk("msa", "egy")]);
        assert_eq!(table.len(), 2);
        assert_eq!(table[&("eng".to_string(), "syr".to_string())], 2);
        assert_eq!(table[&("msa".to_string(), "egy".to_string())], 1);
        assert!(bitext_stats(&[]).is_empty());
    }

    #[test]
    fn stats_by_variety() {
        let mut data = ids(3);
        data[0].variety = "egy".into();
        let table = mono_stats(&data);
        assert_eq!(table["egy"], 1);
        assert_eq!(table["syr"], 2);
    }

    proptest! {
        #[test]
        fn split_is_partition(n in 0usize..200, seed in any::<u64>(), a in 0u32..=10, b in 0u32..=10) {
            let (a, b) = (a.min(10), b.min(10 - a.min(10)));
            let r = SplitRatios::new(a as f64 / 10.0, b as f64 / 10.0, (10 - a - b) as f64 / 10.0).unwrap();
            let data = ids(n);
            let s = split(&data, r, seed).unwrap();
            prop_assert_eq!(s.train.len() + s.dev.len() + s.test.len(), n);
            let mut all: Vec<_> = s.train.iter().chain(&s.dev).chain(&s.test).map(|e| e.id.clone()).collect();
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), n);
        }

        #[test]
        fn jsonl_round_trip(texts in proptest::collection::vec("[a-z ]{0,6}[a-z][a-z ]{0,6}", 0..8)) {
            let data: Vec<BitextExample> = texts.iter().enumerate().map(|(i, t)| BitextExample {
                id: format!("x{i}"),
                src_text: t.clone(),
                tgt_text: t.to_uppercase(),
                src_variety: "msa".into(),
                tgt_variety: "egy".into(),
            }).collect();
            let back = parse_bitext(&bitext_to_jsonl(&data), "f", Format::Jsonl, &LoadOptions::default(), &registry()).unwrap();
            prop_assert_eq!(back, data);
        }
    }
}
