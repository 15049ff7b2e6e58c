//! Character n-gram naive Bayes variety classifier and the two-factor
//! fidelity score built on it.
//!
//! The score stands in for a dedicated Arabic dialect-identification model;
//! every report carries [`FIDELITY_SCORER_LABEL`] so it is never mistaken for
//! one.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{MetricError, Result};
use crate::corpus::{VarietyKind, VarietyRegistry};

pub const CLASSIFIER_FORMAT_VERSION: u32 = 1;
pub const FIDELITY_SCORER_LABEL: &str = "adi2-proxy";

/// Anything that can score how strongly a text is written in a target dialect.
pub trait FidelityScorer {
    /// Score in [0, 1].
    fn fidelity(&self, text: &str, target: &str) -> Result<f64>;
    fn label(&self) -> &str;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub max_order: usize,
    /// Additive smoothing constant.
    pub alpha: f64,
    pub min_sentences: usize,
    /// Every n-th sentence of each variety is held out for the accuracy check.
    pub heldout_every: usize,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            max_order: 4,
            alpha: 1.0,
            min_sentences: 50,
            heldout_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NgramTable {
    counts: BTreeMap<String, u64>,
    total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassModel {
    code: String,
    kind: VarietyKind,
    sentences: u64,
    /// One table per order, starting at 1.
    tables: Vec<NgramTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarietyClassifier {
    version: u32,
    params: ClassifierParams,
    classes: Vec<ClassModel>,
    /// Distinct n-grams per order across all classes.
    vocabulary: Vec<u64>,
    manifest_hash: String,
    heldout_accuracy: f64,
}

fn ngrams(text: &str, max_order: usize) -> Vec<Vec<String>> {
    let mut padded = vec![' '];
    padded.extend(text.split_whitespace().collect::<Vec<_>>().join(" ").chars());
    padded.push(' ');
    (1..=max_order)
        .map(|n| {
            if padded.len() < n {
                Vec::new()
            } else {
                padded.windows(n).map(|w| w.iter().collect()).collect()
            }
        })
        .collect()
}

fn manifest_hash(data: &BTreeMap<String, Vec<String>>) -> String {
    let mut hasher = Sha256::new();
    for (code, texts) in data {
        for t in texts {
            hasher.update(code.as_bytes());
            hasher.update(b"\t");
            hasher.update(t.as_bytes());
            hasher.update(b"\n");
        }
    }
    hex::encode(hasher.finalize())
}

fn fit(
    split: &BTreeMap<String, Vec<&str>>,
    registry: &VarietyRegistry,
    params: ClassifierParams,
) -> Result<(Vec<ClassModel>, Vec<u64>)> {
    let mut classes = Vec::new();
    let mut seen: Vec<std::collections::BTreeSet<String>> = vec![Default::default(); params.max_order];
    for (code, texts) in split {
        let kind = registry
            .get(code)
            .map_err(|_| MetricError::UnknownVariety(code.clone()))?
            .kind;
        let mut tables = vec![
            NgramTable {
                counts: BTreeMap::new(),
                total: 0
            };
            params.max_order
        ];
        for t in texts {
            for (o, grams) in ngrams(t, params.max_order).into_iter().enumerate() {
                for g in grams {
                    tables[o].total += 1;
                    *tables[o].counts.entry(g).or_insert(0) += 1;
                }
            }
        }
        for (o, table) in tables.iter().enumerate() {
            seen[o].extend(table.counts.keys().cloned());
        }
        classes.push(ClassModel {
            code: code.clone(),
            kind,
            sentences: texts.len() as u64,
            tables,
        });
    }
    Ok((classes, seen.iter().map(|s| s.len() as u64).collect()))
}

/// Trains on `data` (sentences per variety code). Every variety of the
/// registry must be present with at least `min_sentences` sentences.
pub fn train_classifier(
    data: &BTreeMap<String, Vec<String>>,
    registry: &VarietyRegistry,
    params: ClassifierParams,
) -> Result<VarietyClassifier> {
    if params.max_order == 0 || params.alpha <= 0.0 || params.heldout_every < 2 {
        return Err(MetricError::InsufficientData("invalid classifier parameters".into()));
    }
    for v in registry.iter() {
        let n = data.get(&v.code).map_or(0, Vec::len);
        if n < params.min_sentences {
            return Err(MetricError::InsufficientData(format!(
                "variety `{}` has {n} sentences, need {}",
                v.code, params.min_sentences
            )));
        }
    }
    if let Some(code) = data.keys().find(|c| !registry.contains(c)) {
        return Err(MetricError::UnknownVariety(code.clone()));
    }
    if registry.dialects().next().is_none() || data.len() < 2 {
        return Err(MetricError::InsufficientData(
            "need at least two varieties including a dialect".into(),
        ));
    }

    let mut train: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    let mut heldout: Vec<(&str, &str)> = Vec::new();
    for (code, texts) in data {
        let entry = train.entry(code.clone()).or_default();
        for (i, t) in texts.iter().enumerate() {
            if i % params.heldout_every == params.heldout_every - 1 {
                heldout.push((code, t));
            } else {
                entry.push(t);
            }
        }
    }
    let (classes, vocabulary) = fit(&train, registry, params)?;
    let mut clf = VarietyClassifier {
        version: CLASSIFIER_FORMAT_VERSION,
        params,
        classes,
        vocabulary,
        manifest_hash: manifest_hash(data),
        heldout_accuracy: 0.0,
    };
    let correct = heldout
        .iter()
        .filter(|(code, t)| clf.classify(t) == *code)
        .count();
    clf.heldout_accuracy = correct as f64 / heldout.len().max(1) as f64;
    Ok(clf)
}

impl VarietyClassifier {
    pub fn varieties(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.code.as_str())
    }

    pub fn heldout_accuracy(&self) -> f64 {
        self.heldout_accuracy
    }

    pub fn manifest_hash(&self) -> &str {
        &self.manifest_hash
    }

    pub fn params(&self) -> &ClassifierParams {
        &self.params
    }

    fn log_scores(&self, text: &str) -> Vec<f64> {
        let grams = ngrams(text, self.params.max_order);
        let total_sentences: u64 = self.classes.iter().map(|c| c.sentences).sum();
        let k = self.classes.len() as f64;
        let alpha = self.params.alpha;
        self.classes
            .iter()
            .map(|class| {
                let prior = (class.sentences as f64 + 1.0) / (total_sentences as f64 + k);
                let mut score = prior.ln();
                for (o, order_grams) in grams.iter().enumerate() {
                    let table = &class.tables[o];
                    let denom = table.total as f64 + alpha * (self.vocabulary[o] as f64 + 1.0);
                    for g in order_grams {
                        let c = table.counts.get(g).copied().unwrap_or(0) as f64;
                        score += ((c + alpha) / denom).ln();
                    }
                }
                score
            })
            .collect()
    }

    /// Posterior over varieties, in classifier order.
    pub fn posterior(&self, text: &str) -> Vec<(String, f64)> {
        let scores = self.log_scores(text);
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        self.classes
            .iter()
            .zip(exp)
            .map(|(c, e)| (c.code.clone(), e / z))
            .collect()
    }

    /// Most probable variety; ties go to the earlier code.
    pub fn classify(&self, text: &str) -> &str {
        let scores = self.log_scores(text);
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        &self.classes[best].code
    }

    /// `(P(dialect | text), P(target | text, dialect))`.
    pub fn fidelity_factors(&self, text: &str, target: &str) -> Result<(f64, f64)> {
        let class = self
            .classes
            .iter()
            .find(|c| c.code == target)
            .ok_or_else(|| MetricError::UnknownVariety(target.to_string()))?;
        if class.kind != VarietyKind::Dialect {
            return Err(MetricError::NotADialect(target.to_string()));
        }
        if text.trim().is_empty() {
            return Ok((0.0, 0.0));
        }
        let posterior = self.posterior(text);
        let mut dialect_mass = 0.0;
        let mut target_mass = 0.0;
        for (class, (_, p)) in self.classes.iter().zip(&posterior) {
            if class.kind == VarietyKind::Dialect {
                dialect_mass += p;
                if class.code == target {
                    target_mass = *p;
                }
            }
        }
        if dialect_mass <= 0.0 {
            return Ok((0.0, 0.0));
        }
        Ok((dialect_mass, target_mass / dialect_mass))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("classifier serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let clf: VarietyClassifier =
            serde_json::from_str(text).map_err(|e| MetricError::Format(e.to_string()))?;
        if clf.version != CLASSIFIER_FORMAT_VERSION {
            return Err(MetricError::Format(format!(
                "unsupported classifier version {}",
                clf.version
            )));
        }
        Ok(clf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl FidelityScorer for VarietyClassifier {
    fn fidelity(&self, text: &str, target: &str) -> Result<f64> {
        adi2(text, target, self)
    }

    fn label(&self) -> &str {
        FIDELITY_SCORER_LABEL
    }
}

/// Two-factor fidelity: probability the text is dialectal at all, times the
/// probability it is the target dialect given that it is dialectal.
pub fn adi2(text: &str, target: &str, clf: &VarietyClassifier) -> Result<f64> {
    let (dialect, target_given_dialect) = clf.fidelity_factors(text, target)?;
    Ok(dialect * target_given_dialect)
}
