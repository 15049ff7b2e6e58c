//! ChrF++: character n-gram F-score extended with word n-grams.
//!
//! Character n-grams are taken over the text with all whitespace removed; word
//! n-grams over whitespace tokens. Per order, precision and recall come from
//! clipped n-gram matches and are combined into F-beta; the score is the mean
//! over orders, times 100. An order for which neither side has any n-gram is
//! left out of the mean, so identical short strings still score 100.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::{MetricError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChrfParams {
    pub char_order: usize,
    pub word_order: usize,
    pub beta: f64,
}

impl Default for ChrfParams {
    fn default() -> Self {
        ChrfParams {
            char_order: 6,
            word_order: 2,
            beta: 2.0,
        }
    }
}

impl ChrfParams {
    pub fn orders(&self) -> usize {
        self.char_order + self.word_order
    }
}

/// n-gram totals for one order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderStats {
    pub hyp: u64,
    pub reference: u64,
    pub matched: u64,
}

impl OrderStats {
    /// F-beta for this order, or `None` when neither side has an n-gram.
    pub fn f_score(&self, beta: f64) -> Option<f64> {
        if self.hyp == 0 && self.reference == 0 {
            return None;
        }
        let precision = if self.hyp > 0 {
            self.matched as f64 / self.hyp as f64
        } else {
            0.0
        };
        let recall = if self.reference > 0 {
            self.matched as f64 / self.reference as f64
        } else {
            0.0
        };
        let b2 = beta * beta;
        let denom = b2 * precision + recall;
        Some(if denom > 0.0 {
            (1.0 + b2) * precision * recall / denom
        } else {
            0.0
        })
    }
}

/// Sufficient statistics: character orders first, then word orders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChrfStats {
    pub orders: Vec<OrderStats>,
}

impl ChrfStats {
    pub fn zeros(params: &ChrfParams) -> Self {
        ChrfStats {
            orders: vec![OrderStats::default(); params.orders()],
        }
    }

    pub fn between(hypothesis: &str, reference: &str, params: &ChrfParams) -> Self {
        let hyp_chars: Vec<char> = hypothesis.chars().filter(|c| !c.is_whitespace()).collect();
        let ref_chars: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
        let hyp_words: Vec<&str> = hypothesis.split_whitespace().collect();
        let ref_words: Vec<&str> = reference.split_whitespace().collect();
        let mut orders = Vec::with_capacity(params.orders());
        for n in 1..=params.char_order {
            orders.push(order_stats(&hyp_chars, &ref_chars, n));
        }
        for n in 1..=params.word_order {
            orders.push(order_stats(&hyp_words, &ref_words, n));
        }
        ChrfStats { orders }
    }

    pub fn add(&mut self, other: &ChrfStats) {
        for (a, b) in self.orders.iter_mut().zip(&other.orders) {
            a.hyp += b.hyp;
            a.reference += b.reference;
            a.matched += b.matched;
        }
    }

    /// Score in [0, 100].
    pub fn score(&self, beta: f64) -> f64 {
        let scores: Vec<f64> = self.orders.iter().filter_map(|o| o.f_score(beta)).collect();
        if scores.is_empty() {
            return 0.0;
        }
        100.0 * scores.iter().sum::<f64>() / scores.len() as f64
    }
}

fn counts<T: Eq + Hash>(items: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut map = HashMap::new();
    if items.len() >= n {
        for gram in items.windows(n) {
            *map.entry(gram).or_insert(0) += 1;
        }
    }
    map
}

fn order_stats<T: Eq + Hash>(hyp: &[T], reference: &[T], n: usize) -> OrderStats {
    let hyp_counts = counts(hyp, n);
    let ref_counts = counts(reference, n);
    let matched = hyp_counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    OrderStats {
        hyp: hyp_counts.values().sum(),
        reference: ref_counts.values().sum(),
        matched,
    }
}

fn check_reference(reference: &str) -> Result<()> {
    if reference.trim().is_empty() {
        Err(MetricError::EmptyReference)
    } else {
        Ok(())
    }
}

/// Sentence-level ChrF++.
pub fn chrf_pp(hypothesis: &str, reference: &str, params: &ChrfParams) -> Result<f64> {
    check_reference(reference)?;
    if hypothesis.trim().is_empty() {
        return Ok(0.0);
    }
    Ok(ChrfStats::between(hypothesis, reference, params).score(params.beta))
}

/// Corpus-level ChrF++: statistics are summed over all pairs before scoring.
pub fn corpus_chrf<H: AsRef<str>, R: AsRef<str>>(
    hypotheses: &[H],
    references: &[R],
    params: &ChrfParams,
) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut total = ChrfStats::zeros(params);
    for (h, r) in hypotheses.iter().zip(references) {
        check_reference(r.as_ref())?;
        total.add(&ChrfStats::between(h.as_ref(), r.as_ref(), params));
    }
    Ok(total.score(params.beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_100() {
        let p = ChrfParams::default();
        assert_eq!(chrf_pp("the cat sat", "the cat sat", &p).unwrap(), 100.0);
        assert_eq!(chrf_pp("ab", "ab", &p).unwrap(), 100.0);
    }

    #[test]
    fn empty_hypothesis_is_zero() {
        assert_eq!(chrf_pp("", "abc", &ChrfParams::default()).unwrap(), 0.0);
    }

    #[test]
    fn empty_reference_is_error() {
        assert!(matches!(
            chrf_pp("abc", " ", &ChrfParams::default()),
            Err(MetricError::EmptyReference)
        ));
    }

    #[test]
    fn corpus_single_pair_matches_sentence() {
        let p = ChrfParams::default();
        let s = chrf_pp("kato miru", "kato mira", &p).unwrap();
        let c = corpus_chrf(&["kato miru"], &["kato mira"], &p).unwrap();
        assert_eq!(s, c);
    }

    #[test]
    fn corpus_length_mismatch() {
        let p = ChrfParams::default();
        assert!(matches!(
            corpus_chrf(&["a"], &["a", "b"], &p),
            Err(MetricError::LengthMismatch { .. })
        ));
        assert!(matches!(
            corpus_chrf::<&str, &str>(&[], &[], &p),
            Err(MetricError::EmptyCorpus)
        ));
    }

    #[test]
    fn whitespace_ignored_for_characters() {
        let p = ChrfParams {
            word_order: 0,
            ..ChrfParams::default()
        };
        assert_eq!(chrf_pp("ab cd", "abcd", &p).unwrap(), 100.0);
    }
}
