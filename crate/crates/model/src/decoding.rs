//! Greedy, temperature and nucleus (top-p) decoding.

use diglossia_core::rng::Rng;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::tokenizer::{Tokenizer, EOT};
use crate::transformer::Model;
use crate::{ModelError, Result};

/// Values of both axes of the decoding sweep, in sweep order.
pub const GRID_VALUES: [f64; 5] = [0.1, 0.3, 0.6, 0.9, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    /// 0 selects greedy decoding.
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: usize,
}

impl DecodeConfig {
    pub fn greedy(max_new_tokens: usize) -> Self {
        DecodeConfig {
            temperature: 0.0,
            top_p: 1.0,
            max_new_tokens,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ModelError::Decoding(format!(
                "temperature must be finite and non-negative, got {}",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ModelError::Decoding(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        Ok(())
    }
}

/// The 25 sweep configurations: top-p is the outer loop, temperature the
/// inner one.
pub fn decode_grid(max_new_tokens: usize) -> Vec<DecodeConfig> {
    GRID_VALUES
        .iter()
        .flat_map(|&top_p| {
            GRID_VALUES.iter().map(move |&temperature| DecodeConfig {
                temperature,
                top_p,
                max_new_tokens,
            })
        })
        .collect()
}

/// Lowest id among the largest finite logits.
pub fn argmax(logits: &[f64]) -> Result<u32> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &l) in logits.iter().enumerate() {
        if !l.is_finite() {
            continue;
        }
        if best.is_none_or(|(_, b)| l > b) {
            best = Some((i, l));
        }
    }
    best.map(|(i, _)| i as u32).ok_or(ModelError::NoFiniteLogits)
}

/// Renormalized distribution over the smallest set of most probable tokens
/// whose mass reaches `top_p`, after dividing logits by `temperature`.
/// Ties in probability are ordered by token id.
pub fn nucleus_distribution(logits: &[f64], temperature: f64, top_p: f64) -> Result<Vec<(u32, f64)>> {
    if temperature <= 0.0 {
        return Err(ModelError::Decoding("nucleus sampling needs a positive temperature".into()));
    }
    let finite: Vec<(u32, f64)> = logits
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_finite())
        .map(|(i, &l)| (i as u32, l / temperature))
        .collect();
    if finite.is_empty() {
        return Err(ModelError::NoFiniteLogits);
    }
    let max = finite.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<(u32, f64)> = finite.iter().map(|&(i, l)| (i, (l - max).exp())).collect();
    let z: f64 = probs.iter().map(|(_, p)| p).sum();
    for (_, p) in &mut probs {
        *p /= z;
    }
    probs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut cumulative = 0.0;
    let mut keep = probs.len();
    for (i, (_, p)) in probs.iter().enumerate() {
        cumulative += p;
        if cumulative >= top_p {
            keep = i + 1;
            break;
        }
    }
    probs.truncate(keep);
    let mass: f64 = probs.iter().map(|(_, p)| p).sum();
    for (_, p) in &mut probs {
        *p /= mass;
    }
    Ok(probs)
}

pub fn sample_next(logits: &[f64], config: &DecodeConfig, rng: &mut Rng) -> Result<u32> {
    if config.temperature == 0.0 {
        return argmax(logits);
    }
    let dist = nucleus_distribution(logits, config.temperature, config.top_p)?;
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for &(id, p) in &dist {
        cumulative += p;
        if u < cumulative {
            return Ok(id);
        }
    }
    Ok(dist.last().expect("non-empty distribution").0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EndOfTurn,
    MaxTokens,
    /// The model's context window filled up before either of the above.
    ContextFull,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub ids: Vec<u32>,
    pub text: String,
    pub stop: StopReason,
}

/// Continues `prompt` until end of turn, `max_new_tokens`, or a full context.
/// Special tokens other than end of turn are never produced.
pub fn generate(
    model: &Model,
    tokenizer: &Tokenizer,
    prompt: &[u32],
    config: &DecodeConfig,
    rng: &mut Rng,
) -> Result<Generation> {
    config.validate()?;
    if prompt.is_empty() {
        return Err(ModelError::Decoding("empty prompt".into()));
    }
    let max_len = model.config().max_seq_len;
    if prompt.len() > max_len {
        return Err(ModelError::SequenceTooLong {
            id: "prompt".into(),
            len: prompt.len(),
            max: max_len,
        });
    }
    let banned: Vec<usize> = (0..tokenizer.vocab_size() as u32)
        .filter(|&t| t != EOT && tokenizer.is_special(t))
        .map(|t| t as usize)
        .collect();
    let mut cache = model.new_kv_cache();
    let mut logits = None;
    for &t in prompt {
        logits = Some(model.step(&mut cache, t)?);
    }
    let mut logits = logits.expect("non-empty prompt");
    let mut ids = Vec::new();
    let stop = loop {
        if ids.len() >= config.max_new_tokens {
            break StopReason::MaxTokens;
        }
        for &b in &banned {
            logits[b] = f64::NEG_INFINITY;
        }
        let next = sample_next(logits.as_slice().expect("contiguous logits"), config, rng)?;
        if next == EOT {
            break StopReason::EndOfTurn;
        }
        ids.push(next);
        if cache.len() >= max_len {
            break StopReason::ContextFull;
        }
        logits = model.step(&mut cache, next)?;
    };
    Ok(Generation {
        text: tokenizer.decode(&ids, false),
        ids,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_order() {
        let g = decode_grid(16);
        assert_eq!(g.len(), 25);
        assert_eq!((g[0].top_p, g[0].temperature), (0.1, 0.1));
        assert_eq!((g[1].top_p, g[1].temperature), (0.1, 0.3));
        assert_eq!((g[5].top_p, g[5].temperature), (0.3, 0.1));
        assert_eq!((g[24].top_p, g[24].temperature), (1.0, 1.0));
    }

    #[test]
    fn argmax_prefers_lowest_id_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, f64::NAN]).unwrap(), 1);
        assert!(argmax(&[f64::NEG_INFINITY, f64::NAN]).is_err());
    }

    #[test]
    fn nucleus_keeps_smallest_prefix() {
        let l = [0.5f64.ln(), 0.3f64.ln(), 0.2f64.ln()];
        let d = nucleus_distribution(&l, 1.0, 0.6).unwrap();
        assert_eq!(d.len(), 2);
        assert!((d[0].1 - 0.625).abs() < 1e-12);
        let d = nucleus_distribution(&l, 1.0, 0.5).unwrap();
        assert_eq!(d.len(), 1);
        let d = nucleus_distribution(&l, 1.0, 1.0).unwrap();
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn invalid_configs() {
        for (t, p) in [(-1.0, 0.5), (f64::NAN, 0.5), (1.0, 0.0), (1.0, 1.5)] {
            let c = DecodeConfig {
                temperature: t,
                top_p: p,
                max_new_tokens: 1,
            };
            assert!(c.validate().is_err());
        }
    }
}
