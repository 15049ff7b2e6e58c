use diglossia_model::decoding::{argmax, nucleus_distribution};
use diglossia_model::{
    decode_grid, generate, sample_next, DecodeConfig, Model, ModelConfig, StopReason, Tokenizer,
    TokenizerMode,
};
use proptest::prelude::*;

/// Truncated, renormalized softmax written out directly.
fn expected(logits: &[f64], t: f64, top_p: f64) -> Vec<f64> {
    let z: f64 = logits.iter().map(|l| (l / t).exp()).sum();
    let p: Vec<f64> = logits.iter().map(|l| (l / t).exp() / z).collect();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).unwrap().then(a.cmp(&b)));
    let mut kept = vec![0.0; p.len()];
    let mut mass = 0.0;
    for &i in &order {
        kept[i] = p[i];
        mass += p[i];
        if mass >= top_p {
            break;
        }
    }
    kept.iter().map(|k| k / mass).collect()
}

#[test]
fn empirical_distribution_matches_truncated_softmax() {
    let logits = [1.2, -0.3, 0.8, 2.0, -1.5, 0.1, 0.5, -0.7];
    for cfg in decode_grid(1) {
        let mut rng = diglossia_core::rng::stream(42, 7);
        let mut counts = [0usize; 8];
        let n = 100_000;
        for _ in 0..n {
            counts[sample_next(&logits, &cfg, &mut rng).unwrap() as usize] += 1;
        }
        let want = expected(&logits, cfg.temperature, cfg.top_p);
        let tv: f64 = counts
            .iter()
            .zip(&want)
            .map(|(&c, w)| (c as f64 / n as f64 - w).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "top_p {} T {}: tv {tv}", cfg.top_p, cfg.temperature);
    }
}

#[test]
fn zero_temperature_is_argmax() {
    let logits = [0.1, 2.0, -1.0, 2.0];
    let mut rng = diglossia_core::rng::stream(0, 0);
    for top_p in [0.1, 0.5, 1.0] {
        let cfg = DecodeConfig {
            temperature: 0.0,
            top_p,
            max_new_tokens: 1,
        };
        assert_eq!(sample_next(&logits, &cfg, &mut rng).unwrap(), 1);
    }
}

#[test]
fn generation_stops_and_skips_specials() {
    let tok = Tokenizer::fit(["a b c d"], TokenizerMode::Word, 1);
    let model = Model::new(
        ModelConfig {
            vocab_size: tok.vocab_size(),
            d_model: 8,
            n_layers: 1,
            n_heads: 2,
            d_ff: 8,
            max_seq_len: 10,
            ..ModelConfig::default()
        },
        1,
    )
    .unwrap();
    let prompt = tok.encode_prompt("a b");
    let mut rng = diglossia_core::rng::stream(0, 0);
    let cfg = DecodeConfig {
        temperature: 1.0,
        top_p: 1.0,
        max_new_tokens: 3,
    };
    let g = generate(&model, &tok, &prompt, &cfg, &mut rng).unwrap();
    assert!(g.ids.len() <= 3);
    assert!(g.ids.iter().all(|&t| !tok.is_special(t)));
    let long = DecodeConfig {
        max_new_tokens: 100,
        ..DecodeConfig::greedy(100)
    };
    let g = generate(&model, &tok, &prompt, &long, &mut rng).unwrap();
    assert!(matches!(g.stop, StopReason::ContextFull | StopReason::EndOfTurn));
    // the last logits of a full context still yield one more token
    assert!(prompt.len() + g.ids.len() <= 11);
}

proptest! {
    #[test]
    fn nucleus_is_a_distribution(
        logits in proptest::collection::vec(-5.0f64..5.0, 1..12),
        t in 0.05f64..2.0,
        p in 0.01f64..=1.0,
    ) {
        let d = nucleus_distribution(&logits, t, p).unwrap();
        let total: f64 = d.iter().map(|(_, q)| q).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(d.iter().any(|(i, _)| *i == argmax(&logits).unwrap()));
    }
}

#[test]
fn worked_nucleus_example() {
    let logits = [0.5f64.ln(), 0.3f64.ln(), 0.15f64.ln(), 0.05f64.ln()];
    let d = nucleus_distribution(&logits, 1.0, 0.6).unwrap();
    assert_eq!(d.len(), 2);
    assert_eq!((d[0].0, d[1].0), (0, 1));
    assert!((d[0].1 - 0.625).abs() < 1e-12 && (d[1].1 - 0.375).abs() < 1e-12);
}

#[test]
fn near_zero_temperature_concentrates_on_argmax() {
    let logits = [0.3, 1.1, 1.0, -0.4, 0.9, 0.0, 0.2, -2.0];
    let cfg = DecodeConfig {
        temperature: 1e-6,
        top_p: 1.0,
        max_new_tokens: 1,
    };
    let mut rng = diglossia_core::rng::stream(1, 1);
    let n = 10_000;
    let hits = (0..n)
        .filter(|_| sample_next(&logits, &cfg, &mut rng).unwrap() == 1)
        .count();
    assert!(hits as f64 / n as f64 >= 0.999);
}

/// Smallest subset reaching `top_p`; among equally small ones, the heaviest.
fn brute_force_nucleus(p: &[f64], top_p: f64) -> Vec<usize> {
    let n = p.len();
    let mut best: Option<(usize, f64, u32)> = None;
    for mask in 1u32..(1 << n) {
        let size = mask.count_ones() as usize;
        let mass: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| p[i]).sum();
        if mass < top_p - 1e-12 {
            continue;
        }
        let better = match best {
            None => true,
            Some((s, m, _)) => size < s || (size == s && mass > m),
        };
        if better {
            best = Some((size, mass, mask));
        }
    }
    let mask = best.unwrap().2;
    (0..n).filter(|i| mask & (1 << i) != 0).collect()
}

proptest! {
    #[test]
    fn nucleus_matches_subset_search(
        logits in proptest::collection::vec(-4.0f64..4.0, 2..=12),
        t in 0.1f64..2.0,
        top_p in 0.05f64..0.99,
    ) {
        let z: f64 = logits.iter().map(|l| (l / t).exp()).sum();
        let p: Vec<f64> = logits.iter().map(|l| (l / t).exp() / z).collect();
        // Skip inputs where the cut sits within rounding distance of top_p.
        let mut sorted = p.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut c = 0.0;
        for q in &sorted {
            c += q;
            prop_assume!((c - top_p).abs() > 1e-9);
        }
        let mut got: Vec<usize> = nucleus_distribution(&logits, t, top_p)
            .unwrap()
            .iter()
            .map(|(i, _)| *i as usize)
            .collect();
        got.sort();
        prop_assert_eq!(got, brute_force_nucleus(&p, top_p));
    }

    #[test]
    fn hotter_sampling_flattens_the_top_token(
        logits in proptest::collection::vec(-4.0f64..4.0, 2..=12),
        t1 in 0.1f64..2.0,
        dt in 0.01f64..2.0,
    ) {
        let top = |t: f64| {
            let d = nucleus_distribution(&logits, t, 1.0).unwrap();
            d[0].1
        };
        prop_assert!(top(t1 + dt) <= top(t1) + 1e-12);
    }
}
