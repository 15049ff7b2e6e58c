use std::collections::BTreeSet;

use diglossia_core::metrics::{adi2, train_classifier, ClassifierParams};
use diglossia_core::synthlang::{
    build_corpora, derive_dialect, generate_base_corpus, SynthConfig, SynthLanguage, FOREIGN_CODE,
    STANDARD_CODE,
};
use diglossia_core::VarietyKind;
use proptest::prelude::*;

fn config(divergence: f64) -> SynthConfig {
    SynthConfig {
        n_dialects: 3,
        vocab_size: 300,
        sentence_length: (6, 10),
        n_sentences: 400,
        divergence,
        seed: 11,
    }
}

#[test]
fn rewritten_token_share_tracks_divergence() {
    let lang = SynthLanguage::new(&config(0.5)).unwrap();
    let rules = &lang.dialects[0];
    let base = lang.sentences(10_000, 0);
    let (mut changed, mut total) = (0usize, 0usize);
    for s in &base {
        let derived = derive_dialect(s, rules);
        let a: Vec<&str> = s.split_whitespace().collect();
        let b: Vec<&str> = derived.split_whitespace().collect();
        assert_eq!(a.len(), b.len());
        changed += a.iter().zip(&b).filter(|(x, y)| x != y).count();
        total += a.len();
    }
    let share = changed as f64 / total as f64;
    assert!((share - 0.5).abs() <= 0.05, "rewritten share {share}");
}

#[test]
fn dialects_share_few_token_types() {
    let lang = SynthLanguage::new(&config(0.5)).unwrap();
    let base = lang.sentences(5_000, 0);
    let types = |k: usize| -> BTreeSet<String> {
        base.iter()
            .flat_map(|s| {
                derive_dialect(s, &lang.dialects[k])
                    .split_whitespace()
                    .map(str::to_string)
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let (a, b) = (types(0), types(1));
    let shared = a.intersection(&b).count() as f64 / a.len().min(b.len()) as f64;
    assert!(shared < 0.6, "shared type share {shared}");
}

#[test]
fn same_seed_same_bytes() {
    let a = build_corpora(&config(0.4)).unwrap();
    let b = build_corpora(&config(0.4)).unwrap();
    assert_eq!(
        diglossia_core::corpus::bitext_to_jsonl(&a.bitext),
        diglossia_core::corpus::bitext_to_jsonl(&b.bitext)
    );
    assert_eq!(
        diglossia_core::corpus::mono_to_jsonl(&a.mono),
        diglossia_core::corpus::mono_to_jsonl(&b.mono)
    );
    let c = generate_base_corpus(&SynthConfig {
        seed: 12,
        ..config(0.4)
    })
    .unwrap();
    assert_ne!(generate_base_corpus(&config(0.4)).unwrap(), c);
}

#[test]
fn registry_describes_every_variety() {
    let corpora = build_corpora(&config(0.4)).unwrap();
    let reg = &corpora.registry;
    assert_eq!(reg.get(STANDARD_CODE).unwrap().kind, VarietyKind::Standard);
    assert_eq!(reg.get(FOREIGN_CODE).unwrap().kind, VarietyKind::Foreign);
    assert_eq!(reg.dialects().count(), 3);
    for d in reg.dialects() {
        assert!(d.gen_instruction.is_some() && d.gen_preamble.is_some());
    }
    for ex in &corpora.bitext {
        assert!(reg.contains(&ex.src_variety) && reg.contains(&ex.tgt_variety));
        assert_ne!(ex.src_variety, ex.tgt_variety);
    }
}

#[test]
fn classifier_separates_synthetic_varieties() {
    let corpora = build_corpora(&config(0.4)).unwrap();
    let data = corpora.texts_by_variety();
    let clf = train_classifier(&data, &corpora.registry, ClassifierParams::default()).unwrap();
    assert!(clf.heldout_accuracy() >= 0.9, "accuracy {}", clf.heldout_accuracy());

    // text in the target dialect scores higher than the standard or another dialect
    let lang = &corpora.language;
    let fresh = lang.sentences(50, 99);
    let target = &lang.dialects[0];
    let other = &lang.dialects[1];
    let mean = |texts: Vec<String>| -> f64 {
        texts.iter().map(|t| adi2(t, &target.variety, &clf).unwrap()).sum::<f64>() / texts.len() as f64
    };
    let own = mean(fresh.iter().map(|s| derive_dialect(s, target)).collect());
    let std = mean(fresh.clone());
    let wrong = mean(fresh.iter().map(|s| derive_dialect(s, other)).collect());
    assert!(own > 0.8, "{own}");
    assert!(std < 0.2 && wrong < 0.2, "{std} {wrong}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn rulesets_are_injective_for_any_seed(seed in 0u64..10_000, divergence in 0.1f64..=1.0) {
        let lang = SynthLanguage::new(&SynthConfig { seed, divergence, n_sentences: 10, ..config(0.4) }).unwrap();
        for rules in lang.dialects.iter().chain(std::iter::once(&lang.foreign)) {
            rules.validate().unwrap();
            let outs = rules.outputs();
            let unique: BTreeSet<&String> = outs.iter().collect();
            prop_assert_eq!(unique.len(), outs.len());
        }
    }
}
