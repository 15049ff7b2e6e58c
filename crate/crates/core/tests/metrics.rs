mod support;

use std::collections::BTreeMap;

use diglossia_core::metrics::{
    adi2, chrf_pp, corpus_chrf, macro_average, train_classifier, ChrfParams, ClassifierParams,
    Dimension, EvalReport, EvalRow,
};
use diglossia_core::synthlang::{build_corpora, derive_dialect, SynthConfig};
use diglossia_core::{Variety, VarietyKind, VarietyRegistry};
use proptest::prelude::*;
use support::chrf_oracle::{oracle_chrf, oracle_corpus_chrf};

#[test]
fn two_pair_corpus_matches_summed_oracle() {
    let p = ChrfParams::default();
    let pairs = [("the cat sat on it", "the cat sat on the mat"), ("abcd", "abce")];
    let hyps: Vec<&str> = pairs.iter().map(|x| x.0).collect();
    let refs: Vec<&str> = pairs.iter().map(|x| x.1).collect();
    let got = corpus_chrf(&hyps, &refs, &p).unwrap();
    assert!((got - oracle_corpus_chrf(&pairs, 6, 2, 2.0)).abs() < 1e-9);
    // micro aggregation differs from the mean of sentence scores here
    let mean = pairs.iter().map(|(h, r)| chrf_pp(h, r, &p).unwrap()).sum::<f64>() / 2.0;
    assert!((got - mean).abs() > 1e-6);
}

#[test]
fn abcd_against_abce() {
    let got = chrf_pp("abcd", "abce", &ChrfParams::default()).unwrap();
    assert!((got - oracle_chrf("abcd", "abce", 6, 2, 2.0)).abs() < 1e-9);
}

#[test]
fn swapping_roles_changes_the_score() {
    // the short side has perfect precision but poor recall
    let p = ChrfParams::default();
    let (short, long) = ("kato", "kato miru zan");
    let a = chrf_pp(short, long, &p).unwrap();
    let b = chrf_pp(long, short, &p).unwrap();
    assert!((a - oracle_chrf(short, long, 6, 2, 2.0)).abs() < 1e-9);
    assert!((b - oracle_chrf(long, short, 6, 2, 2.0)).abs() < 1e-9);
    // beta = 2 weighs recall, so the hypothesis that covers the reference wins
    assert!(b > a, "{a} {b}");
}

fn row(variety: &str, dataset: &str, score: f64) -> EvalRow {
    EvalRow {
        model: "m".into(),
        checkpoint: 1,
        split: "test".into(),
        top_p: 1.0,
        temperature: 0.0,
        dataset: dataset.into(),
        variety: variety.into(),
        direction: String::new(),
        dimension: Dimension::Diglossia,
        score,
        count: 1,
        prefix_kept: None,
        scorer: "chrf++".into(),
    }
}

#[test]
fn macro_average_examples() {
    let rows = vec![row("v1", "d1", 10.0), row("v1", "d1", 20.0), row("v2", "d1", 30.0)];
    assert_eq!(macro_average(&rows, Dimension::Diglossia).unwrap(), 22.5);
    assert_eq!(macro_average(&rows[2..], Dimension::Diglossia).unwrap(), 30.0);
    let flat = vec![row("a", "x", 40.0), row("a", "x", 40.0), row("a", "x", 40.0), row("b", "y", 40.0)];
    assert_eq!(macro_average(&flat, Dimension::Diglossia).unwrap(), 40.0);
}

#[test]
fn report_jsonl_and_csv_agree() {
    let report = EvalReport::new(vec![row("v1", "d1", 10.0), row("v2", "d1", 30.0)]);
    let via_csv = EvalReport::from_csv_str(&report.to_csv_string().unwrap()).unwrap();
    let via_jsonl = EvalReport::from_jsonl(&report.to_jsonl()).unwrap();
    assert_eq!(via_csv, via_jsonl);
}

proptest! {
    #[test]
    fn duplicating_a_cell_leaves_macro_unchanged(
        scores in proptest::collection::vec((0usize..3, 0usize..2, 0.0f64..100.0), 1..20),
        dup_cell in 0usize..6,
        copies in 1usize..4,
    ) {
        let rows: Vec<EvalRow> = scores
            .iter()
            .map(|&(v, d, s)| row(&format!("v{v}"), &format!("d{d}"), s))
            .collect();
        let base = macro_average(&rows, Dimension::Diglossia).unwrap();
        let (v, d) = (format!("v{}", dup_cell % 3), format!("d{}", dup_cell / 3));
        let mut more = rows.clone();
        for r in rows.iter().filter(|r| r.variety == v && r.dataset == d) {
            for _ in 0..copies {
                more.push(r.clone());
            }
        }
        let after = macro_average(&more, Dimension::Diglossia).unwrap();
        prop_assert!((base - after).abs() < 1e-9);
    }

    #[test]
    fn chrf_in_range_on_unicode(hyp in "[a-cب-ت ]{0,20}", reference in "[a-cب-ت ]{1,20}") {
        prop_assume!(!reference.trim().is_empty());
        let s = chrf_pp(&hyp, &reference, &ChrfParams::default()).unwrap();
        prop_assert!((0.0..=100.0).contains(&s));
        prop_assert!((s - oracle_chrf(&hyp, &reference, 6, 2, 2.0)).abs() < 1e-9);
    }
}

fn toy_classifier() -> (diglossia_core::metrics::VarietyClassifier, VarietyRegistry) {
    let registry = VarietyRegistry::new(vec![
        Variety::new("std", "Standard", VarietyKind::Standard),
        Variety::new("aaa", "A", VarietyKind::Dialect),
        Variety::new("bbb", "B", VarietyKind::Dialect),
    ])
    .unwrap();
    let mut data: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for i in 0..60 {
        data.entry("std".into()).or_default().push(format!("mo ra ki {i} lo"));
        data.entry("aaa".into()).or_default().push(format!("zu zen ki {i} sha"));
        data.entry("bbb".into()).or_default().push(format!("wop wa ki {i} xi"));
    }
    (train_classifier(&data, &registry, ClassifierParams::default()).unwrap(), registry)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn adi2_is_the_product_of_its_factors(text in "[a-z ]{0,30}", target in prop_oneof![Just("aaa"), Just("bbb")]) {
        let (clf, _) = toy_classifier();
        let (dialect, given) = clf.fidelity_factors(&text, target).unwrap();
        let score = adi2(&text, target, &clf).unwrap();
        prop_assert_eq!(score, dialect * given);
        prop_assert!(score <= dialect.min(given) + 1e-15);
        prop_assert!((0.0..=1.0).contains(&score));
    }
}

#[test]
fn adi2_on_held_out_synthetic_text() {
    let corpora = build_corpora(&SynthConfig {
        n_sentences: 1000,
        ..SynthConfig::default()
    })
    .unwrap();
    let clf = train_classifier(&corpora.texts_by_variety(), &corpora.registry, ClassifierParams::default()).unwrap();
    let lang = &corpora.language;
    let fresh = lang.sentences(100, 77);
    let target = &lang.dialects[0];
    let mean = |texts: &[String]| texts.iter().map(|t| adi2(t, &target.variety, &clf).unwrap()).sum::<f64>() / texts.len() as f64;
    let own: Vec<String> = fresh.iter().map(|s| derive_dialect(s, target)).collect();
    assert!(mean(&own) > 0.9, "{}", mean(&own));
    assert!(mean(&fresh) < 0.1, "{}", mean(&fresh));
    assert_eq!(adi2("", &target.variety, &clf).unwrap(), 0.0);
}
