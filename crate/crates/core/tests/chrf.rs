mod support;

use diglossia_core::metrics::{chrf_pp, corpus_chrf, ChrfParams, ChrfStats};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use support::chrf_oracle::{oracle_chrf, ARABIC_PAIRS};

fn random_text(rng: &mut rand_chacha::ChaCha8Rng) -> String {
    let alphabet = b"abcde ";
    let len = rng.random_range(1..40);
    (0..len)
        .map(|_| alphabet[rng.random_range(0..alphabet.len())] as char)
        .collect()
}

#[test]
fn matches_oracle_on_random_ascii() {
    let p = ChrfParams::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 200 {
        let hyp = random_text(&mut rng);
        let reference = random_text(&mut rng);
        if reference.trim().is_empty() {
            continue;
        }
        let got = chrf_pp(&hyp, &reference, &p).unwrap();
        let want = oracle_chrf(&hyp, &reference, 6, 2, 2.0);
        assert!((got - want).abs() < 1e-9, "{hyp:?} / {reference:?}: {got} vs {want}");
        checked += 1;
    }
}

#[test]
fn matches_oracle_on_arabic() {
    let p = ChrfParams::default();
    for (reference, hyp) in ARABIC_PAIRS {
        let got = chrf_pp(hyp, reference, &p).unwrap();
        let want = oracle_chrf(hyp, reference, 6, 2, 2.0);
        assert!((got - want).abs() < 1e-9, "{hyp}: {got} vs {want}");
    }
    assert_eq!(chrf_pp(ARABIC_PAIRS[0].1, ARABIC_PAIRS[0].0, &p).unwrap(), 100.0);
}

#[test]
fn hand_computed_value() {
    // char orders 1..3 and word order 1 have n-grams; the rest drop out.
    // F(1) = 10/14, F(2) = 2.5/4.5, F(3) = 0, word F(1) = 0.
    let want = 100.0 * (10.0 / 14.0 + 2.5 / 4.5) / 4.0;
    let got = chrf_pp("ab", "abc", &ChrfParams::default()).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

#[test]
fn corpus_score_sums_statistics() {
    let p = ChrfParams::default();
    let hyps = ["kato miru", "zaza", "le pa"];
    let refs = ["kato mira", "zazu pe", "le pa"];
    let mut total = ChrfStats::zeros(&p);
    for (h, r) in hyps.iter().zip(&refs) {
        total.add(&ChrfStats::between(h, r, &p));
    }
    assert_eq!(corpus_chrf(&hyps, &refs, &p).unwrap(), total.score(p.beta));
}

proptest! {
    #[test]
    fn bounded_and_identity(text in "[a-e ]{1,30}") {
        prop_assume!(!text.trim().is_empty());
        let p = ChrfParams::default();
        prop_assert_eq!(chrf_pp(&text, &text, &p).unwrap(), 100.0);
    }

    #[test]
    fn score_in_range(hyp in "[a-e ]{0,30}", reference in "[a-e ]{1,30}") {
        prop_assume!(!reference.trim().is_empty());
        let s = chrf_pp(&hyp, &reference, &ChrfParams::default()).unwrap();
        prop_assert!((0.0..=100.0).contains(&s));
    }
}
