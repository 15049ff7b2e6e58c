use diglossia_model::gradcheck::check_gradients;
use diglossia_model::{Encoded, LoraConfig, Model, ModelConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn config(layers: usize, dropout: f64) -> ModelConfig {
    ModelConfig {
        vocab_size: 13,
        d_model: 8,
        n_layers: layers,
        n_heads: 2,
        d_ff: 16,
        max_seq_len: 16,
        dropout,
        init_std: 0.3,
        ..ModelConfig::default()
    }
}

fn random_batch(rng: &mut rand_chacha::ChaCha8Rng, vocab: u32, n: usize) -> Vec<Encoded> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(3..12);
            let ids: Vec<u32> = (0..len).map(|_| rng.random_range(0..vocab)).collect();
            let cut = rng.random_range(1..len);
            let supervised = (0..len).map(|i| i >= cut).collect();
            Encoded::new(ids, supervised)
        })
        .collect()
}

fn assert_close(model: &mut Model, batch: &[Encoded]) {
    let samples = check_gradients(model, batch, 6, 1e-5, 3).unwrap();
    assert!(!samples.is_empty());
    for s in samples {
        let err = s.relative_error(1e-6);
        assert!(err < 1e-4, "{} [{}]: analytic {} numeric {}", s.param, s.index, s.analytic, s.numeric);
    }
}

#[test]
fn one_layer_gradients_match_finite_differences() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut model = Model::new(config(1, 0.0), 9).unwrap();
    let batch = random_batch(&mut rng, 13, 3);
    assert_close(&mut model, &batch);
}

#[test]
fn two_layer_gradients_match_finite_differences() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
    let mut model = Model::new(config(2, 0.0), 10).unwrap();
    let batch = random_batch(&mut rng, 13, 2);
    assert_close(&mut model, &batch);
}

#[test]
fn adapter_gradients_match_finite_differences() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut model = Model::new(config(1, 0.0), 11).unwrap();
    let lora = LoraConfig {
        rank: 2,
        alpha: 4.0,
        dropout: 0.0,
        ..LoraConfig::default()
    };
    model.apply_lora(&lora, 1).unwrap();
    // move B off zero so gradients reach A
    for p in model.params_mut().iter_mut() {
        if p.name.ends_with("lora_b") {
            p.value.mapv_inplace(|_| rng.random_range(-0.3..0.3));
        }
    }
    let batch = random_batch(&mut rng, 13, 2);
    assert_close(&mut model, &batch);
    for p in model.params().iter().filter(|p| p.frozen) {
        assert!(p.grad.iter().all(|g| *g == 0.0), "{} got a gradient", p.name);
    }
}

#[test]
fn unsupervised_labels_never_matter() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let model = Model::new(config(1, 0.0), 12).unwrap();
    for _ in 0..100 {
        let batch = random_batch(&mut rng, 13, 4);
        let base = model.loss(&batch).unwrap();
        let mut noisy = batch.clone();
        for ex in &mut noisy {
            for (label, sup) in ex.labels.iter_mut().zip(&ex.supervised) {
                if !sup {
                    *label = rng.random_range(0..13);
                }
            }
        }
        assert_eq!(model.loss(&noisy).unwrap(), base);
    }
}

#[test]
fn dropout_is_reproducible_from_the_rng() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let model = Model::new(config(2, 0.3), 13).unwrap();
    let batch = random_batch(&mut rng, 13, 3);
    let a = model.forward(&batch, Some(&mut diglossia_core::rng::stream(1, 2))).unwrap().0;
    let b = model.forward(&batch, Some(&mut diglossia_core::rng::stream(1, 2))).unwrap().0;
    let c = model.forward(&batch, Some(&mut diglossia_core::rng::stream(1, 3))).unwrap().0;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn loss_is_finite_and_positive(seed in 0u64..1000) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let model = Model::new(config(1, 0.0), seed).unwrap();
        let batch = random_batch(&mut rng, 13, 2);
        let loss = model.loss(&batch).unwrap();
        prop_assert!(loss.is_finite() && loss > 0.0);
    }
}
