use diglossia_model::checkpoint::{self, OptimizerState};
use diglossia_model::{LoraConfig, Model, ModelConfig, Tokenizer, TokenizerMode};
use ndarray::Array2;

fn setup() -> (Model, Tokenizer) {
    let tok = Tokenizer::fit(["ka ri to mu"], TokenizerMode::Word, 1);
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
        5,
    )
    .unwrap();
    (model, tok)
}

#[test]
fn round_trip_with_optimizer_state() {
    let (mut model, tok) = setup();
    model.apply_lora(&LoraConfig { rank: 2, ..LoraConfig::default() }, 1).unwrap();
    let n = model.params().params.len();
    let opt = OptimizerState {
        step: 7,
        m: model.params().iter().map(|p| Array2::from_elem(p.value.raw_dim(), 0.5)).collect(),
        v: model.params().iter().map(|p| Array2::from_elem(p.value.raw_dim(), 0.25)).collect(),
    };
    assert_eq!(opt.m.len(), n);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.bin");
    let meta = serde_json::json!({"step": 7});
    checkpoint::save(&path, &model, &tok, Some(&opt), &meta).unwrap();
    let back = checkpoint::load(&path).unwrap();
    assert_eq!(back.model, model);
    assert_eq!(back.optimizer.unwrap(), opt);
    assert_eq!(back.meta, meta);
    assert_eq!(back.tokenizer.encode("ka ri"), tok.encode("ka ri"));
}

#[test]
fn corrupt_files_are_rejected() {
    let (model, tok) = setup();
    let bytes = checkpoint::to_bytes(&model, &tok, None, &serde_json::Value::Null).unwrap();
    assert!(checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    assert!(checkpoint::from_bytes(&wrong).is_err());
    let mut version = bytes;
    version[8] = 99;
    assert!(checkpoint::from_bytes(&version).is_err());
}
