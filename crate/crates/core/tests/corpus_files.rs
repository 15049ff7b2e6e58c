use diglossia_core::corpus::{
    load_bitext, load_mono, split, write_bitext, write_mono, CorpusError, Format, LoadOptions,
    SplitRatios,
};
use diglossia_core::{Variety, VarietyKind, VarietyRegistry};

fn registry() -> VarietyRegistry {
    VarietyRegistry::new(vec![
        Variety::new("eng", "English", VarietyKind::Foreign),
        Variety::new("msa", "Modern Standard Arabic", VarietyKind::Standard),
        Variety::new("egy", "Egyptian Arabic", VarietyKind::Dialect),
    ])
    .unwrap()
}

#[test]
fn tsv_bitext_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("egy.tsv");
    std::fs::write(
        &path,
        "src\ttgt\nI'd like a typewriter ribbon.\tعايز شريط آلة كاتبة.\nThe very thing I was looking for.\tالحاجة اللي كنت بدوّر عليها.\tcustom-id\n",
    )
    .unwrap();
    let opts = LoadOptions {
        header: true,
        ..LoadOptions::bitext("eng", "egy")
    };
    let rows = load_bitext(&path, Format::Tsv, &opts, &registry()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].id, "egy.tsv:2");
    assert_eq!(rows[1].id, "custom-id");
    assert_eq!(rows[0].tgt_variety, "egy");

    let out = dir.path().join("copy.jsonl");
    write_bitext(&out, &rows).unwrap();
    let back = load_bitext(&out, Format::Jsonl, &LoadOptions::default(), &registry()).unwrap();
    assert_eq!(back, rows);
}

#[test]
fn bad_rows_report_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tsv");
    std::fs::write(&path, "a\tb\n\tc\n").unwrap();
    let err = load_bitext(&path, Format::Tsv, &LoadOptions::bitext("eng", "egy"), &registry())
        .unwrap_err();
    assert!(matches!(err, CorpusError::EmptyText { line: 2 }), "{err}");

    std::fs::write(&path, "a\tb\n").unwrap();
    let err = load_bitext(&path, Format::Tsv, &LoadOptions::bitext("eng", "xyz"), &registry())
        .unwrap_err();
    assert!(matches!(err, CorpusError::UnknownVariety(ref c) if c == "xyz"));

    let missing = dir.path().join("nope.tsv");
    assert!(matches!(
        load_bitext(&missing, Format::Tsv, &LoadOptions::bitext("eng", "egy"), &registry()),
        Err(CorpusError::Io { .. })
    ));
}

#[test]
fn mono_rejects_foreign_variety() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.tsv");
    std::fs::write(&path, "hello there friend again\n").unwrap();
    assert!(matches!(
        load_mono(&path, Format::Tsv, &LoadOptions::mono("eng"), &registry()),
        Err(CorpusError::MonoKind { line: 1, .. })
    ));
    let rows = load_mono(&path, Format::Tsv, &LoadOptions::mono("egy"), &registry()).unwrap();
    let out = dir.path().join("m.jsonl");
    write_mono(&out, &rows).unwrap();
    assert_eq!(
        load_mono(&out, Format::Jsonl, &LoadOptions::default(), &registry()).unwrap(),
        rows
    );
}

#[test]
fn split_is_reproducible_and_disjoint() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.tsv");
    let text: String = (0..97).map(|i| format!("sentence number {i} here\n")).collect();
    std::fs::write(&path, text).unwrap();
    let rows = load_mono(&path, Format::Tsv, &LoadOptions::mono("egy"), &registry()).unwrap();
    let a = split(&rows, SplitRatios::default(), 42).unwrap();
    let b = split(&rows, SplitRatios::default(), 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.train.len() + a.dev.len() + a.test.len(), 97);
    let c = split(&rows, SplitRatios::default(), 43).unwrap();
    assert_ne!(a.train, c.train);
}
