//! Synthetic diglossic languages.
//!
//! A standard language is sampled from a small part-of-speech grammar over
//! pronounceable CV-syllable words. Each dialect is a deterministic rewrite of
//! the standard: a fraction of the vocabulary is replaced through function-word
//! and lexicon substitutions or affix rules. A foreign gloss language replaces
//! every word. Because dialect and foreign text is derived, each parallel pair
//! has an exact reference.
//!
//! Rewritten words always contain a consonant reserved for their variety, so
//! rule outputs never collide with rule inputs and applying a ruleset twice is
//! the same as applying it once.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::IndexedRandom;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BitextExample, MonoExample, Variety, VarietyKind, VarietyRegistry};
use crate::rng::{self, Rng};

const BASE_CONSONANTS: &[char] = &['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't'];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];
/// One reserved consonant per dialect.
const DIALECT_MARKERS: &[char] = &['z', 'x', 'q', 'j', 'h', 'y', 'c'];
const FOREIGN_MARKERS: &[char] = &['v', 'w'];
const DIALECT_NAMES: &[(&str, &str)] = &[
    ("nor", "Northern"),
    ("coa", "Coastal"),
    ("hig", "Highland"),
    ("des", "Desert"),
    ("riv", "Riverine"),
    ("isl", "Island"),
    ("val", "Valley"),
];
pub const STANDARD_CODE: &str = "std";
pub const FOREIGN_CODE: &str = "gls";

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("divergence must lie in (0, 1], got {0}")]
    Divergence(f64),
    #[error("at most {max} dialects are supported, got {got}")]
    TooManyDialects { max: usize, got: usize },
    #[error("need at least one dialect")]
    NoDialects,
    #[error("invalid sentence length range ({0}, {1})")]
    LengthRange(usize, usize),
    #[error("vocabulary of {vocab} words is too small for divergence {divergence}: {class} class would have no rewritten word")]
    VocabTooSmall {
        vocab: usize,
        divergence: f64,
        class: &'static str,
    },
    #[error("ruleset for `{variety}` violates its invariants: {reason}")]
    InvalidRuleSet { variety: String, reason: String },
}

pub type Result<T> = std::result::Result<T, SynthError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_dialects: usize,
    pub vocab_size: usize,
    /// Inclusive `(min, max)` sentence length in words.
    pub sentence_length: (usize, usize),
    /// Sentences per pool (one bitext pool and one monolingual pool per
    /// dialect, plus a monolingual pool of the standard).
    pub n_sentences: usize,
    /// Fraction of the standard vocabulary each dialect rewrites.
    pub divergence: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_dialects: 3,
            vocab_size: 300,
            sentence_length: (6, 10),
            n_sentences: 1000,
            divergence: 0.4,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.divergence > 0.0 && self.divergence <= 1.0) {
            return Err(SynthError::Divergence(self.divergence));
        }
        if self.n_dialects == 0 {
            return Err(SynthError::NoDialects);
        }
        if self.n_dialects > DIALECT_MARKERS.len() {
            return Err(SynthError::TooManyDialects {
                max: DIALECT_MARKERS.len(),
                got: self.n_dialects,
            });
        }
        let (lo, hi) = self.sentence_length;
        if lo == 0 || lo > hi {
            return Err(SynthError::LengthRange(lo, hi));
        }
        for (class, size) in WordClass::sizes(self.vocab_size) {
            if size == 0 || rewrite_count(size, self.divergence) == 0 {
                return Err(SynthError::VocabTooSmall {
                    vocab: self.vocab_size,
                    divergence: self.divergence,
                    class: class.name(),
                });
            }
        }
        Ok(())
    }
}

fn rewrite_count(class_size: usize, divergence: f64) -> usize {
    (class_size as f64 * divergence).round() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WordClass {
    Function,
    Noun,
    Verb,
    Adjective,
}

impl WordClass {
    const ALL: [WordClass; 4] = [
        WordClass::Function,
        WordClass::Noun,
        WordClass::Verb,
        WordClass::Adjective,
    ];

    fn name(self) -> &'static str {
        match self {
            WordClass::Function => "function",
            WordClass::Noun => "noun",
            WordClass::Verb => "verb",
            WordClass::Adjective => "adjective",
        }
    }

    /// 10% function words, 20% adjectives, 30% verbs, the rest nouns.
    fn sizes(vocab: usize) -> [(WordClass, usize); 4] {
        let function = vocab / 10;
        let adjective = vocab / 5;
        let verb = vocab * 3 / 10;
        let noun = vocab - function - adjective - verb;
        [
            (WordClass::Function, function),
            (WordClass::Noun, noun),
            (WordClass::Verb, verb),
            (WordClass::Adjective, adjective),
        ]
    }

    /// Successor distribution of the part-of-speech chain.
    fn next(prev: Option<WordClass>) -> &'static [(WordClass, f64)] {
        use WordClass::*;
        match prev {
            None => &[(Function, 0.4), (Noun, 0.4), (Adjective, 0.2)],
            Some(Function) => &[(Noun, 0.7), (Adjective, 0.3)],
            Some(Noun) => &[(Verb, 0.5), (Adjective, 0.2), (Function, 0.3)],
            Some(Adjective) => &[(Noun, 0.6), (Verb, 0.4)],
            Some(Verb) => &[(Function, 0.5), (Noun, 0.3), (Adjective, 0.2)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffixKind {
    Prefix,
    Suffix,
}

/// Attaches `affix` to each word in `words`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffixRule {
    pub kind: AffixKind,
    pub affix: String,
    pub words: BTreeSet<String>,
}

impl AffixRule {
    fn apply(&self, word: &str) -> Option<String> {
        if !self.words.contains(word) {
            return None;
        }
        Some(match self.kind {
            AffixKind::Prefix => format!("{}{}", self.affix, word),
            AffixKind::Suffix => format!("{}{}", word, self.affix),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialectRuleSet {
    pub variety: String,
    pub lexicon_map: BTreeMap<String, String>,
    pub affix_rules: Vec<AffixRule>,
    pub function_word_map: BTreeMap<String, String>,
    pub seed: u64,
}

impl DialectRuleSet {
    pub fn empty(variety: &str) -> Self {
        DialectRuleSet {
            variety: variety.to_string(),
            ..Default::default()
        }
    }

    /// Rewrites one word. Function words first, then the lexicon, then the
    /// first matching affix rule.
    pub fn rewrite_word(&self, word: &str) -> Option<String> {
        if let Some(out) = self.function_word_map.get(word) {
            return Some(out.clone());
        }
        if let Some(out) = self.lexicon_map.get(word) {
            return Some(out.clone());
        }
        self.affix_rules.iter().find_map(|r| r.apply(word))
    }

    pub fn inputs(&self) -> BTreeSet<String> {
        self.function_word_map
            .keys()
            .chain(self.lexicon_map.keys())
            .chain(self.affix_rules.iter().flat_map(|r| r.words.iter()))
            .cloned()
            .collect()
    }

    pub fn outputs(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .function_word_map
            .values()
            .chain(self.lexicon_map.values())
            .cloned()
            .collect();
        for rule in &self.affix_rules {
            out.extend(rule.words.iter().filter_map(|w| rule.apply(w)));
        }
        out
    }

    /// Outputs must be disjoint from inputs and all rewrites injective.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| SynthError::InvalidRuleSet {
            variety: self.variety.clone(),
            reason,
        };
        let inputs = self.inputs();
        let input_count = self.function_word_map.len()
            + self.lexicon_map.len()
            + self.affix_rules.iter().map(|r| r.words.len()).sum::<usize>();
        if inputs.len() != input_count {
            return Err(bad("a word is matched by more than one rule".into()));
        }
        let outputs = self.outputs();
        let distinct: HashSet<&String> = outputs.iter().collect();
        if distinct.len() != outputs.len() {
            return Err(bad("two inputs rewrite to the same output".into()));
        }
        if let Some(w) = outputs.iter().find(|w| inputs.contains(*w)) {
            return Err(bad(format!("output `{w}` is also a rule input")));
        }
        Ok(())
    }
}

/// Rewrites every whitespace-delimited word of `sentence`, copying whitespace
/// through untouched. Unmapped words pass through.
pub fn derive_dialect(sentence: &str, rules: &DialectRuleSet) -> String {
    let mut out = String::with_capacity(sentence.len() + 8);
    let mut word_start: Option<usize> = None;
    let flush = |out: &mut String, word: &str| match rules.rewrite_word(word) {
        Some(rewritten) => out.push_str(&rewritten),
        None => out.push_str(word),
    };
    for (i, ch) in sentence.char_indices() {
        if ch.is_whitespace() {
            if let Some(start) = word_start.take() {
                flush(&mut out, &sentence[start..i]);
            }
            out.push(ch);
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    if let Some(start) = word_start {
        flush(&mut out, &sentence[start..]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub text: String,
    pub class: WordClass,
}

/// Generated language: base vocabulary and the per-variety rulesets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthLanguage {
    pub config: SynthConfig,
    pub vocabulary: Vec<Word>,
    pub dialects: Vec<DialectRuleSet>,
    pub foreign: DialectRuleSet,
    pub registry: VarietyRegistry,
}

struct WordFactory {
    used: HashSet<String>,
}

impl WordFactory {
    fn syllable(rng: &mut Rng, consonant: Option<char>) -> String {
        let c = consonant.unwrap_or_else(|| *BASE_CONSONANTS.choose(rng).unwrap());
        let v = *VOWELS.choose(rng).unwrap();
        format!("{c}{v}")
    }

    /// Fresh word of `syllables` syllables; with a marker, one syllable uses
    /// the marker consonant. Grows the word by a syllable whenever short
    /// forms keep colliding.
    fn fresh(&mut self, rng: &mut Rng, syllables: usize, marker: Option<char>) -> String {
        let mut syllables = syllables;
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts % 64 == 0 {
                syllables += 1;
            }
            let marked = marker.map(|_| rng.random_range(0..syllables));
            let word: String = (0..syllables)
                .map(|i| Self::syllable(rng, if Some(i) == marked { marker } else { None }))
                .collect();
            if self.used.insert(word.clone()) {
                return word;
            }
        }
    }

    fn reserve(&mut self, word: &str) -> bool {
        self.used.insert(word.to_string())
    }
}

fn base_vocabulary(config: &SynthConfig, factory: &mut WordFactory) -> Vec<Word> {
    let mut rng = rng::stream(config.seed, 1);
    let mut vocabulary = Vec::with_capacity(config.vocab_size);
    for (class, size) in WordClass::sizes(config.vocab_size) {
        for _ in 0..size {
            let syllables = match class {
                WordClass::Function => rng.random_range(1..=2),
                _ => rng.random_range(2..=3),
            };
            vocabulary.push(Word {
                text: factory.fresh(&mut rng, syllables, None),
                class,
            });
        }
    }
    vocabulary
}

fn build_ruleset(
    variety: &str,
    marker: char,
    vocabulary: &[Word],
    divergence: f64,
    seed: u64,
    factory: &mut WordFactory,
) -> DialectRuleSet {
    let mut rng = rng::stream(seed, 2);
    let mut rules = DialectRuleSet::empty(variety);
    rules.seed = seed;
    let vowel = |rng: &mut Rng| *VOWELS.choose(rng).unwrap();
    let prefix = format!("{marker}{}", vowel(&mut rng));
    let suffix = format!("{}{marker}", vowel(&mut rng));
    let mut prefix_rule = AffixRule {
        kind: AffixKind::Prefix,
        affix: prefix,
        words: BTreeSet::new(),
    };
    let mut suffix_rule = AffixRule {
        kind: AffixKind::Suffix,
        affix: suffix,
        words: BTreeSet::new(),
    };
    for class in WordClass::ALL {
        let mut words: Vec<&Word> = vocabulary.iter().filter(|w| w.class == class).collect();
        let count = rewrite_count(words.len(), divergence);
        words.shuffle(&mut rng);
        for (i, word) in words.into_iter().take(count).enumerate() {
            let syllables = word.text.len() / 2;
            // a third of rewritten nouns and verbs go through affix rules
            let affix = match class {
                WordClass::Noun if i % 3 == 0 => Some(&mut suffix_rule),
                WordClass::Verb if i % 3 == 0 => Some(&mut prefix_rule),
                _ => None,
            };
            if let Some(rule) = affix {
                let mut probe = rule.clone();
                probe.words.insert(word.text.clone());
                let derived = probe.apply(&word.text).unwrap();
                if factory.reserve(&derived) {
                    rule.words.insert(word.text.clone());
                    continue;
                }
            }
            let replacement = factory.fresh(&mut rng, syllables.max(1), Some(marker));
            match class {
                WordClass::Function => {
                    rules.function_word_map.insert(word.text.clone(), replacement);
                }
                _ => {
                    rules.lexicon_map.insert(word.text.clone(), replacement);
                }
            }
        }
    }
    rules.affix_rules = [prefix_rule, suffix_rule]
        .into_iter()
        .filter(|r| !r.words.is_empty())
        .collect();
    rules
}

fn build_foreign(vocabulary: &[Word], seed: u64, factory: &mut WordFactory) -> DialectRuleSet {
    let mut rng = rng::stream(seed, 3);
    let mut rules = DialectRuleSet::empty(FOREIGN_CODE);
    rules.seed = seed;
    for word in vocabulary {
        let marker = *FOREIGN_MARKERS.choose(&mut rng).unwrap();
        let syllables = (word.text.len() / 2).max(1);
        let replacement = factory.fresh(&mut rng, syllables, Some(marker));
        match word.class {
            WordClass::Function => rules.function_word_map.insert(word.text.clone(), replacement),
            _ => rules.lexicon_map.insert(word.text.clone(), replacement),
        };
    }
    rules
}

impl SynthLanguage {
    pub fn new(config: &SynthConfig) -> Result<Self> {
        config.validate()?;
        let mut factory = WordFactory {
            used: HashSet::new(),
        };
        let vocabulary = base_vocabulary(config, &mut factory);
        let mut dialects = Vec::with_capacity(config.n_dialects);
        let mut varieties = vec![Variety::new(STANDARD_CODE, "Standard", VarietyKind::Standard)];
        for k in 0..config.n_dialects {
            let (code, name) = DIALECT_NAMES[k];
            let marker = DIALECT_MARKERS[k];
            let seed = config.seed.wrapping_add(1000 + k as u64);
            let rules = build_ruleset(code, marker, &vocabulary, config.divergence, seed, &mut factory);
            rules.validate()?;
            // instruction and preamble phrased in the dialect itself
            let mut rng = rng::stream(seed, 4);
            let mut phrase = |n: usize| -> String {
                (0..n)
                    .map(|_| factory.fresh(&mut rng, 2, Some(marker)))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let display = format!("{name} Dialect");
            let instruction = format!("{} {display}", phrase(5));
            let preamble = format!("{} {display}", phrase(3));
            varieties.push(
                Variety::new(code, display, VarietyKind::Dialect)
                    .with_dialectal_templates(instruction, preamble),
            );
            dialects.push(rules);
        }
        let foreign = build_foreign(&vocabulary, config.seed.wrapping_add(999), &mut factory);
        foreign.validate()?;
        varieties.push(Variety::new(FOREIGN_CODE, "Gloss", VarietyKind::Foreign));
        let registry = VarietyRegistry::new(varieties).expect("synthetic registry is well formed");
        Ok(SynthLanguage {
            config: config.clone(),
            vocabulary,
            dialects,
            foreign,
            registry,
        })
    }

    pub fn ruleset(&self, variety: &str) -> Option<&DialectRuleSet> {
        if variety == FOREIGN_CODE {
            return Some(&self.foreign);
        }
        self.dialects.iter().find(|d| d.variety == variety)
    }

    fn words_of(&self, class: WordClass) -> Vec<&str> {
        self.vocabulary
            .iter()
            .filter(|w| w.class == class)
            .map(|w| w.text.as_str())
            .collect()
    }

    /// Samples `n` standard-language sentences from stream `stream`.
    pub fn sentences(&self, n: usize, stream: u64) -> Vec<String> {
        let by_class: BTreeMap<WordClass, Vec<&str>> = WordClass::ALL
            .iter()
            .map(|&c| (c, self.words_of(c)))
            .collect();
        let mut rng = rng::stream(self.config.seed, 100 + stream);
        let (lo, hi) = self.config.sentence_length;
        (0..n)
            .map(|_| {
                let len = rng.random_range(lo..=hi);
                let mut prev = None;
                let mut words = Vec::with_capacity(len);
                for _ in 0..len {
                    let choices = WordClass::next(prev);
                    let class = choices
                        .choose_weighted(&mut rng, |(_, w)| *w)
                        .expect("non-empty successor table")
                        .0;
                    words.push(*by_class[&class].choose(&mut rng).unwrap());
                    prev = Some(class);
                }
                words.join(" ")
            })
            .collect()
    }
}

/// The standard-variety pool.
pub fn generate_base_corpus(config: &SynthConfig) -> Result<Vec<MonoExample>> {
    let lang = SynthLanguage::new(config)?;
    Ok(base_corpus(&lang))
}

fn base_corpus(lang: &SynthLanguage) -> Vec<MonoExample> {
    lang.sentences(lang.config.n_sentences, 0)
        .into_iter()
        .enumerate()
        .map(|(i, text)| MonoExample {
            id: format!("mono-{STANDARD_CODE}-{i}"),
            text,
            variety: STANDARD_CODE.to_string(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpora {
    pub bitext: Vec<BitextExample>,
    pub mono: Vec<MonoExample>,
    pub registry: VarietyRegistry,
    pub language: SynthLanguage,
}

impl SynthCorpora {
    /// Texts grouped by variety, including the foreign sides of bitext, for
    /// training a variety classifier.
    pub fn texts_by_variety(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for ex in &self.mono {
            out.entry(ex.variety.clone()).or_default().push(ex.text.clone());
        }
        for ex in &self.bitext {
            if ex.src_variety == FOREIGN_CODE {
                out.entry(ex.src_variety.clone()).or_default().push(ex.src_text.clone());
            }
            if ex.tgt_variety == FOREIGN_CODE {
                out.entry(ex.tgt_variety.clone()).or_default().push(ex.tgt_text.clone());
            }
        }
        out
    }
}

/// Bitext pools (standard and foreign pairs for each dialect) and monolingual
/// pools (the standard plus every dialect). All pools are drawn from disjoint
/// sentence streams.
pub fn build_corpora(config: &SynthConfig) -> Result<SynthCorpora> {
    let lang = SynthLanguage::new(config)?;
    let n = config.n_sentences;
    let mut bitext = Vec::with_capacity(n * config.n_dialects);
    let mut mono = base_corpus(&lang);
    for (k, rules) in lang.dialects.iter().enumerate() {
        let code = rules.variety.as_str();
        let k = k as u64;
        for (i, base) in lang.sentences(n, 1 + 2 * k).into_iter().enumerate() {
            let dialect = derive_dialect(&base, rules);
            let foreign = derive_dialect(&base, &lang.foreign);
            let (src_text, tgt_text, src, tgt) = match i % 4 {
                0 => (base, dialect, STANDARD_CODE, code),
                1 => (dialect, base, code, STANDARD_CODE),
                2 => (dialect, foreign, code, FOREIGN_CODE),
                _ => (foreign, dialect, FOREIGN_CODE, code),
            };
            bitext.push(BitextExample {
                id: format!("bi-{code}-{i}"),
                src_text,
                tgt_text,
                src_variety: src.to_string(),
                tgt_variety: tgt.to_string(),
            });
        }
        for (i, base) in lang.sentences(n, 2 + 2 * k).into_iter().enumerate() {
            mono.push(MonoExample {
                id: format!("mono-{code}-{i}"),
                text: derive_dialect(&base, rules),
                variety: code.to_string(),
            });
        }
    }
    Ok(SynthCorpora {
        bitext,
        mono,
        registry: lang.registry.clone(),
        language: lang,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> SynthConfig {
        SynthConfig {
            n_sentences: 200,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn base_corpus_is_deterministic() {
        let a = generate_base_corpus(&config()).unwrap();
        let b = generate_base_corpus(&config()).unwrap();
        assert_eq!(a, b);
        assert_eq!(crate::corpus::mono_to_jsonl(&a), crate::corpus::mono_to_jsonl(&b));
    }

    #[test]
    fn fixed_length_range() {
        let cfg = SynthConfig {
            sentence_length: (5, 5),
            ..config()
        };
        for ex in generate_base_corpus(&cfg).unwrap() {
            assert_eq!(ex.text.split_whitespace().count(), 5);
        }
    }

    #[test]
    fn sentence_count() {
        let cfg = SynthConfig {
            n_sentences: 1000,
            ..config()
        };
        assert_eq!(generate_base_corpus(&cfg).unwrap().len(), 1000);
    }

    #[test]
    fn small_vocab_rejected() {
        let cfg = SynthConfig {
            vocab_size: 20,
            divergence: 0.1,
            ..config()
        };
        assert!(matches!(cfg.validate(), Err(SynthError::VocabTooSmall { .. })));
        let cfg = SynthConfig {
            divergence: 0.0,
            ..config()
        };
        assert_eq!(cfg.validate(), Err(SynthError::Divergence(0.0)));
    }

    #[test]
    fn empty_ruleset_is_identity() {
        let s = "ka ri  to\tmu na";
        assert_eq!(derive_dialect(s, &DialectRuleSet::empty("x")), s);
    }

    #[test]
    fn derive_is_idempotent_and_count_preserving() {
        let lang = SynthLanguage::new(&config()).unwrap();
        for s in lang.sentences(100, 7) {
            for rules in &lang.dialects {
                let once = derive_dialect(&s, rules);
                assert_eq!(derive_dialect(&once, rules), once);
                assert_eq!(once.split_whitespace().count(), s.split_whitespace().count());
            }
        }
    }

    #[test]
    fn rulesets_validate() {
        let lang = SynthLanguage::new(&config()).unwrap();
        for rules in lang.dialects.iter().chain([&lang.foreign]) {
            rules.validate().unwrap();
        }
        assert!(lang.dialects.iter().all(|r| !r.affix_rules.is_empty()));
    }

    #[test]
    fn ruleset_validation_catches_overlap() {
        let mut rules = DialectRuleSet::empty("x");
        rules.lexicon_map.insert("ka".into(), "zo".into());
        rules.lexicon_map.insert("zo".into(), "ze".into());
        assert!(rules.validate().is_err());
    }

    #[test]
    fn registry_shape() {
        let cfg = SynthConfig {
            n_dialects: 2,
            ..config()
        };
        let corpora = build_corpora(&cfg).unwrap();
        let kinds: Vec<_> = corpora.registry.iter().map(|v| v.kind).collect();
        assert_eq!(
            kinds,
            [
                VarietyKind::Standard,
                VarietyKind::Dialect,
                VarietyKind::Dialect,
                VarietyKind::Foreign
            ]
        );
    }

    #[test]
    fn bitext_references_are_exact() {
        let corpora = build_corpora(&config()).unwrap();
        for ex in &corpora.bitext {
            let lang = &corpora.language;
            if ex.src_variety == STANDARD_CODE {
                let rules = lang.ruleset(&ex.tgt_variety).unwrap();
                assert_eq!(derive_dialect(&ex.src_text, rules), ex.tgt_text);
            } else if ex.tgt_variety == STANDARD_CODE {
                let rules = lang.ruleset(&ex.src_variety).unwrap();
                assert_eq!(derive_dialect(&ex.tgt_text, rules), ex.src_text);
            }
        }
    }

    #[test]
    fn pools_have_disjoint_ids() {
        let corpora = build_corpora(&config()).unwrap();
        let mut ids: HashSet<&str> = HashSet::new();
        for id in corpora
            .bitext
            .iter()
            .map(|e| e.id.as_str())
            .chain(corpora.mono.iter().map(|e| e.id.as_str()))
        {
            assert!(ids.insert(id), "duplicate id {id}");
        }
    }

    #[test]
    fn corpora_are_deterministic() {
        assert_eq!(build_corpora(&config()).unwrap(), build_corpora(&config()).unwrap());
    }
}
