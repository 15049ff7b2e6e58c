//! Vocabulary built from training text, at word or character granularity.
//!
//! In word mode every whitespace-delimited run found in the vocabulary becomes
//! one token, and the single space between two adjacent word tokens is left
//! implicit. Anything else (other whitespace, unknown words) falls back to
//! character tokens, so encoding followed by decoding reproduces the input
//! exactly whenever all of its characters are known.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use diglossia_core::templating::END_OF_TURN;
use diglossia_core::ChatExample;
use serde::{Deserialize, Serialize};

use crate::{ModelError, Result};

pub const USER: u32 = 0;
pub const ASSISTANT: u32 = 1;
pub const EOT: u32 = 2;
pub const PAD: u32 = 3;
pub const UNK: u32 = 4;
pub const SPECIALS: [&str; 5] = ["<|user|>", "<|assistant|>", END_OF_TURN, "<|pad|>", "<|unk|>"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerMode {
    Char,
    Word,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Special,
    Char,
    Word,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "TokenizerFile", try_from = "TokenizerFile")]
pub struct Tokenizer {
    mode: TokenizerMode,
    tokens: Vec<String>,
    kinds: Vec<Kind>,
    chars: HashMap<char, u32>,
    words: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct TokenizerFile {
    mode: TokenizerMode,
    chars: Vec<char>,
    words: Vec<String>,
}

impl From<Tokenizer> for TokenizerFile {
    fn from(t: Tokenizer) -> Self {
        let mut chars = Vec::new();
        let mut words = Vec::new();
        for (tok, kind) in t.tokens.iter().zip(&t.kinds) {
            match kind {
                Kind::Char => chars.push(tok.chars().next().unwrap()),
                Kind::Word => words.push(tok.clone()),
                Kind::Special => {}
            }
        }
        TokenizerFile {
            mode: t.mode,
            chars,
            words,
        }
    }
}

impl TryFrom<TokenizerFile> for Tokenizer {
    type Error = String;

    fn try_from(f: TokenizerFile) -> std::result::Result<Self, String> {
        Ok(Tokenizer::from_parts(f.mode, f.chars, f.words))
    }
}

/// Encoded chat example. Position `p` contributes `-log P(labels[p])` to the
/// loss only when `supervised[p]`; `labels` equals `ids` for chat data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub ids: Vec<u32>,
    pub labels: Vec<u32>,
    pub supervised: Vec<bool>,
}

impl Encoded {
    pub fn new(ids: Vec<u32>, supervised: Vec<bool>) -> Self {
        Encoded {
            labels: ids.clone(),
            ids,
            supervised,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn is_space(c: char) -> bool {
    c.is_whitespace()
}

/// Splits text into alternating whitespace and non-whitespace runs.
fn runs(text: &str) -> Vec<(&str, bool)> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut current: Option<bool> = None;
    for (i, c) in text.char_indices() {
        let ws = is_space(c);
        if current.is_some_and(|w| w != ws) {
            out.push((&text[start..i], current.unwrap()));
            start = i;
        }
        current = Some(ws);
    }
    if let Some(ws) = current {
        out.push((&text[start..], ws));
    }
    out
}

impl Tokenizer {
    fn from_parts(mode: TokenizerMode, chars: Vec<char>, words: Vec<String>) -> Self {
        let mut t = Tokenizer {
            mode,
            tokens: Vec::new(),
            kinds: Vec::new(),
            chars: HashMap::new(),
            words: HashMap::new(),
        };
        for s in SPECIALS {
            t.tokens.push(s.to_string());
            t.kinds.push(Kind::Special);
        }
        for c in chars {
            if t.chars.contains_key(&c) {
                continue;
            }
            t.chars.insert(c, t.tokens.len() as u32);
            t.tokens.push(c.to_string());
            t.kinds.push(Kind::Char);
        }
        if mode == TokenizerMode::Word {
            for w in words {
                if t.words.contains_key(&w) {
                    continue;
                }
                t.words.insert(w.clone(), t.tokens.len() as u32);
                t.tokens.push(w);
                t.kinds.push(Kind::Word);
            }
        }
        t
    }

    /// Builds the vocabulary from raw texts. In word mode, words seen at
    /// least `min_word_count` times get their own token.
    pub fn fit<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        mode: TokenizerMode,
        min_word_count: usize,
    ) -> Self {
        let mut chars = BTreeSet::new();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for text in texts {
            chars.extend(text.chars());
            if mode == TokenizerMode::Word {
                for w in text.split_whitespace() {
                    *counts.entry(w).or_insert(0) += 1;
                }
            }
        }
        let words = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_word_count.max(1))
            .map(|(w, _)| w.to_string())
            .collect();
        Self::from_parts(mode, chars.into_iter().collect(), words)
    }

    pub fn fit_chats(chats: &[ChatExample], mode: TokenizerMode, min_word_count: usize) -> Self {
        Self::fit(
            chats
                .iter()
                .flat_map(|c| c.segments.iter().map(|s| s.text.as_str())),
            mode,
            min_word_count,
        )
    }

    pub fn mode(&self) -> TokenizerMode {
        self.mode
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn is_special(&self, id: u32) -> bool {
        self.kinds[id as usize] == Kind::Special
    }

    fn push_chars(&self, run: &str, out: &mut Vec<u32>) {
        out.extend(run.chars().map(|c| self.chars.get(&c).copied().unwrap_or(UNK)));
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        if self.mode == TokenizerMode::Char {
            self.push_chars(text, &mut out);
            return out;
        }
        let runs = runs(text);
        let known = |i: usize| -> bool {
            runs.get(i)
                .is_some_and(|(r, ws)| !ws && self.words.contains_key(*r))
        };
        for (i, (run, ws)) in runs.iter().enumerate() {
            if *ws {
                let implicit = *run == " " && i > 0 && known(i - 1) && known(i + 1);
                if !implicit {
                    self.push_chars(run, &mut out);
                }
            } else if let Some(&id) = self.words.get(*run) {
                out.push(id);
            } else {
                self.push_chars(run, &mut out);
            }
        }
        out
    }

    /// Inverse of [`encode`](Self::encode). Special tokens are rendered by
    /// name only when `keep_specials` is set.
    pub fn decode(&self, ids: &[u32], keep_specials: bool) -> String {
        let mut out = String::new();
        let mut prev_word = false;
        for &id in ids {
            let Some(kind) = self.kinds.get(id as usize) else {
                out.push('\u{FFFD}');
                prev_word = false;
                continue;
            };
            match kind {
                Kind::Word => {
                    if prev_word {
                        out.push(' ');
                    }
                    out.push_str(&self.tokens[id as usize]);
                    prev_word = true;
                }
                Kind::Char => {
                    out.push_str(&self.tokens[id as usize]);
                    prev_word = false;
                }
                Kind::Special => {
                    if keep_specials {
                        out.push_str(&self.tokens[id as usize]);
                    } else if id == UNK {
                        out.push('\u{FFFD}');
                    }
                    prev_word = false;
                }
            }
        }
        out
    }

    /// Prompt for generation: user turn followed by the assistant marker.
    pub fn encode_prompt(&self, user: &str) -> Vec<u32> {
        let mut ids = vec![USER];
        ids.extend(self.encode(user));
        ids.push(ASSISTANT);
        ids
    }

    /// Full training sequence; only assistant tokens and the closing
    /// end-of-turn token are supervised.
    pub fn encode_chat(&self, chat: &ChatExample, max_len: usize) -> Result<Encoded> {
        chat.validate()
            .map_err(|e| ModelError::Encoding(e.to_string()))?;
        let answer = self.encode(chat.assistant_text());
        if answer.is_empty() {
            return Err(ModelError::Encoding(format!(
                "{}: empty assistant turn",
                chat.id()
            )));
        }
        let mut ids = self.encode_prompt(chat.user_text());
        let mut supervised = vec![false; ids.len()];
        supervised.extend(std::iter::repeat_n(true, answer.len() + 1));
        ids.extend(answer);
        ids.push(EOT);
        if ids.len() > max_len {
            return Err(ModelError::SequenceTooLong {
                id: chat.id().to_string(),
                len: ids.len(),
                max: max_len,
            });
        }
        Ok(Encoded::new(ids, supervised))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tokenizer serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))
    }
}
