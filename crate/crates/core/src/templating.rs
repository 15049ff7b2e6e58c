//! Instruction templates for the translation and sentence-completion tasks,
//! and the inverse parsers that turn model output back into scoreable text.
//!
//! Every rendered example is a single user turn followed by a single
//! supervised assistant turn.

use std::fmt;

use rand::Rng as _;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;
use thiserror::Error;

use crate::corpus::{BitextExample, CorpusError, MonoExample, Variety, VarietyRegistry};
use crate::rng;

/// Textual form of the end-of-turn token.
pub const END_OF_TURN: &str = "<|eot|>";
/// Prefix length used by the completion task.
pub const PREFIX_WORDS: usize = 3;
pub const OUTPUT_ONLY_CLAUSE: &str = " Output only the translation.";
const MT_CUE: &str = "Translation:";

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("variety `{0}` has no dialectal instruction string")]
    MissingDialectalInstruction(String),
    #[error("malformed chat example: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, TemplateError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Mt,
    Gen,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Mt => "mt",
            Task::Gen => "gen",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstructionLanguage {
    English,
    Dialectal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatSegment {
    pub role: Role,
    pub text: String,
    pub supervised: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMeta {
    pub source_id: String,
    /// Variety the assistant turn is written in.
    pub target_variety: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_variety: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction_language: Option<InstructionLanguage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatExample {
    pub task: Task,
    pub meta: ChatMeta,
    pub segments: Vec<ChatSegment>,
}

impl ChatExample {
    fn pair(task: Task, meta: ChatMeta, user: String, assistant: String) -> Self {
        ChatExample {
            task,
            meta,
            segments: vec![
                ChatSegment {
                    role: Role::User,
                    text: user,
                    supervised: false,
                },
                ChatSegment {
                    role: Role::Assistant,
                    text: assistant,
                    supervised: true,
                },
            ],
        }
    }

    pub fn user_text(&self) -> &str {
        &self.segments[0].text
    }

    pub fn assistant_text(&self) -> &str {
        &self.segments[1].text
    }

    pub fn id(&self) -> &str {
        &self.meta.source_id
    }

    /// One unsupervised user turn, then one supervised assistant turn.
    pub fn validate(&self) -> Result<()> {
        match self.segments.as_slice() {
            [u, a] if u.role == Role::User
                && !u.supervised
                && a.role == Role::Assistant
                && a.supervised => Ok(()),
            _ => Err(TemplateError::Malformed(format!(
                "{}: expected user turn then supervised assistant turn",
                self.meta.source_id
            ))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("chat examples serialize")
    }
}

pub fn to_jsonl(examples: &[ChatExample]) -> String {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&ex.to_json());
        out.push('\n');
    }
    out
}

pub fn from_jsonl(text: &str) -> Result<Vec<ChatExample>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let ex: ChatExample = serde_json::from_str(l)
                .map_err(|e| TemplateError::Malformed(format!("line {}: {e}", i + 1)))?;
            ex.validate()?;
            Ok(ex)
        })
        .collect()
}

/// User turn of the translation task.
pub fn mt_instruction(src: &str, tgt: &str, source: &str, strict_output_clause: bool) -> String {
    let clause = if strict_output_clause { OUTPUT_ONLY_CLAUSE } else { "" };
    format!("Translate from {src} into {tgt}.{clause}\n{source}\n{MT_CUE}")
}

pub fn render_mt(
    ex: &BitextExample,
    registry: &VarietyRegistry,
    strict_output_clause: bool,
) -> Result<ChatExample> {
    let src = registry.get(&ex.src_variety)?;
    let tgt = registry.get(&ex.tgt_variety)?;
    let user = mt_instruction(
        &src.display_name,
        &tgt.display_name,
        &ex.src_text,
        strict_output_clause,
    );
    let meta = ChatMeta {
        source_id: ex.id.clone(),
        target_variety: ex.tgt_variety.clone(),
        source_variety: Some(ex.src_variety.clone()),
        instruction_language: Some(InstructionLanguage::English),
        prefix: None,
    };
    Ok(ChatExample::pair(Task::Mt, meta, user, ex.tgt_text.clone()))
}

/// First `n` whitespace tokens joined by single spaces, or `None` when the
/// text has no token left over for a continuation.
pub fn extract_prefix(text: &str, n: usize) -> Option<String> {
    assert!(n >= 1, "prefix length must be positive");
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() <= n {
        return None;
    }
    Some(tokens[..n].join(" "))
}

/// Instruction and completion preamble of the completion task for one
/// variety; `{instruction}: {prefix}` prompts `{preamble}: {sentence}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenTemplate {
    pub instruction: String,
    pub preamble: String,
}

impl GenTemplate {
    pub fn english(display_name: &str) -> Self {
        GenTemplate {
            instruction: format!(
                "Complete the sentence starting with these {PREFIX_WORDS} words in {display_name}"
            ),
            preamble: format!("This is the full sentence in {display_name}"),
        }
    }

    pub fn for_variety(variety: &Variety, language: InstructionLanguage) -> Result<Self> {
        match language {
            InstructionLanguage::English => Ok(Self::english(&variety.display_name)),
            InstructionLanguage::Dialectal => match (&variety.gen_instruction, &variety.gen_preamble)
            {
                (Some(instruction), Some(preamble)) => Ok(GenTemplate {
                    instruction: instruction.clone(),
                    preamble: preamble.clone(),
                }),
                _ => Err(TemplateError::MissingDialectalInstruction(variety.code.clone())),
            },
        }
    }

    pub fn prompt(&self, prefix: &str) -> String {
        format!("{}: {prefix}", self.instruction)
    }

    pub fn completion(&self, sentence: &str) -> String {
        format!("{}: {sentence}", self.preamble)
    }
}

pub fn render_gen(
    ex: &MonoExample,
    language: InstructionLanguage,
    registry: &VarietyRegistry,
) -> Result<Option<ChatExample>> {
    let variety = registry.get(&ex.variety)?;
    let template = GenTemplate::for_variety(variety, language)?;
    let sentence = ex.text.trim();
    let Some(prefix) = extract_prefix(sentence, PREFIX_WORDS) else {
        return Ok(None);
    };
    let meta = ChatMeta {
        source_id: ex.id.clone(),
        target_variety: ex.variety.clone(),
        source_variety: None,
        instruction_language: Some(language),
        prefix: Some(prefix.clone()),
    };
    Ok(Some(ChatExample::pair(
        Task::Gen,
        meta,
        template.prompt(&prefix),
        template.completion(sentence),
    )))
}

/// Instruction language for one example: English with probability
/// `english_fraction`, drawn from a stream keyed by the example id so the
/// choice does not depend on corpus order.
pub fn instruction_language_for(id: &str, english_fraction: f64, seed: u64) -> InstructionLanguage {
    let mut r = rng::stream(seed, rng::label(id));
    if r.random::<f64>() < english_fraction {
        InstructionLanguage::English
    } else {
        InstructionLanguage::Dialectal
    }
}

/// Renders a monolingual pool, skipping sentences too short for a prefix.
pub fn render_gen_pool(
    examples: &[MonoExample],
    registry: &VarietyRegistry,
    english_fraction: f64,
    seed: u64,
) -> Result<Vec<ChatExample>> {
    let mut out = Vec::with_capacity(examples.len());
    for ex in examples {
        let language = instruction_language_for(&ex.id, english_fraction, seed);
        if let Some(chat) = render_gen(ex, language, registry)? {
            out.push(chat);
        }
    }
    Ok(out)
}

pub fn render_mt_pool(
    examples: &[BitextExample],
    registry: &VarietyRegistry,
    strict_output_clause: bool,
) -> Result<Vec<ChatExample>> {
    examples
        .iter()
        .map(|ex| render_mt(ex, registry, strict_output_clause))
        .collect()
}

fn before_end_of_turn(text: &str) -> &str {
    match text.find(END_OF_TURN) {
        Some(pos) => &text[..pos],
        None => text,
    }
}

/// Recovers the translation from raw model output.
pub fn parse_mt_output(generated: &str) -> String {
    let text = before_end_of_turn(generated);
    let text = match text.find(MT_CUE) {
        Some(pos) => &text[pos + MT_CUE.len()..],
        None => text,
    };
    text.trim().to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenOutput {
    pub sentence: String,
    pub prefix_kept: bool,
}

fn english_preamble() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^This is the full sentence in [^:\n]*:").unwrap())
}

/// Strips the completion preamble of `template` (or, failing that, the
/// English one) and checks whether the sentence repeats `expected_prefix`.
pub fn parse_gen_output(generated: &str, expected_prefix: &str, template: &GenTemplate) -> GenOutput {
    let text = before_end_of_turn(generated).trim_start();
    let own = format!("{}:", template.preamble);
    let body = if let Some(rest) = text.strip_prefix(own.as_str()) {
        rest
    } else if let Some(m) = english_preamble().find(text) {
        &text[m.end()..]
    } else {
        text
    };
    let sentence = body.trim().to_string();
    let expected: Vec<&str> = expected_prefix.split_whitespace().collect();
    let got: Vec<&str> = sentence.split_whitespace().take(expected.len()).collect();
    GenOutput {
        prefix_kept: !expected.is_empty() && got == expected,
        sentence,
    }
}
