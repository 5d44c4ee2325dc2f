//! Tokenizers with byte-offset tracking.
//!
//! Span alignment relies on offsets into the original text, so every
//! tokenizer must report where each token came from.

use serde::{Deserialize, Serialize};

pub const CLS_TOKEN: &str = "[CLS]";
pub const SEP_TOKEN: &str = "[SEP]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Byte offset of the first byte in the source text.
    pub start: usize,
    /// Byte offset one past the last byte.
    pub end: usize,
}

pub trait Tokenizer: Send + Sync {
    fn name(&self) -> &str;

    /// Content tokens only; boundary tokens are added by the caller.
    fn tokenize(&self, text: &str) -> Vec<Token>;
}

/// Splits on whitespace, emits punctuation and CJK ideographs as
/// single-character tokens, and groups other alphanumeric runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordTokenizer;

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2A6DF | 0x3040..=0x30FF)
}

impl Tokenizer for WordTokenizer {
    fn name(&self) -> &str {
        "word"
    }

    fn tokenize(&self, text: &str) -> Vec<Token> {
        let mut tokens = Vec::new();
        let mut word_start: Option<usize> = None;
        let flush = |tokens: &mut Vec<Token>, start: &mut Option<usize>, end: usize| {
            if let Some(s) = start.take() {
                tokens.push(Token {
                    text: text[s..end].to_string(),
                    start: s,
                    end,
                });
            }
        };
        for (i, c) in text.char_indices() {
            if c.is_whitespace() {
                flush(&mut tokens, &mut word_start, i);
            } else if (c.is_alphanumeric() || c == '_') && !is_cjk(c) {
                if word_start.is_none() {
                    word_start = Some(i);
                }
            } else {
                flush(&mut tokens, &mut word_start, i);
                let end = i + c.len_utf8();
                tokens.push(Token {
                    text: text[i..end].to_string(),
                    start: i,
                    end,
                });
            }
        }
        flush(&mut tokens, &mut word_start, text.len());
        tokens
    }
}
