use serde::{Deserialize, Serialize};

use super::tokenize::{Tokenizer, CLS_TOKEN, SEP_TOKEN};
use crate::error::{Error, Result};
use crate::triple::Triple;

/// Inclusive token range `start..=end` over content tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Self {
        TokenSpan { start, end }
    }

    pub fn single(index: usize) -> Self {
        TokenSpan {
            start: index,
            end: index,
        }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }

    /// Checks `0 < start <= end < n - 1`, i.e. the span stays clear of both
    /// boundary tokens of an `n`-token sentence.
    pub fn check_content(&self, n: usize) -> Result<()> {
        if self.start == 0 || self.start > self.end || self.end + 1 >= n {
            return Err(Error::Bounds {
                start: self.start,
                end: self.end,
                size: n,
            });
        }
        Ok(())
    }
}

/// A tokenized sentence with its gold triples.
///
/// `tokens[0]` and `tokens[n - 1]` are the boundary tokens; `offsets` holds
/// byte ranges into `text` (empty ranges for the boundary tokens).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    pub offsets: Vec<(usize, usize)>,
    pub triples: Vec<Triple>,
}

impl AnnotatedSentence {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        triples: Vec<Triple>,
        tokenizer: &dyn Tokenizer,
    ) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        let content = tokenizer.tokenize(&text);
        if content.is_empty() {
            return Err(Error::Validation(format!(
                "sentence `{id}` has no content tokens"
            )));
        }
        for t in &triples {
            for entity in [&t.s, &t.o] {
                if entity.is_empty() || !text.contains(entity.as_str()) {
                    return Err(Error::Validation(format!(
                        "sentence `{id}`: entity `{entity}` of triple {t} does not occur in the text"
                    )));
                }
            }
        }
        let mut tokens = Vec::with_capacity(content.len() + 2);
        let mut offsets = Vec::with_capacity(content.len() + 2);
        tokens.push(CLS_TOKEN.to_string());
        offsets.push((0, 0));
        for tok in content {
            offsets.push((tok.start, tok.end));
            tokens.push(tok.text);
        }
        tokens.push(SEP_TOKEN.to_string());
        offsets.push((text.len(), text.len()));
        Ok(AnnotatedSentence {
            id,
            text,
            tokens,
            offsets,
            triples,
        })
    }

    /// Token count including both boundary tokens.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of content tokens, the sentence length used for length strata.
    pub fn content_len(&self) -> usize {
        self.tokens.len().saturating_sub(2)
    }

    /// Source text covered by a span.
    pub fn surface(&self, span: TokenSpan) -> Result<&str> {
        span.check_content(self.len())?;
        Ok(&self.text[self.offsets[span.start].0..self.offsets[span.end].1])
    }

    /// Distinct labeled entity strings in order of first mention.
    pub fn entities(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in &self.triples {
            for e in [t.s.as_str(), t.o.as_str()] {
                if !out.contains(&e) {
                    out.push(e);
                }
            }
        }
        out
    }

    /// Every token span whose source text equals `entity` exactly.
    pub fn align_spans(&self, entity: &str) -> Vec<TokenSpan> {
        let mut spans = Vec::new();
        if entity.is_empty() {
            return spans;
        }
        let last = self.len().saturating_sub(1);
        for start in 1..last {
            let from = self.offsets[start].0;
            if !self.text[from..].starts_with(entity) {
                continue;
            }
            for end in start..last {
                let to = self.offsets[end].1;
                let width = to - from;
                if width == entity.len() {
                    spans.push(TokenSpan::new(start, end));
                    break;
                }
                if width > entity.len() {
                    break;
                }
            }
        }
        spans
    }
}

/// Free-function form of [`AnnotatedSentence::align_spans`].
pub fn align_spans(sentence: &AnnotatedSentence, entity: &str) -> Vec<TokenSpan> {
    sentence.align_spans(entity)
}
