//! Candidate-pair scoring and filtering against a [`ScoreMatrix`].
//!
//! A pair's score is the mean of the matrix cells over its subject-token by
//! object-token block. A pair is kept when the score is strictly above the
//! threshold, 0 by default, which on logits means probability above 0.5.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedSentence, TokenSpan};
use crate::error::{Error, Result};
use crate::model::ScoreMatrix;
use crate::triple::Triple;

pub const DEFAULT_THRESHOLD: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateSource {
    ExternalNer,
    OracleEntities,
    ExternalTriples,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub span: TokenSpan,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub subject: Mention,
    pub object: Mention,
    pub score: Option<f64>,
    pub source: CandidateSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub pair: CandidatePair,
    pub score: f64,
    pub kept: bool,
}

/// Mean of `matrix[k][l]` over `k` in `subject`, `l` in `object`.
pub fn score_span_pair(matrix: &ScoreMatrix, subject: TokenSpan, object: TokenSpan) -> Result<f64> {
    let n = matrix.size();
    for span in [subject, object] {
        if span.start > span.end || span.end >= n {
            return Err(Error::Bounds {
                start: span.start,
                end: span.end,
                size: n,
            });
        }
    }
    let block = matrix
        .scores
        .slice(ndarray::s![subject.start..=subject.end, object.start..=object.end]);
    Ok(block.sum() / (subject.len() * object.len()) as f64)
}

/// Scores each candidate once and keeps those with `score > threshold`,
/// preserving input order.
pub fn filter_candidates(
    matrix: &ScoreMatrix,
    candidates: &[CandidatePair],
    threshold: f64,
) -> Result<Vec<FilterDecision>> {
    candidates
        .iter()
        .map(|c| {
            let score = score_span_pair(matrix, c.subject.span, c.object.span)?;
            let mut pair = c.clone();
            pair.score = Some(score);
            Ok(FilterDecision {
                pair,
                score,
                kept: score > threshold,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Candidate generation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateMode {
    ExternalNer,
    OracleEntities,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerMention {
    pub text: String,
    pub start_tok: usize,
    pub end_tok: usize,
}

#[derive(Debug, Deserialize)]
struct NerRecord {
    id: String,
    mentions: Vec<NerMention>,
}

/// Entity mentions per sentence id, read from
/// `{"id": .., "mentions": [{"text", "start_tok", "end_tok"}]}` lines.
/// Token indices count the leading boundary token, so the first content
/// token is 1.
#[derive(Debug, Clone, Default)]
pub struct NerIndex {
    by_id: HashMap<String, Vec<NerMention>>,
}

impl NerIndex {
    pub fn from_jsonl(path: &Path) -> Result<Self> {
        let mut by_id = HashMap::new();
        for (line, text) in read_lines(path)? {
            let rec: NerRecord = serde_json::from_str(&text).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            by_id.insert(rec.id, rec.mentions);
        }
        Ok(NerIndex { by_id })
    }

    pub fn insert(&mut self, id: impl Into<String>, mentions: Vec<NerMention>) {
        self.by_id.insert(id.into(), mentions);
    }

    pub fn get(&self, id: &str) -> Option<&[NerMention]> {
        self.by_id.get(id).map(Vec::as_slice)
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn ordered_pairs(mentions: &[Mention], source: CandidateSource) -> Vec<CandidatePair> {
    let mut out = Vec::new();
    for (a, s) in mentions.iter().enumerate() {
        for (b, o) in mentions.iter().enumerate() {
            if a != b {
                out.push(CandidatePair {
                    subject: s.clone(),
                    object: o.clone(),
                    score: None,
                    source,
                });
            }
        }
    }
    out
}

/// All ordered pairs of distinct entity mentions.
///
/// Oracle mode uses the first occurrence of each gold entity; external mode
/// uses the mentions listed for the sentence id in `ner`.
pub fn generate_candidates(
    sentence: &AnnotatedSentence,
    mode: CandidateMode,
    ner: Option<&NerIndex>,
) -> Result<Vec<CandidatePair>> {
    match mode {
        CandidateMode::OracleEntities => {
            let mentions: Vec<Mention> = sentence
                .entities()
                .into_iter()
                .filter_map(|e| {
                    sentence.align_spans(e).first().map(|&span| Mention {
                        span,
                        text: e.to_string(),
                    })
                })
                .collect();
            Ok(ordered_pairs(&mentions, CandidateSource::OracleEntities))
        }
        CandidateMode::ExternalNer => {
            let ner = ner.ok_or_else(|| Error::Config("external-ner mode needs a mentions file".into()))?;
            let raw = ner.get(&sentence.id).ok_or_else(|| {
                Error::Lookup(format!("sentence `{}` missing from mentions file", sentence.id))
            })?;
            let mut mentions = Vec::with_capacity(raw.len());
            for m in raw {
                let span = TokenSpan::new(m.start_tok, m.end_tok);
                let surface = sentence.surface(span)?;
                if surface != m.text {
                    log::warn!(
                        "sentence `{}`: mention `{}` covers `{surface}`; using the covered text",
                        sentence.id,
                        m.text
                    );
                }
                mentions.push(Mention {
                    span,
                    text: surface.to_string(),
                });
            }
            Ok(ordered_pairs(&mentions, CandidateSource::ExternalNer))
        }
    }
}

// ---------------------------------------------------------------------------
// Post-filtering an external extractor's triples

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalTriple {
    pub s: String,
    pub p: String,
    pub o: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_span: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub o_span: Option<[usize; 2]>,
}

impl ExternalTriple {
    pub fn triple(&self) -> Triple {
        Triple::new(&self.s, &self.p, &self.o)
    }
}

#[derive(Debug, Deserialize)]
struct PredictionRecord {
    id: String,
    triples: Vec<ExternalTriple>,
}

/// Another extractor's predictions, keyed by sentence id.
#[derive(Debug, Clone, Default)]
pub struct ExternalPredictions {
    by_id: HashMap<String, Vec<ExternalTriple>>,
}

impl ExternalPredictions {
    pub fn from_jsonl(path: &Path) -> Result<Self> {
        let mut by_id = HashMap::new();
        for (line, text) in read_lines(path)? {
            let rec: PredictionRecord = serde_json::from_str(&text).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            by_id.insert(rec.id, rec.triples);
        }
        Ok(ExternalPredictions { by_id })
    }

    pub fn insert(&mut self, id: impl Into<String>, triples: Vec<ExternalTriple>) {
        self.by_id.insert(id.into(), triples);
    }

    pub fn get(&self, id: &str) -> &[ExternalTriple] {
        self.by_id.get(id).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleDecision {
    pub triple: Triple,
    pub score: Option<f64>,
    pub kept: bool,
    /// Set when the triple could not be placed in the sentence; such
    /// triples are passed through.
    pub flagged: bool,
}

fn resolve_span(sentence: &AnnotatedSentence, given: Option<[usize; 2]>, text: &str) -> Option<TokenSpan> {
    if let Some([a, b]) = given {
        let span = TokenSpan::new(a, b);
        if sentence.surface(span).ok() == Some(text) {
            return Some(span);
        }
    }
    sentence.align_spans(text).first().copied()
}

/// Keeps a triple iff its `(subject, object)` pair scores above `threshold`.
/// The predicate plays no part in the decision.
pub fn filter_external_triples(
    matrix: &ScoreMatrix,
    sentence: &AnnotatedSentence,
    triples: &[ExternalTriple],
    threshold: f64,
) -> Result<Vec<TripleDecision>> {
    let mut out = Vec::with_capacity(triples.len());
    for t in triples {
        let spans = (
            resolve_span(sentence, t.s_span, &t.s),
            resolve_span(sentence, t.o_span, &t.o),
        );
        let decision = match spans {
            (Some(s), Some(o)) => {
                let score = score_span_pair(matrix, s, o)?;
                TripleDecision {
                    triple: t.triple(),
                    score: Some(score),
                    kept: score > threshold,
                    flagged: false,
                }
            }
            _ => {
                log::warn!(
                    "sentence `{}`: cannot place triple ({}, {}, {}); passing it through",
                    sentence.id,
                    t.s,
                    t.p,
                    t.o
                );
                TripleDecision {
                    triple: t.triple(),
                    score: None,
                    kept: true,
                    flagged: true,
                }
            }
        };
        out.push(decision);
    }
    Ok(out)
}
