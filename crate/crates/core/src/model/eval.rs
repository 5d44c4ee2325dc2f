use serde::{Deserialize, Serialize};

use super::scorer::PairScorer;
use crate::corpus::{self_label, AnnotatedSentence, EntityPair};
use crate::error::Result;
use crate::filtering::score_span_pair;

/// Binary classification quality over self-labeled entity pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairClassification {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PairClassification {
    fn finish(mut self) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        self.precision = ratio(self.tp, self.tp + self.fp);
        self.recall = ratio(self.tp, self.tp + self.fn_);
        self.f1 = if self.precision + self.recall > 0.0 {
            2.0 * self.precision * self.recall / (self.precision + self.recall)
        } else {
            0.0
        };
        self
    }
}

/// Scores every gold-positive and assumed-negative entity pair of each
/// sentence and counts decisions at `threshold`. An entity pair with several
/// occurrences is predicted positive if any occurrence pair scores above the
/// threshold. Sentences that cannot be self-labeled are skipped.
pub fn evaluate_pairs(
    model: &PairScorer,
    sentences: &[AnnotatedSentence],
    threshold: f64,
) -> Result<PairClassification> {
    let mut acc = PairClassification::default();
    for s in sentences {
        let Ok(labeled) = self_label(s) else {
            continue;
        };
        if labeled.positive.is_empty() && labeled.negative.is_empty() {
            continue;
        }
        let matrix = model.infer_matrix(s)?;
        let predict = |p: &EntityPair| -> Result<bool> {
            let mut best = f64::NEG_INFINITY;
            for a in s.align_spans(&p.subject) {
                for b in s.align_spans(&p.object) {
                    best = best.max(score_span_pair(&matrix, a, b)?);
                }
            }
            Ok(best > threshold)
        };
        for p in &labeled.positive {
            if predict(p)? {
                acc.tp += 1;
            } else {
                acc.fn_ += 1;
            }
        }
        for p in &labeled.negative {
            if predict(p)? {
                acc.fp += 1;
            } else {
                acc.tn += 1;
            }
        }
    }
    Ok(acc.finish())
}
