//! Self-labeling of token pairs from gold triples.
//!
//! Every gold `(subject, object)` pair is positive. Every other ordered pair
//! of distinct labeled entities is assumed negative. Entity pairs are
//! expanded to the full token cross-product of every occurrence. Cells not
//! touched by any entity pair stay 0 and are masked out of the loss.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::sentence::{AnnotatedSentence, TokenSpan};
use crate::error::{Error, Result};

/// Dense `n x n` grid of labels in `{+1, -1, 0}`; rows are subject tokens,
/// columns object tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairLabelMatrix {
    n: usize,
    cells: Vec<i8>,
}

/// One labeled token pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledCell {
    pub i: usize,
    pub j: usize,
    pub y: i8,
}

impl PairLabelMatrix {
    pub fn zeros(n: usize) -> Self {
        PairLabelMatrix {
            n,
            cells: vec![0; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.cells[i * self.n + j]
    }

    /// Writes cells, refusing to overwrite a nonzero label with a different
    /// one. On conflict nothing is written.
    pub fn apply(&mut self, cells: &[LabeledCell]) -> Result<()> {
        for c in cells {
            if c.i >= self.n || c.j >= self.n {
                return Err(Error::Shape(format!(
                    "cell ({}, {}) outside {}x{} matrix",
                    c.i, c.j, self.n, self.n
                )));
            }
            if !matches!(c.y, -1 | 1) {
                return Err(Error::Validation(format!("label {} is not +1/-1", c.y)));
            }
            let existing = self.get(c.i, c.j);
            if existing != 0 && existing != c.y {
                return Err(Error::Conflict {
                    row: c.i,
                    col: c.j,
                    existing,
                    requested: c.y,
                });
            }
        }
        for c in cells {
            self.cells[c.i * self.n + c.j] = c.y;
        }
        Ok(())
    }

    pub fn count(&self, label: i8) -> usize {
        self.cells.iter().filter(|&&y| y == label).count()
    }

    pub fn is_unlabeled(&self) -> bool {
        self.cells.iter().all(|&y| y == 0)
    }

    /// Nonzero cells in row-major order.
    pub fn to_cells(&self) -> Vec<LabeledCell> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &y)| y != 0)
            .map(|(k, &y)| LabeledCell {
                i: k / self.n,
                j: k % self.n,
                y,
            })
            .collect()
    }

    pub fn from_cells(n: usize, cells: &[LabeledCell]) -> Result<Self> {
        let mut m = Self::zeros(n);
        m.apply(cells)?;
        Ok(m)
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.cells
    }
}

/// An ordered pair of entity strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityPair {
    pub subject: String,
    pub object: String,
}

impl EntityPair {
    pub fn new(subject: impl Into<String>, object: impl Into<String>) -> Self {
        EntityPair {
            subject: subject.into(),
            object: object.into(),
        }
    }
}

/// Result of self-labeling one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfLabeled {
    pub labels: PairLabelMatrix,
    pub positive: Vec<EntityPair>,
    pub negative: Vec<EntityPair>,
}

/// A sentence together with its training target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub sentence: AnnotatedSentence,
    pub labels: PairLabelMatrix,
}

/// Cross-product of two spans, every cell carrying `label`.
pub fn split_to_token_pairs(subject: TokenSpan, object: TokenSpan, label: i8) -> Vec<LabeledCell> {
    let mut out = Vec::with_capacity(subject.len() * object.len());
    for i in subject.indices() {
        for j in object.indices() {
            out.push(LabeledCell { i, j, y: label });
        }
    }
    out
}

pub fn self_label(sentence: &AnnotatedSentence) -> Result<SelfLabeled> {
    let n = sentence.len();
    let entities = sentence.entities();
    let mut spans = Vec::with_capacity(entities.len());
    for e in &entities {
        let found = sentence.align_spans(e);
        if found.is_empty() {
            return Err(Error::Labeling {
                sentence: sentence.id.clone(),
                entity: e.to_string(),
            });
        }
        spans.push(found);
    }

    let gold: BTreeSet<(&str, &str)> = sentence
        .triples
        .iter()
        .map(|t| (t.s.as_str(), t.o.as_str()))
        .collect();

    let mut labels = PairLabelMatrix::zeros(n);
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    let mut cells = Vec::new();

    // Gold pairs first, in triple order, then the remaining ordered pairs.
    let mut seen = BTreeSet::new();
    for t in &sentence.triples {
        let key = (t.s.as_str(), t.o.as_str());
        if seen.insert(key) {
            positive.push(EntityPair::new(&t.s, &t.o));
        }
    }
    for (a, sa) in entities.iter().enumerate() {
        for (b, sb) in entities.iter().enumerate() {
            if a != b && !gold.contains(&(*sa, *sb)) {
                negative.push(EntityPair::new(*sa, *sb));
            }
        }
    }

    let index_of = |e: &str| entities.iter().position(|x| *x == e).expect("entity listed");
    for (pairs, y) in [(&positive, 1i8), (&negative, -1i8)] {
        for pair in pairs.iter() {
            for s in &spans[index_of(&pair.subject)] {
                for o in &spans[index_of(&pair.object)] {
                    cells.extend(split_to_token_pairs(*s, *o, y));
                }
            }
        }
    }
    // Apply in one pass so a conflict is detected no matter which label
    // would be written first.
    let mut by_cell = std::collections::HashMap::new();
    for c in &cells {
        if let Some(prev) = by_cell.insert((c.i, c.j), c.y) {
            if prev != c.y {
                return Err(Error::Conflict {
                    row: c.i,
                    col: c.j,
                    existing: prev,
                    requested: c.y,
                });
            }
        }
    }
    labels.apply(&cells)?;

    Ok(SelfLabeled {
        labels,
        positive,
        negative,
    })
}

/// A self-labeled negative that an external oracle says is related.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditFlag {
    pub pair: EntityPair,
}

/// Flags the self-labeled negatives that appear in `external_pairs`.
///
/// These are exactly the false negatives the labeling assumption can create:
/// both entities take part in labeled triples, they are related, yet no
/// triple links them.
pub fn false_negative_audit(
    sentence: &AnnotatedSentence,
    external_pairs: &[EntityPair],
) -> Result<Vec<AuditFlag>> {
    if external_pairs.is_empty() {
        return Ok(Vec::new());
    }
    let labeled = self_label(sentence)?;
    let oracle: BTreeSet<&EntityPair> = external_pairs.iter().collect();
    Ok(labeled
        .negative
        .into_iter()
        .filter(|p| oracle.contains(p))
        .map(|pair| AuditFlag { pair })
        .collect())
}
