use std::fmt;

use serde::{Deserialize, Serialize};

/// A `(subject, predicate, object)` fact.
///
/// Field order is `s`, `o`, `p` so that serialization follows the
/// `{"s": .., "o": .., "p": ..}` layout the extraction prompts ask for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub s: String,
    pub o: String,
    pub p: String,
}

impl Triple {
    pub fn new(s: impl Into<String>, p: impl Into<String>, o: impl Into<String>) -> Self {
        Triple {
            s: s.into(),
            o: o.into(),
            p: p.into(),
        }
    }

    /// Copy with surrounding whitespace removed from every field.
    pub fn trimmed(&self) -> Self {
        Triple {
            s: self.s.trim().to_string(),
            o: self.o.trim().to_string(),
            p: self.p.trim().to_string(),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.s, self.p, self.o)
    }
}

/// Serialize triples as the JSON list used in prompts and prediction files.
pub fn triples_to_json(triples: &[Triple]) -> String {
    serde_json::to_string(triples).expect("triples always serialize")
}

/// Remove exact duplicates, keeping first occurrences in order.
pub fn dedup_preserving_order(triples: impl IntoIterator<Item = Triple>) -> Vec<Triple> {
    let mut seen = std::collections::HashSet::new();
    triples
        .into_iter()
        .filter(|t| seen.insert(t.clone()))
        .collect()
}
