//! Evaluation-filtering for multiple relational triple extraction.
//!
//! A token-pair scoring model rates every ordered token pair of a sentence in
//! one pass; candidate entity pairs are scored as the mean of their cells and
//! kept when the score is positive. Kept pairs are handed to a two-stage LLM
//! extraction pipeline as evidence for a recheck-and-complete pass.

pub mod corpus;
mod error;
pub mod filtering;
pub mod llm;
pub mod metrics;
pub mod model;
mod triple;

pub use error::{Error, Result};
pub use triple::{dedup_preserving_order, triples_to_json, Triple};
