//! Dataset ingestion, relation normalization, span alignment and
//! self-labeling of token-pair matrices.

pub mod fixtures;
mod labeling;
mod load;
mod relations;
mod sentence;
mod stats;
mod synth;
pub mod tokenize;

pub use labeling::{
    false_negative_audit, self_label, split_to_token_pairs, AuditFlag, EntityPair, LabeledCell,
    LabeledSentence, PairLabelMatrix, SelfLabeled,
};
pub use load::{load_dataset, DatasetFormat, DatasetLoader};
pub use relations::{RelationList, RelationNormalizer};
pub use sentence::{align_spans, AnnotatedSentence, TokenSpan};
pub use stats::{compute_stats, render_stats_table, DatasetStats};
pub use synth::{
    default_entities, default_templates, generate_synthetic, RelationTemplate, SynthConfig,
    TripleCount,
};
pub use tokenize::{Token, Tokenizer, WordTokenizer};

/// Self-labels every sentence, returning the labeled ones and the ids of
/// sentences skipped because of a labeling error or conflict.
pub fn label_dataset(
    sentences: &[AnnotatedSentence],
) -> (Vec<LabeledSentence>, Vec<(String, crate::Error)>) {
    let mut ok = Vec::with_capacity(sentences.len());
    let mut skipped = Vec::new();
    for s in sentences {
        match self_label(s) {
            Ok(out) => ok.push(LabeledSentence {
                sentence: s.clone(),
                labels: out.labels,
            }),
            Err(e) => {
                log::warn!("skipping sentence `{}`: {e}", s.id);
                skipped.push((s.id.clone(), e));
            }
        }
    }
    (ok, skipped)
}

