//! Small hand-built sentences shared by unit tests, integration tests and
//! benchmarks.

use super::sentence::AnnotatedSentence;
use super::tokenize::WordTokenizer;
use crate::triple::Triple;

pub const WORKED_EXAMPLE_TEXT: &str = "Microsoft founders Bill Gates and his friend Steve Jobs met in Seattle .";

/// Three labeled entities (Microsoft, Bill Gates, Steve Jobs) and two gold
/// triples, so six ordered entity pairs of which two are positive.
pub fn worked_example() -> AnnotatedSentence {
    AnnotatedSentence::new(
        "worked-example",
        WORKED_EXAMPLE_TEXT,
        vec![
            Triple::new("Bill Gates", "founders", "Microsoft"),
            Triple::new("Bill Gates", "friend", "Steve Jobs"),
        ],
        &WordTokenizer,
    )
    .expect("fixture is valid")
}

pub fn worked_example_relations() -> Vec<String> {
    vec!["founders".into(), "friend".into()]
}
