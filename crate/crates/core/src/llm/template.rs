//! Prompt templates for direct extraction (stage 1), recheck-and-complete
//! with injected candidate pairs (stage 2), and candidate-restricted
//! extraction used when stage 1 is skipped.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::triple::{triples_to_json, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// Direct extraction.
    One,
    /// Recheck of stage-1 output with candidate pairs.
    Two,
    /// Single call restricted to candidate pairs.
    Restricted,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::One => "stage1",
            Stage::Two => "stage2",
            Stage::Restricted => "restricted",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The output-format line shared by every template.
pub const FORMAT_LINE: &str = "Please output according to the specified format: \
[{\"s\": subject1, \"o\": object1, \"p\": relation1}, {\"s\": subject2, \"o\": object2, \"p\": relation2},...]";

pub const STAGE1_TEMPLATE: &str = "Pre-define the following relation list r, please extract all triples containing the above relations from the given sentence S.
r: {relations}
Note that the relation name of the triple must be selected from the above list, and other relations not listed are not considered. {format}
{examples}Now given the following input, please complete the extracting task.
Please output as many triples as possible that meet the requirements.
Input: S: {sentence}
";

pub const STAGE2_TEMPLATE: &str = "Pre-define the following relation list r. We want to extract all triples containing the above relations from the given sentence S. Here are the original extraction results A.
r: {relations}
S: {sentence}
A: {results}
{candidates}
{instruction}
Constraints and output format are the same as stage 1: the relation name of the triple must be selected from the above list, and other relations not listed are not considered.
{format}
";

pub const RESTRICTED_TEMPLATE: &str = "Pre-define the following relation list r, please extract all triples containing the above relations from the given sentence S.
r: {relations}
Note that the relation name of the triple must be selected from the above list, and other relations not listed are not considered. {format}
The entity pairs that may be related in the sentence are {candidates}
Strictly limit the extraction to these candidate entity pairs: the subject and object of every output triple must be one of the pairs above.
Input: S: {sentence}
";

pub const RECHECK_AND_COMPLETE: &str =
    "Please check the original results and fill in the missing triples, remove the wrong triples and output the final results.";

pub const RECHECK_ONLY: &str =
    "No candidate entity pairs are given. Please check the original results, remove the wrong triples and output the final results.";

/// Appended to a prompt whose first response could not be parsed.
pub const FORMAT_REMINDER: &str = "Reminder: answer with only a JSON list of the form \
[{\"s\": subject, \"o\": object, \"p\": relation}] and no other text.";

/// One worked example shown before the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub sentence: String,
    pub triples: Vec<Triple>,
}

/// A candidate `(subject, object)` pair by surface text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SurfacePair {
    pub subject: String,
    pub object: String,
}

impl SurfacePair {
    pub fn new(subject: impl Into<String>, object: impl Into<String>) -> Self {
        SurfacePair {
            subject: subject.into(),
            object: object.into(),
        }
    }
}

impl std::fmt::Display for SurfacePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.subject, self.object)
    }
}

/// Substitutes `{name}` placeholders in a single left-to-right pass, so text
/// inserted for one placeholder is never rescanned. Braces that do not form
/// a known placeholder are copied verbatim.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + values.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn relation_list(relations: &[String]) -> Result<String> {
    if relations.is_empty() {
        return Err(Error::Config("relation list is empty".into()));
    }
    Ok(serde_json::to_string(relations).expect("strings always serialize"))
}

/// `(s_1, o_1),(s_2, o_2),...` in input order.
pub fn serialize_pairs(pairs: &[SurfacePair]) -> String {
    pairs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn render_stage1(sentence: &str, relations: &[String], fewshot: &[FewShotExample]) -> Result<String> {
    let rel = relation_list(relations)?;
    let mut examples = String::new();
    if !fewshot.is_empty() {
        examples.push_str("Here are some examples:\n");
        for ex in fewshot {
            examples.push_str("S: ");
            examples.push_str(&ex.sentence);
            examples.push_str("\nOutput: ");
            examples.push_str(&triples_to_json(&ex.triples));
            examples.push('\n');
        }
    }
    Ok(fill(
        STAGE1_TEMPLATE,
        &[
            ("relations", &rel),
            ("format", FORMAT_LINE),
            ("examples", &examples),
            ("sentence", sentence),
        ],
    ))
}

/// With no candidate pairs the prompt degenerates to a recheck of the
/// stage-1 results.
pub fn render_stage2(
    sentence: &str,
    relations: &[String],
    stage1: &[Triple],
    kept_pairs: &[SurfacePair],
) -> Result<String> {
    let rel = relation_list(relations)?;
    let (candidates, instruction) = if kept_pairs.is_empty() {
        (
            "Now we claim that the entity pairs that may be related in the above sentence are: none.".to_string(),
            RECHECK_ONLY,
        )
    } else {
        (
            format!(
                "Now we claim that the entity pairs that may be related in the above sentence are {}",
                serialize_pairs(kept_pairs)
            ),
            RECHECK_AND_COMPLETE,
        )
    };
    Ok(fill(
        STAGE2_TEMPLATE,
        &[
            ("relations", &rel),
            ("sentence", sentence),
            ("results", &triples_to_json(stage1)),
            ("candidates", &candidates),
            ("instruction", instruction),
            ("format", FORMAT_LINE),
        ],
    ))
}

pub fn render_restricted(sentence: &str, relations: &[String], pairs: &[SurfacePair]) -> Result<String> {
    let rel = relation_list(relations)?;
    let candidates = if pairs.is_empty() {
        "none; output an empty list.".to_string()
    } else {
        serialize_pairs(pairs)
    };
    Ok(fill(
        RESTRICTED_TEMPLATE,
        &[
            ("relations", &rel),
            ("format", FORMAT_LINE),
            ("candidates", &candidates),
            ("sentence", sentence),
        ],
    ))
}

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Digest of every template body, keyed by stage name.
pub fn template_digests() -> BTreeMap<String, String> {
    [
        (Stage::One, STAGE1_TEMPLATE),
        (Stage::Two, STAGE2_TEMPLATE),
        (Stage::Restricted, RESTRICTED_TEMPLATE),
    ]
    .into_iter()
    .map(|(stage, body)| (stage.to_string(), sha256_hex(body)))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn stage1_minimal() {
        let p = render_stage1("Bill Gates founded Microsoft .", &rels(&["founders"]), &[]).unwrap();
        assert!(p.contains(FORMAT_LINE));
        assert!(p.contains("[\"founders\"]"));
        assert!(p.contains("Please output as many triples as possible that meet the requirements."));
        assert!(p.ends_with("Input: S: Bill Gates founded Microsoft .\n"));
        assert!(!p.contains("examples"));
    }

    #[test]
    fn stage1_examples_sit_between_instructions_and_input() {
        let ex = FewShotExample {
            sentence: "Ann founded Acme .".into(),
            triples: vec![Triple::new("Ann", "founders", "Acme")],
        };
        let p = render_stage1("Bob met Carl .", &rels(&["founders"]), &[ex]).unwrap();
        let ex_at = p.find("Here are some examples").unwrap();
        assert!(p.find("Note that").unwrap() < ex_at);
        assert!(ex_at < p.find("Input: S:").unwrap());
        assert!(p.contains(r#"[{"s":"Ann","o":"Acme","p":"founders"}]"#));
    }

    #[test]
    fn sentence_is_byte_exact_and_not_rescanned() {
        let s = "Zoë met 北京 {relations} {sentence} .";
        let p = render_stage1(s, &rels(&["r"]), &[]).unwrap();
        assert!(p.contains(s));
        let p = render_stage2(s, &rels(&["r"]), &[], &[]).unwrap();
        assert!(p.contains(s));
    }

    #[test]
    fn empty_relation_list_is_a_config_error() {
        assert!(matches!(render_stage1("x", &[], &[]), Err(Error::Config(_))));
        assert!(render_stage2("x", &[], &[], &[]).is_err());
        assert!(render_restricted("x", &[], &[]).is_err());
    }

    #[test]
    fn stage2_contains_results_and_pairs() {
        let a = vec![
            Triple::new("A", "r", "B"),
            Triple::new("C", "r", "D"),
            Triple::new("E", "r", "F"),
        ];
        let pairs = vec![SurfacePair::new("Bill Gates", "Microsoft"), SurfacePair::new("Steve Jobs", "Apple")];
        let p = render_stage2("S", &rels(&["r"]), &a, &pairs).unwrap();
        assert!(p.contains(&format!("A: {}", triples_to_json(&a))));
        assert!(p.contains("(Bill Gates, Microsoft),(Steve Jobs, Apple)"));
        assert!(p.contains("fill in the missing triples, remove the wrong triples"));
    }

    #[test]
    fn stage2_without_pairs_is_recheck_only() {
        let p = render_stage2("S", &rels(&["r"]), &[], &[]).unwrap();
        assert!(p.contains(RECHECK_ONLY));
        assert!(!p.contains("fill in the missing triples"));
        assert!(p.contains("A: []"));
    }

    #[test]
    fn restricted_lists_pairs() {
        let p = render_restricted("S", &rels(&["r"]), &[SurfacePair::new("a", "b")]).unwrap();
        assert!(p.contains("(a, b)") && p.contains("Strictly limit"));
    }

    #[test]
    fn digests_are_stable() {
        let d = template_digests();
        assert_eq!(d.len(), 3);
        assert_eq!(d, template_digests());
        assert!(d.values().all(|h| h.len() == 64));
    }

    #[test]
    fn unknown_braces_survive() {
        assert_eq!(fill("a {x} {y} {", &[("x", "1")]), "a 1 {y} {");
    }
}
