//! Tolerant parsing of LLM responses into triples.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::triple::Triple;

/// How a response was read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseRoute {
    /// The whole response was a JSON list.
    #[default]
    Strict,
    /// A bracket-balanced list was found inside surrounding text.
    RecoveredList,
    /// Only individual `{...}` objects could be read.
    RecoveredObjects,
    /// Nothing usable was found.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub route: ParseRoute,
    /// Triples whose predicate is not in the relation list.
    pub dropped_predicates: usize,
    /// List items that are not `{"s", "p", "o"}` string objects.
    pub malformed_items: usize,
    pub duplicates: usize,
}

impl ParseDiagnostics {
    pub fn failed(&self) -> bool {
        self.route == ParseRoute::Failed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParsedTriples {
    pub triples: Vec<Triple>,
    pub diagnostics: ParseDiagnostics,
}

/// Parses a response of the form `[{"s": .., "o": .., "p": ..}, ...]`.
///
/// Tries a strict parse of the whole text, then the first bracket-balanced
/// JSON list inside it, then every balanced `{...}` object. Fields are
/// trimmed, predicates outside `relations` are dropped and counted, and
/// duplicates are removed keeping the first occurrence. Never fails: an
/// unusable response yields no triples and [`ParseRoute::Failed`].
pub fn parse_triples(response: &str, relations: &[String]) -> ParsedTriples {
    let (items, route) = locate_items(response);
    let mut diagnostics = ParseDiagnostics {
        route,
        ..ParseDiagnostics::default()
    };
    let allowed: HashSet<&str> = relations.iter().map(String::as_str).collect();
    let mut seen = HashSet::new();
    let mut triples = Vec::new();
    for item in items {
        let Some(t) = as_triple(&item) else {
            diagnostics.malformed_items += 1;
            continue;
        };
        if !allowed.contains(t.p.as_str()) {
            diagnostics.dropped_predicates += 1;
            continue;
        }
        if seen.insert(t.clone()) {
            triples.push(t);
        } else {
            diagnostics.duplicates += 1;
        }
    }
    ParsedTriples { triples, diagnostics }
}

fn as_triple(v: &Value) -> Option<Triple> {
    let obj = v.as_object()?;
    let field = |k: &str| obj.get(k).and_then(Value::as_str).map(|s| s.trim().to_string());
    let t = Triple::new(field("s")?, field("p")?, field("o")?);
    (!t.s.is_empty() && !t.o.is_empty() && !t.p.is_empty()).then_some(t)
}

fn locate_items(response: &str) -> (Vec<Value>, ParseRoute) {
    if let Ok(Value::Array(items)) = serde_json::from_str::<Value>(response.trim()) {
        return (items, ParseRoute::Strict);
    }
    for (start, end) in balanced_regions(response, b'[', b']') {
        if let Ok(Value::Array(items)) = serde_json::from_str::<Value>(&response[start..end]) {
            if items.is_empty() || items.iter().any(Value::is_object) {
                return (items, ParseRoute::RecoveredList);
            }
        }
    }
    let objects: Vec<Value> = balanced_regions(response, b'{', b'}')
        .into_iter()
        .filter_map(|(s, e)| serde_json::from_str::<Value>(&response[s..e]).ok())
        .filter(Value::is_object)
        .collect();
    if objects.is_empty() {
        (Vec::new(), ParseRoute::Failed)
    } else {
        (objects, ParseRoute::RecoveredObjects)
    }
}

/// Outermost `open ... close` byte ranges, skipping brackets inside JSON
/// string literals.
fn balanced_regions(text: &str, open: u8, close: u8) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        if b == b'"' && depth > 0 {
            in_string = true;
        } else if b == open {
            if depth == 0 {
                start = i;
            }
            depth += 1;
        } else if b == close && depth > 0 {
            depth -= 1;
            if depth == 0 {
                out.push((start, i + 1));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triple::triples_to_json;

    fn rels() -> Vec<String> {
        vec!["founders".into(), "friend".into()]
    }

    #[test]
    fn well_formed_list() {
        let r = parse_triples(r#"[{"s":"Bill Gates","o":"Microsoft","p":"founders"}]"#, &rels());
        assert_eq!(r.triples, vec![Triple::new("Bill Gates", "founders", "Microsoft")]);
        assert_eq!(r.diagnostics.route, ParseRoute::Strict);
    }

    #[test]
    fn unknown_predicate_is_dropped_and_counted() {
        let r = parse_triples(
            r#"[{"s":"a","o":"b","p":"invented_relation"},{"s":"a","o":"b","p":"friend"}]"#,
            &rels(),
        );
        assert_eq!(r.triples.len(), 1);
        assert_eq!(r.diagnostics.dropped_predicates, 1);
    }

    #[test]
    fn list_is_recovered_from_prose() {
        let text = "Sure! Here you go:\n[{\"s\": \"a]\", \"o\": \"b\", \"p\": \"friend\"}]\nHope this helps [1].";
        let r = parse_triples(text, &rels());
        assert_eq!(r.triples, vec![Triple::new("a]", "friend", "b")]);
        assert_eq!(r.diagnostics.route, ParseRoute::RecoveredList);
    }

    #[test]
    fn loose_objects_are_recovered() {
        let text = "{\"s\":\"a\",\"o\":\"b\",\"p\":\"friend\"}\n{\"s\":\"c\",\"o\":\"d\",\"p\":\"friend\"";
        let r = parse_triples(text, &rels());
        assert_eq!(r.triples.len(), 1);
        assert_eq!(r.diagnostics.route, ParseRoute::RecoveredObjects);
    }

    #[test]
    fn garbage_fails_quietly() {
        for text in ["", "no triples here", "[1, 2", "{oops}"] {
            let r = parse_triples(text, &rels());
            assert!(r.triples.is_empty());
            assert!(r.diagnostics.failed(), "{text}");
        }
        assert!(!parse_triples("[]", &rels()).diagnostics.failed());
    }

    #[test]
    fn trims_and_dedups() {
        let r = parse_triples(
            r#"[{"s":" a ","o":"b","p":"friend "},{"s":"a","o":"b","p":"friend"},{"s":"x"},{"s":"A","o":"b","p":"friend"}]"#,
            &rels(),
        );
        assert_eq!(
            r.triples,
            vec![Triple::new("a", "friend", "b"), Triple::new("A", "friend", "b")]
        );
        assert_eq!((r.diagnostics.duplicates, r.diagnostics.malformed_items), (1, 1));
    }

    #[test]
    fn round_trip() {
        let ts = vec![Triple::new("a \"q\"", "friend", "b"), Triple::new("b", "founders", "[c]")];
        assert_eq!(parse_triples(&triples_to_json(&ts), &rels()).triples, ts);
    }
}
