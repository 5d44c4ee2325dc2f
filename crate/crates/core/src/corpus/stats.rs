use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::sentence::AnnotatedSentence;

/// Corpus statistics for sentences with at least `length_cut` content tokens.
/// Means are `None` when no sentence survives the cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub length_cut: usize,
    pub avg_entities: Option<f64>,
    pub avg_triples: Option<f64>,
    pub sentence_count: usize,
}

pub fn compute_stats(dataset: &[AnnotatedSentence], length_cuts: &[usize]) -> Vec<DatasetStats> {
    length_cuts
        .iter()
        .map(|&cut| {
            let kept: Vec<&AnnotatedSentence> = dataset
                .iter()
                .filter(|s| s.content_len() >= cut)
                .collect();
            let count = kept.len();
            let mean = |f: &dyn Fn(&AnnotatedSentence) -> usize| {
                (count > 0).then(|| kept.iter().map(|s| f(s)).sum::<usize>() as f64 / count as f64)
            };
            DatasetStats {
                length_cut: cut,
                avg_entities: mean(&|s| {
                    s.triples
                        .iter()
                        .flat_map(|t| [t.s.as_str(), t.o.as_str()])
                        .collect::<BTreeSet<_>>()
                        .len()
                }),
                avg_triples: mean(&|s| s.triples.len()),
                sentence_count: count,
            }
        })
        .collect()
}

/// Renders rows as an aligned text table, with `-` for undefined means.
pub fn render_stats_table(name: &str, rows: &[DatasetStats]) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.1}"));
    let mut out = format!("{:<12} {:>8} {:>6} {:>6} {:>8}\n", "dataset", "|T|>=", "avgE", "avgR", "#sen");
    for r in rows {
        let sen = if r.sentence_count == 0 {
            "-".to_string()
        } else {
            r.sentence_count.to_string()
        };
        out.push_str(&format!(
            "{:<12} {:>8} {:>6} {:>6} {:>8}\n",
            name,
            r.length_cut,
            fmt(r.avg_entities),
            fmt(r.avg_triples),
            sen
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize::WordTokenizer;
    use crate::triple::Triple;

    fn sentence(k: usize, extra_tokens: usize) -> AnnotatedSentence {
        let mut parts = Vec::new();
        let mut triples = Vec::new();
        for i in 0..k {
            parts.push(format!("S{i} r O{i}"));
            triples.push(Triple::new(format!("S{i}"), "r", format!("O{i}")));
        }
        for _ in 0..extra_tokens {
            parts.push("x".into());
        }
        AnnotatedSentence::new("s", parts.join(" "), triples, &WordTokenizer).unwrap()
    }

    #[test]
    fn mean_triples_over_three_sentences() {
        let ds = vec![sentence(1, 0), sentence(2, 0), sentence(3, 0)];
        let st = compute_stats(&ds, &[0]);
        assert_eq!(st[0].avg_triples, Some(2.0));
        assert_eq!(st[0].avg_entities, Some(4.0));
        assert_eq!(st[0].sentence_count, 3);
    }

    #[test]
    fn empty_dataset_and_empty_cut() {
        let st = compute_stats(&[], &[0]);
        assert_eq!(st[0].sentence_count, 0);
        assert_eq!(st[0].avg_triples, None);
        let st = compute_stats(&[sentence(1, 0)], &[0, 100]);
        assert_eq!(st[1].sentence_count, 0);
        assert!(render_stats_table("toy", &st).lines().last().unwrap().contains('-'));
    }

    #[test]
    fn cuts_filter_on_content_length() {
        let ds = vec![sentence(1, 0), sentence(1, 10)];
        let st = compute_stats(&ds, &[0, 5]);
        assert_eq!(st[0].sentence_count, 2);
        assert_eq!(st[1].sentence_count, 1);
    }

    #[test]
    fn repeated_entities_count_once() {
        let s = AnnotatedSentence::new(
            "r",
            "A likes B and A likes C",
            vec![Triple::new("A", "likes", "B"), Triple::new("A", "likes", "C")],
            &WordTokenizer,
        )
        .unwrap();
        assert_eq!(compute_stats(&[s], &[0])[0].avg_entities, Some(3.0));
    }
}
