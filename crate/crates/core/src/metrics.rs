//! Exact-match precision, recall and F1, micro-averaged over a corpus, with
//! strata by gold triple count and by sentence length.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::triple::Triple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchOptions {
    /// Apply Unicode NFC before comparing strings.
    pub unicode_nfc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", content = "cut", rename_all = "snake_case")]
pub enum Stratum {
    #[default]
    All,
    MinTriples(usize),
    MinTokens(usize),
}

impl std::fmt::Display for Stratum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stratum::All => write!(f, "all"),
            Stratum::MinTriples(t) => write!(f, "#triples>={t}"),
            Stratum::MinTokens(n) => write!(f, "|T|>={n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub sentences: usize,
    pub stratum: Stratum,
    /// No sentence fell into the stratum.
    pub empty: bool,
}

impl MatchReport {
    fn from_counts(tp: usize, fp: usize, fn_: usize, sentences: usize, stratum: Stratum) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        MatchReport {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
            sentences,
            stratum,
            empty: sentences == 0,
        }
    }
}

/// Gold and predicted triples for one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceResult {
    pub id: String,
    pub gold: Vec<Triple>,
    pub predicted: Vec<Triple>,
    /// Content-token count, for length strata.
    pub token_count: usize,
}

fn canonical(t: &Triple, opts: MatchOptions) -> Triple {
    let t = t.trimmed();
    if opts.unicode_nfc {
        Triple {
            s: t.s.nfc().collect(),
            o: t.o.nfc().collect(),
            p: t.p.nfc().collect(),
        }
    } else {
        t
    }
}

fn canonical_set(triples: &[Triple], opts: MatchOptions) -> HashSet<Triple> {
    triples.iter().map(|t| canonical(t, opts)).collect()
}

/// `(tp, fp, fn)` for one sentence under set semantics.
pub fn match_counts(gold: &[Triple], predicted: &[Triple], opts: MatchOptions) -> (usize, usize, usize) {
    let g = canonical_set(gold, opts);
    let p = canonical_set(predicted, opts);
    let tp = p.intersection(&g).count();
    (tp, p.len() - tp, g.len() - tp)
}

pub fn exact_match(gold: &[Triple], predicted: &[Triple]) -> MatchReport {
    exact_match_with(gold, predicted, MatchOptions::default())
}

pub fn exact_match_with(gold: &[Triple], predicted: &[Triple], opts: MatchOptions) -> MatchReport {
    let (tp, fp, fn_) = match_counts(gold, predicted, opts);
    MatchReport::from_counts(tp, fp, fn_, 1, Stratum::All)
}

fn micro<'a>(
    results: impl Iterator<Item = &'a SentenceResult>,
    stratum: Stratum,
    opts: MatchOptions,
) -> MatchReport {
    let (mut tp, mut fp, mut fn_, mut n) = (0, 0, 0, 0);
    for r in results {
        let (a, b, c) = match_counts(&r.gold, &r.predicted, opts);
        tp += a;
        fp += b;
        fn_ += c;
        n += 1;
    }
    MatchReport::from_counts(tp, fp, fn_, n, stratum)
}

/// Micro-averaged report over every sentence.
pub fn corpus_report(results: &[SentenceResult], opts: MatchOptions) -> MatchReport {
    micro(results.iter(), Stratum::All, opts)
}

fn gold_count(r: &SentenceResult, opts: MatchOptions) -> usize {
    canonical_set(&r.gold, opts).len()
}

/// Report over sentences with at least `t` distinct gold triples.
pub fn stratify_by_triples(results: &[SentenceResult], t: usize, opts: MatchOptions) -> Result<MatchReport> {
    if t < 1 {
        return Err(Error::Config("triple-count threshold must be at least 1".into()));
    }
    let report = micro(
        results.iter().filter(|r| gold_count(r, opts) >= t),
        Stratum::MinTriples(t),
        opts,
    );
    if report.empty {
        log::warn!("no sentence has {t} or more gold triples");
    }
    Ok(report)
}

/// Report over sentences with at least `min_tokens` content tokens.
pub fn stratify_by_length(results: &[SentenceResult], min_tokens: usize, opts: MatchOptions) -> MatchReport {
    let report = micro(
        results.iter().filter(|r| r.token_count >= min_tokens),
        Stratum::MinTokens(min_tokens),
        opts,
    );
    if report.empty {
        log::warn!("no sentence has {min_tokens} or more tokens");
    }
    report
}

/// Triple-count threshold used for the dense-sentence stratum: 2 for
/// datasets whose densest sentence holds only a handful of triples, 5
/// otherwise.
pub fn default_triple_threshold(dataset: &str) -> usize {
    match dataset.to_ascii_lowercase().as_str() {
        "wikikbp" | "wiki-kbp" | "nyt11-hrl" | "nyt11" => 2,
        _ => 5,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: usize,
    pub recall: f64,
    pub f1: f64,
    pub sentences: usize,
}

pub fn complexity_curve(
    results: &[SentenceResult],
    thresholds: &[usize],
    opts: MatchOptions,
) -> Result<Vec<CurvePoint>> {
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("curve thresholds must be strictly ascending".into()));
    }
    thresholds
        .iter()
        .map(|&t| {
            let r = stratify_by_triples(results, t, opts)?;
            Ok(CurvePoint {
                t,
                recall: r.recall,
                f1: r.f1,
                sentences: r.sentences,
            })
        })
        .collect()
}

pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("t,recall,f1,sentences\n");
    for p in points {
        let _ = writeln!(out, "{},{:.6},{:.6},{}", p.t, p.recall, p.f1, p.sentences);
    }
    out
}

/// One row of a system comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRow {
    pub dataset: String,
    pub system: String,
    pub report: MatchReport,
}

/// Precision/recall comparison across systems on a dense-sentence stratum,
/// percentages with two decimals.
pub fn lowrecall_table(rows: &[SystemRow]) -> String {
    let mut out = format!(
        "{:<12} {:<16} {:<14} {:>9} {:>9}\n",
        "Dataset", "System", "Stratum", "Precision", "Recall"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<12} {:<16} {:<14} {:>9.2} {:>9.2}",
            r.dataset,
            r.system,
            r.report.stratum.to_string(),
            r.report.precision * 100.0,
            r.report.recall * 100.0
        );
    }
    out
}

/// Aligned text rendering of several reports.
pub fn render_reports(reports: &[MatchReport]) -> String {
    let mut out = format!(
        "{:<14} {:>6} {:>9} {:>9} {:>9} {:>6} {:>6} {:>6}\n",
        "stratum", "#sen", "Prec.", "Reca.", "F1", "tp", "fp", "fn"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>9.2} {:>9.2} {:>9.2} {:>6} {:>6} {:>6}",
            r.stratum.to_string(),
            r.sentences,
            r.precision * 100.0,
            r.recall * 100.0,
            r.f1 * 100.0,
            r.tp,
            r.fp,
            r.fn_
        );
    }
    out
}
