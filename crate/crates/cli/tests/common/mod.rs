//! Helpers shared by the CLI integration tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use evalfilter::corpus::AnnotatedSentence;
use evalfilter::llm::{parse_triples, ChatRequest, ClientError, Stage};
use evalfilter::{triples_to_json, Triple};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_evalfilter"))
}

/// Runs the CLI in `dir` with `args`.
pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir)
        .env_remove("EVALFILTER_LLM_ENDPOINT")
        .env_remove("EVALFILTER_LLM_API_KEY")
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn read_sentences(path: &Path) -> Vec<(String, Vec<Triple>)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            let triples: Vec<Triple> = serde_json::from_value(v["triples"].clone()).unwrap();
            (v["id"].as_str().unwrap().to_string(), triples)
        })
        .collect()
}

/// A scripted-client fixture for a dataset: stage 1 answers with the first
/// `stage1_keep` gold triples, every later stage with all of them.
pub fn write_script(dataset: &Path, out: &Path, stage1_keep: usize) {
    let mut responses = serde_json::Map::new();
    for (id, triples) in read_sentences(dataset) {
        let first: Vec<Triple> = triples.iter().take(stage1_keep).cloned().collect();
        responses.insert(format!("{id}:stage1"), triples_to_json(&first).into());
        responses.insert(format!("{id}:stage2"), triples_to_json(&triples).into());
        responses.insert(format!("{id}:restricted"), triples_to_json(&triples).into());
    }
    let script = serde_json::json!({"model": "scripted-test", "responses": responses});
    std::fs::write(out, serde_json::to_string_pretty(&script).unwrap()).unwrap();
}

/// FNV-1a, for deterministic pseudo-random choices keyed by strings.
pub fn fnv(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.bytes().chain(std::iter::once(0xff)) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

fn unit(parts: &[&str]) -> f64 {
    (fnv(parts) >> 11) as f64 / (1u64 << 53) as f64
}

/// A simulated LLM that knows the gold triples.
///
/// * Direct extraction misses more triples the denser the sentence: each
///   gold triple survives with probability `1 - drop_per_triple * k` for a
///   sentence with `k` gold triples.
/// * Given candidate pairs, it adds the gold triple of every true pair and,
///   with probability `hallucination`, invents a triple for a false pair.
/// * The recheck keeps every triple of its input results.
pub struct SimulatedLlm {
    pub gold: HashMap<String, Vec<Triple>>,
    pub relations: Vec<String>,
    pub drop_per_triple: f64,
    pub hallucination: f64,
}

impl SimulatedLlm {
    pub fn new(sentences: &[AnnotatedSentence], relations: Vec<String>) -> Self {
        SimulatedLlm {
            gold: sentences.iter().map(|s| (s.id.clone(), s.triples.clone())).collect(),
            relations,
            drop_per_triple: 0.1,
            hallucination: 0.5,
        }
    }

    fn stage1(&self, id: &str) -> Vec<Triple> {
        let gold = &self.gold[id];
        let keep = 1.0 - self.drop_per_triple * gold.len() as f64;
        gold.iter()
            .filter(|t| unit(&[id, &t.s, &t.o, "stage1"]) < keep)
            .cloned()
            .collect()
    }

    fn fill(&self, id: &str, mut out: Vec<Triple>, pairs: &[(String, String)]) -> Vec<Triple> {
        let gold = &self.gold[id];
        for (s, o) in pairs {
            let mut hit = false;
            for t in gold.iter().filter(|t| &t.s == s && &t.o == o) {
                hit = true;
                if !out.contains(t) {
                    out.push(t.clone());
                }
            }
            if !hit && unit(&[id, s, o, "hallucinate"]) < self.hallucination {
                let p = &self.relations[(fnv(&[id, s, o]) % self.relations.len() as u64) as usize];
                out.push(Triple::new(s.clone(), p.clone(), o.clone()));
            }
        }
        out
    }

    pub fn respond(&self, r: &ChatRequest) -> Result<String, ClientError> {
        let id = r.id.as_str();
        let triples = match r.stage {
            Stage::One => self.stage1(id),
            Stage::Two => {
                let a = prompt_field(&r.prompt, "A: ").unwrap_or("[]");
                let prior = parse_triples(a, &self.relations).triples;
                self.fill(id, prior, &prompt_pairs(&r.prompt))
            }
            Stage::Restricted => self.fill(id, Vec::new(), &prompt_pairs(&r.prompt)),
        };
        Ok(triples_to_json(&triples))
    }
}

fn prompt_field<'a>(prompt: &'a str, prefix: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.strip_prefix(prefix))
}

/// Candidate pairs listed in a stage-2 or restricted prompt.
pub fn prompt_pairs(prompt: &str) -> Vec<(String, String)> {
    let Some(line) = prompt
        .lines()
        .find(|l| l.contains("entity pairs that may be related in the") && l.contains('('))
    else {
        return Vec::new();
    };
    let list = &line[line.find('(').unwrap()..];
    list.trim_end_matches('.')
        .split("),(")
        .filter_map(|p| {
            let p = p.trim_start_matches('(').trim_end_matches(')');
            p.split_once(", ").map(|(s, o)| (s.to_string(), o.to_string()))
        })
        .collect()
}
