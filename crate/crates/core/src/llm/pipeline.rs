//! Per-sentence orchestration of the extraction modes.

use std::collections::HashSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::client::{complete_with_retry, ChatClient, ChatRequest, RetryPolicy};
use super::parse::{parse_triples, ParsedTriples};
use super::template::{
    render_restricted, render_stage1, render_stage2, sha256_hex, FewShotExample, Stage, SurfacePair,
    FORMAT_REMINDER,
};
use crate::corpus::AnnotatedSentence;
use crate::error::{Error, Result};
use crate::filtering::{
    filter_candidates, filter_external_triples, generate_candidates, CandidateMode, CandidatePair,
    ExternalPredictions, NerIndex, DEFAULT_THRESHOLD,
};
use crate::model::PairScorer;
use crate::triple::Triple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineMode {
    /// Stage 1, candidate filtering, stage 2.
    #[default]
    Full,
    /// One call restricted to the filtered candidates.
    NoStage1,
    /// Stage-1 output merged with filtered external triples.
    NoStage2,
    /// Stage 2 receives every candidate, unscored.
    NoFiltering,
}

impl PipelineMode {
    pub const ALL: [PipelineMode; 4] = [
        PipelineMode::Full,
        PipelineMode::NoStage1,
        PipelineMode::NoStage2,
        PipelineMode::NoFiltering,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineMode::Full => "full",
            PipelineMode::NoStage1 => "no-stage1",
            PipelineMode::NoStage2 => "no-stage2",
            PipelineMode::NoFiltering => "no-filtering",
        }
    }

    /// Whether the mode scores candidates with the evaluation model.
    pub fn needs_model(self) -> bool {
        matches!(self, PipelineMode::Full | PipelineMode::NoStage1)
    }
}

impl std::fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PipelineMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown mode `{s}`; expected one of full, no-stage1, no-stage2, no-filtering"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Produced by direct extraction (and, in full mode, kept by the recheck).
    Stage1,
    /// Introduced by the candidate-informed call.
    Stage2,
    /// Taken from another extractor's filtered predictions.
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    pub stage: Stage,
    pub prompt_sha256: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub id: String,
    pub triples: Vec<Triple>,
    /// One entry per triple.
    pub provenance: Vec<Provenance>,
    /// Candidate pairs offered to the LLM.
    pub candidate_pairs: Vec<SurfacePair>,
    pub raw_responses: Vec<RawResponse>,
    pub diagnostics: Vec<String>,
}

impl ExtractionResult {
    fn push(&mut self, triple: Triple, provenance: Provenance) {
        if !self.triples.contains(&triple) {
            self.triples.push(triple);
            self.provenance.push(provenance);
        }
    }
}

/// A sentence-level failure, with whatever was produced before it.
#[derive(Debug, thiserror::Error)]
#[error("sentence `{}`: {source}", partial.id)]
pub struct PipelineError {
    #[source]
    pub source: Error,
    pub partial: ExtractionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    pub threshold: f64,
    pub candidate_mode: CandidateMode,
    /// Show `fewshot` examples in stage-1 prompts. Meant for clients that
    /// have not been tuned on the task.
    pub use_fewshot: bool,
    pub fewshot: Vec<FewShotExample>,
    pub retry: RetryPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: PipelineMode::Full,
            threshold: DEFAULT_THRESHOLD,
            candidate_mode: CandidateMode::OracleEntities,
            use_fewshot: false,
            fewshot: Vec::new(),
            retry: RetryPolicy::default(),
        }
    }
}

/// Shared read-only inputs of a run.
#[derive(Clone, Copy)]
pub struct PipelineResources<'a> {
    pub client: &'a dyn ChatClient,
    pub model: Option<&'a PairScorer>,
    pub ner: Option<&'a NerIndex>,
    pub external: Option<&'a ExternalPredictions>,
}

impl<'a> PipelineResources<'a> {
    pub fn new(client: &'a dyn ChatClient) -> Self {
        PipelineResources {
            client,
            model: None,
            ner: None,
            external: None,
        }
    }

    /// Checks that everything `config.mode` needs is present.
    pub fn validate(&self, config: &PipelineConfig) -> Result<()> {
        if config.mode.needs_model() && self.model.is_none() {
            return Err(Error::Config(format!("mode {} needs an evaluation model", config.mode)));
        }
        if config.mode == PipelineMode::NoStage2 && self.external.is_none() {
            return Err(Error::Config("mode no-stage2 needs external predictions".into()));
        }
        let uses_candidates = config.mode != PipelineMode::NoStage2;
        if uses_candidates && config.candidate_mode == CandidateMode::ExternalNer && self.ner.is_none() {
            return Err(Error::Config("external-ner candidates need a mentions file".into()));
        }
        Ok(())
    }
}

struct Run<'a> {
    sentence: &'a AnnotatedSentence,
    relations: &'a [String],
    res: PipelineResources<'a>,
    config: &'a PipelineConfig,
    result: ExtractionResult,
}

impl<'a> Run<'a> {
    /// One LLM call; a response with no usable list is retried once with a
    /// format reminder and then accepted as parsed.
    fn ask(&mut self, stage: Stage, prompt: String) -> Result<ParsedTriples> {
        let mut request = ChatRequest {
            id: self.sentence.id.clone(),
            stage,
            prompt,
        };
        let mut parsed = self.call(&request)?;
        if parsed.diagnostics.failed() {
            self.note(format!("{stage}: unparseable response; retrying with a format reminder"));
            request.prompt = format!("{}\n{FORMAT_REMINDER}", request.prompt);
            parsed = self.call(&request)?;
        }
        let d = &parsed.diagnostics;
        if d.dropped_predicates > 0 {
            self.note(format!("{stage}: dropped {} triple(s) with unlisted predicates", d.dropped_predicates));
        }
        if d.malformed_items > 0 {
            self.note(format!("{stage}: skipped {} malformed item(s)", d.malformed_items));
        }
        Ok(parsed)
    }

    fn call(&mut self, request: &ChatRequest) -> Result<ParsedTriples> {
        let response = complete_with_retry(self.res.client, request, self.config.retry)?;
        let parsed = parse_triples(&response, self.relations);
        self.result.raw_responses.push(RawResponse {
            stage: request.stage,
            prompt_sha256: sha256_hex(&request.prompt),
            response,
        });
        Ok(parsed)
    }

    fn note(&mut self, message: String) {
        log::debug!("{}: {message}", self.sentence.id);
        self.result.diagnostics.push(message);
    }

    fn stage1(&mut self) -> Result<Vec<Triple>> {
        let fewshot: &[FewShotExample] = if self.config.use_fewshot { &self.config.fewshot } else { &[] };
        let prompt = render_stage1(&self.sentence.text, self.relations, fewshot)?;
        Ok(self.ask(Stage::One, prompt)?.triples)
    }

    fn candidates(&self) -> Result<Vec<CandidatePair>> {
        generate_candidates(self.sentence, self.config.candidate_mode, self.res.ner)
    }

    fn model(&self) -> Result<&'a PairScorer> {
        self.res
            .model
            .ok_or_else(|| Error::Config(format!("mode {} needs an evaluation model", self.config.mode)))
    }

    /// Candidates that survive filtering, as distinct surface pairs in
    /// input order.
    fn kept_pairs(&mut self, filter: bool) -> Result<Vec<SurfacePair>> {
        let candidates = self.candidates()?;
        let total = candidates.len();
        let kept: Vec<CandidatePair> = if filter {
            let matrix = self.model()?.infer_matrix(self.sentence)?;
            filter_candidates(&matrix, &candidates, self.config.threshold)?
                .into_iter()
                .filter(|d| d.kept)
                .map(|d| d.pair)
                .collect()
        } else {
            candidates
        };
        let mut seen = HashSet::new();
        let pairs: Vec<SurfacePair> = kept
            .into_iter()
            .map(|c| SurfacePair::new(c.subject.text, c.object.text))
            .filter(|p| seen.insert(p.clone()))
            .collect();
        self.note(format!("candidates: {} of {total} kept", pairs.len()));
        self.result.candidate_pairs = pairs.clone();
        Ok(pairs)
    }

    fn execute(&mut self) -> Result<()> {
        match self.config.mode {
            PipelineMode::Full | PipelineMode::NoFiltering => {
                let stage1 = self.stage1()?;
                let pairs = self.kept_pairs(self.config.mode == PipelineMode::Full)?;
                let prompt = render_stage2(&self.sentence.text, self.relations, &stage1, &pairs)?;
                let stage2 = self.ask(Stage::Two, prompt)?;
                if stage2.diagnostics.failed() {
                    self.note("stage2: no usable output; falling back to stage-1 triples".into());
                    for t in stage1 {
                        self.result.push(t, Provenance::Stage1);
                    }
                } else {
                    let before: HashSet<&Triple> = stage1.iter().collect();
                    for t in stage2.triples {
                        let p = if before.contains(&t) { Provenance::Stage1 } else { Provenance::Stage2 };
                        self.result.push(t, p);
                    }
                }
            }
            PipelineMode::NoStage1 => {
                let pairs = self.kept_pairs(true)?;
                let prompt = render_restricted(&self.sentence.text, self.relations, &pairs)?;
                for t in self.ask(Stage::Restricted, prompt)?.triples {
                    self.result.push(t, Provenance::Stage2);
                }
            }
            PipelineMode::NoStage2 => {
                for t in self.stage1()? {
                    self.result.push(t, Provenance::Stage1);
                }
                for t in self.external_triples()? {
                    self.result.push(t, Provenance::External);
                }
            }
        }
        Ok(())
    }

    /// External triples for this sentence, filtered by the model when one
    /// is available and otherwise taken as already filtered.
    fn external_triples(&mut self) -> Result<Vec<Triple>> {
        let external = self
            .res
            .external
            .ok_or_else(|| Error::Config("mode no-stage2 needs external predictions".into()))?
            .get(&self.sentence.id);
        let allowed: HashSet<&str> = self.relations.iter().map(String::as_str).collect();
        let candidates: Vec<Triple> = match self.res.model {
            Some(model) => {
                let matrix = model.infer_matrix(self.sentence)?;
                filter_external_triples(&matrix, self.sentence, external, self.config.threshold)?
                    .into_iter()
                    .filter(|d| d.kept)
                    .map(|d| d.triple)
                    .collect()
            }
            None => external.iter().map(|t| t.triple()).collect(),
        };
        let total = candidates.len();
        let kept: Vec<Triple> = candidates
            .into_iter()
            .map(|t| t.trimmed())
            .filter(|t| allowed.contains(t.p.as_str()))
            .collect();
        if kept.len() < total {
            self.note(format!("external: dropped {} triple(s) with unlisted predicates", total - kept.len()));
        }
        Ok(kept)
    }
}

/// Runs one sentence through `config.mode`.
#[allow(clippy::result_large_err)] // the partial result is the point of the error
pub fn run_pipeline(
    sentence: &AnnotatedSentence,
    relations: &[String],
    res: PipelineResources<'_>,
    config: &PipelineConfig,
) -> std::result::Result<ExtractionResult, PipelineError> {
    let mut run = Run {
        sentence,
        relations,
        res,
        config,
        result: ExtractionResult {
            id: sentence.id.clone(),
            ..ExtractionResult::default()
        },
    };
    if relations.is_empty() {
        run.note("relation list is empty; nothing to extract".into());
        return Ok(run.result);
    }
    match run.execute() {
        Ok(()) => Ok(run.result),
        Err(source) => Err(PipelineError {
            source,
            partial: run.result,
        }),
    }
}
