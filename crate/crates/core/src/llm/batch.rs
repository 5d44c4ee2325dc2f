//! Bounded-parallel batch extraction with a run manifest.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::pipeline::{run_pipeline, ExtractionResult, PipelineConfig, PipelineResources};
use super::template::{sha256_hex, template_digests};
use crate::corpus::AnnotatedSentence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SentenceOutcome {
    Ok { result: ExtractionResult },
    Failed { error: String, partial: ExtractionResult },
}

impl SentenceOutcome {
    pub fn id(&self) -> &str {
        match self {
            SentenceOutcome::Ok { result } => &result.id,
            SentenceOutcome::Failed { partial, .. } => &partial.id,
        }
    }

    pub fn result(&self) -> Option<&ExtractionResult> {
        match self {
            SentenceOutcome::Ok { result } => Some(result),
            SentenceOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceStatus {
    pub id: String,
    pub ok: bool,
    pub triples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub llm_model: String,
    /// Name of the evaluation model's encoder, if one was used.
    pub evaluation_model: Option<String>,
    pub config: PipelineConfig,
    pub relations: Vec<String>,
    pub template_sha256: BTreeMap<String, String>,
    pub seed: u64,
    pub parallelism: usize,
    pub sentences: Vec<SentenceStatus>,
    /// Digest of everything above; independent of timestamps.
    pub digest: String,
    pub started_unix: u64,
    pub finished_unix: u64,
}

#[derive(Serialize)]
struct DigestView<'a> {
    llm_model: &'a str,
    evaluation_model: &'a Option<String>,
    config: &'a PipelineConfig,
    relations: &'a [String],
    template_sha256: &'a BTreeMap<String, String>,
    seed: u64,
    parallelism: usize,
    sentences: &'a [SentenceStatus],
}

impl RunManifest {
    pub fn compute_digest(&self) -> String {
        let view = DigestView {
            llm_model: &self.llm_model,
            evaluation_model: &self.evaluation_model,
            config: &self.config,
            relations: &self.relations,
            template_sha256: &self.template_sha256,
            seed: self.seed,
            parallelism: self.parallelism,
            sentences: &self.sentences,
        };
        sha256_hex(serde_json::to_vec(&view).expect("manifest serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOutput {
    /// One outcome per input sentence, in input order.
    pub outcomes: Vec<SentenceOutcome>,
    pub manifest: RunManifest,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Runs every sentence through the pipeline on `parallelism` worker
/// threads, so at most that many client calls are in flight. A failing
/// sentence is recorded and the batch continues.
///
/// `seed` is recorded in the manifest for the client's sampling settings.
pub fn run_batch(
    sentences: &[AnnotatedSentence],
    relations: &[String],
    res: PipelineResources<'_>,
    config: &PipelineConfig,
    parallelism: usize,
    seed: u64,
) -> Result<BatchOutput> {
    if parallelism < 1 {
        return Err(Error::Config("parallelism must be at least 1".into()));
    }
    res.validate(config)?;
    let started_unix = unix_now();

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<SentenceOutcome>>> = sentences.iter().map(|_| Mutex::new(None)).collect();
    let workers = parallelism.min(sentences.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(sentence) = sentences.get(i) else {
                    break;
                };
                let outcome = match run_pipeline(sentence, relations, res, config) {
                    Ok(result) => SentenceOutcome::Ok { result },
                    Err(e) => {
                        log::warn!("{e}");
                        SentenceOutcome::Failed {
                            error: e.source.to_string(),
                            partial: e.partial,
                        }
                    }
                };
                *slots[i].lock().expect("slot poisoned") = Some(outcome);
            });
        }
    });
    let outcomes: Vec<SentenceOutcome> = slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot poisoned").expect("every slot is filled"))
        .collect();

    let statuses = outcomes
        .iter()
        .map(|o| match o {
            SentenceOutcome::Ok { result } => SentenceStatus {
                id: result.id.clone(),
                ok: true,
                triples: result.triples.len(),
                error: None,
            },
            SentenceOutcome::Failed { error, partial } => SentenceStatus {
                id: partial.id.clone(),
                ok: false,
                triples: 0,
                error: Some(error.clone()),
            },
        })
        .collect();
    let mut manifest = RunManifest {
        llm_model: res.client.model_name().to_string(),
        evaluation_model: res.model.map(|m| {
            use crate::model::Encoder;
            m.encoder().name().to_string()
        }),
        config: config.clone(),
        relations: relations.to_vec(),
        template_sha256: template_digests(),
        seed,
        parallelism,
        sentences: statuses,
        digest: String::new(),
        started_unix,
        finished_unix: unix_now(),
    };
    manifest.digest = manifest.compute_digest();
    Ok(BatchOutput { outcomes, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WordTokenizer;
    use crate::llm::client::{ChatRequest, ClientError, FnClient, RetryPolicy, ScriptedClient};
    use crate::llm::pipeline::PipelineMode;
    use crate::llm::template::Stage;
    use crate::triple::Triple;

    fn corpus(n: usize) -> Vec<AnnotatedSentence> {
        (0..n)
            .map(|i| {
                AnnotatedSentence::new(
                    format!("s{i}"),
                    format!("Ann{i} met Bob{i} ."),
                    vec![Triple::new(format!("Ann{i}"), "friend", format!("Bob{i}"))],
                    &WordTokenizer,
                )
                .unwrap()
            })
            .collect()
    }

    fn echo(r: &ChatRequest) -> std::result::Result<String, ClientError> {
        let i = &r.id[1..];
        if i == "4" {
            return Err(ClientError::Rejected("boom".into()));
        }
        std::thread::sleep(std::time::Duration::from_millis(2));
        Ok(format!(r#"[{{"s":"Ann{i}","o":"Bob{i}","p":"friend"}}]"#))
    }

    fn config() -> PipelineConfig {
        PipelineConfig {
            mode: PipelineMode::NoFiltering,
            retry: RetryPolicy {
                max_retries: 0,
                base_delay_ms: 0,
            },
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn order_is_stable_and_failures_are_recorded() {
        let sentences = corpus(10);
        let client = FnClient::new("echo", echo);
        let rel = vec!["friend".to_string()];
        let out = run_batch(&sentences, &rel, PipelineResources::new(&client), &config(), 3, 1).unwrap();
        assert_eq!(out.outcomes.len(), 10);
        for (i, o) in out.outcomes.iter().enumerate() {
            assert_eq!(o.id(), format!("s{i}"));
        }
        let failed: Vec<_> = out.outcomes.iter().filter(|o| o.result().is_none()).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].id(), "s4");
        assert!(!out.manifest.sentences[4].ok);
        assert_eq!(out.manifest.template_sha256.len(), 3);
    }

    #[test]
    fn in_flight_calls_are_bounded() {
        let sentences = corpus(12);
        let mut client = ScriptedClient::new(Default::default());
        for s in &sentences {
            let resp = format!(r#"[{{"s":"{}","o":"{}","p":"friend"}}]"#, s.triples[0].s, s.triples[0].o);
            client = client
                .with_response(&s.id, Stage::One, resp.clone())
                .with_response(&s.id, Stage::Two, resp);
        }
        let rel = vec!["friend".to_string()];
        run_batch(&sentences, &rel, PipelineResources::new(&client), &config(), 3, 1).unwrap();
        assert!(client.peak_in_flight() <= 3);
        assert_eq!(client.requests().len(), 24);
    }

    #[test]
    fn manifest_digest_is_reproducible() {
        let sentences = corpus(6);
        let rel = vec!["friend".to_string()];
        let run = || {
            let client = FnClient::new("echo", echo);
            run_batch(&sentences, &rel, PipelineResources::new(&client), &config(), 2, 9).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.manifest.digest, b.manifest.digest);
        assert_eq!(a.outcomes, b.outcomes);
        let mut c = a.manifest.clone();
        c.seed = 10;
        assert_ne!(c.compute_digest(), a.manifest.digest);
    }

    #[test]
    fn zero_parallelism_is_rejected() {
        let client = FnClient::new("echo", echo);
        let r = run_batch(&corpus(1), &["friend".into()], PipelineResources::new(&client), &config(), 0, 0);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
