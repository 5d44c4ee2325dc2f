//! Two-stage LLM extraction: direct extraction, candidate-pair filtering
//! with the evaluation model, then recheck-and-complete.

mod batch;
mod client;
mod parse;
mod pipeline;
mod template;

pub use batch::{run_batch, BatchOutput, RunManifest, SentenceOutcome, SentenceStatus};
pub use client::{
    complete_with_retry, ChatClient, ChatRequest, ClientError, FnClient, HttpChatClient, HttpClientConfig,
    RetryPolicy, ScriptFile, ScriptedClient, ScriptedResponse, API_KEY_ENV, ENDPOINT_ENV,
};
pub use parse::{parse_triples, ParseDiagnostics, ParseRoute, ParsedTriples};
pub use pipeline::{
    run_pipeline, ExtractionResult, PipelineConfig, PipelineError, PipelineMode, PipelineResources, Provenance,
    RawResponse,
};
pub use template::{
    render_restricted, render_stage1, render_stage2, serialize_pairs, sha256_hex, template_digests,
    FewShotExample, Stage, SurfacePair, FORMAT_LINE, FORMAT_REMINDER, RECHECK_AND_COMPLETE, RECHECK_ONLY,
};
