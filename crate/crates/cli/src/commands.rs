//! Command implementations.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use evalfilter::corpus::{
    compute_stats, generate_synthetic, label_dataset, render_stats_table, self_label, AnnotatedSentence,
    DatasetFormat, DatasetLoader, LabeledCell, RelationList, RelationNormalizer, SynthConfig, Tokenizer,
    TripleCount, WordTokenizer,
};
use evalfilter::filtering::{
    filter_candidates, filter_external_triples, generate_candidates, CandidateMode, ExternalPredictions,
    NerIndex,
};
use evalfilter::llm::{
    run_batch, ChatClient, HttpChatClient, HttpClientConfig, PipelineResources, RunManifest, ScriptedClient,
    SentenceOutcome,
};
use evalfilter::metrics::{
    complexity_curve, corpus_report, curve_to_csv, default_triple_threshold, render_reports,
    stratify_by_length, stratify_by_triples, CurvePoint, MatchOptions, MatchReport, SentenceResult,
};
use evalfilter::model::{evaluate_pairs, load_checkpoint, save_checkpoint, train, PretrainedSpec};
use evalfilter::{Error, Triple};
use serde::Serialize;

use crate::config::{require_file, ClientKind, RunConfig};
use crate::io::{
    file_sha256, read_jsonl, read_jsonl_numbered, write_json, write_jsonl, write_text, PredictionRecord,
    SentenceRecord,
};
use crate::{
    BuildDatasetArgs, Cli, Command, EvaluateArgs, ExtractArgs, FilterArgs, StatsArgs, TrainArgs,
};

struct RunContext {
    cfg: RunConfig,
    config_path: Option<PathBuf>,
    seed: Option<u64>,
}

impl RunContext {
    fn relations(&self, flag: Option<&PathBuf>) -> Result<RelationList> {
        let path = flag
            .or(self.cfg.data.relations.as_ref())
            .ok_or_else(|| Error::Config("no relation list given (--relations)".into()))?;
        require_file(path)?;
        Ok(RelationList::from_file(path)?)
    }

    fn loader(&self, relations: RelationList, normalization: Option<&PathBuf>) -> Result<DatasetLoader> {
        let mut loader = DatasetLoader::new(relations);
        if let Some(path) = normalization.or(self.cfg.data.normalization.as_ref()) {
            require_file(path)?;
            loader = loader.with_normalizer(RelationNormalizer::from_file(path)?);
        }
        Ok(loader)
    }

    fn load(&self, input: &Path, relations: Option<&PathBuf>) -> Result<Vec<AnnotatedSentence>> {
        let loader = self.loader(self.relations(relations)?, None)?;
        load(&loader, input)
    }

    fn model_path<'a>(&'a self, flag: Option<&'a PathBuf>) -> Option<&'a PathBuf> {
        flag.or(self.cfg.data.model.as_ref())
    }

    /// Digest of the config file when one was given, otherwise of the
    /// effective defaults.
    fn config_digest(&self) -> Result<String> {
        match &self.config_path {
            Some(p) => Ok(file_sha256(p)?),
            None => Ok(evalfilter::llm::sha256_hex(
                serde_json::to_vec(&self.cfg).context("serializing config")?,
            )),
        }
    }
}

fn load(loader: &DatasetLoader, input: &Path) -> Result<Vec<AnnotatedSentence>> {
    require_file(input)?;
    let sentences = loader.load(input, DatasetFormat::Jsonl)?;
    log::info!("loaded {} sentences from {}", sentences.len(), input.display());
    Ok(sentences)
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = RunContext {
        seed: cli.seed.or(cfg.seed),
        cfg,
        config_path: cli.config.clone(),
    };
    match cli.command {
        Command::BuildDataset(a) => build_dataset(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Filter(a) => filter_cmd(&ctx, a),
        Command::Extract(a) => extract(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Stats(a) => stats(&ctx, a),
    }
}

// ---------------------------------------------------------------------------
// build-dataset

#[derive(Serialize)]
struct LabelRecord<'a> {
    id: &'a str,
    n: usize,
    tokens: &'a [String],
    /// `[i, j, y]` for every nonzero cell, row-major.
    cells: Vec<(usize, usize, i8)>,
}

#[derive(Serialize)]
struct SkippedSentence {
    id: String,
    error: String,
}

#[derive(Serialize)]
struct BuildReport {
    sentences: usize,
    labeled: usize,
    skipped: Vec<SkippedSentence>,
    positive_pairs: usize,
    negative_pairs: usize,
    positive_cells: usize,
    negative_cells: usize,
    relations: Vec<String>,
}

fn build_dataset(ctx: &RunContext, a: BuildDatasetArgs) -> Result<()> {
    let (sentences, relations) = match (a.synthetic, &a.input) {
        (Some(n), _) => {
            if a.min_triples < 1 || a.min_triples > a.max_triples {
                return Err(Error::Config(format!(
                    "need 1 <= --min-triples <= --max-triples, got {}..{}",
                    a.min_triples, a.max_triples
                ))
                .into());
            }
            let mut sc = SynthConfig {
                sentences: n,
                id_prefix: a.id_prefix.clone(),
                triples_per_sentence: if a.min_triples == a.max_triples {
                    TripleCount::Fixed { count: a.min_triples }
                } else {
                    TripleCount::Uniform {
                        min: a.min_triples,
                        max: a.max_triples,
                    }
                },
                ..SynthConfig::default()
            };
            if let Some(seed) = ctx.seed {
                sc.seed = seed;
            }
            let relations = sc.relations();
            (generate_synthetic(&sc)?, relations)
        }
        (None, Some(input)) => {
            let list = ctx.relations(a.relations.as_ref())?;
            let names = list.names().to_vec();
            let loader = ctx.loader(list, a.normalization.as_ref())?;
            (load(&loader, input)?, names)
        }
        (None, None) => return Err(Error::Config("give --input or --synthetic".into()).into()),
    };

    let mut report = BuildReport {
        sentences: sentences.len(),
        labeled: 0,
        skipped: Vec::new(),
        positive_pairs: 0,
        negative_pairs: 0,
        positive_cells: 0,
        negative_cells: 0,
        relations: relations.clone(),
    };
    let mut label_lines = Vec::with_capacity(sentences.len());
    let mut labels = Vec::with_capacity(sentences.len());
    for s in &sentences {
        match self_label(s) {
            Ok(l) => {
                report.labeled += 1;
                report.positive_pairs += l.positive.len();
                report.negative_pairs += l.negative.len();
                report.positive_cells += l.labels.count(1);
                report.negative_cells += l.labels.count(-1);
                labels.push((s, l.labels));
            }
            Err(e) => {
                log::warn!("skipping sentence `{}`: {e}", s.id);
                report.skipped.push(SkippedSentence {
                    id: s.id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    for (s, l) in &labels {
        label_lines.push(LabelRecord {
            id: &s.id,
            n: l.size(),
            tokens: &s.tokens,
            cells: l.to_cells().into_iter().map(|LabeledCell { i, j, y }| (i, j, y)).collect(),
        });
    }

    let out = &a.out_dir;
    write_jsonl(
        &out.join("sentences.jsonl"),
        sentences.iter().map(|s| SentenceRecord {
            id: Some(s.id.clone()),
            text: s.text.clone(),
            triples: s.triples.clone(),
        }),
    )?;
    write_jsonl(&out.join("labels.jsonl"), &label_lines)?;
    write_text(&out.join("relations.txt"), &(relations.join("\n") + "\n"))?;
    write_json(&out.join("report.json"), &report)?;
    println!(
        "{} sentences ({} labeled, {} skipped): {} positive / {} negative entity pairs",
        report.sentences,
        report.labeled,
        report.skipped.len(),
        report.positive_pairs,
        report.negative_pairs
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train

fn train_cmd(ctx: &RunContext, a: TrainArgs) -> Result<()> {
    let mut tc = ctx.cfg.train.clone();
    if let Some(v) = a.epochs {
        tc.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        tc.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        tc.batch_size = v;
    }
    if let Some(v) = ctx.seed {
        tc.seed = v;
    }
    if let Some(m) = a.encoder_mode {
        tc.encoder_mode = m.into();
    }
    if let Some(f) = &a.features {
        require_file(f)?;
        let max_len = tc.pretrained.as_ref().map_or(512, |p| p.max_len);
        tc.pretrained = Some(PretrainedSpec {
            name: f.file_stem().map_or("features".into(), |s| s.to_string_lossy().into_owned()),
            features: f.clone(),
            max_len,
        });
    }
    tc.validate()?;

    let sentences = ctx.load(&a.input, a.relations.as_ref())?;
    let (labeled, skipped) = label_dataset(&sentences);
    if !skipped.is_empty() {
        log::warn!("{} sentence(s) could not be self-labeled and were skipped", skipped.len());
    }
    let (model, report) = train(&labeled, &tc, a.checkpoint_dir.as_deref())?;
    let features = tc.pretrained.as_ref().map(|p| p.features.as_path());
    crate::io::create_parent(&a.out)?;
    save_checkpoint(&model, &a.out, features)?;
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    println!(
        "trained on {} sentences for {} epochs: loss {:.6} -> {:.6}; checkpoint {}",
        report.sentences,
        tc.epochs,
        report.initial_loss,
        report.final_loss,
        a.out.display()
    );
    if let Some(dev) = &a.dev {
        let dev_sentences = ctx.load(dev, a.relations.as_ref())?;
        let pc = evaluate_pairs(&model, &dev_sentences, ctx.cfg.pipeline.threshold)?;
        println!(
            "dev pair classification: P {:.4} R {:.4} F1 {:.4}",
            pc.precision, pc.recall, pc.f1
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// filter

#[derive(Serialize)]
struct PairDecisionRecord {
    subject: String,
    object: String,
    subject_span: evalfilter::corpus::TokenSpan,
    object_span: evalfilter::corpus::TokenSpan,
    score: f64,
    kept: bool,
}

#[derive(Serialize)]
struct PairFilterLine {
    id: String,
    decisions: Vec<PairDecisionRecord>,
}

#[derive(Serialize)]
struct TripleFilterLine {
    id: String,
    triples: Vec<Triple>,
    decisions: Vec<evalfilter::filtering::TripleDecision>,
}

fn load_model(ctx: &RunContext, flag: Option<&PathBuf>) -> Result<evalfilter::model::PairScorer> {
    let path = ctx
        .model_path(flag)
        .ok_or_else(|| Error::Config("no model checkpoint given (--model)".into()))?;
    require_file(path)?;
    Ok(load_checkpoint(path)?)
}

fn load_ner(path: Option<&PathBuf>) -> Result<Option<NerIndex>> {
    path.map(|p| -> Result<NerIndex> {
        require_file(p)?;
        Ok(NerIndex::from_jsonl(p)?)
    })
    .transpose()
}

fn load_external(path: Option<&PathBuf>) -> Result<Option<ExternalPredictions>> {
    path.map(|p| -> Result<ExternalPredictions> {
        require_file(p)?;
        Ok(ExternalPredictions::from_jsonl(p)?)
    })
    .transpose()
}

fn filter_cmd(ctx: &RunContext, a: FilterArgs) -> Result<()> {
    let model = load_model(ctx, a.model.as_ref())?;
    let sentences = ctx.load(&a.input, a.relations.as_ref())?;
    let threshold = a.threshold.unwrap_or(ctx.cfg.pipeline.threshold);
    let (mut total, mut kept) = (0usize, 0usize);
    if let Some(external) = load_external(a.external.as_ref())? {
        let mut lines = Vec::with_capacity(sentences.len());
        let mut flagged = 0;
        for s in &sentences {
            let matrix = model.infer_matrix(s)?;
            let decisions = filter_external_triples(&matrix, s, external.get(&s.id), threshold)?;
            total += decisions.len();
            kept += decisions.iter().filter(|d| d.kept).count();
            flagged += decisions.iter().filter(|d| d.flagged).count();
            lines.push(TripleFilterLine {
                id: s.id.clone(),
                triples: decisions.iter().filter(|d| d.kept).map(|d| d.triple.clone()).collect(),
                decisions,
            });
        }
        write_jsonl(&a.out, &lines)?;
        log::info!("{flagged} external triple(s) could not be placed and were passed through");
        println!("kept {kept} of {total} external triples ({flagged} unplaced)");
    } else {
        let mode: CandidateMode = a.candidates.map_or(ctx.cfg.pipeline.candidate_mode, Into::into);
        let ner = load_ner(a.mentions.as_ref())?;
        let mut lines = Vec::with_capacity(sentences.len());
        for s in &sentences {
            let candidates = generate_candidates(s, mode, ner.as_ref())?;
            let matrix = model.infer_matrix(s)?;
            let decisions = filter_candidates(&matrix, &candidates, threshold)?;
            total += decisions.len();
            kept += decisions.iter().filter(|d| d.kept).count();
            lines.push(PairFilterLine {
                id: s.id.clone(),
                decisions: decisions
                    .into_iter()
                    .map(|d| PairDecisionRecord {
                        subject: d.pair.subject.text,
                        object: d.pair.object.text,
                        subject_span: d.pair.subject.span,
                        object_span: d.pair.object.span,
                        score: d.score,
                        kept: d.kept,
                    })
                    .collect(),
            });
        }
        write_jsonl(&a.out, &lines)?;
        println!("kept {kept} of {total} candidate pairs at threshold {threshold}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// extract

#[derive(Serialize)]
struct ExtractManifest {
    command: &'static str,
    config_sha256: String,
    input_sha256: String,
    checkpoint_sha256: Option<String>,
    script_sha256: Option<String>,
    run: RunManifest,
}

fn extract(ctx: &RunContext, a: ExtractArgs) -> Result<()> {
    let relations = ctx.relations(a.relations.as_ref())?;
    let names = relations.names().to_vec();
    let loader = ctx.loader(relations, None)?;

    let mut pcfg = ctx.cfg.pipeline.clone();
    if let Some(m) = a.mode {
        pcfg.mode = m.into();
    }
    if let Some(t) = a.threshold {
        pcfg.threshold = t;
    }
    if let Some(c) = a.candidates {
        pcfg.candidate_mode = c.into();
    }
    let parallelism = a.parallelism.unwrap_or(ctx.cfg.llm.parallelism);

    // Everything that can fail on configuration is checked before any
    // sentence is sent.
    let kind = a.client.unwrap_or(ctx.cfg.llm.client);
    let script = a.script.as_ref().or(ctx.cfg.llm.script.as_ref());
    let client: Box<dyn ChatClient> = match kind {
        ClientKind::Mock => {
            let path = script.ok_or_else(|| Error::Config("the mock client needs --script".into()))?;
            require_file(path)?;
            Box::new(ScriptedClient::from_file(path)?)
        }
        ClientKind::Http => {
            let model = a.llm_model.clone().unwrap_or_else(|| ctx.cfg.llm.model.clone());
            Box::new(HttpChatClient::new(HttpClientConfig::from_env(
                &model,
                ctx.cfg.llm.timeout_secs,
            )?))
        }
    };
    let model_path = ctx.model_path(a.model.as_ref()).cloned();
    let model = if pcfg.mode.needs_model() || model_path.is_some() {
        Some(load_model(ctx, model_path.as_ref())?)
    } else {
        None
    };
    let ner = load_ner(a.mentions.as_ref())?;
    let external = load_external(a.external.as_ref())?;
    let res = PipelineResources {
        client: client.as_ref(),
        model: model.as_ref(),
        ner: ner.as_ref(),
        external: external.as_ref(),
    };
    res.validate(&pcfg)?;
    let sentences = load(&loader, &a.input)?;

    let out = run_batch(&sentences, &names, res, &pcfg, parallelism, ctx.seed.unwrap_or(0))?;
    let records: Vec<PredictionRecord> = out
        .outcomes
        .iter()
        .map(|o| match o {
            SentenceOutcome::Ok { result } => PredictionRecord {
                id: result.id.clone(),
                triples: result.triples.clone(),
                provenance: result.provenance.clone(),
                error: None,
            },
            SentenceOutcome::Failed { error, partial } => PredictionRecord {
                id: partial.id.clone(),
                triples: Vec::new(),
                provenance: Vec::new(),
                error: Some(error.clone()),
            },
        })
        .collect();
    write_jsonl(&a.out, &records)?;
    if let Some(path) = &a.responses {
        write_jsonl(
            path,
            out.outcomes.iter().map(|o| match o {
                SentenceOutcome::Ok { result } => result,
                SentenceOutcome::Failed { partial, .. } => partial,
            }),
        )?;
    }
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let triples: usize = records.iter().map(|r| r.triples.len()).sum();
    let manifest = ExtractManifest {
        command: "extract",
        config_sha256: ctx.config_digest()?,
        input_sha256: file_sha256(&a.input)?,
        checkpoint_sha256: model_path.as_deref().map(file_sha256).transpose()?,
        script_sha256: match kind {
            ClientKind::Mock => script.map(|p| file_sha256(p)).transpose()?,
            ClientKind::Http => None,
        },
        run: out.manifest,
    };
    let manifest_path = a
        .manifest
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.manifest.json", a.out.display())));
    write_json(&manifest_path, &manifest)?;
    println!(
        "{} sentences ({failed} failed), {triples} triples, mode {}; run digest {}",
        records.len(),
        pcfg.mode,
        manifest.run.digest
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Serialize)]
struct EvaluationReport {
    dataset: String,
    overall: MatchReport,
    dense: MatchReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    long: Option<MatchReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    curve: Vec<CurvePoint>,
}

/// `a..b` (inclusive) or `a,b,c`.
pub fn parse_curve(spec: &str) -> Result<Vec<usize>, Error> {
    let bad = || Error::Config(format!("bad curve spec `{spec}`; use `1..8` or `1,2,4`"));
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        Ok((lo..=hi).collect())
    } else {
        spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
    }
}

fn evaluate(ctx: &RunContext, a: EvaluateArgs) -> Result<()> {
    require_file(&a.gold)?;
    require_file(&a.pred)?;
    let gold: Vec<(usize, SentenceRecord)> = read_jsonl_numbered(&a.gold)?;
    let preds: Vec<PredictionRecord> = read_jsonl(&a.pred)?;
    let mut by_id: HashMap<String, Vec<Triple>> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.id.clone(), p.triples).is_some() {
            log::warn!("prediction id `{}` appears more than once; keeping the last", p.id);
        }
    }
    let results: Vec<SentenceResult> = gold
        .into_iter()
        .map(|(line, rec)| {
            let id = rec.id.unwrap_or_else(|| line.to_string());
            let predicted = by_id.remove(&id).unwrap_or_else(|| {
                log::warn!("no prediction for `{id}`; counting it as empty");
                Vec::new()
            });
            SentenceResult {
                token_count: WordTokenizer.tokenize(&rec.text).len(),
                id,
                gold: rec.triples,
                predicted,
            }
        })
        .collect();
    if !by_id.is_empty() {
        log::warn!("{} prediction(s) have no gold sentence and were ignored", by_id.len());
    }

    let ev = &ctx.cfg.evaluate;
    let opts = MatchOptions {
        unicode_nfc: a.nfc || ev.nfc,
    };
    let t = a
        .strata_t
        .or(ev.triple_threshold)
        .unwrap_or_else(|| default_triple_threshold(&a.dataset));
    let overall = corpus_report(&results, opts);
    let dense = stratify_by_triples(&results, t, opts)?;
    let long = a
        .length
        .or(ev.length_threshold)
        .map(|n| stratify_by_length(&results, n, opts));
    let thresholds = match &a.curve {
        Some(spec) => parse_curve(spec)?,
        None => ev.curve.clone(),
    };
    let curve = complexity_curve(&results, &thresholds, opts)?;

    let mut shown = vec![overall, dense];
    shown.extend(long);
    print!("{}", render_reports(&shown));
    if !curve.is_empty() {
        let csv = curve_to_csv(&curve);
        match &a.curve_out {
            Some(path) => write_text(path, &csv)?,
            None => print!("{csv}"),
        }
    }
    if let Some(path) = &a.out {
        write_json(
            path,
            &EvaluationReport {
                dataset: a.dataset.clone(),
                overall,
                dense,
                long,
                curve,
            },
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// stats

fn stats(ctx: &RunContext, a: StatsArgs) -> Result<()> {
    let loader = ctx.loader(ctx.relations(a.relations.as_ref())?, a.normalization.as_ref())?;
    let sentences = load(&loader, &a.input)?;
    print!("{}", render_stats_table(&a.name, &compute_stats(&sentences, &a.cuts)));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_specs() {
        assert_eq!(parse_curve("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_curve("2, 5,8").unwrap(), vec![2, 5, 8]);
        assert!(parse_curve("4..1").is_err());
        assert!(parse_curve("x").is_err());
    }
}
