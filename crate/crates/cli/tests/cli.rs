mod common;

use std::path::Path;

use common::{read_sentences, run_in, stderr, stdout, write_script};

const WORKED_EXAMPLE: &str = r#"{"id": "worked-example", "text": "Microsoft founders Bill Gates and his friend Steve Jobs met in Seattle .", "triples": [{"s": "Bill Gates", "p": "founders", "o": "Microsoft"}, {"s": "Bill Gates", "p": "friend", "o": "Steve Jobs"}]}"#;

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn ok(o: &std::process::Output) {
    assert!(o.status.success(), "stdout: {}\nstderr: {}", stdout(o), stderr(o));
}

/// Synthetic data plus a briefly trained model in `dir`.
fn prepared(dir: &Path) {
    ok(&run_in(dir, &["build-dataset", "--synthetic", "30", "--seed", "5", "--out-dir", "data"]));
    ok(&run_in(
        dir,
        &[
            "train", "--input", "data/sentences.jsonl", "--relations", "data/relations.txt", "--out", "model.json",
            "--epochs", "2", "--seed", "1",
        ],
    ));
}

#[test]
fn build_dataset_on_the_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "worked-example.jsonl", &format!("{WORKED_EXAMPLE}\n"));
    write(dir.path(), "rel.txt", "founders\nfriend\n");
    let o = run_in(
        dir.path(),
        &["build-dataset", "--input", "worked-example.jsonl", "--relations", "rel.txt", "--out-dir", "out"],
    );
    ok(&o);
    assert!(stdout(&o).contains("2 positive / 4 negative entity pairs"), "{}", stdout(&o));
    let labels: serde_json::Value = serde_json::from_slice(&read(dir.path(), "out/labels.jsonl")).unwrap();
    assert_eq!(labels["n"], 15);
    let cells = labels["cells"].as_array().unwrap();
    assert!(cells.contains(&serde_json::json!([3, 1, 1])));
    assert!(cells.contains(&serde_json::json!([1, 8, -1])));
    assert!(cells.iter().all(|c| c[2] != 0));
}

#[test]
fn build_dataset_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        ok(&run_in(dir.path(), &["build-dataset", "--synthetic", "40", "--seed", "9", "--out-dir", out]));
    }
    for f in ["sentences.jsonl", "labels.jsonl", "report.json", "relations.txt"] {
        assert_eq!(read(dir.path(), &format!("a/{f}")), read(dir.path(), &format!("b/{f}")), "{f}");
    }
    ok(&run_in(dir.path(), &["build-dataset", "--synthetic", "40", "--seed", "10", "--out-dir", "c"]));
    assert_ne!(read(dir.path(), "a/sentences.jsonl"), read(dir.path(), "c/sentences.jsonl"));
}

#[test]
fn missing_relation_list_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "worked-example.jsonl", WORKED_EXAMPLE);
    let o = run_in(dir.path(), &["build-dataset", "--input", "worked-example.jsonl", "--out-dir", "out"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = run_in(
        dir.path(),
        &["build-dataset", "--input", "worked-example.jsonl", "--relations", "missing.txt", "--out-dir", "out"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_data_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.jsonl", "{\"text\": \n");
    write(dir.path(), "rel.txt", "founders\n");
    let o = run_in(
        dir.path(),
        &["build-dataset", "--input", "bad.jsonl", "--relations", "rel.txt", "--out-dir", "out"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("line 1"));
}

#[test]
fn train_writes_checkpoint_and_report_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&run_in(d, &["build-dataset", "--synthetic", "20", "--seed", "2", "--out-dir", "data"]));
    for name in ["m1", "m2"] {
        let o = run_in(
            d,
            &[
                "train", "--input", "data/sentences.jsonl", "--relations", "data/relations.txt", "--out",
                &format!("{name}.json"), "--report", &format!("{name}.report.json"), "--epochs", "2", "--seed",
                "4", "--checkpoint-dir", &format!("{name}-ckpt"),
            ],
        );
        ok(&o);
        assert!(stdout(&o).contains("loss"));
    }
    assert_eq!(read(d, "m1.json"), read(d, "m2.json"));
    // Reports differ only in the checkpoint directory names.
    let report: serde_json::Value = serde_json::from_slice(&read(d, "m1.report.json")).unwrap();
    let mut other: serde_json::Value = serde_json::from_slice(&read(d, "m2.report.json")).unwrap();
    other["checkpoints"] = report["checkpoints"].clone();
    assert_eq!(report, other);
    assert_eq!(report["epoch_losses"].as_array().unwrap().len(), 2);
    assert!(d.join("m1-ckpt/epoch-002.json").is_file());
}

#[test]
fn train_rejects_zero_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&run_in(d, &["build-dataset", "--synthetic", "5", "--out-dir", "data"]));
    let o = run_in(
        d,
        &[
            "train", "--input", "data/sentences.jsonl", "--relations", "data/relations.txt", "--out", "m.json",
            "--epochs", "0",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.join("m.json").exists());
}

#[test]
fn filter_scores_candidates_and_external_triples() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepared(d);
    let base = ["filter", "--model", "model.json", "--input", "data/sentences.jsonl", "--relations", "data/relations.txt"];

    let o = run_in(d, &[&base[..], &["--out", "pairs.jsonl"]].concat());
    ok(&o);
    let text = String::from_utf8(read(d, "pairs.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 30);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert!(first["decisions"][0]["score"].is_f64());

    let o = run_in(d, &[&base[..], &["--out", "none.jsonl", "--threshold", "1e9"]].concat());
    ok(&o);
    assert!(stdout(&o).starts_with("kept 0 of"), "{}", stdout(&o));

    // external predictions: gold plus one reversed copy per sentence
    let mut lines = String::new();
    for (id, triples) in read_sentences(&d.join("data/sentences.jsonl")) {
        let mut ts = triples.clone();
        let t = &triples[0];
        ts.push(evalfilter::Triple::new(t.o.clone(), t.p.clone(), t.s.clone()));
        ts.push(evalfilter::Triple::new("Nobody Here", t.p.clone(), t.o.clone()));
        lines.push_str(&serde_json::json!({"id": id, "triples": ts}).to_string());
        lines.push('\n');
    }
    write(d, "ext.jsonl", &lines);
    let o = run_in(d, &[&base[..], &["--external", "ext.jsonl", "--out", "kept.jsonl"]].concat());
    ok(&o);
    assert!(stdout(&o).contains("(30 unplaced)"), "{}", stdout(&o));
}

#[test]
fn extract_with_mock_client_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepared(d);
    write_script(&d.join("data/sentences.jsonl"), &d.join("script.json"), 1);
    let args = |out: &str| {
        vec![
            "extract".to_string(), "--input".into(), "data/sentences.jsonl".into(), "--relations".into(),
            "data/relations.txt".into(), "--mode".into(), "full".into(), "--client".into(), "mock".into(),
            "--script".into(), "script.json".into(), "--model".into(), "model.json".into(), "--parallelism".into(),
            "3".into(), "--out".into(), out.into(), "--seed".into(), "1".into(),
        ]
    };
    for out in ["p1.jsonl", "p2.jsonl"] {
        let a = args(out);
        ok(&run_in(d, &a.iter().map(String::as_str).collect::<Vec<_>>()));
    }
    assert_eq!(read(d, "p1.jsonl"), read(d, "p2.jsonl"));
    let m1: serde_json::Value = serde_json::from_slice(&read(d, "p1.jsonl.manifest.json")).unwrap();
    let m2: serde_json::Value = serde_json::from_slice(&read(d, "p2.jsonl.manifest.json")).unwrap();
    assert_eq!(m1["run"]["digest"], m2["run"]["digest"]);
    assert_eq!(m1["run"]["llm_model"], "scripted-test");
    assert!(m1["checkpoint_sha256"].is_string());

    // The script's stage-2 answers are the gold triples.
    let o = run_in(d, &["evaluate", "--gold", "data/sentences.jsonl", "--pred", "p1.jsonl"]);
    ok(&o);
    let all = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(all.contains("100.00"), "{all}");
}

#[test]
fn no_filtering_offers_every_candidate_pair() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&run_in(d, &["build-dataset", "--synthetic", "6", "--out-dir", "data"]));
    write_script(&d.join("data/sentences.jsonl"), &d.join("script.json"), 1);
    ok(&run_in(
        d,
        &[
            "extract", "--input", "data/sentences.jsonl", "--relations", "data/relations.txt", "--mode",
            "no-filtering", "--script", "script.json", "--out", "p.jsonl", "--responses", "raw.jsonl",
        ],
    ));
    let sentences = read_sentences(&d.join("data/sentences.jsonl"));
    let raw = String::from_utf8(read(d, "raw.jsonl")).unwrap();
    for (line, (_, triples)) in raw.lines().zip(&sentences) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let mut entities: Vec<&str> = Vec::new();
        for t in triples {
            for e in [t.s.as_str(), t.o.as_str()] {
                if !entities.contains(&e) {
                    entities.push(e);
                }
            }
        }
        let k = entities.len();
        assert_eq!(v["candidate_pairs"].as_array().unwrap().len(), k * (k - 1));
    }
}

#[test]
fn http_client_without_credentials_fails_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&run_in(d, &["build-dataset", "--synthetic", "3", "--out-dir", "data"]));
    let o = run_in(
        d,
        &[
            "extract", "--input", "data/sentences.jsonl", "--relations", "data/relations.txt", "--mode",
            "no-filtering", "--client", "http", "--out", "p.jsonl",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("EVALFILTER_LLM_ENDPOINT"));
    assert!(!d.join("p.jsonl").exists());
}

#[test]
fn full_mode_without_a_model_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&run_in(d, &["build-dataset", "--synthetic", "3", "--out-dir", "data"]));
    write_script(&d.join("data/sentences.jsonl"), &d.join("script.json"), 1);
    let o = run_in(
        d,
        &[
            "extract", "--input", "data/sentences.jsonl", "--relations", "data/relations.txt", "--script",
            "script.json", "--out", "p.jsonl",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn evaluate_reports_strata_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&run_in(d, &["build-dataset", "--synthetic", "40", "--out-dir", "data"]));
    let o = run_in(
        d,
        &[
            "evaluate", "--gold", "data/sentences.jsonl", "--pred", "data/sentences.jsonl", "--strata-t", "5",
            "--curve", "1..8", "--curve-out", "curve.csv", "--out", "report.json",
        ],
    );
    ok(&o);
    let table = stdout(&o);
    assert!(table.contains("#triples>=5"));
    let report: serde_json::Value = serde_json::from_slice(&read(d, "report.json")).unwrap();
    for key in ["overall", "dense"] {
        for m in ["precision", "recall", "f1"] {
            assert_eq!(report[key][m], 1.0, "{key}.{m}");
        }
    }
    let csv = String::from_utf8(read(d, "curve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.starts_with("t,recall,f1,sentences\n1,1.000000,1.000000,40"));

    // the dataset name picks the dense threshold
    let o = run_in(
        d,
        &["evaluate", "--gold", "data/sentences.jsonl", "--pred", "data/sentences.jsonl", "--dataset", "WikiKBP"],
    );
    assert!(stdout(&o).contains("#triples>=2"));
}

#[test]
fn stats_prints_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&run_in(d, &["build-dataset", "--synthetic", "10", "--out-dir", "data"]));
    let o = run_in(
        d,
        &[
            "stats", "--input", "data/sentences.jsonl", "--relations", "data/relations.txt", "--cuts", "0,20,500",
            "--name", "toy",
        ],
    );
    ok(&o);
    let out = stdout(&o);
    assert!(out.contains("toy"));
    assert!(out.lines().any(|l| l.contains("500") && l.contains(" - ")), "{out}");
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&run_in(d, &["build-dataset", "--synthetic", "5", "--out-dir", "data"]));
    write(d, "run.toml", "seed = 3\n[data]\nrelations = \"data/relations.txt\"\n[train]\nepochs = 1\n");
    let o = run_in(d, &["--config", "run.toml", "train", "--input", "data/sentences.jsonl", "--out", "m.json"]);
    ok(&o);
    assert!(stdout(&o).contains("for 1 epochs"));
    write(d, "bad.toml", "[train]\nepochs = \"many\"\n");
    let o = run_in(d, &["--config", "bad.toml", "stats", "--input", "data/sentences.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
}
