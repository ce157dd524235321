use std::path::{Path, PathBuf};
use std::process::Command;

use nextstep_cli::{run, EXIT_DATA, EXIT_USAGE};
use nextstep_core::{EvalReport, FrequencyModel};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn nextstep(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["nextstep"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = nextstep(args);
    assert_eq!(code, 0, "{args:?} failed: {err}");
    out
}

fn generated(dir: &Path, seed: u64, users: usize) -> String {
    let path = dir.join(format!("gen-{seed}-{users}.jsonl"));
    let p = path.to_str().unwrap().to_string();
    ok(&["gen", "--seed", &seed.to_string(), "--users", &users.to_string(), "--out", &p]);
    p
}

fn fixture_flags() -> Vec<String> {
    [
        ("--corpus", "filter_corpus.jsonl"),
        ("--aliases", "aliases.csv"),
        ("--taxonomy-diploma", "taxonomy_diploma.csv"),
        ("--taxonomy-job", "taxonomy_job.csv"),
    ]
    .iter()
    .flat_map(|(f, n)| [f.to_string(), fixture(n).to_str().unwrap().to_string()])
    .collect()
}

#[test]
fn evaluate_prints_a_table_row() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generated(dir.path(), 3, 400);
    let out = ok(&["evaluate", "--kind", "job", "--method", "previous", "--corpus", &corpus]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "Method | MR | MRR | CI");
    let cells: Vec<&str> = lines[1].split(" | ").collect();
    assert_eq!(cells.len(), 4);
    assert_eq!(cells[0], "PreviousStep");
    let mr: f64 = cells[1].parse().unwrap();
    let mrr: f64 = cells[2].parse().unwrap();
    assert!(mr > 1.0 && mr < 47.0);
    assert!(mrr > 0.0 && mrr <= 1.0);
    assert!(cells[3].starts_with('[') && cells[3].ends_with(']'));
}

#[test]
fn evaluate_without_method_uses_the_report_set() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generated(dir.path(), 3, 400);
    let out = ok(&["evaluate", "--kind", "diploma", "--corpus", &corpus]);
    let methods: Vec<&str> = out.lines().skip(1).map(|l| l.split(" | ").next().unwrap()).collect();
    assert_eq!(methods, ["Baseline", "FirstJobAfter", "PreviousStep", "HighestDiploma"]);
    let both = ok(&["evaluate", "--corpus", &corpus]);
    assert!(both.contains("# diploma") && both.contains("# job"));
}

#[test]
fn json_report_and_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generated(dir.path(), 4, 300);
    let hist = dir.path().join("hist");
    let out = ok(&[
        "evaluate", "--kind", "job", "--method", "last-diploma", "--corpus", &corpus, "--json",
        "--histogram-dir", hist.to_str().unwrap(),
    ]);
    let report: EvalReport = serde_json::from_str(&out).unwrap();
    assert_eq!(report.to_json(), out);
    let csv = std::fs::read_to_string(hist.join("job-last-diploma.csv")).unwrap();
    assert_eq!(csv, report.histogram_csv());
    assert!(csv.starts_with("rank_bin,count\n"));
}

#[test]
fn gen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(&["gen", "--seed", "1", "--users", "10"]);
    let b = ok(&["gen", "--seed", "1", "--users", "10"]);
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 10);
    assert_ne!(a, ok(&["gen", "--seed", "2", "--users", "10"]));
    let file = generated(dir.path(), 1, 10);
    assert_eq!(std::fs::read_to_string(file).unwrap(), a);
}

#[test]
fn ingest_reports_dropped_profiles() {
    let mut args = vec!["ingest".to_string(), "--json".to_string()];
    args.extend(fixture_flags());
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let stats: serde_json::Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(stats["dropped_profiles"], 2);
    assert_eq!(stats["dropped_steps"], 3);
    assert_eq!(stats["users"], 3);
    let text = ok(&args[..1].iter().chain(&args[2..]).copied().collect::<Vec<_>>());
    assert!(text.contains("dropped_profiles: 2"));
}

#[test]
fn ingest_writes_normalized_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("clean.jsonl");
    let mut args = vec!["ingest".to_string(), "--out".to_string(), out.to_str().unwrap().to_string()];
    args.extend(fixture_flags());
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&args);
    let clean = std::fs::read_to_string(&out).unwrap();
    assert_eq!(clean.lines().count(), 3);
    assert!(clean.contains("Bachelor in CS"));
}

#[test]
fn trained_dump_predicts_like_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generated(dir.path(), 6, 300);
    let dump = dir.path().join("model.json");
    ok(&["train", "--kind", "job", "--method", "previous", "--corpus", &corpus, "--out", dump.to_str().unwrap()]);
    let model = FrequencyModel::from_dump_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(model.target_kind(), nextstep_core::StepKind::Job);
    let from_dump = ok(&["predict", "--model", dump.to_str().unwrap(), "--context", "diploma:1,job:0", "--json"]);
    let from_corpus = ok(&["predict", "--kind", "job", "--method", "previous", "--corpus", &corpus, "--context", "diploma:1,job:0", "--json"]);
    assert_eq!(from_dump, from_corpus);
    let top = ok(&["predict", "--model", dump.to_str().unwrap(), "--context", "diploma:1", "--top", "6"]);
    assert_eq!(top.lines().count(), 7);
    assert!(top.starts_with("Rank | Concept | Label | Score | Count\n1 | "));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generated(dir.path(), 7, 300);
    let cfg = dir.path().join("nextstep.toml");
    std::fs::write(&cfg, format!("corpus = {corpus:?}\nkind = \"job\"\nmethod = \"baseline\"\njobs = 2\n")).unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = ok(&["evaluate", "--config", c]);
    assert!(from_file.lines().nth(1).unwrap().starts_with("Baseline |"));
    let overridden = ok(&["evaluate", "--config", c, "--method", "previous"]);
    assert!(overridden.lines().nth(1).unwrap().starts_with("PreviousStep |"));
    let direct = ok(&["evaluate", "--corpus", &corpus, "--kind", "job", "--method", "previous"]);
    assert_eq!(overridden, direct);
}

#[test]
fn usage_errors_exit_one() {
    let (code, _, err) = nextstep(&["evaluate", "--kind", "job"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--corpus"));
    assert_eq!(nextstep(&["evaluate", "--method", "oracle"]).0, EXIT_USAGE);
    assert_eq!(nextstep(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(nextstep(&[]).0, EXIT_USAGE);
    assert_eq!(nextstep(&["evaluate", "--alpha", "0.2", "--pack-penalty", "0.9", "--corpus", "x"]).0, EXIT_USAGE);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "colour = \"red\"\n").unwrap();
    assert_eq!(nextstep(&["gen", "--config", cfg.to_str().unwrap()]).0, EXIT_USAGE);
    assert_eq!(nextstep(&["--help"]).0, 0);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = nextstep(&["ingest", "--corpus", "/definitely/missing.jsonl"]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("missing.jsonl"));
    let broken = dir.path().join("broken.jsonl");
    std::fs::write(&broken, "{\"user_id\": 3}\n").unwrap();
    let (code, _, err) = nextstep(&["ingest", "--corpus", broken.to_str().unwrap()]);
    assert_eq!(code, EXIT_DATA);
    assert!(err.contains("line 1"), "{err}");
    let corpus = generated(dir.path(), 8, 50);
    let (code, _, _) = nextstep(&["predict", "--kind", "job", "--corpus", &corpus, "--context", "job:400"]);
    assert_eq!(code, EXIT_DATA);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_nextstep");
    let out = Command::new(bin).args(["gen", "--seed", "1", "--users", "3"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(out.stdout.split(|b| *b == b'\n').filter(|l| !l.is_empty()).count(), 3);
    let out = Command::new(bin).args(["evaluate", "--kind", "job"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    let out = Command::new(bin).args(["ingest", "--corpus", "/definitely/missing.jsonl"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    assert!(!out.stderr.is_empty());
}

#[test]
fn reorient_lists_flags() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generated(dir.path(), 9, 300);
    let json = ok(&["reorient", "--corpus", &corpus, "--threshold", "20", "--json"]);
    let flags: Vec<serde_json::Value> = serde_json::from_str(&json).unwrap();
    assert!(!flags.is_empty());
    assert!(flags.iter().all(|f| f["rank_of_truth"].as_u64().unwrap() > 20));
    let text = ok(&["reorient", "--corpus", &corpus, "--threshold", "20"]);
    assert_eq!(text.lines().count(), flags.len() + 1);
}
