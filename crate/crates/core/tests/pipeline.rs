mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use collabcal::config::RunConfig;
use collabcal::pipeline::run_pipeline;
use collabcal::report::{self, CalibrationReport};
use collabcal::transcript::Status;
use common::{params, sim_config, synthetic, to_jsonl};

const BIN: &str = env!("CARGO_BIN_EXE_collabcal");

fn write_inputs(dir: &Path, validation: usize, test: usize, config: &RunConfig) {
    fs::write(dir.join("data.jsonl"), to_jsonl(&synthetic(validation, test))).unwrap();
    fs::write(dir.join("config.toml"), toml::to_string(config).unwrap()).unwrap();
}

fn run_cli(dir: &Path, out: &str, extra: &[&str]) -> std::process::Output {
    let output = Command::new(BIN)
        .arg("run")
        .arg("--dataset")
        .arg(dir.join("data.jsonl"))
        .arg("--config")
        .arg(dir.join("config.toml"))
        .arg("--out")
        .arg(dir.join(out))
        .args(extra)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    output
}

#[test]
fn cli_run_writes_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    write_inputs(tmp.path(), 16, 6, &sim_config(3, params(0.6, 0.2, 0.1, 0.5)));
    let stdout = run_cli(tmp.path(), "out", &[]).stdout;
    let printed: CalibrationReport = serde_json::from_slice(&stdout).unwrap();
    assert_eq!(printed.post.n + printed.post.failures, 6);

    let out = tmp.path().join("out");
    for f in ["metrics.json", "predictions_pre.jsonl", "predictions_post.jsonl", "reliability_pre.csv", "reliability_post.csv", "selection.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert_eq!(fs::read_dir(out.join("transcripts")).unwrap().count(), 6);
    let csv = fs::read_to_string(out.join("reliability_post.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    let rows = fs::read_to_string(out.join("predictions_post.jsonl")).unwrap();
    assert_eq!(rows.lines().count(), printed.post.n);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    write_inputs(tmp.path(), 16, 8, &sim_config(11, params(0.6, 0.2, 0.1, 0.5)));
    run_cli(tmp.path(), "a", &[]);
    run_cli(tmp.path(), "b", &[]);
    for f in ["metrics.json", "predictions_pre.jsonl", "predictions_post.jsonl", "selection.json"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    // a different seed changes the run
    run_cli(tmp.path(), "c", &["--seed", "12"]);
    let a = fs::read(tmp.path().join("a/predictions_post.jsonl")).unwrap();
    let c = fs::read(tmp.path().join("c/predictions_post.jsonl")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn report_recomputes_same_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    write_inputs(tmp.path(), 16, 8, &sim_config(4, params(0.6, 0.2, 0.1, 0.5)));
    run_cli(tmp.path(), "out", &[]);
    let out = tmp.path().join("out");
    let before = fs::read(out.join("metrics.json")).unwrap();
    let status = Command::new(BIN).arg("report").arg("--in").arg(&out).output().unwrap();
    assert!(status.status.success());
    assert_eq!(fs::read(out.join("metrics.json")).unwrap(), before);

    let coarse = report::report(&out, Some(2)).unwrap();
    assert_eq!(coarse.bins, 2);
    assert_eq!(fs::read_to_string(out.join("reliability_post.csv")).unwrap().lines().count(), 3);
}

#[test]
fn unreachable_backend_fails_every_question() {
    let mut cfg = RunConfig::from_toml(
        "backend = \"http\"\nselection = false\nsearch = \"none\"\n\
         [backbones.sim]\nendpoint = \"http://127.0.0.1:9/v1/chat/completions\"\nmodel = \"m\"\nretries = 0\ntimeout_secs = 2\n",
    )
    .unwrap();
    cfg.parallelism = 2;
    let out = run_pipeline(&cfg, &synthetic(0, 3)).unwrap();
    assert!(out.transcripts.iter().all(|t| t.status == Status::Failed && t.error.is_some()));
    assert_eq!((out.report.pre.n, out.report.pre.failures), (0, 3));
    assert_eq!((out.report.post.n, out.report.post.failures), (0, 3));
    assert!(out.report.post.ece_abs.is_none());
}

#[test]
fn select_agents_prints_selection() {
    let tmp = tempfile::tempdir().unwrap();
    write_inputs(tmp.path(), 16, 2, &sim_config(5, params(0.6, 0.2, 0.1, 0.5)));
    let output = Command::new(BIN)
        .arg("select-agents")
        .arg("--dataset")
        .arg(tmp.path().join("data.jsonl"))
        .arg("--config")
        .arg(tmp.path().join("config.toml"))
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let v: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert!(v.is_object());

    fs::write(tmp.path().join("data.jsonl"), to_jsonl(&synthetic(0, 2))).unwrap();
    let output = Command::new(BIN)
        .args(["select-agents", "--dataset"])
        .arg(tmp.path().join("data.jsonl"))
        .arg("--config")
        .arg(tmp.path().join("config.toml"))
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn bad_inputs_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("config.toml"), "tau = 3.0\n").unwrap();
    fs::write(tmp.path().join("data.jsonl"), to_jsonl(&synthetic(0, 1))).unwrap();
    let output = Command::new(BIN)
        .arg("run")
        .arg("--dataset")
        .arg(tmp.path().join("data.jsonl"))
        .arg("--config")
        .arg(tmp.path().join("config.toml"))
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("error"));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let sim = RunConfig::load(&root.join("configs/simulated.toml")).unwrap();
    assert_eq!(sim.sim.default.accuracy, 0.6);
    let live = RunConfig::load(&root.join("configs/live.toml")).unwrap();
    assert!(live.backbones["gpt"].logprobs);
    let data = collabcal::dataset::ingest(&root.join("data/sample.jsonl")).unwrap();
    assert_eq!(data.iter().filter(|r| r.split == collabcal::dataset::Split::Test).count(), 20);
}
