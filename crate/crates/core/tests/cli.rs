use std::path::Path;
use std::process::{Command, Output};

use bgga::cli::output::{
    read_bifurcation_csv, read_history_csv, write_bifurcation_rows, write_history_rows,
};

const BIN: &str = env!("CARGO_BIN_EXE_bgga");

fn bgga(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("c.json");
    std::fs::write(
        &path,
        r#"{
  "core": { "population_size": 30 },
  "experiment": { "n_runs": 12, "lambda_grid": [0.1, 0.6, 1.2] }
}"#,
    )
    .unwrap();
    path.to_str().unwrap().to_owned()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn run_is_byte_reproducible_across_invocations_and_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let outs: Vec<_> = ["1", "1", "8"]
        .iter()
        .enumerate()
        .map(|(i, jobs)| {
            let out = tmp.path().join(format!("o{i}"));
            let o = bgga(&["run", "--config", &cfg, "--seed", "42", "--jobs", jobs, "--out-dir", out.to_str().unwrap()]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            out
        })
        .collect();
    for name in ["history.csv", "summary.json"] {
        assert_eq!(read(&outs[0], name), read(&outs[1], name));
        assert_eq!(read(&outs[0], name), read(&outs[2], name));
    }
    let text = String::from_utf8(read(&outs[0], "history.csv")).unwrap();
    assert_eq!(text.lines().count(), 17);
    assert!(text.ends_with('\n'));
    let rows = read_history_csv(&outs[0].join("history.csv")).unwrap();
    assert!(rows.iter().enumerate().all(|(i, r)| r.generation == i));

    let again = tmp.path().join("again.csv");
    write_history_rows(&rows, &again).unwrap();
    assert_eq!(read(&outs[0], "history.csv"), std::fs::read(again).unwrap());
}

#[test]
fn seed_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    for seed in ["1", "2"] {
        let out = tmp.path().join(seed);
        assert!(bgga(&["run", "--config", &cfg, "--seed", seed, "--out-dir", out.to_str().unwrap()]).status.success());
    }
    assert_ne!(read(&tmp.path().join("1"), "history.csv"), read(&tmp.path().join("2"), "history.csv"));
}

#[test]
fn override_reaches_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("o");
    let o = bgga(&["run", "--config", &cfg, "--set", "engine.variant=GGA", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&read(&out, "summary.json")).unwrap();
    assert_eq!(summary["command"], "run");
    assert_eq!(summary["config"]["engine"]["variant"], "GGA");
    assert_eq!(summary["config"]["core"]["population_size"], 30);
    assert_eq!(summary["results"]["n_runs"], 12);
}

#[test]
fn sweep_writes_bifurcation_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("o");
    let o = bgga(&["sweep", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let path = out.join("bifurcation.csv");
    let rows = read_bifurcation_csv(&path).unwrap();
    assert_eq!(rows.iter().map(|r| r.lambda).collect::<Vec<_>>(), vec![0.1, 0.6, 1.2]);
    assert!(rows.iter().all(|r| r.n_runs == 12));
    let again = tmp.path().join("again.csv");
    write_bifurcation_rows(&rows, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(again).unwrap());
    assert!(out.join("history_lambda_0.6.csv").exists());
    let summary: serde_json::Value = serde_json::from_slice(&read(&out, "summary.json")).unwrap();
    assert!(summary["results"]["report"].get("bifurcation_lambda").is_some());
}

#[test]
fn compare_and_meta_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("cmp");
    let o = bgga(&["compare", "--config", &cfg, "--set", "objective={\"name\":\"rastrigin\"}", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = String::from_utf8(read(&out, "comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);

    let out = tmp.path().join("meta");
    let o = bgga(&[
        "meta", "--config", &cfg,
        "--set", "experiment.meta.population_size=4",
        "--set", "experiment.meta.generations=2",
        "--set", "experiment.meta.inner_runs=2",
        "--out-dir", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&read(&out, "summary.json")).unwrap();
    assert!(summary["results"]["schedule"]["p_f0"].is_number());
}

#[test]
fn defaults_dump_parses_back() {
    let o = bgga(&["defaults"]);
    assert!(o.status.success());
    let doc: bgga::cli::Document = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc, bgga::cli::Document::default());
}

#[test]
fn failures_are_distinct() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();

    let missing = tmp.path().join("missing.json");
    let o = bgga(&["run", "--config", missing.to_str().unwrap(), "--out-dir", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
    let missing_code = o.status.code();

    let o = bgga(&["run", "--set", "engine.varient=GGA", "--out-dir", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("varient"));
    let schema_code = o.status.code();

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let o = bgga(&["run", "--config", bad.to_str().unwrap(), "--out-dir", out]);
    assert!(!o.status.success());

    let o = bgga(&["frobnicate"]);
    assert!(!o.status.success());
    let usage_code = o.status.code();

    assert_ne!(missing_code, schema_code);
    assert_ne!(missing_code, usage_code);
    assert_ne!(schema_code, usage_code);
}
