//! End-to-end checks of the command-line surface: exit codes, file formats.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spechtloc"))
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().unwrap()
}

const SZEGO_VS_BERGMAN: &str = r#"{
    "model_a": {"variant": "product_polydisc", "weights": [1.0]},
    "model_b": {"variant": "product_polydisc", "weights": [2.0]},
    "points": {"point": [[0.0, 0.0]]},
    "k": 2
}"#;

#[test]
fn compare_exit_codes_follow_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cmp.json");
    write(&config, SZEGO_VS_BERGMAN);

    let out = run(&["compare", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "inequivalent pair exits 1");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("inequivalent"), "stdout: {stdout}");

    // same model on both sides: exit 0
    let self_cmp = SZEGO_VS_BERGMAN.replace("[2.0]", "[1.0]");
    write(&config, &self_cmp);
    let out = run(&["compare", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    // metric route agrees
    let out = run(&[
        "compare",
        "--config",
        config.to_str().unwrap(),
        "--via-metric",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn compare_writes_verdict_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cmp.json");
    let verdict_path = dir.path().join("verdict.json");
    write(&config, SZEGO_VS_BERGMAN);
    let out = run(&[
        "compare",
        "--config",
        config.to_str().unwrap(),
        "--json-out",
        verdict_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let value: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&verdict_path).unwrap()).unwrap();
    assert_eq!(value["verdict"]["status"], "inequivalent");
    assert!(value["verdict"]["witness"]["word"].is_array());
}

#[test]
fn jet_and_invariants_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("model.json");
    write(
        &config,
        r#"{
            "model_a": {"variant": "product_polydisc", "weights": [1.0]},
            "points": {"point": [[0.0, 0.0]]},
            "k": 2
        }"#,
    );
    let jet_path = dir.path().join("jet.json");
    let out = run(&[
        "jet",
        "--config",
        config.to_str().unwrap(),
        "--order",
        "1",
        "--out",
        jet_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let jet: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&jet_path).unwrap()).unwrap();
    assert_eq!(jet["rank"], 1);
    assert_eq!(jet["entries"].as_array().unwrap().len(), 4);

    let inv_path = dir.path().join("inv.json");
    let out = run(&[
        "invariants",
        "--config",
        config.to_str().unwrap(),
        "--out",
        inv_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let inv: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&inv_path).unwrap()).unwrap();
    let entries = inv["invariants"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    // Szegő at 0, k=2: the single invariant is 1
    let m = &entries[0]["matrix"][0][0];
    assert!((m[0].as_f64().unwrap() - 1.0).abs() < 1e-10);

    // point override must land inside the domain
    let out = run(&[
        "jet",
        "--config",
        config.to_str().unwrap(),
        "--point",
        "[[1.5, 0.0]]",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    write(
        &config,
        r#"{
            "model_a": {"variant": "product_polydisc", "weights": [1.0]},
            "model_b": {"variant": "product_polydisc", "weights": [2.0]},
            "points": {"axes": [{"re": {"min": -0.8, "max": 0.8, "count": 5}}]},
            "k": 2,
            "seed": 0
        }"#,
    );
    let report_path = dir.path().join("report.json");
    let csv_path = dir.path().join("report.csv");
    let out = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("all points equivalent (sampled): false"));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["summary"]["total"], 5);
    assert_eq!(report["summary"]["inequivalent"], 5);
    assert_eq!(report["summary"]["all_equivalent_sampled"], false);

    let csv = fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.trim_end().lines().collect();
    assert_eq!(lines.len(), 6, "header plus five rows");
    assert!(lines[0].starts_with("index,z0_re,z0_im,k,status,distance"));
}

#[test]
fn specht_subcommand_compares_raw_tuples() {
    let dir = tempfile::tempdir().unwrap();
    let tuples = dir.path().join("tuples.json");
    // nilpotent A vs 2A: witness "a a*"
    write(
        &tuples,
        r#"{
            "tuple_a": [[[[0.0,0.0],[1.0,0.0]],[[0.0,0.0],[0.0,0.0]]]],
            "tuple_b": [[[[0.0,0.0],[2.0,0.0]],[[0.0,0.0],[0.0,0.0]]]]
        }"#,
    );
    let out = run(&["specht", "--tuples", tuples.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let value: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(value["status"], "inequivalent");
    assert_eq!(value["witness"]["word"].as_array().unwrap().len(), 2);

    // transpose pair: equivalent, exit 0
    write(
        &tuples,
        r#"{
            "tuple_a": [[[[0.0,0.0],[1.0,0.0]],[[0.0,0.0],[0.0,0.0]]]],
            "tuple_b": [[[[0.0,0.0],[0.0,0.0]],[[1.0,0.0],[0.0,0.0]]]]
        }"#,
    );
    let out = run(&["specht", "--tuples", tuples.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn errors_exit_with_three_or_more() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = run(&["compare", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let bad = dir.path().join("bad.json");
    write(&bad, "{ not json");
    let out = run(&["compare", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    // usage error
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(3));
}
