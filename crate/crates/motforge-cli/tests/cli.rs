//! Black-box tests of the installed binary.

use std::path::Path;
use std::process::Command;

fn motforge() -> Command {
    Command::new(env!("CARGO_BIN_EXE_motforge"))
}

fn run_ok(cmd: &mut Command) -> String {
    let output = cmd.output().expect("spawn motforge");
    assert!(
        output.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let s = |path: &Path| path.display().to_string();

    run_ok(motforge().args([
        "simulate",
        "--preset",
        "easy",
        "--seed",
        "3",
        "--out",
        &s(&p("seq")),
    ]));
    assert!(p("seq").join("det.txt").exists());
    assert!(p("seq").join("manifest.json").exists());

    run_ok(motforge().args([
        "gen-labels",
        "--in",
        &s(&p("seq")),
        "--out",
        &s(&p("labels.csv")),
        "--jobs",
        "2",
    ]));

    let train_log = run_ok(motforge().args([
        "train-reid",
        "--labels",
        &s(&p("labels.csv")),
        "--out",
        &s(&p("model.bin")),
        "--epochs",
        "8",
    ]));
    assert_eq!(
        train_log.lines().filter(|l| l.starts_with("epoch")).count(),
        8
    );

    run_ok(motforge().args([
        "track",
        "--tracker",
        "reid",
        "--embedder",
        "model",
        "--model",
        &s(&p("model.bin")),
        "--in",
        &s(&p("seq")),
        "--out",
        &s(&p("results.txt")),
    ]));
    assert!(p("results.txt.manifest.json").exists());

    let table = run_ok(motforge().args([
        "eval",
        "--gt",
        &s(&p("seq")),
        "--results",
        &s(&p("results.txt")),
        "--out",
        &s(&p("report.csv")),
    ]));
    assert!(table.contains("OVERALL"), "table: {table}");
    assert!(p("report.csv").exists());
}

#[test]
fn bench_prints_the_six_row_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let table = run_ok(motforge().args([
        "bench",
        "--preset",
        "easy",
        "--seeds",
        "1",
        "--jobs",
        "2",
        "--out",
        &out.display().to_string(),
    ]));
    for row in ["none", "random", "generic", "ours", "supervised", "oracle"] {
        assert!(table.contains(row), "missing ladder row {row} in:\n{table}");
    }
    let csv = std::fs::read_to_string(out).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn errors_exit_nonzero_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    // Model embedder without --model.
    let out = motforge()
        .args([
            "track",
            "--tracker",
            "reid",
            "--in",
            &dir.path().join("missing").display().to_string(),
            "--out",
            &dir.path().join("r.txt").display().to_string(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());

    // Mismatched eval pairs.
    let out = motforge()
        .args(["eval", "--gt", "a", "b", "--results", "c"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("pair up"));
}

#[test]
fn config_file_overrides_defaults_and_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let s = |path: &Path| path.display().to_string();
    run_ok(motforge().args([
        "simulate",
        "--preset",
        "easy",
        "--seed",
        "1",
        "--out",
        &s(&p("seq")),
    ]));

    std::fs::write(p("config.json"), r#"{ "train": { "epochs": 3 } }"#).unwrap();
    run_ok(motforge().args([
        "gen-labels",
        "--in",
        &s(&p("seq")),
        "--out",
        &s(&p("labels.csv")),
    ]));

    // Config file sets 3 epochs.
    let log = run_ok(motforge().args([
        "--config",
        &s(&p("config.json")),
        "train-reid",
        "--labels",
        &s(&p("labels.csv")),
        "--out",
        &s(&p("m1.bin")),
    ]));
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch")).count(), 3);

    // Flag overrides the config file.
    let log = run_ok(motforge().args([
        "--config",
        &s(&p("config.json")),
        "train-reid",
        "--labels",
        &s(&p("labels.csv")),
        "--out",
        &s(&p("m2.bin")),
        "--epochs",
        "5",
    ]));
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch")).count(), 5);
}
