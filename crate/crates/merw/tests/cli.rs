use std::path::Path;
use std::process::{Command, Output};

use merw::output::RunManifest;

fn merw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_merw"))
        .args(args)
        .env("MERW_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

const MINIMAL: &str =
    r#"{"walk": {"d": 1, "p": 0.75, "r": 0.0}, "n": 100, "replicas": 1, "seed": 7}"#;

#[test]
fn simulate_minimal_config_writes_one_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let out = dir.path().join("out");
    let o = merw(&["simulate", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csvs: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
        .collect();
    assert_eq!(csvs.len(), 1);
    let text = std::fs::read_to_string(csvs[0].path()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("checkpoint,moves,W_1,S_1,sigma_1"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 100);
    // r = 0 moves every step
    assert!(rows
        .iter()
        .enumerate()
        .all(|(i, row)| row.split(',').nth(1) == Some(&(i + 1).to_string())));
}

#[test]
fn rerun_from_manifest_reproduces_digests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"walk": {"d": 2, "p": 0.6}, "sizes": {"later": {"family": "log-normal", "mu": 0.0, "sigma": 0.5}},
            "n": 300, "replicas": 50, "master_seed": 11}"#,
    );
    let first = dir.path().join("a");
    let o = merw(&["simulate", &cfg, "--out", first.to_str().unwrap(), "--json"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let printed: RunManifest = serde_json::from_str(&stdout(&o)).unwrap();
    let manifest_path = first.join("manifest.json");
    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(printed.outputs, manifest.outputs);
    assert_eq!(manifest.outputs.len(), 2);

    let second = dir.path().join("b");
    let o = merw(&[
        "simulate",
        manifest_path.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
        "--set",
        "parallelism=1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let again: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(second.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(again.outputs, manifest.outputs);
    for d in &manifest.outputs {
        assert_eq!(
            merw::output::sha256_file(&second.join(&d.file)).unwrap(),
            d.sha256
        );
    }
}

#[test]
fn invalid_config_exits_2_naming_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let o = merw(&[
        "simulate",
        &cfg,
        "--set",
        "walk.r=0.5",
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p + r"));
    let cfg = write_config(dir.path(), "{not json");
    assert_eq!(merw(&["simulate", &cfg]).status.code(), Some(2));
}

#[test]
fn expect_queries() {
    let o = merw(&["expect", "--moves", "-r", "0.5", "-n", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("1.875"));
    assert!(stdout(&o).contains("[expected-moves-gamma-ratio]"));

    let o = merw(&["expect", "--ulimit", "-r", "0.5", "--json"]);
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(rows[0]["value"], "log");
    assert_eq!(rows[2]["value"], std::f64::consts::FRAC_PI_4);
    assert!(rows
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["citation"].is_string()));

    let o = merw(&["expect", "--gamma", "-d", "2", "-p", "1"]);
    assert!(stdout(&o).split_whitespace().nth(1) == Some("1"));

    assert_eq!(
        merw(&["expect", "--hyp3f2", "-r", "0.6"]).status.code(),
        Some(4)
    );
    assert_eq!(
        merw(&["expect", "--moves", "-r", "0.5"]).status.code(),
        Some(2)
    );
    assert_eq!(merw(&["expect", "-r", "0.5"]).status.code(), Some(2));
    assert_eq!(
        merw(&["expect", "--moves", "--gamma", "-r", "0.5"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn verify_exit_codes() {
    assert_eq!(merw(&["verify", "bogus"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let o = merw(&["verify", "variation", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let reports: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("verify-variation.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(reports[0]["verdict"], "pass");
    assert_eq!(
        reports[0]["seed"],
        merw::suites::Suite::Variation.shipped_seed()
    );
}

#[test]
fn fresh_seeds_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let o = merw(&[
        "verify",
        "mean-moves",
        "--fresh-seed",
        "--json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let reports: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_ne!(
        reports[0]["seed"],
        merw::suites::Suite::MeanMoves.shipped_seed()
    );
}
