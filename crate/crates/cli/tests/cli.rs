use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn debiasot(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_debiasot"))
        .arg("--output")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

#[test]
fn counterexample_reports_negative_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = debiasot(dir.path(), &["counterexample", "--epsilon", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("counterexample.csv")).unwrap();
    let debiased: f64 = column(&csv, "debiased")[0].parse().unwrap();
    let raw: f64 = column(&csv, "raw_xy")[0].parse().unwrap();
    assert!(debiased < -1e-3);
    assert!(raw.abs() <= 1e-9);
    assert!(!csv.contains('\r'));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "counterexample");
    assert_eq!(manifest["passed"], true);
    assert_eq!(
        column(&csv, "config_hash")[0],
        manifest["config_hash"].as_str().unwrap()
    );
}

#[test]
fn interpolate_emits_moment_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = debiasot(
        dir.path(),
        &[
            "interpolate",
            "--x",
            "0",
            "--y",
            "2",
            "--epsilon",
            "1",
            "--t",
            "0.25,0.5,0.75",
        ],
    );
    let csv = fs::read_to_string(dir.path().join("interpolate.csv")).unwrap();
    let means: Vec<f64> = column(&csv, "mean_0").iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(means.len(), 3);
    for (m, t) in means.iter().zip([0.25, 0.5, 0.75]) {
        assert!((m - 2.0 * t).abs() < 1e-9);
    }
    // The grid law follows the Gibbs width sqrt(eps t(1-t)/2), not the stated target.
    for d in column(&csv, "gibbs_std_deviation") {
        assert!(d.parse::<f64>().unwrap() < 1e-9);
    }
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("std eps=1 t=0.5"));
}

#[test]
fn unknown_experiment_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = debiasot(dir.path(), &["sinkhorm"]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"experiment\": \"sinkhorm\",\n  \"epsilon\": [1]\n}\n").unwrap();
    let out = debiasot(dir.path(), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn stochastic_run_without_seed_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = debiasot(dir.path(), &["kl-lemmas"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("seed"));
}

#[test]
fn config_file_and_flags_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("div.json");
    fs::write(
        &cfg,
        r#"{
  "experiment": "divergence",
  "epsilon": [0.5, 1],
  "instance": {
    "cost": {"entries": [[0, 1, 4], [1, 0, 1], [4, 1, 0]], "symmetric": true},
    "mu": {"weights": [0.2, 0.3, 0.5]},
    "nu": {"weights": [0.5, 0.5, 0]}
  }
}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let out = debiasot(&a, &["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(a.join("divergence.csv")).unwrap();
    for d in column(&csv, "debiased") {
        assert!(d.parse::<f64>().unwrap() >= 0.0);
    }

    let cost = dir.path().join("cost.json");
    fs::write(
        &cost,
        r#"{"entries": [[0, 1, 4], [1, 0, 1], [4, 1, 0]], "symmetric": true}"#,
    )
    .unwrap();
    let b = dir.path().join("b");
    let args = [
        "divergence",
        "--cost",
        cost.to_str().unwrap(),
        "--mu",
        "0.2,0.3,0.5",
        "--nu",
        "0.5,0.5,0",
        "--epsilon",
        "0.5,1",
    ];
    assert_eq!(debiasot(&b, &args).status.code(), Some(0));
    assert_eq!(csv, fs::read_to_string(b.join("divergence.csv")).unwrap());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "divergence",
        "--seed",
        "9",
        "--points",
        "6",
        "--dim",
        "2",
        "--epsilon",
        "0.5,1",
    ];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(debiasot(&a, &args).status.code(), Some(0));
    assert_eq!(debiasot(&b, &args).status.code(), Some(0));
    assert_eq!(
        fs::read(a.join("divergence.csv")).unwrap(),
        fs::read(b.join("divergence.csv")).unwrap()
    );

    let args = ["--format", "json", "kl-lemmas", "--seed", "3", "--instances", "5"];
    assert_eq!(debiasot(&a, &args).status.code(), Some(0));
    assert_eq!(debiasot(&b, &args).status.code(), Some(0));
    assert_eq!(
        fs::read(a.join("kl-lemmas.json")).unwrap(),
        fs::read(b.join("kl-lemmas.json")).unwrap()
    );
}

#[test]
fn json_experiments_embed_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cost = dir.path().join("cost.json");
    fs::write(&cost, r#"{"entries": [[0, 1, "inf"], [1, 0, 2], ["inf", 2, 0]]}"#).unwrap();
    let out = debiasot(
        dir.path(),
        &["check-debias", "--cost", cost.to_str().unwrap(), "--strict"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("check-debias.json")).unwrap()).unwrap();
    assert_eq!(doc["results"]["debiasable"], true);
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn fast_suite_reports_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = debiasot(dir.path(), &["suite", "fast", "--seed", "20240601"]);
    let text = stdout(&out);
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
            .count(),
        13
    );
    // Only the interpolation widths miss their stated targets.
    let failing: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(failing.len(), 1, "{text}");
    assert!(failing[0].contains("interpolation"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn injected_sign_flip_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let out = debiasot(
        dir.path(),
        &[
            "suite",
            "fast",
            "--seed",
            "20240601",
            "--inject-fault",
            "debias-sign-flip",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("debias-lift"), "{}", stderr(&out));
}
