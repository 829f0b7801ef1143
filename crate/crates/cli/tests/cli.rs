use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ordinalkit::models::MODEL_NAMES;
use ordinalkit::rounding::{GridPreset, RoundingStrategy, ThresholdGrid, ThresholdMap};
use ordinalkit::synth::{generate, SynthParams};
use ordinalkit_cli::{cmd_evaluate, RunConfig};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ordinalkit"));
    c.env_remove("ORDINALKIT_OUTPUT_DIR");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_synth(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let data = generate(&SynthParams::new(n, seed)).unwrap();
    let path = dir.join("synth.csv");
    data.dataset.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, format!("seed = 11\n[dataset]\npath = \"synth.csv\"\n{body}")).unwrap();
    path
}

const EXPANDING: &str = r#"
[plan]
kind = "expanding"
min_new = 150

[[rounding]]
strategy = "half"

[[rounding]]
strategy = "graph"
grid = "R1"

[[models]]
model = "ridge"
lambda = 1.0

[[models]]
model = "ord"
"#;

#[test]
fn help_lists_registry() {
    let o = bin().arg("--help").output().unwrap();
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for name in MODEL_NAMES.iter().chain(&RoundingStrategy::NAMES).chain(&GridPreset::ALL) {
        assert!(text.contains(name), "--help is missing `{name}`");
    }
    assert!(text.contains("ORDINALKIT_OUTPUT_DIR"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 1);
    write_synth(dir.path(), 300, 1);
    let cfg = write_config(dir.path(), "unknown_key = 3\n");
    let o = run(dir.path(), &["evaluate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(!dir.path().join("ordinalkit-out").exists(), "no compute before config validation");
    let cfg = write_config(dir.path(), "[[models]]\nmodel = \"ridge\"\nlamda = 1.0\n");
    assert_eq!(code(&run(dir.path(), &["evaluate", "--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[[models]]\nmodel = \"ols\"\n");
    let o = run(dir.path(), &["evaluate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "missing dataset: {}", stderr(&o));

    let json = std::fs::read_to_string(fixture("bad_dice.json")).unwrap();
    std::fs::write(dir.path().join("bad.json"), json).unwrap();
    let o = run(dir.path(), &["ingest", "--input", "bad.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("record 1"), "{}", stderr(&o));
}

#[test]
fn model_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    write_synth(dir.path(), 300, 1);
    let cfg = write_config(dir.path(), "[[models]]\nmodel = \"knn\"\nk = 100000\n");
    let o = run(dir.path(), &["evaluate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(dir.path().join("ordinalkit-out/windows.csv").exists());
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn ingest_json_and_reingest_is_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["ingest", "--input", fixture("monsters.json").to_str().unwrap(), "--out", "a.csv"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("rows: 3"));
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a.lines().next().unwrap().split(',').count(), 5 + 32);
    let o = run(dir.path(), &["ingest", "--input", "a.csv", "--out", "b.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let b = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert!(dir.path().join("ordinalkit-out/manifest.json").exists());
}

#[test]
fn holdout_writes_one_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    write_synth(dir.path(), 400, 2);
    let cfg = write_config(dir.path(), "[[models]]\nmodel = \"ridge\"\nlambda = 1.0\n");
    let o = run(dir.path(), &["evaluate", "--config", cfg.to_str().unwrap(), "--out-dir", "out"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    let md = std::fs::read_to_string(out.join("report.md")).unwrap();
    assert_eq!(md.lines().count(), 3);
    assert!(!md.contains('±'));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(out.join("confusion/ridge-lambda-1.0-half_holdout.csv").exists());
}

#[test]
fn expanding_emits_window_rows_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    write_synth(dir.path(), 900, 3);
    let cfg = write_config(dir.path(), EXPANDING);
    let o = run(dir.path(), &["evaluate", "--config", cfg.to_str().unwrap(), "--out-dir", "out"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("out");
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let evaluations = manifest["splits"].as_array().unwrap().len();
    assert!(evaluations >= 2);
    let windows = std::fs::read_to_string(out.join("windows.csv")).unwrap();
    // two ridge roundings plus ord
    assert_eq!(windows.lines().count() - 1, 3 * evaluations);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count() - 1, 3);
    assert!(summary.lines().next().unwrap().contains("macro_mae_std"));

    let o = run(dir.path(), &["report", "--run-dir", "out"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), std::fs::read_to_string(out.join("report.md")).unwrap());
}

fn csv_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in [dir.to_path_buf(), dir.join("confusion")] {
        for e in std::fs::read_dir(&sub).unwrap() {
            let p = e.unwrap().path();
            if p.extension().is_some_and(|x| x == "csv") {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_synth(dir.path(), 900, 4);
    let cfg_path = write_config(dir.path(), EXPANDING);
    let cfg = RunConfig::load(&cfg_path).unwrap();
    cmd_evaluate(&cfg, &dir.path().join("a")).unwrap();
    cmd_evaluate(&cfg, &dir.path().join("b")).unwrap();
    let a = csv_files(&dir.path().join("a"));
    assert!(a.len() > 3);
    assert_eq!(a, csv_files(&dir.path().join("b")));

    let o = run(dir.path(), &["evaluate", "--manifest", "a/manifest.json", "--out-dir", "c"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(a, csv_files(&dir.path().join("c")));
}

#[test]
fn replay_rejects_changed_dataset() {
    let dir = tempfile::tempdir().unwrap();
    write_synth(dir.path(), 300, 5);
    let cfg = write_config(dir.path(), "[[models]]\nmodel = \"ols\"\n");
    assert_eq!(code(&run(dir.path(), &["evaluate", "--config", cfg.to_str().unwrap()])), 0);
    write_synth(dir.path(), 300, 6);
    let o = run(dir.path(), &["evaluate", "--manifest", "ordinalkit-out/manifest.json"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn env_sets_default_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .current_dir(dir.path())
        .env("ORDINALKIT_OUTPUT_DIR", "from-env")
        .args(["synth", "--n", "50"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("from-env/synth.csv").exists());
    assert!(dir.path().join("from-env/manifest.json").exists());
}

#[test]
fn tune_saves_best_model() {
    let dir = tempfile::tempdir().unwrap();
    write_synth(dir.path(), 300, 7);
    let cfg = dir.path().join("tune.toml");
    std::fs::write(
        &cfg,
        "cv_folds = 3\n[dataset]\npath = \"synth.csv\"\n[[models]]\nmodel = \"ridge\"\nlambda = [0.01, 1000000.0]\nlabel = \"ridge\"\n",
    )
    .unwrap();
    let o = run(dir.path(), &["tune", "--config", cfg.to_str().unwrap(), "--out-dir", "t"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("ridge(lambda=0.01)"), "{}", stdout(&o));
    let saved: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("t/models/ridge.json")).unwrap()).unwrap();
    assert_eq!(saved["document"]["format_version"], 1);
}

fn write_predictions(dir: &Path, pairs: &[(f64, i32)]) -> PathBuf {
    let mut s = String::from("raw,true_level\n");
    for (r, y) in pairs {
        s.push_str(&format!("{r},{y}\n"));
    }
    let p = dir.join("pred.csv");
    std::fs::write(&p, s).unwrap();
    p
}

fn offsets(path: &Path) -> Vec<f64> {
    let map: ThresholdMap = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    map.offsets().to_vec()
}

fn toy() -> Vec<(f64, i32)> {
    vec![
        (0.2, 0),
        (0.7, 0),
        (0.9, 1),
        (1.1, 1),
        (1.3, 1),
        (1.45, 2),
        (1.8, 2),
        (2.2, 2),
        (0.55, 1),
        (1.6, 1),
    ]
}

#[test]
fn round_fit_strategies() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_predictions(dir.path(), &toy());
    let p = p.to_str().unwrap();

    let o = run(dir.path(), &["round-fit", "--predictions", p, "--strategy", "half", "--out", "h.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(offsets(&dir.path().join("h.json")), vec![0.5, 0.5]);

    let o = run(dir.path(), &["round-fit", "--predictions", p, "--strategy", "graph", "--grid", "R1", "--out", "g.json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("tuning MAE after"));
    let got = offsets(&dir.path().join("g.json"));
    let r1 = ThresholdGrid::r1();
    assert!(got.iter().all(|r| r1.offsets().contains(r)));

    // brute force over every pair of R1 offsets
    let deviation = |off: &[f64]| -> i64 {
        let map = ThresholdMap::new(0, off.to_vec()).unwrap();
        toy().iter().map(|&(x, y)| i64::from((map.apply(x) - y).abs())).sum()
    };
    let best = r1
        .offsets()
        .iter()
        .flat_map(|&a| r1.offsets().iter().map(move |&b| deviation(&[a, b])))
        .min()
        .unwrap();
    assert_eq!(deviation(&got), best);

    let o = run(dir.path(), &["round-fit", "--predictions", p, "--strategy", "magic"]);
    assert_eq!(code(&o), 1);
    for name in RoundingStrategy::NAMES {
        assert!(stderr(&o).contains(name));
    }
}
