//! Subcommand implementations. Each returns the text printed on success.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use ordinalkit::data::{load_dataset, DataFormat, Dataset, NormalizationParams};
use ordinalkit::evaluation::{
    aggregates, aggregates_from_windows_csv, cross_validate, render_aggregates, run_evaluation, write_report,
    CellOutcome, CvResult, ReportFormat,
};
use ordinalkit::metrics::mae;
use ordinalkit::models::ModelDocument;
use ordinalkit::rng::derive_seed;
use ordinalkit::rounding::{GridPreset, RoundingStrategy, ThresholdMap};
use ordinalkit::synth::{generate, SynthParams};
use ordinalkit::LabelSpace;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{file_sha256, DatasetInfo, Manifest, MANIFEST_FILE};

pub const OUTPUT_DIR_ENV: &str = "ORDINALKIT_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "ordinalkit-out";

/// Flag, then config, then `ORDINALKIT_OUTPUT_DIR`, then `./ordinalkit-out`.
pub fn resolve_output_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> CliResult<PathBuf> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Model(e.to_string()))
}

fn load_config_dataset(cfg: &RunConfig) -> CliResult<(Dataset, DatasetInfo)> {
    let format = cfg.dataset.resolved_format()?;
    let path = &std::path::absolute(&cfg.dataset.path).unwrap_or_else(|_| cfg.dataset.path.clone());
    let sha256 = file_sha256(path)?;
    let ds = load_dataset(path, format).map_err(CliError::data)?;
    let info = DatasetInfo {
        path: path.clone(),
        sha256,
        rows: ds.len(),
    };
    Ok((ds, info))
}

fn histogram_text(ds: &Dataset) -> String {
    let mut s = format!("rows: {}\nlevel histogram:\n", ds.len());
    for (level, count) in ds.level_histogram() {
        let _ = writeln!(s, "  {level:>3}: {count}");
    }
    s
}

pub fn cmd_ingest(input: &Path, format: Option<DataFormat>, out: &Path, out_dir: &Path) -> CliResult<String> {
    let format = format
        .or_else(|| DataFormat::from_path(input))
        .ok_or_else(|| CliError::usage(format!("cannot infer format of {}; pass --format", input.display())))?;
    let ds = load_dataset(input, format).map_err(CliError::data)?;
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).map_err(CliError::data)?;
    let written = write_file(out, std::str::from_utf8(&buf).expect("csv is utf-8"))?;

    ensure_dir(out_dir)?;
    let mut m = Manifest::new("ingest", json!({ "input": input, "format": format, "out": out }));
    m.dataset = Some(DatasetInfo {
        path: input.to_path_buf(),
        sha256: file_sha256(input)?,
        rows: ds.len(),
    });
    m.add_outputs(out_dir, &[written]);
    m.write(out_dir)?;
    Ok(histogram_text(&ds))
}

/// Runs the configured plan and writes reports plus a manifest to `out_dir`.
pub fn cmd_evaluate(cfg: &RunConfig, out_dir: &Path) -> CliResult<String> {
    let eval = cfg.eval_config()?;
    let (ds, info) = load_config_dataset(cfg)?;
    let report = run_evaluation(&ds, &eval).map_err(CliError::compute)?;

    ensure_dir(out_dir)?;
    let mut paths = write_report(&report, out_dir).map_err(CliError::data)?;
    paths.push(write_file(&out_dir.join("report.json"), &to_json(&report)?)?);

    let mut resolved = cfg.clone();
    resolved.output_dir = Some(std::path::absolute(out_dir).unwrap_or_else(|_| out_dir.to_path_buf()));
    let mut m = Manifest::new("evaluate", serde_json::to_value(&resolved).map_err(|e| CliError::Model(e.to_string()))?);
    m.dataset = Some(info);
    m.splits = report.splits.clone();
    m.add_outputs(out_dir, &paths);
    m.write(out_dir)?;

    let table = render_aggregates(&aggregates(&report), report.is_windowed(), ReportFormat::Markdown)
        .map_err(CliError::compute)?;
    let failed: Vec<String> = report
        .cells
        .iter()
        .filter_map(|c| match &c.outcome {
            CellOutcome::Failed { error } => Some(format!("{} / {} / {}: {error}", c.split, c.model, c.rounding)),
            CellOutcome::Ok { .. } => None,
        })
        .collect();
    for f in &failed {
        log::warn!("failed cell {f}");
    }
    if !report.cells.is_empty() && failed.len() == report.cells.len() {
        return Err(CliError::Model(format!("every model failed; first error: {}", failed[0])));
    }
    Ok(table)
}

/// Reruns a manifest, refusing if the dataset changed.
pub fn cmd_replay(manifest: &Path, out_dir: Option<&Path>) -> CliResult<String> {
    let m = Manifest::read(manifest)?;
    if m.command != "evaluate" {
        return Err(CliError::usage(format!("manifest records `{}`, not `evaluate`", m.command)));
    }
    let cfg: RunConfig =
        serde_json::from_value(m.config).map_err(|e| CliError::usage(format!("manifest config: {e}")))?;
    if let Some(info) = &m.dataset {
        let now = file_sha256(&cfg.dataset.path)?;
        if now != info.sha256 {
            return Err(CliError::Data(format!(
                "dataset {} changed since the manifest was written (sha256 {now} != {})",
                cfg.dataset.path.display(),
                info.sha256
            )));
        }
    }
    let dir = resolve_output_dir(out_dir, cfg.output_dir.as_deref());
    cmd_evaluate(&cfg, &dir)
}

#[derive(Serialize)]
struct TuneEntry<'a> {
    label: &'a str,
    result: &'a CvResult,
}

#[derive(Serialize)]
struct SavedModel<'a> {
    label: &'a str,
    normalization: &'a NormalizationParams,
    document: &'a ModelDocument,
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Grid search by k-fold CV over the whole dataset, then fits the winner on
/// all rows and saves it with its normalization.
pub fn cmd_tune(cfg: &RunConfig, out_dir: &Path) -> CliResult<String> {
    let eval = cfg.eval_config()?;
    let (ds, info) = load_config_dataset(cfg)?;
    let space = ds.level_space().map_err(CliError::data)?;
    let x = ds.features();
    let y = ds.levels();
    let names = ds.feature_names();
    ensure_dir(out_dir)?;

    let mut results = Vec::new();
    let mut paths = Vec::new();
    let mut text = String::from("| Model | Best | CV macro-MAE |\n|---|---|---|\n");
    for (i, entry) in eval.models.iter().enumerate() {
        let seed = derive_seed(eval.seed, i as u64);
        let cv = cross_validate(&entry.grid, &x, names, &y, &space, eval.cv_folds, &eval.tuning_rounding, seed)
            .map_err(CliError::compute)?;
        let norm = NormalizationParams::fit(&x).map_err(CliError::compute)?;
        let xn = norm.transform(&x).map_err(CliError::compute)?;
        let model = cv
            .best_spec
            .fit(&xn, names, &y, &space, seed)
            .map_err(CliError::compute)?;
        let doc = ModelDocument::new(cv.best_spec.clone(), model);
        let saved = SavedModel {
            label: &entry.label,
            normalization: &norm,
            document: &doc,
        };
        paths.push(write_file(
            &out_dir.join("models").join(format!("{}.json", slug(&entry.label))),
            &to_json(&saved)?,
        )?);
        let score = cv.scores[cv.best].map_or("n/a".into(), |s| format!("{s:.4}"));
        let _ = writeln!(text, "| {} | {} | {score} |", entry.label, cv.best_spec.label());
        results.push((entry.label.clone(), cv));
    }
    let entries: Vec<TuneEntry> = results
        .iter()
        .map(|(label, result)| TuneEntry { label, result })
        .collect();
    paths.push(write_file(&out_dir.join("tuning.json"), &to_json(&entries)?)?);

    let mut resolved = cfg.clone();
    resolved.output_dir = Some(std::path::absolute(out_dir).unwrap_or_else(|_| out_dir.to_path_buf()));
    let mut m = Manifest::new("tune", serde_json::to_value(&resolved).map_err(|e| CliError::Model(e.to_string()))?);
    m.dataset = Some(info);
    m.add_outputs(out_dir, &paths);
    m.write(out_dir)?;
    Ok(text)
}

/// Builds a strategy from its registered name and a grid preset or list.
pub fn strategy_from_name(name: &str, grid: Option<&str>, monotone: bool) -> CliResult<RoundingStrategy> {
    if !RoundingStrategy::NAMES.contains(&name) {
        return Err(CliError::usage(format!(
            "unknown rounding strategy `{name}` (expected one of {})",
            RoundingStrategy::NAMES.join(", ")
        )));
    }
    let grid = match grid.unwrap_or("R1") {
        g if g.contains(',') || g.parse::<f64>().is_ok() => {
            let vals: Result<Vec<f64>, _> = g.split(',').map(|v| v.trim().parse::<f64>()).collect();
            json!(vals.map_err(|_| CliError::usage(format!("bad grid `{g}`")))?)
        }
        g => {
            let preset: GridPreset = g.parse().map_err(CliError::usage)?;
            serde_json::to_value(preset).expect("preset serializes")
        }
    };
    let v = match name {
        "half" => json!({ "strategy": "half" }),
        "graph" if monotone => json!({ "strategy": "graph", "grid": grid, "mode": "paper_monotone" }),
        other => json!({ "strategy": other, "grid": grid }),
    };
    let s: RoundingStrategy = serde_json::from_value(v).map_err(|e| CliError::usage(e.to_string()))?;
    if let RoundingStrategy::Global { grid, .. } | RoundingStrategy::PerLevel { grid, .. } | RoundingStrategy::Graph { grid, .. } = &s {
        grid.build().map_err(CliError::usage)?;
    }
    Ok(s)
}

/// Reads `raw,true_level` pairs.
pub fn read_predictions(path: &Path) -> CliResult<(Vec<f64>, Vec<i32>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let headers = r.headers().map_err(|e| CliError::Data(e.to_string()))?.clone();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h.trim()));
    let (Some(ri), Some(li)) = (col(&["raw"]), col(&["true_level", "level"])) else {
        return Err(CliError::Data(format!("{}: expected columns raw,true_level", path.display())));
    };
    let (mut raw, mut y) = (Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(e.to_string()))?;
        let bad = |what: &str| CliError::Data(format!("{} row {}: bad {what}", path.display(), line + 2));
        let v: f64 = rec[ri].trim().parse().map_err(|_| bad("raw"))?;
        if !v.is_finite() {
            return Err(bad("raw"));
        }
        raw.push(v);
        y.push(rec[li].trim().parse().map_err(|_| bad("true_level"))?);
    }
    if y.is_empty() {
        return Err(CliError::Data(format!("{}: no rows", path.display())));
    }
    Ok((raw, y))
}

pub fn cmd_round_fit(
    predictions: &Path,
    strategy: &RoundingStrategy,
    seed: u64,
    out: &Path,
    out_dir: &Path,
) -> CliResult<String> {
    let (raw, y) = read_predictions(predictions)?;
    let lo = *y.iter().min().expect("nonempty");
    let hi = *y.iter().max().expect("nonempty");
    let space = LabelSpace::range(lo, hi).map_err(CliError::data)?;
    let before = ThresholdMap::constant(&space, 0.5).map_err(CliError::compute)?;
    let map = strategy.fit(&raw, &y, &space, seed).map_err(CliError::compute)?;
    let mae_before = mae(&y, &before.apply_all(&raw)).map_err(CliError::compute)?;
    let mae_after = mae(&y, &map.apply_all(&raw)).map_err(CliError::compute)?;
    let written = write_file(out, &to_json(&map)?)?;

    ensure_dir(out_dir)?;
    let mut m = Manifest::new(
        "round-fit",
        json!({ "predictions": predictions, "strategy": strategy, "seed": seed, "out": out }),
    );
    m.add_outputs(out_dir, &[written]);
    m.write(out_dir)?;
    Ok(format!(
        "strategy: {}\noffsets: {:?}\ntuning MAE before (half): {mae_before:.4}\ntuning MAE after: {mae_after:.4}\n",
        strategy.label(),
        map.offsets()
    ))
}

/// Re-renders a finished run from its `windows.csv`.
pub fn cmd_report(run_dir: &Path, format: ReportFormat) -> CliResult<String> {
    let path = run_dir.join("windows.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let aggs = aggregates_from_windows_csv(&text).map_err(CliError::data)?;
    let windowed = match Manifest::read(&run_dir.join(MANIFEST_FILE)) {
        Ok(m) => m.config.pointer("/plan/kind").and_then(|k| k.as_str()) != Some("holdout"),
        Err(_) => aggs.iter().any(|a| a.n_ok + a.n_failed > 1),
    };
    render_aggregates(&aggs, windowed, format).map_err(CliError::compute)
}

pub fn cmd_synth(params: &SynthParams, out: &Path, out_dir: &Path) -> CliResult<String> {
    let data = generate(params).map_err(CliError::usage)?;
    let mut buf = Vec::new();
    data.dataset.write_csv(&mut buf).map_err(CliError::data)?;
    let written = write_file(out, std::str::from_utf8(&buf).expect("csv is utf-8"))?;
    ensure_dir(out_dir)?;
    let mut m = Manifest::new("synth", serde_json::to_value(params).map_err(|e| CliError::Model(e.to_string()))?);
    m.add_outputs(out_dir, &[written]);
    m.write(out_dir)?;
    let bayes = data.model.bayes_mae(&data.dataset.features());
    Ok(format!("{}Bayes MAE: {bayes:.4}\n", histogram_text(&data.dataset)))
}
