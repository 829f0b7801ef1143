//! Aggregation and rendering of evaluation reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::runner::{CellOutcome, EvalReport};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;

/// Metric columns shared by every table, in output order.
pub const METRICS: [&str; 7] = [
    "macro_mae",
    "macro_rmse",
    "somers_d",
    "accuracy",
    "accuracy_at_1",
    "mae",
    "rmse",
];

fn metric_values(m: &MetricReport) -> [f64; 7] {
    [
        m.macro_mae,
        m.macro_rmse,
        m.somers_d,
        m.accuracy,
        m.accuracy_at_1,
        m.mae,
        m.rmse,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::invalid(format!("unknown report format `{s}` (csv, markdown)"))),
        }
    }
}

/// Mean and sample standard deviation (n − 1) per metric over successful splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub model: String,
    pub rounding: String,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// NaN entries (undefined Somers' D) are skipped; all-NaN gives NaN.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() < 2 {
        0.0
    } else {
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

fn aggregate_values(model: &str, rounding: &str, per_split: &[Option<[f64; 7]>]) -> Aggregate {
    let ok: Vec<&[f64; 7]> = per_split.iter().flatten().collect();
    let (mean, std) = (0..METRICS.len())
        .map(|j| mean_std(&ok.iter().map(|v| v[j]).collect::<Vec<_>>()))
        .unzip();
    Aggregate {
        model: model.to_string(),
        rounding: rounding.to_string(),
        n_ok: ok.len(),
        n_failed: per_split.len() - ok.len(),
        mean,
        std,
    }
}

pub fn aggregates(report: &EvalReport) -> Vec<Aggregate> {
    report
        .rows
        .iter()
        .map(|(m, r)| {
            let vals: Vec<Option<[f64; 7]>> = report
                .cells_for(m, r)
                .map(|c| c.metrics().map(metric_values))
                .collect();
            aggregate_values(m, r, &vals)
        })
        .collect()
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const WINDOW_HEAD: [&str; 7] = ["split", "model", "rounding", "status", "n_train", "n_test", "spec"];

/// One row per evaluated cell, full precision.
pub fn windows_csv(report: &EvalReport) -> Result<String> {
    let mut w = csv_writer();
    let mut head: Vec<&str> = WINDOW_HEAD.to_vec();
    head.extend(METRICS);
    head.push("error");
    w.write_record(&head)?;
    for c in &report.cells {
        let spec = match &c.spec {
            Some(s) => s.label(),
            None => String::new(),
        };
        let mut rec = vec![
            c.split.clone(),
            c.model.clone(),
            c.rounding.clone(),
            String::new(),
            c.n_train.to_string(),
            c.n_test.to_string(),
            spec,
        ];
        match &c.outcome {
            CellOutcome::Ok { metrics, .. } => {
                rec[3] = "ok".into();
                rec.extend(metric_values(metrics).iter().map(|v| v.to_string()));
                rec.push(String::new());
            }
            CellOutcome::Failed { error } => {
                rec[3] = "failed".into();
                rec.extend(std::iter::repeat_n(String::new(), METRICS.len()));
                rec.push(error.clone());
            }
        }
        w.write_record(&rec)?;
    }
    finish(w)
}

/// Recomputes aggregates from a `windows.csv` document.
pub fn aggregates_from_windows_csv(text: &str) -> Result<Vec<Aggregate>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut keys: Vec<(String, String)> = Vec::new();
    let mut vals: Vec<Vec<Option<[f64; 7]>>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let key = (rec[1].to_string(), rec[2].to_string());
        let pos = match keys.iter().position(|k| *k == key) {
            Some(p) => p,
            None => {
                keys.push(key);
                vals.push(Vec::new());
                keys.len() - 1
            }
        };
        let v = if &rec[3] == "ok" {
            let mut out = [0.0; 7];
            for (j, o) in out.iter_mut().enumerate() {
                let field = &rec[WINDOW_HEAD.len() + j];
                *o = field
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad metric value `{field}`")))?;
            }
            Some(out)
        } else {
            None
        };
        vals[pos].push(v);
    }
    Ok(keys
        .iter()
        .zip(&vals)
        .map(|((m, r), v)| aggregate_values(m, r, v))
        .collect())
}

fn summary_csv(aggs: &[Aggregate], windowed: bool) -> Result<String> {
    let mut w = csv_writer();
    let mut head = vec!["model".to_string(), "rounding".into(), "n_ok".into(), "n_failed".into()];
    for m in METRICS {
        head.push(m.to_string());
        if windowed {
            head.push(format!("{m}_std"));
        }
    }
    w.write_record(&head)?;
    for a in aggs {
        let mut rec = vec![a.model.clone(), a.rounding.clone(), a.n_ok.to_string(), a.n_failed.to_string()];
        for (m, s) in a.mean.iter().zip(&a.std) {
            rec.push(m.to_string());
            if windowed {
                rec.push(s.to_string());
            }
        }
        w.write_record(&rec)?;
    }
    finish(w)
}

fn fmt2(v: f64) -> String {
    if v.is_nan() {
        "n/a".into()
    } else {
        format!("{v:.2}")
    }
}

fn markdown(aggs: &[Aggregate], windowed: bool) -> String {
    let mut s = String::from("| Model | Rounding | MAE^M | RMSE^M | Somers' D | Acc | Acc@1 |\n");
    s.push_str("|---|---|---|---|---|---|---|\n");
    for a in aggs {
        let _ = write!(s, "| {} | {} |", a.model, a.rounding);
        for j in 0..5 {
            let cell = if a.n_ok == 0 {
                "failed".to_string()
            } else if windowed {
                format!("{} ± {}", fmt2(a.mean[j]), fmt2(a.std[j]))
            } else {
                fmt2(a.mean[j])
            };
            let _ = write!(s, " {cell} |");
        }
        if a.n_failed > 0 && a.n_ok > 0 {
            let _ = write!(s, " ({} failed)", a.n_failed);
        }
        s.push('\n');
    }
    s
}

/// Summary table: one row per (model, rounding); `± std` columns when the plan
/// has several splits.
pub fn emit_report(report: &EvalReport, format: ReportFormat) -> Result<String> {
    render_aggregates(&aggregates(report), report.is_windowed(), format)
}

pub fn render_aggregates(aggs: &[Aggregate], windowed: bool, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Csv => summary_csv(aggs, windowed),
        ReportFormat::Markdown => Ok(markdown(aggs, windowed)),
    }
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '-' })
        .collect::<String>()
        .split('-')
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join("-")
}

/// `(file name, csv)` for every successful cell's confusion matrix.
pub fn confusion_files(report: &EvalReport) -> Vec<(String, String)> {
    report
        .cells
        .iter()
        .filter_map(|c| {
            let m = c.metrics()?;
            let model = if c.rounding == super::runner::NO_ROUNDING {
                slug(&c.model)
            } else {
                format!("{}-{}", slug(&c.model), slug(&c.rounding))
            };
            Some((format!("{model}_{}.csv", c.split), m.confusion.to_csv()))
        })
        .collect()
}

/// Writes `windows.csv`, `summary.csv`, `report.md` and `confusion/*.csv`
/// under `dir`, returning the paths written.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let write = |p: PathBuf, text: &str| -> Result<PathBuf> {
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = vec![
        write(dir.join("windows.csv"), &windows_csv(report)?)?,
        write(dir.join("summary.csv"), &emit_report(report, ReportFormat::Csv)?)?,
        write(dir.join("report.md"), &emit_report(report, ReportFormat::Markdown)?)?,
    ];
    let cdir = dir.join("confusion");
    std::fs::create_dir_all(&cdir).map_err(|e| Error::io(&cdir, e))?;
    for (name, text) in confusion_files(report) {
        out.push(write(cdir.join(name), &text)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::runner::{run_evaluation, EvalConfig, ModelEntry};
    use crate::evaluation::split::{tests::dated, SplitPlan};
    use crate::models::ModelSpec;

    fn report(models: Vec<ModelEntry>) -> EvalReport {
        let plan = SplitPlan::Expanding {
            min_new: 40,
            first_cutoff: None,
        };
        run_evaluation(&dated(&[80, 45, 50, 60]), &EvalConfig::new(models, plan, 4)).unwrap()
    }

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, f64::NAN]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert!(mean_std(&[f64::NAN]).0.is_nan());
    }

    #[test]
    fn means_match_per_window_values() {
        let r = report(vec![
            ModelEntry::single(ModelSpec::Ridge { lambda: 1.0 }),
            ModelEntry::single(ModelSpec::Ord { l2: 0.0 }),
        ]);
        for a in aggregates(&r) {
            let direct: Vec<f64> = r
                .cells_for(&a.model, &a.rounding)
                .map(|c| c.metrics().unwrap().macro_mae)
                .collect();
            let mean = direct.iter().sum::<f64>() / direct.len() as f64;
            assert!((a.mean[0] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_reloads_to_same_aggregates() {
        let r = report(vec![ModelEntry::single(ModelSpec::Ridge { lambda: 1.0 })]);
        let back = aggregates_from_windows_csv(&windows_csv(&r).unwrap()).unwrap();
        let direct = aggregates(&r);
        assert_eq!(back.len(), direct.len());
        for (a, b) in back.iter().zip(&direct) {
            assert_eq!((a.n_ok, a.n_failed), (b.n_ok, b.n_failed));
            for (x, y) in a.mean.iter().zip(&b.mean).chain(a.std.iter().zip(&b.std)) {
                assert!(x == y || (x.is_nan() && y.is_nan()));
            }
        }
    }

    #[test]
    fn empty_model_list_gives_header_only() {
        let r = report(vec![]);
        let csv = emit_report(&r, ReportFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 1);
        let md = emit_report(&r, ReportFormat::Markdown).unwrap();
        assert_eq!(md.lines().count(), 2);
    }

    #[test]
    fn markdown_rounds_to_two_places() {
        let r = report(vec![ModelEntry::single(ModelSpec::Ridge { lambda: 1.0 })]);
        let md = emit_report(&r, ReportFormat::Markdown).unwrap();
        let row = md.lines().nth(2).unwrap();
        assert!(row.contains(" ± "));
        for cell in row.split('|').skip(3).filter(|c| !c.trim().is_empty()) {
            for part in cell.trim().split(" ± ") {
                if part != "n/a" {
                    assert_eq!(part.split('.').nth(1).map(str::len), Some(2), "{part}");
                }
            }
        }
    }

    #[test]
    fn writes_confusion_files() {
        let r = report(vec![ModelEntry::single(ModelSpec::Ord { l2: 0.0 })]);
        let dir = tempfile::tempdir().unwrap();
        let paths = write_report(&r, dir.path()).unwrap();
        assert!(paths.iter().any(|p| p.ends_with("confusion/ord-l2-0.0_w2.csv")), "{paths:?}");
        assert_eq!(paths.len(), 3 + r.splits.len());
    }
}
