//! Python bindings: datasets, models, rounding, metrics and evaluation.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use ordinalkit::data::{self, DataFormat};
use ordinalkit::evaluation::{self as ev, EvalConfig, ModelEntry, ReportFormat, SplitPlan};
use ordinalkit::metrics;
use ordinalkit::models::{self, ModelDocument, ModelSpec, Prediction};
use ordinalkit::rounding::{RoundingStrategy, ThresholdMap as CoreThresholdMap};
use ordinalkit::synth::{generate, SynthParams};
use ordinalkit::{LabelSpace, Matrix};

create_exception!(pyordinalkit, OrdinalkitError, PyException, "Raised for any ordinalkit failure.");

fn err(e: impl std::fmt::Display) -> PyErr {
    OrdinalkitError::new_err(e.to_string())
}

/// Accepts a dict (serialized through `json.dumps`) or a JSON string.
fn to_value(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = if let Ok(s) = obj.extract::<String>() {
        s
    } else {
        obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&text).map_err(err)
}

fn value_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

fn matrix(x: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&x).map_err(err)
}

fn space_for(y: &[i32], levels: Option<(i32, i32)>) -> PyResult<LabelSpace> {
    let (lo, hi) = match levels {
        Some(r) => r,
        None => (
            *y.iter().min().ok_or_else(|| err("empty labels"))?,
            *y.iter().max().expect("nonempty"),
        ),
    };
    LabelSpace::range(lo, hi).map_err(err)
}

/// Expected value of a dice expression such as `2d8+1d4+3`.
#[pyfunction]
fn dice_expected_value(text: &str) -> PyResult<f64> {
    Ok(data::parse_dice_expression(text).map_err(err)?.expected_value())
}

#[pyfunction]
fn mae(y: Vec<i32>, pred: Vec<i32>) -> PyResult<f64> {
    metrics::mae(&y, &pred).map_err(err)
}

#[pyfunction]
fn rmse(y: Vec<i32>, pred: Vec<i32>) -> PyResult<f64> {
    metrics::rmse(&y, &pred).map_err(err)
}

#[pyfunction]
fn macro_mae(y: Vec<i32>, pred: Vec<i32>) -> PyResult<f64> {
    metrics::macro_mae(&y, &pred).map_err(err)
}

#[pyfunction]
fn macro_rmse(y: Vec<i32>, pred: Vec<i32>) -> PyResult<f64> {
    metrics::macro_rmse(&y, &pred).map_err(err)
}

#[pyfunction]
fn accuracy(y: Vec<i32>, pred: Vec<i32>) -> PyResult<f64> {
    metrics::accuracy(&y, &pred).map_err(err)
}

#[pyfunction]
fn accuracy_at_k(y: Vec<i32>, pred: Vec<i32>, k: u32) -> PyResult<f64> {
    metrics::accuracy_at_k(&y, &pred, k).map_err(err)
}

/// Somers' D of labels given predictions.
#[pyfunction]
fn somers_d(pred: Vec<i32>, y: Vec<i32>) -> PyResult<f64> {
    metrics::somers_d(&pred, &y).map_err(err)
}

#[pyfunction]
fn model_names() -> Vec<&'static str> {
    models::MODEL_NAMES.to_vec()
}

#[pyfunction]
fn rounding_strategies() -> Vec<&'static str> {
    RoundingStrategy::NAMES.to_vec()
}

#[pyclass(name = "Dataset", module = "pyordinalkit", frozen)]
struct PyDataset {
    inner: data::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Loads CSV or JSON stat blocks; the format defaults to the extension.
    #[staticmethod]
    #[pyo3(signature = (path, format=None))]
    fn load(path: PathBuf, format: Option<&str>) -> PyResult<Self> {
        let format = match format {
            Some(f) => f.parse().map_err(err)?,
            None => DataFormat::from_path(&path).ok_or_else(|| err("cannot infer format; pass format="))?,
        };
        Ok(Self {
            inner: data::load_dataset(&path, format).map_err(err)?,
        })
    }

    /// Seeded synthetic data; returns `(dataset, bayes_mae)`.
    #[staticmethod]
    #[pyo3(signature = (n, seed=0, d=5, k=6, spacing=2.0, sigma=0.5))]
    fn synthetic(n: usize, seed: u64, d: usize, k: usize, spacing: f64, sigma: f64) -> PyResult<(Self, f64)> {
        let mut p = SynthParams::new(n, seed);
        p.d = d;
        p.k = k;
        p.spacing = spacing;
        p.sigma = sigma;
        let s = generate(&p).map_err(err)?;
        let bayes = s.model.bayes_mae(&s.dataset.features());
        Ok((Self { inner: s.dataset }, bayes))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        self.inner.features().iter_rows().map(<[f64]>::to_vec).collect()
    }

    fn levels(&self) -> Vec<i32> {
        self.inner.levels()
    }

    fn dates(&self) -> Vec<String> {
        self.inner.dates().iter().map(ToString::to_string).collect()
    }

    fn subset(&self, idx: Vec<usize>) -> PyResult<Self> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.inner.len()) {
            return Err(err(format!("row {bad} out of range")));
        }
        Ok(Self {
            inner: self.inner.subset(&idx),
        })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        let f = std::fs::File::create(&path).map_err(err)?;
        self.inner.write_csv(f).map_err(err)
    }

    /// Row indices of each expanding window.
    #[pyo3(signature = (min_new=100))]
    fn expanding_windows(&self, min_new: usize) -> PyResult<Vec<Vec<usize>>> {
        let ws = ev::expanding_windows(&self.inner, min_new, None).map_err(err)?;
        Ok(ws.windows.into_iter().map(|w| w.rows).collect())
    }

    /// `(train, test)` indices of the chronological hold-out.
    #[pyo3(signature = (test_fraction=0.2))]
    fn holdout(&self, test_fraction: f64) -> PyResult<(Vec<usize>, Vec<usize>)> {
        ev::chronological_split(&self.inner, Some(test_fraction), None).map_err(err)
    }
}

#[pyclass(name = "Model", module = "pyordinalkit", frozen)]
struct PyModel {
    doc: ModelDocument,
}

#[pymethods]
impl PyModel {
    /// Fits `spec` (e.g. `{"model": "ridge", "lambda": 1.0}`) on features as given.
    #[staticmethod]
    #[pyo3(signature = (spec, x, y, seed=0, feature_names=None, levels=None))]
    fn fit(
        spec: &Bound<'_, PyAny>,
        x: Vec<Vec<f64>>,
        y: Vec<i32>,
        seed: u64,
        feature_names: Option<Vec<String>>,
        levels: Option<(i32, i32)>,
    ) -> PyResult<Self> {
        let spec: ModelSpec = serde_json::from_value(to_value(spec)?).map_err(err)?;
        let x = matrix(x)?;
        let names = feature_names.unwrap_or_else(|| (1..=x.cols()).map(|i| format!("x{i}")).collect());
        let space = space_for(&y, levels)?;
        let model = spec.fit(&x, &names, &y, &space, seed).map_err(err)?;
        Ok(Self {
            doc: ModelDocument::new(spec, model),
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            doc: ModelDocument::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.doc.to_json().map_err(err)
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.doc.spec.name()
    }

    #[getter]
    fn is_regressor(&self) -> bool {
        self.doc.spec.is_regressor()
    }

    /// Floats for regressors, integer levels for ordinal models.
    fn predict<'py>(&self, py: Python<'py>, x: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyList>> {
        match self.doc.model.predict(&matrix(x)?).map_err(err)? {
            Prediction::Raw(v) => PyList::new(py, v),
            Prediction::Labels(v) => PyList::new(py, v),
        }
    }

    fn __repr__(&self) -> String {
        format!("Model({})", self.doc.spec.label())
    }
}

#[pyclass(name = "ThresholdMap", module = "pyordinalkit", frozen)]
struct PyThresholdMap {
    inner: CoreThresholdMap,
}

#[pymethods]
impl PyThresholdMap {
    /// Fits a rounding strategy such as `{"strategy": "graph", "grid": "R1"}`.
    #[staticmethod]
    #[pyo3(signature = (strategy, raw, y, seed=0, levels=None))]
    fn fit(
        strategy: &Bound<'_, PyAny>,
        raw: Vec<f64>,
        y: Vec<i32>,
        seed: u64,
        levels: Option<(i32, i32)>,
    ) -> PyResult<Self> {
        let strategy: RoundingStrategy = serde_json::from_value(to_value(strategy)?).map_err(err)?;
        let space = space_for(&y, levels)?;
        Ok(Self {
            inner: strategy.fit(&raw, &y, &space, seed).map_err(err)?,
        })
    }

    #[getter]
    fn offsets(&self) -> Vec<f64> {
        self.inner.offsets().to_vec()
    }

    #[getter]
    fn min_level(&self) -> i32 {
        self.inner.min_level()
    }

    fn apply(&self, raw: Vec<f64>) -> Vec<i32> {
        self.inner.apply_all(&raw)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }
}

#[pyclass(name = "EvalReport", module = "pyordinalkit", frozen)]
struct PyEvalReport {
    inner: ev::EvalReport,
}

#[pymethods]
impl PyEvalReport {
    fn markdown(&self) -> PyResult<String> {
        ev::emit_report(&self.inner, ReportFormat::Markdown).map_err(err)
    }

    fn csv(&self) -> PyResult<String> {
        ev::emit_report(&self.inner, ReportFormat::Csv).map_err(err)
    }

    fn windows_csv(&self) -> PyResult<String> {
        ev::windows_csv(&self.inner).map_err(err)
    }

    fn write(&self, dir: PathBuf) -> PyResult<Vec<PathBuf>> {
        ev::write_report(&self.inner, &dir).map_err(err)
    }

    #[getter]
    fn n_splits(&self) -> usize {
        self.inner.splits.len()
    }

    /// One dict per (model, rounding) with `mean` and `std` keyed by metric.
    fn aggregates<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        ev::aggregates(&self.inner)
            .into_iter()
            .map(|a| {
                let d = PyDict::new(py);
                d.set_item("model", &a.model)?;
                d.set_item("rounding", &a.rounding)?;
                d.set_item("n_ok", a.n_ok)?;
                d.set_item("n_failed", a.n_failed)?;
                let mean = PyDict::new(py);
                let std = PyDict::new(py);
                for (j, m) in ev::METRICS.iter().enumerate() {
                    mean.set_item(m, a.mean[j])?;
                    std.set_item(m, a.std[j])?;
                }
                d.set_item("mean", mean)?;
                d.set_item("std", std)?;
                Ok(d)
            })
            .collect()
    }

    /// The full report as Python objects (undefined metrics become `None`).
    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        value_to_py(py, &serde_json::to_value(&self.inner).map_err(err)?)
    }
}

/// Runs a split plan. `models` and `rounding` are lists of dicts; `plan`
/// defaults to a chronological hold-out.
#[pyfunction]
#[pyo3(signature = (dataset, models, plan=None, rounding=None, seed=0))]
fn evaluate(
    py: Python<'_>,
    dataset: &PyDataset,
    models: Vec<Bound<'_, PyAny>>,
    plan: Option<&Bound<'_, PyAny>>,
    rounding: Option<Vec<Bound<'_, PyAny>>>,
    seed: u64,
) -> PyResult<PyEvalReport> {
    let entries = models
        .iter()
        .map(|m| ModelEntry::from_value(&to_value(m)?).map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    let plan: SplitPlan = match plan {
        Some(p) => serde_json::from_value(to_value(p)?).map_err(err)?,
        None => SplitPlan::default(),
    };
    let mut cfg = EvalConfig::new(entries, plan, seed);
    if let Some(r) = rounding {
        cfg.rounding = r
            .iter()
            .map(|s| serde_json::from_value(to_value(s)?).map_err(err))
            .collect::<PyResult<Vec<_>>>()?;
    }
    let ds = &dataset.inner;
    let inner = py.detach(|| ev::run_evaluation(ds, &cfg)).map_err(err)?;
    Ok(PyEvalReport { inner })
}

#[pymodule]
pub fn pyordinalkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("OrdinalkitError", m.py().get_type::<OrdinalkitError>())?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyThresholdMap>()?;
    m.add_class::<PyEvalReport>()?;
    m.add_function(wrap_pyfunction!(dice_expected_value, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(macro_mae, m)?)?;
    m.add_function(wrap_pyfunction!(macro_rmse, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(somers_d, m)?)?;
    m.add_function(wrap_pyfunction!(model_names, m)?)?;
    m.add_function(wrap_pyfunction!(rounding_strategies, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
