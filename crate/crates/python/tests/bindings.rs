use pyo3::prelude::*;
use pyo3::types::PyModule;

fn with_module(code: &std::ffi::CStr) {
    Python::attach(|py| {
        let m = PyModule::new(py, "pyordinalkit").unwrap();
        pyordinalkit::pyordinalkit(&m).unwrap();
        py.import("sys")
            .unwrap()
            .getattr("modules")
            .unwrap()
            .set_item("pyordinalkit", &m)
            .unwrap();
        if let Err(e) = py.run(code, None, None) {
            e.print(py);
            panic!("python code failed: {e}");
        }
    });
}

#[test]
fn metrics_and_dice() {
    with_module(
        c"
import pyordinalkit as ok
assert ok.dice_expected_value('2d8+1d4+3') == 14.5
assert ok.mae([1, 1, 2], [1, 1, 4]) == 2 / 3
assert ok.macro_mae([1, 1, 2], [1, 1, 4]) == 1.0
assert ok.accuracy_at_k([1, 2], [2, 4], 1) == 0.5
assert ok.somers_d([1, 2, 3], [1, 2, 3]) == 1.0
assert 'graph' in ok.rounding_strategies() and 'coral' in ok.model_names()
try:
    ok.dice_expected_value('2d')
    raise AssertionError('expected failure')
except ok.OrdinalkitError:
    pass
",
    );
}

#[test]
fn fit_predict_and_round() {
    with_module(
        c"
import json
import pyordinalkit as ok
ds, bayes = ok.Dataset.synthetic(400, seed=2)
assert len(ds) == 400 and ds.feature_names[0] == 'x1'
x, y = ds.features(), ds.levels()
ridge = ok.Model.fit({'model': 'ridge', 'lambda': 1.0}, x, y)
raw = ridge.predict(x)
assert ridge.is_regressor and isinstance(raw[0], float)
tm = ok.ThresholdMap.fit({'strategy': 'graph', 'grid': 'R1'}, raw, y)
labels = tm.apply(raw)
assert ok.mae(y, labels) <= ok.mae(y, ok.ThresholdMap.fit({'strategy': 'half'}, raw, y).apply(raw))
ordm = ok.Model.fit('{\"model\": \"ord\"}', x, y)
assert all(isinstance(v, int) for v in ordm.predict(x[:5]))
again = ok.Model.from_json(ordm.to_json())
assert again.predict(x) == ordm.predict(x)
assert json.loads(tm.to_json())['offsets']
",
    );
}

#[test]
fn evaluate_expanding() {
    with_module(
        c"
import pyordinalkit as ok
ds, _ = ok.Dataset.synthetic(600, seed=3)
windows = ds.expanding_windows(100)
assert sum(len(w) for w in windows) == len(ds)
rep = ok.evaluate(ds, [{'model': 'ridge', 'lambda': 1.0}, {'model': 'ord'}],
                  plan={'kind': 'expanding', 'min_new': 100},
                  rounding=[{'strategy': 'half'}, {'strategy': 'global', 'grid': 'R2'}], seed=1)
assert rep.n_splits == len(windows) - 1
aggs = rep.aggregates()
assert len(aggs) == 3 and aggs[0]['n_ok'] == rep.n_splits
assert rep.markdown().count('\\n') == 5
assert rep.to_dict()['splits'][0]['label'] == 'w2'
",
    );
}
