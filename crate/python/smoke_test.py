"""Build the pyordinalkit extension and exercise it from Python.

Usage: python3 python/smoke_test.py [path/to/libpyordinalkit.so]

Without an argument the module is built with
`cargo build --release -p ordinalkit-python --features extension-module`.
"""

import importlib.util
import os
import pathlib
import shutil
import subprocess
import sys
import sysconfig
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "ordinalkit-python", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    target = pathlib.Path(os.environ.get("CARGO_TARGET_DIR", ROOT / "target")) / "release"
    for name in ("libpyordinalkit.so", "libpyordinalkit.dylib", "pyordinalkit.dll"):
        if (target / name).exists():
            return target / name
    sys.exit(f"built library not found in {target}")


def load(lib):
    tmp = pathlib.Path(tempfile.mkdtemp())
    dest = tmp / ("pyordinalkit" + sysconfig.get_config_var("EXT_SUFFIX"))
    shutil.copy(lib, dest)
    spec = importlib.util.spec_from_file_location("pyordinalkit", dest)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    lib = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else build()
    ok = load(lib)

    assert ok.dice_expected_value("2d8+1d4+3") == 14.5

    ds, bayes = ok.Dataset.synthetic(1500, seed=17)
    x, y = ds.features(), ds.levels()
    train, test = ds.holdout(0.3)
    xt, yt = [x[i] for i in train], [y[i] for i in train]
    xv, yv = [x[i] for i in test], [y[i] for i in test]

    ridge = ok.Model.fit({"model": "ridge", "lambda": 1.0}, xt, yt)
    tm = ok.ThresholdMap.fit({"strategy": "graph", "grid": "R1"}, ridge.predict(xt), yt)
    ridge_mae = ok.mae(yv, tm.apply(ridge.predict(xv)))

    ordm = ok.Model.fit({"model": "ord"}, xt, yt)
    ord_mae = ok.mae(yv, ordm.predict(xv))
    print(f"bayes MAE {bayes:.3f}  ridge+graph {ridge_mae:.3f}  ord {ord_mae:.3f}")
    assert ord_mae < bayes + 0.15

    report = ok.evaluate(
        ds,
        [{"model": "ridge", "lambda": [0.1, 10.0], "label": "ridge"}, {"model": "all_threshold"}],
        plan={"kind": "expanding", "min_new": 200},
        rounding=[{"strategy": "half"}, {"strategy": "per_level", "grid": "R2"}],
        seed=5,
    )
    print(report.markdown())
    assert all(a["n_failed"] == 0 for a in report.aggregates())
    print("smoke test passed")


if __name__ == "__main__":
    main()
