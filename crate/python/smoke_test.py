"""Smoke test for the Python bindings.

Build first with `cargo build -p ktsvd-python --release` (or `maturin develop`
inside crates/python). When `ktsvd` is not importable, the freshly built
shared library under target/ is copied to a temporary directory and loaded.
"""

import importlib
import json
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]


def load_module():
    try:
        return importlib.import_module("ktsvd")
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libktsvd_py.so"
        if lib.exists():
            tmp = Path(tempfile.mkdtemp())
            shutil.copy(lib, tmp / "ktsvd.so")
            sys.path.insert(0, str(tmp))
            return importlib.import_module("ktsvd")
    sys.exit("ktsvd extension not found; run `cargo build -p ktsvd-python` first")


def numpy_tnn(t):
    f = np.fft.fft(t, axis=2)
    return sum(np.linalg.svd(f[:, :, k], compute_uv=False).sum() for k in range(t.shape[2]))


def main():
    kt = load_module()
    rng = np.random.default_rng(0)

    t = rng.uniform(-1, 1, (4, 3, 5))
    assert abs(kt.tnn(t.tolist()) - numpy_tnn(t)) < 1e-10
    g = np.array(kt.tnn_prox(t.tolist(), 1.0))
    assert g.shape == t.shape and numpy_tnn(g) < numpy_tnn(t)

    x = rng.normal(size=(6, 9))
    k = np.array(kt.gram_matrix(x.tolist()))
    assert np.allclose(k, x @ x.T)
    factor = kt.KernelFactor(k.tolist())
    p = rng.normal(size=(6, 6))
    l21 = np.linalg.norm(x.T @ p, axis=0).sum()
    assert abs(factor.h_value(p.tolist()) - l21) < 1e-9

    assert kt.acc([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    assert kt.nmi([0, 0, 1, 1], [0, 1, 0, 1]) == 0.0
    assert kt.pairwise_prf([0, 0, 1, 1], [0, 0, 0, 0])[1] == 1.0

    views, labels = kt.synth("linear_subspaces", 3, 20, [30, 40], noise=0.01, seed=0)
    kernels = [(np.array(v) @ np.array(v).T).tolist() for v in views]
    out = kt.solve(kernels)
    assert out["converged"], out["iterations"]
    affinity = kt.build_affinity(out["z"])
    pred = kt.spectral_cluster(affinity, 3, seed=0)
    summary = kt.evaluate_runs([pred], labels)
    assert summary["acc"] == 1.0 and summary["nmi"] == 1.0, summary

    with tempfile.TemporaryDirectory() as tmp:
        data = Path(tmp) / "data"
        data.mkdir()
        for v, view in enumerate(views, start=1):
            np.savetxt(data / f"view_{v}.csv", np.array(view), delimiter=",")
        np.savetxt(data / "labels.csv", np.array(labels), fmt="%d")
        report = json.loads(kt.run_pipeline(str(data), json.dumps({"runs": 3}), str(Path(tmp) / "out")))
        assert report["converged"] and report["metrics"]["acc"] == 1.0, report
        assert (Path(tmp) / "out" / "metrics.json").exists()

    print("python smoke test passed")


if __name__ == "__main__":
    main()
