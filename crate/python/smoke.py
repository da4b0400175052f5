"""Smoke test for the klmin_py extension module.

Build first:
    cargo build --release -p klmin-py --features extension-module
then run:
    python3 python/smoke.py [path/to/libklmin_py.so]
"""

import importlib.util
import math
import pathlib
import shutil
import sys
import tempfile

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load(lib_path):
    tmp = pathlib.Path(tempfile.mkdtemp())
    target = tmp / "klmin_py.so"
    shutil.copy(lib_path, target)
    spec = importlib.util.spec_from_file_location("klmin_py", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def numpy_kl(sx, sy):
    sx, sy = np.asarray(sx), np.asarray(sy)
    m = sx.shape[0]
    _, ld_x = np.linalg.slogdet(sx)
    _, ld_y = np.linalg.slogdet(sy)
    return 0.5 * (np.trace(np.linalg.solve(sx, sy)) - (ld_y - ld_x) - m)


def main():
    lib = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "target/release/libklmin_py.so"
    k = load(lib)

    i2 = [[1.0, 0.0], [0.0, 1.0]]
    sy = [[1.0, 0.5], [0.5, 1.0]]
    kl = k.kl_gaussian(i2, sy)
    assert abs(kl - (-0.5 * math.log(0.75))) < 1e-12, kl
    assert abs(k.kl_scalar(1.0, 4.0) - 0.806853) < 1e-6
    assert abs(k.kl_diagonal([1.0, 4.0], [2.0, 8.0]) - 2 * 0.5 * (2 - math.log(2) - 1)) < 1e-12

    gap = k.kl_gap_diagonal([1.0, 1.0], sy)
    assert gap["bound"] == 0.0 and abs(gap["gap"] - kl) < 1e-12, gap
    assert abs(k.diagonal_lower_bound([1.0, 1.0], [[2.0, 0.3], [0.3, 1.0]]) - 0.153426) < 1e-6

    lower, log_det = k.cholesky([[4.0, 2.0], [2.0, 3.0]])
    assert np.allclose(lower, [[2.0, 0.0], [1.0, math.sqrt(2.0)]])
    assert abs(log_det - math.log(8.0)) < 1e-12
    assert abs(k.trace_ratio(sy, i2) - 2.0) < 1e-12

    a = k.random_spd(5, 42, 1e3)
    b = k.random_spd(5, 43, 1e3)
    assert a == k.random_spd(5, 42, 1e3)
    assert abs(np.linalg.cond(a) - 1e3) < 1e-6 * 1e3
    assert abs(k.kl_gaussian(a, b) - numpy_kl(a, b)) < 1e-9 * max(1.0, numpy_kl(a, b))
    assert k.kl_gaussian(a, a) == 0.0

    m = k.SpdMatrix(a)
    assert m.dim == 5 and m.to_list() == a
    assert abs(m.log_det() - np.linalg.slogdet(a)[1]) < 1e-10
    assert abs(k.gaussian_entropy([[1.0]]) - 1.418939) < 1e-6

    try:
        k.validate_spd([[1.0, 2.0], [2.0, 1.0]])
        raise AssertionError("expected ValueError")
    except ValueError as e:
        assert "NotPositiveDefinite" in str(e)
    try:
        k.SpdMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        raise AssertionError("expected ValueError")
    except ValueError as e:
        assert "NotSquare" in str(e)

    g = k.DensityModel.gaussian(sy)
    x = k.DensityModel.gaussian(i2)
    est = k.mc_kl(g, x, 200_000, 5)
    assert abs(est["value"] - kl) <= 4 * est["std_error"], est

    mix = k.DensityModel.matched_mixture(sy, 0.3, 0.6)
    assert mix.kind == "two-component-mixture" and mix.dim == 2
    assert np.allclose(mix.covariance(), sy)
    draws = np.array(mix.sample(50_000, 3))
    assert draws.shape == (50_000, 2)
    assert math.isfinite(mix.log_density([0.1, -0.2]))
    mix_est = k.mc_kl(mix, x, 100_000, 9)
    assert mix_est["value"] >= kl - 4 * mix_est["std_error"], mix_est

    for prop, trials in [("p3", 1000), ("p2", 1000), ("p1", 10), ("c1", 10)]:
        r = k.verify(prop, trials, 3, 1, n_samples=20_000)
        assert r["violations"] == 0 and r["trials"] == trials, r

    print("klmin_py smoke test: ok")


if __name__ == "__main__":
    main()
