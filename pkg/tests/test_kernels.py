import os
import subprocess
import sys

import numpy as np
import pytest

from sigtrade import kernels
from sigtrade.kernels import backend_module

from conftest import random_ohlc

BACKENDS = ["numpy"] + (["numba"] if kernels._numba is not None else [])
needs_numba = pytest.mark.skipif(len(BACKENDS) < 2, reason="numba unavailable")


def _case(rng, n=300, n_sig=120):
    s = random_ohlc(rng, n)
    entry = np.sort(rng.choice(n, n_sig, replace=False)).astype(np.int64)
    dirs = rng.choice([-1, 1], n_sig).astype(np.int64)
    return s, entry, dirs


@needs_numba
@pytest.mark.parametrize("stop_first", [True, False])
def test_trade_paths_agree_across_backends(rng, stop_first):
    s, entry, dirs = _case(rng)
    a, b = backend_module("numpy"), backend_module("numba")
    for mhp, pt, sl in [(1, 0.005, -0.005), (5, 0.01, -0.02), (10, 0.03, -0.04)]:
        args = (s.open, s.high, s.low, s.close, entry, dirs, mhp, pt, sl, stop_first)
        for x, y in zip(a.trade_batch(*args), b.trade_batch(*args)):
            np.testing.assert_array_equal(x, y)
        sa, sb = a.stream_single(*args), b.stream_single(*args)
        np.testing.assert_array_equal(sa[0], sb[0])
        for x, y in zip(sa[1:], sb[1:]):
            np.testing.assert_array_equal(x[sa[0]], y[sb[0]])


@needs_numba
@pytest.mark.parametrize("exclude_truncated", [True, False])
def test_grid_metrics_agree_across_backends(rng, exclude_truncated):
    s, entry, dirs = _case(rng, 250, 90)
    mhps = np.array([1, 4, 10], dtype=np.int64)
    pts = np.array([0.004, 0.01, 0.03])
    sls = np.array([-0.03, -0.006])
    args = (s.open, s.high, s.low, s.close, entry, dirs, mhps, pts, sls, True, exclude_truncated, 252)
    ra = backend_module("numpy").grid_metrics(*args)
    rb = backend_module("numba").grid_metrics(*args)
    np.testing.assert_array_equal(ra[3], rb[3])
    for x, y in zip(ra[:3] + ra[4:], rb[:3] + rb[4:]):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-10, equal_nan=True)


def test_max_drawdown_edge_cases():
    for name in BACKENDS:
        m = backend_module(name)
        assert m.max_drawdown(np.array([0.0, 10.0, 4.0, 12.0])) == 6.0
        assert m.max_drawdown(np.array([1.0, 2.0, 3.0])) == 0.0
        assert m.max_drawdown(np.array([-1.0, -3.0])) == 2.0


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, SIGTRADE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "import sigtrade.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_backend_module_rejects_unknown_name():
    with pytest.raises(ValueError):
        backend_module("cuda")
