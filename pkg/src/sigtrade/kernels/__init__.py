"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once, at import time. Set ``SIGTRADE_DISABLE_NUMBA=1``
to force the numpy path; it is also used automatically when numba cannot be
imported. Both backends produce identical trade outcomes; aggregated floating
metrics may differ in the last few ulps because summation order differs.
"""

from __future__ import annotations

import os

import numpy as np

from . import _numpy
from ._numpy import EXPIRY, PROFIT_TAKER, STOP_LOSS, TRUNCATED

_DISABLED = os.environ.get("SIGTRADE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("disabled by SIGTRADE_DISABLE_NUMBA")
    from . import _numba
except ImportError:
    _numba = None

BACKEND = "numba" if _numba is not None else "numpy"
_impl = _numba if _numba is not None else _numpy

REASON_NAMES = {
    PROFIT_TAKER: "profit_taker",
    STOP_LOSS: "stop_loss",
    EXPIRY: "expiry",
    TRUNCATED: "truncated",
}


def backend_module(name: str | None = None):
    """Return the kernel module for ``name`` (``"numba"``/``"numpy"``), or the active one."""
    if name is None:
        return _impl
    if name == "numpy":
        return _numpy
    if name == "numba":
        if _numba is None:
            raise RuntimeError("numba backend unavailable")
        return _numba
    raise ValueError(f"unknown backend {name!r}")


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def trade_batch(o, h, l, c, entry, direction, mhp, pt, sl, stop_first=True):
    return _impl.trade_batch(_f64(o), _f64(h), _f64(l), _f64(c), _i64(entry), _i64(direction),
                             int(mhp), float(pt), float(sl), bool(stop_first))


def stream_single(o, h, l, c, entry, direction, mhp, pt, sl, stop_first=True):
    return _impl.stream_single(_f64(o), _f64(h), _f64(l), _f64(c), _i64(entry), _i64(direction),
                               int(mhp), float(pt), float(sl), bool(stop_first))


def daily_pnl(n_days, exit_idx, ret):
    return _impl.daily_pnl(int(n_days), _i64(exit_idx), _f64(ret))


def max_drawdown(cum):
    return float(_impl.max_drawdown(_f64(cum)))


def grid_metrics(o, h, l, c, entry, direction, mhps, pts, sls, stop_first=True,
                 exclude_truncated=True, periods=252):
    return _impl.grid_metrics(_f64(o), _f64(h), _f64(l), _f64(c), _i64(entry), _i64(direction),
                              _i64(mhps), _f64(pts), _f64(sls), bool(stop_first),
                              bool(exclude_truncated), float(periods))
