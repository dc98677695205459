"""Pure-numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_numba``. The
threshold comparisons use the same floating-point expressions in both so
trade outcomes agree bit for bit.
"""

from __future__ import annotations

import numpy as np

PROFIT_TAKER = 0
STOP_LOSS = 1
EXPIRY = 2
TRUNCATED = 3


def trade_batch(o, h, l, c, entry, direction, mhp, pt, sl, stop_first):
    """Simulate independent trades, one per entry index.

    Returns ``(ret, exit_idx, reason)`` arrays aligned with ``entry``.
    """
    entry = np.asarray(entry, dtype=np.int64)
    direction = np.asarray(direction, dtype=np.int64)
    n_sig = entry.shape[0]
    ret = np.empty(n_sig, dtype=np.float64)
    exit_idx = np.empty(n_sig, dtype=np.int64)
    reason = np.empty(n_sig, dtype=np.int64)
    if n_sig == 0:
        return ret, exit_idx, reason

    n = o.shape[0]
    offsets = np.arange(mhp + 1, dtype=np.int64)
    idx = entry[:, None] + offsets[None, :]
    valid = idx <= n - 1
    idx_c = np.minimum(idx, n - 1)

    px = o[entry][:, None]
    hi = h[idx_c]
    lo = l[idx_c]
    is_long = (direction > 0)[:, None]
    up = (hi - px) / px
    dn = (lo - px) / px
    hit_pt = np.where(is_long, up >= pt, (px - lo) / px >= pt) & valid
    hit_sl = np.where(is_long, dn <= sl, up >= -sl) & valid

    big = mhp + 1
    t_pt = np.where(hit_pt.any(axis=1), hit_pt.argmax(axis=1), big)
    t_sl = np.where(hit_sl.any(axis=1), hit_sl.argmax(axis=1), big)

    last = np.minimum(entry + mhp, n - 1)
    c_ret = (c[last] - o[entry]) / o[entry]
    c_ret = np.where(direction > 0, c_ret, -c_ret)

    none = (t_pt == big) & (t_sl == big)
    sl_wins = (t_sl < t_pt) | ((t_sl == t_pt) & stop_first)

    ret[:] = np.where(sl_wins, sl, pt)
    reason[:] = np.where(sl_wins, STOP_LOSS, PROFIT_TAKER)
    exit_idx[:] = entry + np.where(sl_wins, t_sl, t_pt)

    ret[none] = c_ret[none]
    exit_idx[none] = last[none]
    reason[none] = np.where(last[none] == entry[none] + mhp, EXPIRY, TRUNCATED)
    return ret, exit_idx, reason


def stream_single(o, h, l, c, entry, direction, mhp, pt, sl, stop_first):
    """Single-position stream: a signal is taken only once the prior trade has exited.

    ``entry`` must be non-decreasing. Returns ``(taken, ret, exit_idx, reason)``;
    the last three are meaningful only where ``taken`` is true.
    """
    entry = np.asarray(entry, dtype=np.int64)
    ret, exit_idx, reason = trade_batch(o, h, l, c, entry, direction, mhp, pt, sl, stop_first)
    taken = np.zeros(entry.shape[0], dtype=np.bool_)
    i = 0
    n_sig = entry.shape[0]
    while i < n_sig:
        taken[i] = True
        i = int(np.searchsorted(entry, exit_idx[i], side="right"))
    return taken, ret, exit_idx, reason


def daily_pnl(n_days, exit_idx, ret):
    """Percent PnL per session, each trade booked on its exit session."""
    out = np.zeros(n_days, dtype=np.float64)
    np.add.at(out, np.asarray(exit_idx, dtype=np.int64), np.asarray(ret, dtype=np.float64) * 100.0)
    return out


def max_drawdown(cum):
    cum = np.asarray(cum, dtype=np.float64)
    if cum.shape[0] == 0:
        return 0.0
    return float(np.max(np.maximum.accumulate(cum) - cum))


def ann_sharpe(daily, periods):
    n = daily.shape[0]
    if n < 2 or daily.min() == daily.max():
        return np.nan
    sd = np.std(daily, ddof=1)
    if sd == 0.0:
        return np.nan
    return float(np.mean(daily) / sd * np.sqrt(periods))


def grid_metrics(o, h, l, c, entry, direction, mhps, pts, sls, stop_first, exclude_truncated, periods):
    """Evaluate every (mhp, pt, sl) point under the single-position policy.

    Grid points are laid out in C order over ``(mhps, pts, sls)``. Returns
    ``(cum_return, sharpe, mdd, n_trades, win_rate)``; returns and drawdown
    are in percent of notional.
    """
    n_days = o.shape[0]
    n_pts = len(mhps) * len(pts) * len(sls)
    cum = np.empty(n_pts)
    shp = np.empty(n_pts)
    mdd = np.empty(n_pts)
    ntr = np.empty(n_pts, dtype=np.int64)
    win = np.empty(n_pts)
    g = 0
    for mhp in mhps:
        for pt in pts:
            for sl in sls:
                taken, ret, xi, rs = stream_single(o, h, l, c, entry, direction, int(mhp), pt, sl, stop_first)
                keep = taken & (rs != TRUNCATED) if exclude_truncated else taken
                r = ret[keep]
                daily = daily_pnl(n_days, xi[keep], r)
                curve = np.cumsum(daily)
                cum[g] = curve[-1] if n_days else 0.0
                shp[g] = ann_sharpe(daily, periods)
                mdd[g] = max_drawdown(curve)
                ntr[g] = r.shape[0]
                win[g] = 100.0 * np.count_nonzero(r > 0) / r.shape[0] if r.shape[0] else np.nan
                g += 1
    return cum, shp, mdd, ntr, win
