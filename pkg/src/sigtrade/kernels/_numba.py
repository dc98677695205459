"""numba-compiled kernels; same signatures and semantics as ``_numpy``."""

from __future__ import annotations

import numpy as np
from numba import njit

PROFIT_TAKER = 0
STOP_LOSS = 1
EXPIRY = 2
TRUNCATED = 3


@njit(cache=True)
def _one_trade(o, h, l, c, e, d, mhp, pt, sl, stop_first):
    n = o.shape[0]
    px = o[e]
    last = e + mhp
    stop_at = last if last <= n - 1 else n - 1
    for k in range(e, stop_at + 1):
        if d > 0:
            hit_pt = (h[k] - px) / px >= pt
            hit_sl = (l[k] - px) / px <= sl
        else:
            hit_pt = (px - l[k]) / px >= pt
            hit_sl = (h[k] - px) / px >= -sl
        if hit_pt and hit_sl:
            if stop_first:
                return sl, k, STOP_LOSS
            return pt, k, PROFIT_TAKER
        if hit_sl:
            return sl, k, STOP_LOSS
        if hit_pt:
            return pt, k, PROFIT_TAKER
    r = (c[stop_at] - px) / px
    if d < 0:
        r = -r
    if stop_at == last:
        return r, stop_at, EXPIRY
    return r, stop_at, TRUNCATED


@njit(cache=True)
def trade_batch(o, h, l, c, entry, direction, mhp, pt, sl, stop_first):
    n_sig = entry.shape[0]
    ret = np.empty(n_sig, dtype=np.float64)
    exit_idx = np.empty(n_sig, dtype=np.int64)
    reason = np.empty(n_sig, dtype=np.int64)
    for i in range(n_sig):
        r, x, why = _one_trade(o, h, l, c, entry[i], direction[i], mhp, pt, sl, stop_first)
        ret[i] = r
        exit_idx[i] = x
        reason[i] = why
    return ret, exit_idx, reason


@njit(cache=True)
def stream_single(o, h, l, c, entry, direction, mhp, pt, sl, stop_first):
    n_sig = entry.shape[0]
    taken = np.zeros(n_sig, dtype=np.bool_)
    ret = np.zeros(n_sig, dtype=np.float64)
    exit_idx = np.full(n_sig, -1, dtype=np.int64)
    reason = np.full(n_sig, -1, dtype=np.int64)
    last_exit = -1
    for i in range(n_sig):
        if entry[i] <= last_exit:
            continue
        r, x, why = _one_trade(o, h, l, c, entry[i], direction[i], mhp, pt, sl, stop_first)
        taken[i] = True
        ret[i] = r
        exit_idx[i] = x
        reason[i] = why
        last_exit = x
    return taken, ret, exit_idx, reason


@njit(cache=True)
def daily_pnl(n_days, exit_idx, ret):
    out = np.zeros(n_days, dtype=np.float64)
    for i in range(exit_idx.shape[0]):
        out[exit_idx[i]] += ret[i] * 100.0
    return out


@njit(cache=True)
def max_drawdown(cum):
    peak = -np.inf
    worst = 0.0
    for i in range(cum.shape[0]):
        if cum[i] > peak:
            peak = cum[i]
        dd = peak - cum[i]
        if dd > worst:
            worst = dd
    return worst


@njit(cache=True)
def _sharpe_and_mdd(daily, periods):
    n = daily.shape[0]
    total = 0.0
    peak = -np.inf
    worst = 0.0
    lo = np.inf
    hi = -np.inf
    for i in range(n):
        total += daily[i]
        lo = min(lo, daily[i])
        hi = max(hi, daily[i])
        if total > peak:
            peak = total
        if peak - total > worst:
            worst = peak - total
    if n < 2 or lo == hi:
        return total, np.nan, worst
    mean = total / n
    ss = 0.0
    for i in range(n):
        ss += (daily[i] - mean) ** 2
    sd = np.sqrt(ss / (n - 1))
    if sd == 0.0:
        return total, np.nan, worst
    return total, mean / sd * np.sqrt(periods), worst


@njit(cache=True)
def ann_sharpe(daily, periods):
    return _sharpe_and_mdd(daily, periods)[1]


@njit(cache=True)
def grid_metrics(o, h, l, c, entry, direction, mhps, pts, sls, stop_first, exclude_truncated, periods):
    n_days = o.shape[0]
    n_pts = mhps.shape[0] * pts.shape[0] * sls.shape[0]
    cum = np.empty(n_pts)
    shp = np.empty(n_pts)
    mdd = np.empty(n_pts)
    ntr = np.empty(n_pts, dtype=np.int64)
    win = np.empty(n_pts)
    daily = np.zeros(n_days)
    n_sig = entry.shape[0]
    g = 0
    for a in range(mhps.shape[0]):
        mhp = mhps[a]
        for b in range(pts.shape[0]):
            pt = pts[b]
            for s in range(sls.shape[0]):
                sl = sls[s]
                daily[:] = 0.0
                last_exit = -1
                count = 0
                wins = 0
                for i in range(n_sig):
                    if entry[i] <= last_exit:
                        continue
                    r, x, why = _one_trade(o, h, l, c, entry[i], direction[i], mhp, pt, sl, stop_first)
                    last_exit = x
                    if exclude_truncated and why == TRUNCATED:
                        continue
                    daily[x] += r * 100.0
                    count += 1
                    if r > 0:
                        wins += 1
                total, sr, dd = _sharpe_and_mdd(daily, periods)
                cum[g] = total
                shp[g] = sr
                mdd[g] = dd
                ntr[g] = count
                win[g] = 100.0 * wins / count if count > 0 else np.nan
                g += 1
    return cum, shp, mdd, ntr, win
