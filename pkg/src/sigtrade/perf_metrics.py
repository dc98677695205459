"""Risk and return analytics on non-compounded daily PnL streams.

Daily returns are percent of a fixed notional; cumulative PnL is their running
sum (no reinvestment), and drawdowns are in percentage points of notional.
Undefined statistics (zero variance, empty samples) are reported as NaN.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from . import kernels

PERIODS_PER_YEAR = 252


def _values(x) -> np.ndarray:
    if isinstance(x, pd.Series):
        return x.to_numpy(dtype=np.float64)
    return np.asarray(x, dtype=np.float64)


def _constant(x: np.ndarray) -> bool:
    return x.shape[0] == 0 or x.min() == x.max()


@dataclass
class PnlSeries:
    dates: np.ndarray
    daily_return: np.ndarray
    cum_pnl: np.ndarray
    hwm: np.ndarray
    drawdown: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"daily_return": self.daily_return, "cum_pnl": self.cum_pnl, "hwm": self.hwm,
                             "drawdown": self.drawdown}, index=pd.DatetimeIndex(self.dates, name="date"))

    @property
    def final(self) -> float:
        return float(self.cum_pnl[-1]) if self.cum_pnl.shape[0] else 0.0


def cum_pnl(daily_returns, dates=None) -> PnlSeries:
    """Running sum of daily returns plus high watermark and drawdown."""
    if dates is None:
        dates = daily_returns.index.to_numpy() if isinstance(daily_returns, pd.Series) else \
            np.arange(len(daily_returns))
    dates = np.asarray(dates)
    if dates.shape[0] > 1 and not np.all(dates[1:] > dates[:-1]):
        raise ValueError("dates must be strictly increasing")
    r = _values(daily_returns)
    cum = np.cumsum(r)
    hwm = np.maximum.accumulate(cum) if cum.shape[0] else cum.copy()
    return PnlSeries(dates, r, cum, hwm, hwm - cum)


def max_drawdown(series) -> float:
    """Largest peak-to-trough fall of a cumulative PnL curve (or ``PnlSeries``)."""
    cum = series.cum_pnl if isinstance(series, PnlSeries) else _values(series)
    return kernels.max_drawdown(cum)


def ann_sharpe(daily_returns, rf_annual: float = 0.0, periods: int = PERIODS_PER_YEAR) -> float:
    """Annualized Sharpe ratio from daily returns, sample standard deviation.

    ``rf_annual`` is in the same units as the returns and is spread evenly over
    ``periods`` sessions. Fewer than two observations or zero variance give NaN.
    """
    r = _values(daily_returns)
    if r.shape[0] < 2 or _constant(r):
        return float("nan")
    excess = r - rf_annual / periods
    sd = np.std(r, ddof=1)
    if sd == 0:
        return float("nan")
    return float(np.mean(excess) / sd * np.sqrt(periods))


def rolling_sharpe(daily_returns, window: int, rf_annual: float = 0.0, periods: int = PERIODS_PER_YEAR):
    """Trailing-window ``ann_sharpe``; NaN until the window fills and where the window is constant."""
    if window < 2:
        raise ValueError("window must be >= 2")
    r = _values(daily_returns)
    out = np.full(r.shape[0], np.nan)
    if r.shape[0] >= window:
        w = sliding_window_view(r, window)
        sd = w.std(axis=1, ddof=1)
        flat = w.min(axis=1) == w.max(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (w.mean(axis=1) - rf_annual / periods) / sd * np.sqrt(periods)
        out[window - 1:] = np.where(flat | (sd == 0), np.nan, val)
    if isinstance(daily_returns, pd.Series):
        return pd.Series(out, index=daily_returns.index, name="rolling_sharpe")
    return out


def _align(a, b):
    if isinstance(a, pd.Series) and isinstance(b, pd.Series):
        joined = pd.concat([a.rename("a"), b.rename("b")], axis=1, join="inner").dropna()
        return joined["a"].to_numpy(), joined["b"].to_numpy(), joined.index
    a, b = _values(a), _values(b)
    if a.shape != b.shape:
        raise ValueError("series are not aligned")
    return a, b, None


def correlation(a, b) -> float:
    x, y, _ = _align(a, b)
    if x.shape[0] < 2 or _constant(x) or _constant(y):
        return float("nan")
    dx, dy = x - x.mean(), y - y.mean()
    return float(np.clip(np.sum(dx * dy) / np.sqrt(np.sum(dx * dx) * np.sum(dy * dy)), -1.0, 1.0))


def rolling_corr(a, b, window: int = 90):
    """Trailing-window Pearson correlation; NaN where either side is constant in the window."""
    if window < 2:
        raise ValueError("window must be >= 2")
    x, y, index = _align(a, b)
    out = np.full(x.shape[0], np.nan)
    if x.shape[0] >= window:
        wx, wy = sliding_window_view(x, window), sliding_window_view(y, window)
        dx = wx - wx.mean(axis=1, keepdims=True)
        dy = wy - wy.mean(axis=1, keepdims=True)
        sxy = np.sum(dx * dy, axis=1)
        denom = np.sqrt(np.sum(dx * dx, axis=1) * np.sum(dy * dy, axis=1))
        flat = (wx.min(axis=1) == wx.max(axis=1)) | (wy.min(axis=1) == wy.max(axis=1)) | (denom == 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[window - 1:] = np.where(flat, np.nan, np.clip(sxy / denom, -1.0, 1.0))
    if index is not None:
        return pd.Series(out, index=index, name="rolling_corr")
    return out


def beta(stock_daily, benchmark_daily) -> float:
    """Sample covariance with the benchmark over the benchmark's sample variance."""
    x, m, _ = _align(stock_daily, benchmark_daily)
    if x.shape[0] < 2 or _constant(m):
        return float("nan")
    dm = m - m.mean()
    return float(np.sum((x - x.mean()) * dm) / np.sum(dm * dm))


def sortino_and_downside(daily_returns, target: float = 0.0, periods: int = PERIODS_PER_YEAR):
    """Return ``(sortino, downside_deviation)``.

    Downside deviation is the root mean square of below-target shortfalls over
    all observations. With no below-target return it is 0 and Sortino is NaN.
    """
    r = _values(daily_returns) - target
    if r.shape[0] < 2:
        return float("nan"), float("nan")
    short = np.minimum(r, 0.0)
    dd = float(np.sqrt(np.mean(short * short)))
    if not np.any(r < 0):
        return float("nan"), 0.0
    return float(np.mean(r) / dd * np.sqrt(periods)), dd


@dataclass
class TradeAggregate:
    n: int
    cum_return: float
    sharpe: float
    mdd: float
    mean_holding: float
    max_holding: float
    win_rate: float

    def as_dict(self):
        return asdict(self)


_EMPTY = TradeAggregate(0, float("nan"), float("nan"), float("nan"), float("nan"), float("nan"), float("nan"))


def trade_aggregates(trades: Sequence, dates, weights: Sequence[float] | None = None,
                     periods: int = PERIODS_PER_YEAR) -> dict[str, TradeAggregate]:
    """Per-side (``long``, ``short``) and ``combined`` trade statistics.

    Trade returns (times ``weights`` when given) are booked in percent on their
    exit date over the session grid ``dates``; the resulting streams feed the
    cumulative return, Sharpe and drawdown. Win rate counts strictly positive
    trade returns.
    """
    dates = pd.DatetimeIndex(dates)
    w = np.ones(len(trades)) if weights is None else np.asarray(weights, dtype=np.float64)
    out = {}
    for side, pick in (("long", lambda t: t.direction > 0), ("short", lambda t: t.direction < 0),
                       ("combined", lambda t: True)):
        sel = [i for i, t in enumerate(trades) if pick(trades[i])]
        if not sel:
            out[side] = _EMPTY
            continue
        ret = np.array([trades[i].trade_return for i in sel])
        hold = np.array([trades[i].realized_holding for i in sel], dtype=np.float64)
        pos = dates.get_indexer(pd.DatetimeIndex([pd.Timestamp(trades[i].exit_date) for i in sel]))
        if np.any(pos < 0):
            raise ValueError("trade exit date outside the supplied session grid")
        daily = kernels.daily_pnl(len(dates), pos, ret * w[sel])
        curve = np.cumsum(daily)
        out[side] = TradeAggregate(
            n=len(sel),
            cum_return=float(curve[-1]),
            sharpe=ann_sharpe(daily, periods=periods),
            mdd=max_drawdown(curve),
            mean_holding=float(hold.mean()),
            max_holding=float(hold.max()),
            win_rate=100.0 * float(np.count_nonzero(ret > 0)) / len(sel),
        )
    return out


@dataclass
class RiskSummary:
    final_cum_return: float
    peak_cum_return: float
    mdd: float
    ann_sharpe: float
    correlation_to_benchmark: float
    n_trades: int
    win_rate: float
    mean_holding: float
    max_holding: float

    def as_dict(self):
        return asdict(self)


def risk_summary(daily: pd.Series, benchmark_daily: pd.Series | None = None,
                 aggregate: TradeAggregate | None = None, rf_annual: float = 0.0,
                 periods: int = PERIODS_PER_YEAR) -> RiskSummary:
    pnl = cum_pnl(daily)
    corr = correlation(daily, benchmark_daily) if benchmark_daily is not None else float("nan")
    agg = aggregate or _EMPTY
    return RiskSummary(
        final_cum_return=pnl.final,
        peak_cum_return=float(pnl.cum_pnl.max()) if len(daily) else 0.0,
        mdd=max_drawdown(pnl),
        ann_sharpe=ann_sharpe(daily, rf_annual, periods),
        correlation_to_benchmark=corr,
        n_trades=agg.n,
        win_rate=agg.win_rate,
        mean_holding=agg.mean_holding,
        max_holding=agg.max_holding,
    )


def concat_streams(streams: Iterable[pd.Series]) -> pd.Series:
    """Sum daily streams datewise over the union of their dates."""
    streams = list(streams)
    if not streams:
        return pd.Series(dtype=np.float64)
    return pd.concat(streams, axis=1).fillna(0.0).sum(axis=1).sort_index()
