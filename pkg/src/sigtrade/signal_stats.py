"""Directional accuracy over holding periods 0..10 and its significance tests.

Accuracy scores a signal as correct when the simple return from the open of
the next session to the close ``h`` sessions later has the forecast's sign.
A realized return of exactly zero is a miss for either side, Flat signals are
left out of both denominators, and signals whose holding window runs past the
end of the data are excluded. Undefined quantities are NaN.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
import pandas as pd
from scipy.stats import norm

from .market_data import PriceSeries
from .signal_store import SignalSet

logger = logging.getLogger(__name__)

HOLDING_PERIODS = tuple(range(11))
STAT_SIDES = ("long", "short", "both")
PVALUE_THRESHOLDS = (0.01, 0.05, 0.10)


class Accuracy(NamedTuple):
    accuracy: float  # percent, NaN when n == 0
    n: int
    hits: int


def _side_mask(dirs: np.ndarray, side: str) -> np.ndarray:
    if side == "long":
        return dirs > 0
    if side == "short":
        return dirs < 0
    if side == "both":
        return dirs != 0
    raise ValueError(f"side must be one of {STAT_SIDES}")


def _holding_matrix(series: PriceSeries, days: np.ndarray) -> np.ndarray:
    """Realized returns, shape ``(len(days), 11)``, NaN where history is short."""
    e = series.entry_indices(days)
    idx = e[:, None] + np.arange(len(HOLDING_PERIODS))[None, :]
    ok = idx < len(series)
    out = np.full(idx.shape, np.nan)
    if len(series):
        safe = np.minimum(idx, len(series) - 1)
        o = series.open[np.minimum(e, len(series) - 1)][:, None]
        out = np.where(ok, series.close[safe] / o - 1.0, np.nan)
    return out


def _score(dirs: np.ndarray, returns: np.ndarray, side: str) -> tuple[np.ndarray, np.ndarray]:
    """Hit and sample counts per holding period for one side."""
    pick = _side_mask(dirs, side)
    r = returns[pick]
    d = dirs[pick][:, None]
    defined = ~np.isnan(r)
    hit = defined & (np.sign(r) == d)
    return hit.sum(axis=0), defined.sum(axis=0)


def accuracy_from_returns(dirs, returns, side: str) -> Accuracy:
    """Score direction codes against realized returns (one holding period)."""
    dirs = np.asarray(dirs, dtype=np.int64)
    returns = np.asarray(returns, dtype=np.float64)
    hits, n = _score(dirs, returns[:, None], side)
    return _accuracy(int(hits[0]), int(n[0]))


def _accuracy(hits: int, n: int) -> Accuracy:
    return Accuracy(100.0 * hits / n if n else float("nan"), n, hits)


def directional_accuracy(signals: SignalSet, prices, side: str, h: int, horizon: int = 1,
                         tickers: Iterable[str] | None = None, deadband: float = 0.0) -> Accuracy:
    """Pooled directional accuracy of horizon-``horizon`` signals at holding period ``h``.

    Args:
        signals: A screened signal set.
        prices: A ``PriceSeries`` or a ticker-indexed universe.
        side: ``long``, ``short`` or ``both``.
        h: Holding period in sessions after the entry session, 0..10.
        horizon: Which signal horizon's records to score.
        tickers: Restrict to these tickers (default: every ticker with prices).
        deadband: Forecast magnitude, in percent, treated as Flat.
    """
    if h not in HOLDING_PERIODS:
        raise ValueError(f"holding period must be in 0..10, got {h}")
    if isinstance(prices, PriceSeries):
        universe = {prices.ticker: prices}
        tickers = [prices.ticker]
    else:
        universe = prices
        tickers = sorted(universe.tickers if tickers is None else tickers)
    hits = n = 0
    for t in tickers:
        days, dirs = signals.stream(t, horizon, deadband=deadband)
        if days.shape[0] == 0:
            continue
        r = _holding_matrix(universe[t], days)[:, [h]]
        k, m = _score(dirs, r, side)
        hits += int(k[0])
        n += int(m[0])
    return _accuracy(hits, n)


@dataclass(frozen=True)
class StatTest:
    p_hat: float
    n: int
    p0: float
    se0: float
    z: float
    p_value: float
    ci_lower: float
    ci_upper: float


def wald_ci(p_hat: float, n: int, level: float = 0.95) -> tuple[float, float]:
    """Normal-approximation interval ``p_hat -/+ z * sqrt(p_hat (1 - p_hat) / n)`` clamped to [0, 1]."""
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    if n <= 0 or np.isnan(p_hat):
        return float("nan"), float("nan")
    z = norm.ppf(1.0 - (1.0 - level) / 2.0)
    se = np.sqrt(p_hat * (1.0 - p_hat) / n)
    return float(max(0.0, p_hat - z * se)), float(min(1.0, p_hat + z * se))


def ztest_vs_baseline(p_hat: float, n: int, p0: float = 0.5, level: float = 0.95,
                      two_sided: bool = True) -> StatTest:
    """One-sample z-test of a proportion against ``p0``.

    The standard error uses the null proportion. ``two_sided=False`` tests
    ``p > p0``. The interval is ``wald_ci(p_hat, n, level)``.
    """
    if not 0 < p0 < 1:
        raise ValueError("p0 must be in (0, 1)")
    nan = float("nan")
    if n <= 0 or np.isnan(p_hat):
        return StatTest(float(p_hat), int(n), p0, nan, nan, nan, nan, nan)
    se0 = float(np.sqrt(p0 * (1.0 - p0) / n))
    z = float((p_hat - p0) / se0)
    p = float(2.0 * norm.sf(abs(z))) if two_sided else float(norm.sf(z))
    lo, hi = wald_ci(p_hat, n, level)
    return StatTest(float(p_hat), int(n), p0, se0, z, min(p, 1.0), lo, hi)


@dataclass(frozen=True)
class PValueSummary:
    n: int
    mean: float
    median: float
    std: float
    min: float
    max: float
    pct_below_1: float
    pct_below_5: float
    pct_below_10: float


def summarize_pvalues(p_values: Iterable[float]) -> PValueSummary:
    """Descriptive statistics of p-values; shares use strict ``p < threshold``, in percent."""
    p = np.asarray([x for x in p_values if not np.isnan(x)], dtype=np.float64)
    if p.shape[0] == 0:
        nan = float("nan")
        return PValueSummary(0, nan, nan, nan, nan, nan, nan, nan, nan)
    shares = [100.0 * np.count_nonzero(p < t) / p.shape[0] for t in PVALUE_THRESHOLDS]
    return PValueSummary(int(p.shape[0]), float(p.mean()), float(np.median(p)),
                         float(p.std(ddof=1)) if p.shape[0] > 1 else float("nan"),
                         float(p.min()), float(p.max()), *shares)


def pvalue_summary(tests: Mapping[str, StatTest] | Sequence, sides: Mapping[str, str] | None = None) -> pd.DataFrame:
    """P-value summary rows ``Long``, ``Short`` and pooled ``Both``.

    Args:
        tests: Per-ticker ``StatTest`` (mapping by ticker) or a list of
            ``(side, StatTest)`` pairs.
        sides: Side (``long``/``short``) of each ticker when ``tests`` is a
            mapping.
    """
    if isinstance(tests, Mapping):
        sides = sides or {}
        pairs = [(sides.get(t, "both"), s) for t, s in sorted(tests.items())]
    else:
        pairs = list(tests)
    rows = {}
    for label, keep in (("Long", ("long",)), ("Short", ("short",)), ("Both", ("long", "short", "both"))):
        rows[label] = summarize_pvalues(s.p_value for side, s in pairs if side in keep).__dict__
    df = pd.DataFrame.from_dict(rows, orient="index")
    df.index.name = "side"
    return df.rename(columns={"pct_below_1": "pct_p_lt_1", "pct_below_5": "pct_p_lt_5",
                              "pct_below_10": "pct_p_lt_10"})


@dataclass
class SideAccuracy:
    accuracy: np.ndarray  # percent per holding period 0..10
    n: np.ndarray  # scored signals per holding period
    n_signals: int
    pct_share: float

    @property
    def avg(self) -> float:
        a = self.accuracy[~np.isnan(self.accuracy)]
        return float(a.mean()) if a.shape[0] else float("nan")

    @property
    def max(self) -> float:
        return float(np.nanmax(self.accuracy)) if not np.all(np.isnan(self.accuracy)) else float("nan")

    @property
    def min(self) -> float:
        return float(np.nanmin(self.accuracy)) if not np.all(np.isnan(self.accuracy)) else float("nan")

    @property
    def best_day(self) -> int | None:
        """First holding period attaining the maximum accuracy."""
        if np.all(np.isnan(self.accuracy)):
            return None
        return int(np.nanargmax(self.accuracy))


@dataclass
class AccuracyRow:
    ticker: str
    horizon: int
    long: SideAccuracy
    short: SideAccuracy

    def to_record(self) -> dict:
        rec = {"ticker": self.ticker}
        for name, s in (("long", self.long), ("short", self.short)):
            for h in HOLDING_PERIODS:
                rec[f"{name}_{h}"] = float(s.accuracy[h])
            rec[f"avg_{name}"] = s.avg
            rec[f"max_{name}"] = s.max
            rec[f"min_{name}"] = s.min
            rec[f"pct_{name}"] = s.pct_share
            rec[f"best_day_{name}"] = s.best_day
        rec["n_long"] = self.long.n_signals
        rec["n_short"] = self.short.n_signals
        return rec


def accuracy_row(series: PriceSeries, days: np.ndarray, dirs: np.ndarray, horizon: int = 1) -> AccuracyRow:
    """Accuracy of one ticker's signal stream at every holding period, per side."""
    r = _holding_matrix(series, days)
    total = dirs.shape[0]
    sides = {}
    for side in ("long", "short"):
        hits, n = _score(dirs, r, side)
        with np.errstate(divide="ignore", invalid="ignore"):
            acc = np.where(n > 0, 100.0 * hits / np.maximum(n, 1), np.nan)
        count = int(np.count_nonzero(_side_mask(dirs, side)))
        sides[side] = SideAccuracy(acc, n.astype(np.int64), count, 100.0 * count / total if total else float("nan"))
    return AccuracyRow(series.ticker, horizon, sides["long"], sides["short"])


@dataclass
class AccuracyTable:
    rows: list[AccuracyRow]
    tests: dict[str, StatTest]
    test_sides: dict[str, str]
    test_days: dict[str, int | None]
    diagnostics: list[str] = field(default_factory=list)

    def frame(self) -> pd.DataFrame:
        recs = []
        for row in self.rows:
            rec = row.to_record()
            t = self.tests[row.ticker]
            rec["p_value_vs_50%"] = t.p_value
            rec["ci_lower"] = t.ci_lower
            rec["ci_upper"] = t.ci_upper
            recs.append(rec)
        df = pd.DataFrame(recs, columns=accuracy_columns())
        return df.astype({"best_day_long": "Int64", "best_day_short": "Int64", "n_long": "int64",
                          "n_short": "int64"})


def accuracy_columns() -> list[str]:
    cols = ["ticker"]
    for s in ("long", "short"):
        cols += [f"{s}_{h}" for h in HOLDING_PERIODS]
        cols += [f"avg_{s}", f"max_{s}", f"min_{s}", f"pct_{s}", f"best_day_{s}"]
    return cols + ["n_long", "n_short", "p_value_vs_50%", "ci_lower", "ci_upper"]


def _test_side(row: AccuracyRow, strategy: str | None) -> str:
    if strategy == "long_only":
        return "long"
    if strategy == "short_only":
        return "short"
    lmax, smax = row.long.max, row.short.max
    if np.isnan(smax) or (not np.isnan(lmax) and lmax >= smax):
        return "long"
    return "short"


def accuracy_table(universe, signals: SignalSet, configs: Mapping | None = None, default_horizon: int = 1,
                   level: float = 0.95, two_sided: bool = True, deadband: float = 0.0) -> AccuracyTable:
    """One ``AccuracyRow`` per ticker plus a z-test at its best (side, holding period).

    Each ticker is scored on the signal horizon of its optimal config
    (``default_horizon`` without one). The test side follows the config's
    strategy; for ``both`` (or no config) it is the side with the higher
    maximum accuracy. The holding period is that side's best day.
    """
    configs = configs or {}
    rows, tests, sides, days_used, diags = [], {}, {}, {}, []
    have = set(signals.tickers)
    for t in sorted(universe.tickers):
        if t not in have:
            diags.append(f"{t}: no signals, omitted from accuracy table")
            continue
        cfg = configs.get(t)
        horizon = cfg.period_signal if cfg is not None else default_horizon
        days, dirs = signals.stream(t, horizon, deadband=deadband)
        if days.shape[0] == 0:
            diags.append(f"{t}: no horizon-{horizon} signals, omitted from accuracy table")
            continue
        row = accuracy_row(universe[t], days, dirs, horizon)
        side = _test_side(row, cfg.strategy if cfg is not None else None)
        s = row.long if side == "long" else row.short
        best = s.best_day
        if best is None:
            test = ztest_vs_baseline(float("nan"), 0, level=level, two_sided=two_sided)
        else:
            test = ztest_vs_baseline(s.accuracy[best] / 100.0, int(s.n[best]), level=level, two_sided=two_sided)
        rows.append(row)
        tests[t], sides[t], days_used[t] = test, side, best
    for d in diags:
        logger.warning(d)
    return AccuracyTable(rows, tests, sides, days_used, diags)


def ci_plot_data(rows: Sequence[AccuracyRow], side: str, level: float = 0.95) -> pd.DataFrame:
    """Per-ticker accuracy at the side's best day with its Wald interval, sorted ascending.

    Ties are ordered by ticker symbol; tickers without a defined accuracy on
    the side are left out. Accuracy and bounds are in percent.
    """
    if side not in ("long", "short"):
        raise ValueError("side must be long or short")
    recs = []
    for row in rows:
        s = row.long if side == "long" else row.short
        best = s.best_day
        if best is None:
            continue
        lo, hi = wald_ci(s.accuracy[best] / 100.0, int(s.n[best]), level)
        recs.append((row.ticker, best, float(s.accuracy[best]), int(s.n[best]), 100.0 * lo, 100.0 * hi))
    df = pd.DataFrame(recs, columns=["ticker", "best_day", "accuracy_pct", "n", "ci_lower_pct", "ci_upper_pct"])
    df = df.sort_values(["accuracy_pct", "ticker"], kind="mergesort").reset_index(drop=True)
    df.insert(0, "rank", np.arange(1, len(df) + 1))
    return df
