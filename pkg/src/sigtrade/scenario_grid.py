"""PT/SL/MHP scenario grid: enumeration, evaluation and optimal-config selection.

Evaluation is embarrassingly parallel over tickers. ``run_grid_universe``
shards tickers across worker processes and sorts the merged results, so the
output never depends on the worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from . import kernels
from .errors import NoQualifyingScenarioError
from .market_data import PriceSeries, to_day
from .signal_store import SignalSet
from .trade_sim import ExecParams

logger = logging.getLogger(__name__)

SIDES = ("long", "short", "both")
SIDE_TO_STRATEGY = {"long": "long_only", "short": "short_only", "both": "both"}
STRATEGY_TO_SIDES = {"long_only": ("long",), "short_only": ("short",), "both": ("long", "short")}
CRITERIA = ("max_sharpe", "min_mdd", "max_cum_return")
_SIDE_RANK = {s: i for i, s in enumerate(SIDES)}


def _axis(start: float, step: float, count: int) -> tuple:
    return tuple(round(start + k * step, 10) for k in range(count))


@dataclass(frozen=True)
class GridSpec:
    mhp_values: tuple
    pt_values: tuple
    sl_values: tuple

    def __post_init__(self):
        for name in ("mhp_values", "pt_values", "sl_values"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"{name} is empty")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"{name} must be sorted without duplicates")
            object.__setattr__(self, name, vals)
        if any(int(m) != m or m < 1 for m in self.mhp_values):
            raise ValueError("mhp values must be positive integers")
        if any(p <= 0 for p in self.pt_values):
            raise ValueError("pt values must be positive")
        if any(s >= 0 for s in self.sl_values):
            raise ValueError("sl values must be negative")

    def __len__(self):
        return len(self.mhp_values) * len(self.pt_values) * len(self.sl_values)

    def points(self) -> list[ExecParams]:
        return [ExecParams(m, p, s) for m in self.mhp_values for p in self.pt_values for s in self.sl_values]

    @classmethod
    def from_ranges(cls, mhp=(1, 10), pt=(0.001, 0.02, 0.0005), sl=(-0.04, -0.01, 0.005),
                    inclusive: bool = False) -> "GridSpec":
        """Build axes from ``(start, stop[, step])`` ranges; ``stop`` is excluded unless ``inclusive``."""
        def fractional(start, stop, step):
            count = int(round((stop - start) / step)) + (1 if inclusive else 0)
            return _axis(start, step, count)
        return cls(tuple(range(int(mhp[0]), int(mhp[1]) + 1)), fractional(*pt), fractional(*sl))

    def to_dict(self):
        return {"mhp_values": list(self.mhp_values), "pt_values": list(self.pt_values),
                "sl_values": list(self.sl_values)}


def default_grid(inclusive: bool = False) -> GridSpec:
    """MHP 1..10, PT 0.001 step 0.0005, SL -0.04 step 0.005.

    Upper endpoints (PT 0.02, SL -0.01) are excluded by default, giving
    10 x 38 x 6 = 2,280 points; ``inclusive=True`` gives 10 x 39 x 7 = 2,730.
    """
    return GridSpec.from_ranges(inclusive=inclusive)


@dataclass(frozen=True)
class ScenarioResult:
    ticker: str
    horizon: int
    side: str
    params: ExecParams
    cum_return: float
    sharpe: float
    mdd: float
    n_trades: int
    win_rate: float

    def sort_key(self):
        return (self.ticker, self.horizon, _SIDE_RANK[self.side], self.params.mhp, self.params.pt, self.params.sl)


@dataclass(frozen=True)
class OptimalConfig:
    ticker: str
    strategy: str
    period_signal: int
    params: ExecParams
    window_start: str | None = None
    window_end: str | None = None

    @property
    def sides(self) -> tuple[str, ...]:
        return STRATEGY_TO_SIDES[self.strategy]


def _side_filter(dirs: np.ndarray, side: str) -> np.ndarray:
    if side == "long":
        return dirs > 0
    if side == "short":
        return dirs < 0
    if side == "both":
        return dirs != 0
    raise ValueError(f"unknown side {side!r}")


SCENARIO_COLUMNS = ("ticker", "horizon", "side", "mhp", "pt", "sl", "cum_return", "sharpe", "mdd", "n_trades",
                    "win_rate")


class ScenarioTable:
    """Columnar collection of scenario results, sorted by
    ``(ticker, horizon, side, mhp, pt, sl)``.

    Iterating yields ``ScenarioResult`` records; ``frame`` exposes the
    underlying DataFrame for bulk work.
    """

    def __init__(self, frame: pd.DataFrame):
        frame = frame.loc[:, list(SCENARIO_COLUMNS)]
        rank = frame["side"].map(_SIDE_RANK)
        order = np.lexsort((frame["sl"].to_numpy(), frame["pt"].to_numpy(), frame["mhp"].to_numpy(),
                            rank.to_numpy(), frame["horizon"].to_numpy(), frame["ticker"].to_numpy()))
        self.frame = frame.iloc[order].reset_index(drop=True)

    @classmethod
    def from_results(cls, results: Iterable[ScenarioResult]) -> "ScenarioTable":
        rows = [(r.ticker, r.horizon, r.side, r.params.mhp, r.params.pt, r.params.sl, r.cum_return, r.sharpe,
                 r.mdd, r.n_trades, r.win_rate) for r in results]
        return cls(pd.DataFrame(rows, columns=list(SCENARIO_COLUMNS)))

    @classmethod
    def concat(cls, tables: Iterable["ScenarioTable"]) -> "ScenarioTable":
        frames = [t.frame for t in tables]
        if not frames:
            return cls(pd.DataFrame({c: [] for c in SCENARIO_COLUMNS}))
        return cls(pd.concat(frames, ignore_index=True))

    def __len__(self):
        return len(self.frame)

    def __iter__(self):
        for r in self.frame.itertuples(index=False):
            yield ScenarioResult(r.ticker, int(r.horizon), r.side, ExecParams(int(r.mhp), r.pt, r.sl),
                                 float(r.cum_return), float(r.sharpe), float(r.mdd), int(r.n_trades),
                                 float(r.win_rate))

    def __getitem__(self, i) -> ScenarioResult:
        r = self.frame.iloc[i]
        return ScenarioResult(r["ticker"], int(r["horizon"]), r["side"], ExecParams(int(r["mhp"]), r["pt"], r["sl"]),
                              float(r["cum_return"]), float(r["sharpe"]), float(r["mdd"]), int(r["n_trades"]),
                              float(r["win_rate"]))

    def for_ticker(self, ticker: str) -> "ScenarioTable":
        return ScenarioTable(self.frame[self.frame["ticker"] == ticker])

    def to_csv(self, path, header_lines: Sequence[str] = ()) -> None:
        write_table(self.frame, path, header_lines)


def write_table(frame: pd.DataFrame, path, header_lines: Sequence[str] = ()) -> None:
    """Write a frame as delimited text; floats use shortest round-trip repr, NaN as ``nan``."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        frame.to_csv(fh, index=False, na_rep="nan", lineterminator="\n")


def run_grid(series: PriceSeries, signals: SignalSet, grid: GridSpec, sides: Sequence[str] = ("long", "short"),
             horizons: Iterable[int] | None = None, window=None, deadband: float = 0.0,
             tiebreak: str = "stop_first", exclude_truncated: bool = True, periods: int = 252) -> ScenarioTable:
    """Evaluate every grid point for each (horizon, side) of one ticker.

    ``window`` (start, end) restricts both the price bars and the signal
    creation dates, so trades still open at the window end are truncated
    there. Metrics use the single-position policy and book trade returns on
    exit sessions of the windowed bars.
    """
    if window is not None:
        series = series.window(*window)
        start, end = window
    else:
        start = end = None
    horizons = signals.horizons if horizons is None else list(horizons)
    mhps = np.array(grid.mhp_values, dtype=np.int64)
    pts = np.array(grid.pt_values, dtype=np.float64)
    sls = np.array(grid.sl_values, dtype=np.float64)
    n_pts = len(grid)
    axes = np.meshgrid(mhps, pts, sls, indexing="ij")
    blocks = []
    for h in sorted(horizons):
        days, dirs = signals.stream(series.ticker, h, start, end, deadband)
        entry = series.entry_indices(days)
        has_entry = entry < len(series)
        for side in sorted(sides, key=_SIDE_RANK.get):
            keep = has_entry & _side_filter(dirs, side)
            if len(series) == 0:
                cum, mdd = np.zeros(n_pts), np.zeros(n_pts)
                shp, win = np.full(n_pts, np.nan), np.full(n_pts, np.nan)
                ntr = np.zeros(n_pts, dtype=np.int64)
            else:
                cum, shp, mdd, ntr, win = kernels.grid_metrics(
                    series.open, series.high, series.low, series.close, entry[keep], dirs[keep], mhps, pts, sls,
                    tiebreak == "stop_first", exclude_truncated, periods)
            blocks.append(pd.DataFrame({
                "ticker": series.ticker, "horizon": int(h), "side": side,
                "mhp": axes[0].ravel(), "pt": axes[1].ravel(), "sl": axes[2].ravel(),
                "cum_return": cum, "sharpe": shp, "mdd": mdd, "n_trades": ntr, "win_rate": win,
            }))
    if not blocks:
        return ScenarioTable.concat([])
    return ScenarioTable(pd.concat(blocks, ignore_index=True))


def _grid_task(args):
    pairs, grid, kwargs = args
    return ScenarioTable.concat(run_grid(s, sig, grid, **kwargs) for s, sig in pairs)


def shard(items: Sequence, n_shards: int) -> list[list]:
    """Round-robin split of ``items`` into at most ``n_shards`` non-empty shards."""
    if not items:
        return []
    n_shards = max(1, min(n_shards, len(items)))
    return [list(items[i::n_shards]) for i in range(n_shards)]


def run_grid_universe(universe, signals: SignalSet, grid: GridSpec, workers: int = 1,
                      **kwargs) -> ScenarioTable:
    """``run_grid`` over every ticker, sharded across ``workers`` processes.

    The merged table is re-sorted, so it is identical for any worker count.
    """
    tickers = sorted(universe.tickers if hasattr(universe, "tickers") else universe)
    pairs = [(universe[t], signals.for_ticker(t)) for t in tickers]
    tasks = [(sh, grid, kwargs) for sh in shard(pairs, workers)]
    if workers <= 1 or len(tasks) <= 1:
        parts = [_grid_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            parts = list(pool.map(_grid_task, tasks))
    return ScenarioTable.concat(parts)


def _as_frame(results) -> pd.DataFrame:
    if isinstance(results, ScenarioTable):
        return results.frame
    if isinstance(results, pd.DataFrame):
        return results
    return ScenarioTable.from_results(results).frame


def _ranking_order(frame: pd.DataFrame, criterion: str) -> np.ndarray:
    """Row order, best first: criterion, then lower mdd, higher cum return, smaller mhp,
    larger pt, larger sl; horizon and side close the order. Undefined values rank last."""
    if criterion == "max_sharpe":
        crit = -frame["sharpe"].to_numpy(dtype=float)
    elif criterion == "min_mdd":
        crit = frame["mdd"].to_numpy(dtype=float)
    elif criterion == "max_cum_return":
        crit = -frame["cum_return"].to_numpy(dtype=float)
    else:
        raise ValueError(f"criterion must be one of {CRITERIA}")
    nan_last = lambda a: np.where(np.isnan(a), np.inf, a)  # noqa: E731
    keys = (
        frame["side"].map(_SIDE_RANK).to_numpy(),
        frame["horizon"].to_numpy(),
        -frame["sl"].to_numpy(dtype=float),
        -frame["pt"].to_numpy(dtype=float),
        frame["mhp"].to_numpy(),
        nan_last(-frame["cum_return"].to_numpy(dtype=float)),
        nan_last(frame["mdd"].to_numpy(dtype=float)),
        nan_last(crit),
    )
    return np.lexsort(keys)


def select_optimal(results, criterion: str = "max_sharpe", min_trades: int = 30, window=None) -> OptimalConfig:
    """Pick the best qualifying scenario of one ticker.

    Scenarios with fewer than ``min_trades`` trades are ignored. The winner's
    side becomes the strategy and its horizon the signal period.
    """
    frame = _as_frame(results)
    if frame.empty:
        raise ValueError("no scenario results")
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}")
    tickers = frame["ticker"].unique()
    if len(tickers) != 1:
        raise ValueError(f"select_optimal expects one ticker, got {sorted(tickers)}")
    ok = frame[frame["n_trades"] >= min_trades]
    if ok.empty:
        raise NoQualifyingScenarioError(
            f"{tickers[0]}: no scenario with at least {min_trades} trades (insufficient history)")
    best = ok.iloc[_ranking_order(ok, criterion)[0]]
    ws, we = (None, None) if window is None else (str(to_day(window[0])), str(to_day(window[1])))
    return OptimalConfig(str(best["ticker"]), SIDE_TO_STRATEGY[best["side"]], int(best["horizon"]),
                         ExecParams(int(best["mhp"]), float(best["pt"]), float(best["sl"])), ws, we)


def optimize_universe(results, criterion: str = "max_sharpe", min_trades: int = 30,
                      window=None) -> tuple[dict[str, OptimalConfig], list[str]]:
    """``select_optimal`` per ticker; tickers without a qualifying scenario are reported, not raised."""
    frame = _as_frame(results)
    configs, diagnostics = {}, []
    for t, g in frame.groupby("ticker", sort=True):
        try:
            configs[t] = select_optimal(g, criterion, min_trades, window)
        except NoQualifyingScenarioError as exc:
            diagnostics.append(str(exc))
            logger.info("%s", exc)
    return configs, diagnostics


CONFIG_COLUMNS = ("ticker", "strategy", "period_signal", "mhp", "pt", "sl", "window_start", "window_end")


def configs_frame(configs: dict[str, OptimalConfig]) -> pd.DataFrame:
    rows = [(c.ticker, c.strategy, c.period_signal, c.params.mhp, c.params.pt, c.params.sl,
             c.window_start or "", c.window_end or "") for _, c in sorted(configs.items())]
    return pd.DataFrame(rows, columns=list(CONFIG_COLUMNS))


def load_configs(path) -> dict[str, OptimalConfig]:
    """Read an optimal-config file written by ``configs_frame``."""
    df = pd.read_csv(path, comment="#", dtype={"ticker": str, "window_start": str, "window_end": str},
                     keep_default_na=False)
    out = {}
    for r in df.itertuples(index=False):
        if r.strategy not in STRATEGY_TO_SIDES:
            raise ValueError(f"{path}: unknown strategy {r.strategy!r}")
        out[r.ticker] = OptimalConfig(r.ticker, r.strategy, int(r.period_signal),
                                      ExecParams(int(r.mhp), float(r.pt), float(r.sl)),
                                      r.window_start or None, r.window_end or None)
    return out
