"""Walk-forward long/short portfolio construction.

Each step calibrates on a trailing block of calendar quarters, ranks the
tickers on metrics computed strictly inside that block, and trades the next
quarter. Selected names form watch lists: a name trades only when a signal
created during the trading quarter points in its book's direction.

Each leg's weights sum to 1. The combined stream is
``long_weight * long + short_weight * short`` (0.5 each by default), so all
three streams are percent of one notional.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from . import perf_metrics as pm
from .errors import InsufficientSpanError
from .market_data import PriceSeries, TradingCalendar, to_day
from .scenario_grid import GridSpec, OptimalConfig, optimize_universe, run_grid_universe
from .signal_stats import accuracy_from_returns
from .signal_store import SignalSet
from .trade_sim import TradeResult, simulate_stream

logger = logging.getLogger(__name__)

RANK_METRICS = ("sharpe", "mdd", "final_cum_return", "sortino", "beta", "downside_risk", "accuracy")
ASCENDING_BY_DEFAULT = {"mdd", "beta", "downside_risk"}
BOOK_SIDES = ("long", "short")
DEFAULT_SPLIT = "2025-01-01"


def quarter_of(day) -> pd.Period:
    return pd.Period(pd.Timestamp(to_day(day)), freq="Q")


def _quarter(q) -> pd.Period:
    if isinstance(q, pd.Period):
        return q
    return pd.Period(str(q).replace("-", ""), freq="Q")


@dataclass(frozen=True)
class Step:
    calibration: tuple  # consecutive pd.Period quarters
    trading: pd.Period

    @property
    def calib_start(self) -> np.datetime64:
        return to_day(self.calibration[0].start_time)

    @property
    def calib_end(self) -> np.datetime64:
        return to_day(self.calibration[-1].end_time)

    @property
    def trade_start(self) -> np.datetime64:
        return to_day(self.trading.start_time)

    @property
    def trade_end(self) -> np.datetime64:
        return to_day(self.trading.end_time)

    @property
    def label(self) -> str:
        return str(self.trading)


@dataclass(frozen=True)
class RebalanceSchedule:
    steps: tuple

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def trading_quarters(self) -> list[str]:
        return [s.label for s in self.steps]


def build_schedule(calendar: TradingCalendar, start_quarter=None, end_quarter=None,
                   calibration_quarters: int = 6) -> RebalanceSchedule:
    """Six-quarter calibration, one-quarter trading steps over the calendar's span.

    ``start_quarter``/``end_quarter`` (``"2021Q3"`` or ``pd.Period``) narrow
    the span; by default it runs from the first to the last session's quarter.
    """
    if calibration_quarters < 1:
        raise ValueError("calibration_quarters must be >= 1")
    if len(calendar) == 0:
        raise InsufficientSpanError("calendar is empty")
    first = quarter_of(calendar.sessions[0]) if start_quarter is None else _quarter(start_quarter)
    last = quarter_of(calendar.sessions[-1]) if end_quarter is None else _quarter(end_quarter)
    quarters = list(pd.period_range(first, last, freq="Q"))
    if len(quarters) < calibration_quarters + 1:
        raise InsufficientSpanError(
            f"need {calibration_quarters + 1} quarters, span {first}..{last} has {len(quarters)}")
    steps = tuple(Step(tuple(quarters[i:i + calibration_quarters]), quarters[i + calibration_quarters])
                  for i in range(len(quarters) - calibration_quarters))
    return RebalanceSchedule(steps)


@dataclass(frozen=True)
class CalibrationMetrics:
    ticker: str
    side: str
    sharpe: float
    mdd: float
    final_cum_return: float
    sortino: float
    downside_risk: float
    accuracy: float
    beta: float
    n_observations: int
    n_signals: int

    @property
    def flagged(self) -> bool:
        """True when the window held no signal for the side."""
        return self.n_signals == 0

    def value(self, metric: str) -> float:
        return float(getattr(self, metric))


def _window_signals(signals: SignalSet, ticker: str, horizon: int, start, end, side: str):
    days, dirs = signals.stream(ticker, horizon, start, end)
    keep = dirs > 0 if side == "long" else dirs < 0
    return days[keep], dirs[keep]


def calibration_metrics(ticker: str, window, config: OptimalConfig, series: PriceSeries, signals: SignalSet,
                        benchmark: PriceSeries | None = None, sides: Sequence[str] | None = None,
                        rf_annual: float = 0.0, periods: int = 252,
                        tiebreak: str = "stop_first") -> list[CalibrationMetrics]:
    """Metrics of the ticker's optimal strategy over ``window`` only, one record per book side.

    Bars and signal creation dates are both cut to the window, so trades
    still open at its end are closed at the last in-window close. Accuracy
    is scored at the config's signal horizon and holding period ``mhp``;
    beta uses close-to-close returns against the benchmark inside the window.
    """
    start, end = window
    s = series.window(start, end)
    sides = config.sides if sides is None else sides
    if benchmark is not None and len(s) > 1:
        b = pm.beta(s.close_returns(), benchmark.window(start, end).close_returns())
    else:
        b = float("nan")
    h = min(config.params.mhp, 10)
    out = []
    for side in sides:
        days, dirs = _window_signals(signals, ticker, config.period_signal, start, end, side)
        policy = "long_only" if side == "long" else "short_only"
        if len(s) == 0:
            res_trades, daily = [], np.zeros(0)
        else:
            res = simulate_stream(s, days, dirs, config.params, direction_policy=policy, tiebreak=tiebreak)
            res_trades, daily = res.trades, res.daily_returns.to_numpy()
        e = s.entry_indices(days)
        realized = np.full(days.shape[0], np.nan)
        ok = e + h < len(s)
        realized[ok] = s.close[e[ok] + h] / s.open[e[ok]] - 1.0
        acc = accuracy_from_returns(dirs, realized, side).accuracy
        curve = np.cumsum(daily)
        sortino, downside = pm.sortino_and_downside(daily, periods=periods)
        out.append(CalibrationMetrics(
            ticker=ticker, side=side,
            sharpe=pm.ann_sharpe(daily, rf_annual, periods),
            mdd=pm.max_drawdown(curve) if curve.shape[0] else 0.0,
            final_cum_return=float(curve[-1]) if curve.shape[0] else 0.0,
            sortino=sortino, downside_risk=downside, accuracy=acc, beta=b,
            n_observations=len(res_trades), n_signals=int(days.shape[0]),
        ))
    return out


@dataclass(frozen=True)
class SelectionRule:
    """Filters and ranking applied to calibration metrics.

    Attributes:
        rank_metric: One of ``RANK_METRICS``.
        top_n: Names per side.
        ascending: Sort direction; ``None`` uses the metric's natural polarity
            (lower is better for mdd, beta and downside risk).
        min_observations: Minimum calibration trades.
        exclude_beta_above: Drop names with beta above this bound.
        exclude_beta_below: Drop names with beta below this bound.
        exclude_sharpe_below: Drop names with Sharpe below this bound.
    """

    rank_metric: str = "mdd"
    top_n: int = 20
    ascending: bool | None = None
    min_observations: int = 1
    exclude_beta_above: float | None = None
    exclude_beta_below: float | None = None
    exclude_sharpe_below: float | None = None

    def __post_init__(self):
        if self.rank_metric not in RANK_METRICS:
            raise ValueError(f"rank_metric must be one of {RANK_METRICS}")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")

    @property
    def is_ascending(self) -> bool:
        return self.rank_metric in ASCENDING_BY_DEFAULT if self.ascending is None else self.ascending


@dataclass
class Book:
    long: list
    short: list
    diagnostics: list = field(default_factory=list)

    def side(self, side: str) -> list:
        return self.long if side == "long" else self.short


def _passes(m: CalibrationMetrics, rule: SelectionRule) -> bool:
    if m.flagged or m.n_observations < rule.min_observations:
        return False
    # an undefined beta cannot satisfy an active beta bound
    if rule.exclude_beta_above is not None and not m.beta <= rule.exclude_beta_above:
        return False
    if rule.exclude_beta_below is not None and not m.beta >= rule.exclude_beta_below:
        return False
    if rule.exclude_sharpe_below is not None and not m.sharpe >= rule.exclude_sharpe_below:
        return False
    return True


def select_book(records: Sequence[CalibrationMetrics], rule: SelectionRule) -> Book:
    """Filter, rank and cut each side to ``top_n``; ties by ticker, undefined metrics last."""
    book, diags = {}, []
    for side in BOOK_SIDES:
        cands = [m for m in records if m.side == side and _passes(m, rule)]
        sign = 1.0 if rule.is_ascending else -1.0

        def key(m):
            v = m.value(rule.rank_metric)
            return (np.isnan(v), sign * v if not np.isnan(v) else 0.0, m.ticker)
        chosen = [m.ticker for m in sorted(cands, key=key)[:rule.top_n]]
        if len(chosen) < rule.top_n:
            diags.append(f"{side} book has {len(chosen)} of {rule.top_n} names")
        book[side] = chosen
    return Book(book["long"], book["short"], diags)


@dataclass(frozen=True)
class WeightScheme:
    kind: str = "equal"

    def __post_init__(self):
        if self.kind not in ("equal", "linear_decay"):
            raise ValueError("weight scheme must be equal or linear_decay")

    def weights(self, n: int, top_n: int | None = None) -> np.ndarray:
        """Weights for a book of ``n`` names, renormalized to sum to 1.

        Linear decay gives rank ``r`` a raw weight ``top_n + 1 - r``.
        """
        if n == 0:
            return np.zeros(0)
        if self.kind == "equal":
            return np.full(n, 1.0 / n)
        top_n = n if top_n is None else top_n
        raw = (top_n + 1 - np.arange(1, n + 1)).astype(np.float64)
        return raw / raw.sum()


@dataclass(frozen=True)
class LeverageSpec:
    multiplier: float = 1.0
    annual_cost: float = 0.0  # percent per year

    def __post_init__(self):
        if self.multiplier < 1:
            raise ValueError("leverage multiplier must be >= 1")


def apply_leverage(daily: pd.Series, spec: LeverageSpec, active=None, periods: int = 252) -> pd.Series:
    """``multiplier * r`` less a financing charge of ``(multiplier - 1) * annual_cost / periods``.

    The charge accrues on every session of ``daily`` by default, or only
    where the boolean ``active`` mask is true.
    """
    r = daily.to_numpy(dtype=np.float64) if isinstance(daily, pd.Series) else np.asarray(daily, dtype=np.float64)
    charge = (spec.multiplier - 1.0) * spec.annual_cost / periods
    mask = np.ones(r.shape[0], dtype=bool) if active is None else np.asarray(active, dtype=bool)
    out = spec.multiplier * r - np.where(mask, charge, 0.0)
    if isinstance(daily, pd.Series):
        return pd.Series(out, index=daily.index, name=daily.name)
    return out


@dataclass(frozen=True)
class BookedTrade:
    quarter: str
    side: str
    weight: float
    trade: TradeResult


@dataclass
class StepResult:
    long: pd.Series
    short: pd.Series
    trades: list
    active: pd.Series  # sessions with at least one open position


def _sessions_from(universe, start) -> pd.DatetimeIndex:
    s = universe.calendar.sessions
    return pd.DatetimeIndex(s[s >= to_day(start)])


def run_step(step: Step, book: Book, universe, signals: SignalSet, configs: Mapping[str, OptimalConfig],
             weights: WeightScheme = WeightScheme(), top_n: int | None = None,
             tiebreak: str = "stop_first") -> StepResult:
    """Trade one quarter's watch lists.

    Each name admits only signals created inside the trading quarter whose
    direction matches its book side, simulated with its own config on bars
    from the quarter's first session onward (so late trades can run to exit).
    """
    index = _sessions_from(universe, step.trade_start)
    legs, trades = {}, []
    active = np.zeros(len(index), dtype=bool)
    for side in BOOK_SIDES:
        names = book.side(side)
        w = weights.weights(len(names), top_n)
        leg = np.zeros(len(index))
        policy = "long_only" if side == "long" else "short_only"
        for t, wt in zip(names, w):
            cfg = configs[t]
            s = universe[t].window(step.trade_start, None)
            days, dirs = _window_signals(signals, t, cfg.period_signal, step.trade_start, step.trade_end, side)
            res = simulate_stream(s, days, dirs, cfg.params, direction_policy=policy, tiebreak=tiebreak)
            pos = index.get_indexer(res.daily_returns.index)
            np.add.at(leg, pos, wt * res.daily_returns.to_numpy())
            for tr in res.trades:
                trades.append(BookedTrade(step.label, side, float(wt), tr))
                a = index.get_indexer([pd.Timestamp(tr.entry_date), pd.Timestamp(tr.exit_date)])
                active[a[0]:a[1] + 1] = True
        legs[side] = pd.Series(leg, index=index, name=side)
    return StepResult(legs["long"], legs["short"], trades, pd.Series(active, index=index, name="active"))


@dataclass
class PortfolioRun:
    schedule: RebalanceSchedule
    books: dict  # quarter label -> Book
    configs: dict  # quarter label -> {ticker: OptimalConfig}
    streams: pd.DataFrame  # long, short, combined[, levered] percent per session
    trades: list
    summaries: dict  # long/short/combined[/levered] -> RiskSummary
    aggregates: dict  # long/short/combined -> TradeAggregate
    regimes: dict  # "before"/"after" -> RiskSummary of the combined stream
    rolling: pd.DataFrame
    correlation: float
    diagnostics: list
    top_n: int

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame({k: v.as_dict() for k, v in self.summaries.items()}).T


def run_walk_forward(universe, signals: SignalSet, schedule: RebalanceSchedule, rule: SelectionRule = SelectionRule(),
                     weights: WeightScheme = WeightScheme(), benchmark: PriceSeries | None = None,
                     configs: Mapping[str, OptimalConfig] | None = None, grid: GridSpec | None = None,
                     leverage: LeverageSpec | None = None, split_date=DEFAULT_SPLIT, criterion: str = "max_sharpe",
                     min_trades: int = 30, leg_weights=(0.5, 0.5), rolling_window: int = 90,
                     rf_annual: float = 0.0, periods: int = 252, per_position_accrual: bool = False,
                     workers: int = 1, tiebreak: str = "stop_first") -> PortfolioRun:
    """Calibrate, select and trade every step of ``schedule``.

    Execution configs come from ``configs`` (fixed for the run) or, when
    ``grid`` is given, from a fresh scenario search on each calibration
    window. Step streams are summed datewise, which is exact for the
    non-compounded convention.
    """
    if configs is None and grid is None:
        raise ValueError("supply either fixed configs or a grid to optimize per step")
    books, step_configs, diags = {}, {}, []
    long_parts, short_parts, active_parts, trades = [], [], [], []
    for step in schedule:
        window = (step.calib_start, step.calib_end)
        if grid is not None:
            table = run_grid_universe(universe, signals, grid, workers=workers, window=window, tiebreak=tiebreak)
            cfgs, d = optimize_universe(table, criterion, min_trades, window)
            diags += [f"{step.label}: {x}" for x in d]
        else:
            cfgs = {t: c for t, c in configs.items() if t in universe.series}
        records = []
        for t in sorted(cfgs):
            records += calibration_metrics(t, window, cfgs[t], universe[t], signals, benchmark,
                                           rf_annual=rf_annual, periods=periods, tiebreak=tiebreak)
        book = select_book(records, rule)
        diags += [f"{step.label}: {x}" for x in book.diagnostics]
        res = run_step(step, book, universe, signals, cfgs, weights, rule.top_n, tiebreak)
        books[step.label], step_configs[step.label] = book, cfgs
        long_parts.append(res.long)
        short_parts.append(res.short)
        active_parts.append(res.active.astype(float))
        trades += res.trades
    for d in diags:
        logger.info("%s", d)

    long_s = pm.concat_streams(long_parts).rename("long")
    short_s = pm.concat_streams(short_parts).rename("short")
    combined = (leg_weights[0] * long_s + leg_weights[1] * short_s).rename("combined")
    streams = pd.DataFrame({"long": long_s, "short": short_s, "combined": combined})
    streams.index.name = "date"
    if leverage is not None:
        active = pm.concat_streams(active_parts).reindex(streams.index, fill_value=0.0) > 0 \
            if per_position_accrual else None
        streams["levered"] = apply_leverage(streams["combined"], leverage, active, periods)

    bench = benchmark.close_returns() if benchmark is not None else None
    dates = streams.index
    leg_trades = {s: [b for b in trades if b.side == s] for s in BOOK_SIDES}
    aggregates = {
        s: pm.trade_aggregates([b.trade for b in leg_trades[s]], dates, [b.weight for b in leg_trades[s]],
                               periods)["combined"]
        for s in BOOK_SIDES
    }
    lw = {"long": leg_weights[0], "short": leg_weights[1]}
    aggregates["combined"] = pm.trade_aggregates([b.trade for b in trades], dates,
                                                 [b.weight * lw[b.side] for b in trades], periods)["combined"]
    summaries = {k: pm.risk_summary(streams[k], bench, aggregates.get(k, aggregates["combined"]), rf_annual,
                                    periods) for k in streams.columns}
    split = pd.Timestamp(to_day(split_date))
    regimes = {}
    for name, part in (("before", streams["combined"][dates < split]), ("after", streams["combined"][dates >= split])):
        regimes[name] = pm.risk_summary(part, bench, None, rf_annual, periods)
    rolling = pd.DataFrame({"rolling_sharpe": pm.rolling_sharpe(streams["combined"], rolling_window, rf_annual,
                                                                periods)}, index=dates)
    if bench is not None and len(dates):
        rolling["rolling_corr"] = pm.rolling_corr(streams["combined"], bench.reindex(dates), rolling_window) \
            .reindex(dates)
    corr = pm.correlation(streams["combined"], bench) if bench is not None else float("nan")
    return PortfolioRun(schedule, books, step_configs, streams, trades, summaries, aggregates, regimes, rolling,
                        corr, diags, rule.top_n)


def turnover_grid(run: PortfolioRun, side: str) -> pd.DataFrame:
    """Rank-by-quarter matrix of book membership; empty cells where a book is short."""
    if side not in BOOK_SIDES:
        raise ValueError("side must be long or short")
    cols = {}
    for q, book in run.books.items():
        names = book.side(side)
        cols[q] = names + [""] * (run.top_n - len(names))
    df = pd.DataFrame(cols, index=pd.RangeIndex(1, run.top_n + 1, name="rank"))
    return df
