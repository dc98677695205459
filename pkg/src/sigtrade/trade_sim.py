"""Single-trade and signal-stream simulation with profit-taker, stop-loss and
maximum-holding-period exits.

All thresholds are simple returns relative to the entry open. Entry is the
open of the first bar after the signal day; the scan covers bars ``e`` through
``e + mhp`` inclusive, and an untriggered trade exits at the close of
``e + mhp``. When one daily bar breaches both thresholds the intraday order is
unknown, so ``tiebreak`` decides (stop first by default).
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import pandas as pd

from . import kernels
from .errors import NoEntryError
from .market_data import PriceSeries, to_day

logger = logging.getLogger(__name__)

TIEBREAKS = ("stop_first", "profit_first")
DIRECTION_POLICIES = ("long_only", "short_only", "both")
OVERLAP_POLICIES = ("single_position", "allow_overlap")


@dataclass(frozen=True, order=True)
class ExecParams:
    mhp: int
    pt: float
    sl: float

    def __post_init__(self):
        if int(self.mhp) != self.mhp or self.mhp < 1:
            raise ValueError(f"mhp must be a positive integer, got {self.mhp}")
        if not self.pt > 0:
            raise ValueError(f"pt must be positive, got {self.pt}")
        if not self.sl < 0:
            raise ValueError(f"sl must be negative, got {self.sl}")
        object.__setattr__(self, "mhp", int(self.mhp))
        object.__setattr__(self, "pt", float(self.pt))
        object.__setattr__(self, "sl", float(self.sl))


@dataclass(frozen=True)
class TradeResult:
    ticker: str
    direction: int
    entry_date: dt.date
    exit_date: dt.date
    trade_return: float
    exit_reason: str
    realized_holding: int


def _policy_mask(direction: np.ndarray, policy: str) -> np.ndarray:
    if policy == "long_only":
        return direction > 0
    if policy == "short_only":
        return direction < 0
    if policy == "both":
        return direction != 0
    raise ValueError(f"unknown direction policy {policy!r}")


def simulate_trade(series: PriceSeries, signal_day, direction: int, params: ExecParams,
                   tiebreak: str = "stop_first") -> TradeResult:
    """Simulate one position opened at the first open after ``signal_day``."""
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if tiebreak not in TIEBREAKS:
        raise ValueError(f"tiebreak must be one of {TIEBREAKS}")
    e = series.entry_index(signal_day)
    if e >= len(series):
        raise NoEntryError(f"{series.ticker}: no bar after {to_day(signal_day)}")
    ret, xi, why = kernels.trade_batch(series.open, series.high, series.low, series.close,
                                       np.array([e]), np.array([direction]), params.mhp, params.pt, params.sl,
                                       tiebreak == "stop_first")
    return _make_result(series, int(direction), e, float(ret[0]), int(xi[0]), int(why[0]))


def _make_result(series, direction, e, ret, xi, why) -> TradeResult:
    return TradeResult(series.ticker, direction, series.dates[e].astype(object), series.dates[xi].astype(object),
                       ret, kernels.REASON_NAMES[why], xi - e)


@dataclass
class StreamResult:
    trades: list[TradeResult]
    daily_returns: pd.Series  # percent of notional, indexed by the series' sessions
    skipped: list[str]

    @property
    def n_trades(self) -> int:
        return len(self.trades)


def simulate_stream(series: PriceSeries, signal_days: Iterable, signal_directions: Iterable[int],
                    params: ExecParams, direction_policy: str = "both", overlap: str = "single_position",
                    tiebreak: str = "stop_first") -> StreamResult:
    """Run an ordered signal stream through ``simulate_trade``.

    Signals whose direction is excluded by ``direction_policy`` (or is Flat)
    are ignored. Under ``single_position`` a signal is skipped while the
    previous trade on the ticker is still open, i.e. unless its entry bar comes
    after the previous exit bar. Each trade's return, in percent, is booked on
    its exit session in ``daily_returns``.
    """
    if overlap not in OVERLAP_POLICIES:
        raise ValueError(f"overlap must be one of {OVERLAP_POLICIES}")
    if tiebreak not in TIEBREAKS:
        raise ValueError(f"tiebreak must be one of {TIEBREAKS}")
    days = np.asarray(list(signal_days) if not isinstance(signal_days, np.ndarray) else signal_days,
                      dtype="datetime64[D]")
    dirs = np.asarray(list(signal_directions) if not isinstance(signal_directions, np.ndarray)
                      else signal_directions, dtype=np.int64)
    if days.shape != dirs.shape:
        raise ValueError("signal_days and signal_directions differ in length")
    if days.shape[0] > 1 and np.any(days[1:] < days[:-1]):
        raise ValueError("signals must be sorted by creation date")

    keep = _policy_mask(dirs, direction_policy)
    days, dirs = days[keep], dirs[keep]
    entry = series.entry_indices(days)
    no_entry = entry >= len(series)
    skipped = [f"{series.ticker}: no entry bar after {d}" for d in days[no_entry]]
    for msg in skipped:
        logger.debug(msg)
    entry, dirs = entry[~no_entry], dirs[~no_entry]

    stop_first = tiebreak == "stop_first"
    args = (series.open, series.high, series.low, series.close, entry, dirs, params.mhp, params.pt, params.sl,
            stop_first)
    if overlap == "single_position":
        taken, ret, xi, why = kernels.stream_single(*args)
    else:
        ret, xi, why = kernels.trade_batch(*args)
        taken = np.ones(entry.shape[0], dtype=bool)

    idx = np.flatnonzero(taken)
    trades = [_make_result(series, int(dirs[i]), int(entry[i]), float(ret[i]), int(xi[i]), int(why[i]))
              for i in idx]
    daily = kernels.daily_pnl(len(series), xi[idx], ret[idx])
    return StreamResult(trades, pd.Series(daily, index=pd.DatetimeIndex(series.dates), name=series.ticker),
                        skipped)
