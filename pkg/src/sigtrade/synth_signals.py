"""Synthetic prices and signal files with controlled statistical properties.

These generators stand in for a forecasting model. ``random_signals`` is the
null model (every direction a fair coin), ``calibrated_signals`` hits the
realized sign with a chosen probability. Every ticker draws from its own
stream seeded by ``(seed, crc32(ticker))``, so output does not depend on
which other tickers are generated or in what order.
"""

from __future__ import annotations

import datetime as dt
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .market_data import PriceSeries, PriceUniverse, TradingCalendar, to_day
from .signal_store import MAX_HORIZON, SignalSet

CREATED_TIME = dt.time(21, 30)
MAGNITUDE_RANGE = (0.2, 3.6)


def ticker_rng(seed: int, ticker: str, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(ticker.encode()), stream]))


def synthetic_calendar(start="2021-07-01", n_sessions: int = 500) -> TradingCalendar:
    """Weekday sessions starting at the first weekday on or after ``start``."""
    first = np.busday_offset(to_day(start), 0, roll="forward")
    return TradingCalendar(np.busday_offset(first, np.arange(n_sessions)))


def synthetic_series(ticker: str, sessions: np.ndarray, seed: int = 0, drift: float = 0.0,
                     vol: float = 0.02, start_price: float = 100.0) -> PriceSeries:
    """Geometric Brownian motion OHLC bars on ``sessions``.

    The open gaps from the previous close; high and low extend beyond the
    body by half-normal excursions, so every bar is OHLC-consistent.
    """
    rng = ticker_rng(seed, ticker, 1)
    n = len(sessions)
    gap = rng.normal(0.0, vol * 0.3, n)
    body = rng.normal(drift - 0.5 * vol ** 2, vol, n)
    up = np.abs(rng.normal(0.0, vol * 0.5, n))
    dn = np.abs(rng.normal(0.0, vol * 0.5, n))
    log_open = np.log(start_price) + np.cumsum(gap + np.concatenate([[0.0], body[:-1]]))
    o = np.exp(log_open)
    c = np.exp(log_open + body)
    h = np.maximum(o, c) * np.exp(up)
    l = np.minimum(o, c) * np.exp(-dn)
    return PriceSeries(ticker, np.asarray(sessions, dtype="datetime64[D]"), o, h, l, c)


def synthetic_prices(tickers: Sequence[str], calendar: TradingCalendar, seed: int = 0,
                     lengths: Sequence[int] | None = None, **kwargs) -> PriceUniverse:
    """A universe of ``synthetic_series``; ticker ``i`` uses the first ``lengths[i]`` sessions."""
    series = {}
    for i, t in enumerate(tickers):
        n = len(calendar) if lengths is None else int(lengths[i])
        series[t] = synthetic_series(t, calendar.sessions[:n], seed, **kwargs)
    return PriceUniverse(series, TradingCalendar.from_series(series.values()))


@dataclass(frozen=True)
class GeneratorSpec:
    """Controls for the synthetic signal generators.

    Attributes:
        target_accuracy: Probability that a non-Flat direction matches the
            realized sign (``calibrated_signals`` only).
        horizons: Signal horizons to emit per creation session.
        seed: Base seed.
        flat_share: Probability that a record is Flat (forecast exactly 0).
        holding: Holding period whose realized return defines the sign being
            calibrated against.
    """

    target_accuracy: float = 0.5
    horizons: tuple = (1,)
    seed: int = 0
    flat_share: float = 0.0
    holding: int = 0

    def __post_init__(self):
        if not 0.0 <= self.target_accuracy <= 1.0:
            raise ValueError("target_accuracy must be in [0, 1]")
        if not 0.0 <= self.flat_share <= 1.0:
            raise ValueError("flat_share must be in [0, 1]")
        hs = tuple(int(h) for h in self.horizons)
        if not hs or any(h < 1 or h > MAX_HORIZON for h in hs) or len(set(hs)) != len(hs):
            raise ValueError(f"horizons must be distinct values in 1..{MAX_HORIZON}")
        object.__setattr__(self, "horizons", tuple(sorted(hs)))
        if not 0 <= self.holding <= MAX_HORIZON:
            raise ValueError(f"holding must be in 0..{MAX_HORIZON}")


def _emit(series: PriceSeries, calendar: TradingCalendar, spec: GeneratorSpec, rng: np.random.Generator,
          realized: np.ndarray | None) -> pd.DataFrame:
    sess = calendar.sessions
    pos = np.searchsorted(sess, series.dates)
    n = series.dates.shape[0]
    frames = []
    for h in spec.horizons:
        coin = rng.random(n)
        flat = rng.random(n) < spec.flat_share
        mag = rng.uniform(*MAGNITUDE_RANGE, n)
        fair = np.where(rng.random(n) < 0.5, 1, -1)
        if realized is None:
            sign = fair
        else:
            truth = np.sign(realized)
            hit = np.where(coin < spec.target_accuracy, truth, -truth)
            sign = np.where(np.isnan(realized) | (truth == 0), fair, hit)
        ok = pos + h < sess.shape[0]
        fc = np.where(flat, 0.0, sign * mag)[ok]
        created = series.dates[ok].astype("datetime64[m]") + np.timedelta64(
            CREATED_TIME.hour * 60 + CREATED_TIME.minute, "m")
        frames.append(pd.DataFrame({
            "created_at": created,
            "ticker": series.ticker,
            "target_date": sess[pos[ok] + h],
            "forecast_return": np.round(fc, 4),
            "horizon": h,
        }))
    return pd.concat(frames, ignore_index=True)


def _realized_sign_returns(series: PriceSeries, h: int) -> np.ndarray:
    out = np.full(len(series), np.nan)
    e = np.arange(len(series)) + 1
    ok = e + h < len(series)
    out[ok] = series.close[e[ok] + h] / series.open[e[ok]] - 1.0
    return out


def _generate(universe, spec: GeneratorSpec, calibrated: bool, tickers: Iterable[str] | None,
              calendar: TradingCalendar | None) -> SignalSet:
    calendar = calendar or universe.calendar
    frames = []
    for t in sorted(tickers if tickers is not None else universe.tickers):
        s = universe[t]
        rng = ticker_rng(spec.seed, t, 2)
        realized = _realized_sign_returns(s, spec.holding) if calibrated else None
        frames.append(_emit(s, calendar, spec, rng, realized))
    if not frames:
        return SignalSet(pd.DataFrame({c: [] for c in ("created_at", "ticker", "target_date", "forecast_return",
                                                       "horizon")}))
    return SignalSet(pd.concat(frames, ignore_index=True))


def random_signals(universe, spec: GeneratorSpec = GeneratorSpec(), tickers=None, calendar=None) -> SignalSet:
    """Null-model signals: one record per session and horizon, direction a fair coin.

    Records are created at 21:30 on each session of the ticker and target the
    ``horizon``-th later session of the calendar, so they pass the leakage
    screen. Magnitudes are uniform in 0.2 to 3.6 percent; Flat records carry
    a forecast of exactly 0.
    """
    return _generate(universe, spec, False, tickers, calendar)


def calibrated_signals(universe, spec: GeneratorSpec, tickers=None, calendar=None) -> SignalSet:
    """Signals whose direction matches the realized sign at ``spec.holding`` with
    probability ``spec.target_accuracy``.

    The realized return is the one ``directional_accuracy`` scores, measured
    from the open after the creation session. Where that return is zero or
    not yet observable the direction is a fair coin.
    """
    return _generate(universe, spec, True, tickers, calendar)
