import numpy as np
import pandas as pd
import pytest

from sigtrade.market_data import PriceSeries, PriceUniverse, TradingCalendar
from sigtrade.synth_signals import GeneratorSpec, calibrated_signals, synthetic_calendar, synthetic_prices


def random_ohlc(rng, n, start="2022-01-03", ticker="TST", vol=0.02):
    """Random OHLC-consistent bars on consecutive weekdays."""
    dates = np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")
    c = 100.0 * np.exp(np.cumsum(rng.normal(0, vol, n)))
    o = np.concatenate([[100.0], c[:-1]]) * np.exp(rng.normal(0, vol / 3, n))
    h = np.maximum(o, c) * np.exp(np.abs(rng.normal(0, vol / 2, n)))
    l = np.minimum(o, c) * np.exp(-np.abs(rng.normal(0, vol / 2, n)))
    return PriceSeries(ticker, dates, o, h, l, c)


def universe_of(series):
    d = {s.ticker: s for s in series}
    return PriceUniverse(d, TradingCalendar.from_series(d.values()))


def frame_from_series(series):
    frames = [s.to_frame() for s in series]
    df = pd.concat(frames, ignore_index=True)
    df["date"] = df["date"].dt.strftime("%Y-%m-%d")
    return df


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_universe():
    cal = synthetic_calendar("2021-07-01", 800)
    return synthetic_prices([f"S{i:02d}" for i in range(6)], cal, seed=21)


@pytest.fixture(scope="session")
def small_signals(small_universe):
    spec = GeneratorSpec(0.6, horizons=(1, 2), seed=5)
    return calibrated_signals(small_universe, spec).screen(small_universe.calendar)


def make_signals(series, idx, forecasts, horizon=1):
    """Screened signals created at 21:30 on ``series.dates[idx]`` targeting ``horizon`` sessions later."""
    from sigtrade.signal_store import SignalSet

    idx = np.asarray(idx)
    tgt = np.busday_offset(series.dates[idx], horizon)
    frame = pd.DataFrame({"created_at": pd.to_datetime(series.dates[idx]) + pd.Timedelta(hours=21, minutes=30),
                          "ticker": series.ticker, "target_date": pd.to_datetime(tgt),
                          "forecast_return": np.asarray(forecasts, dtype=float), "horizon": horizon})
    cal = TradingCalendar(np.unique(np.concatenate([series.dates, tgt])))
    return SignalSet(frame).screen(cal)
