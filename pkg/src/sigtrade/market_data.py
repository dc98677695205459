"""Daily OHLC ingestion, validation, trading calendar and return lookups.

Prices are assumed to be split/dividend adjusted by the vendor already; this
module never adjusts them. Every series keeps its own bar sequence, so a
ticker with missing sessions is indexed by its own bars rather than the
global calendar.
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from .errors import (
    DuplicateRowError,
    InsufficientHistoryError,
    MalformedRowError,
    NoSessionAfterError,
    OHLCInconsistencyError,
    SchemaError,
)

logger = logging.getLogger(__name__)

PRICE_COLUMNS = ("ticker", "date", "open", "high", "low", "close")


def to_day(value) -> np.datetime64:
    """Coerce a date-like value (str, date, datetime64, Timestamp) to ``datetime64[D]``."""
    if isinstance(value, np.datetime64):
        return value.astype("datetime64[D]")
    if isinstance(value, pd.Timestamp):
        return np.datetime64(value.date(), "D")
    if isinstance(value, dt.datetime):
        return np.datetime64(value.date(), "D")
    return np.datetime64(value, "D")


@dataclass(frozen=True)
class Bar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    volume: float | None = None

    def __post_init__(self):
        problem = bar_problem(self.open, self.high, self.low, self.close, self.volume)
        if problem:
            raise OHLCInconsistencyError(f"{self.date}: {problem}")


def bar_problem(o, h, l, c, v=None) -> str | None:
    """Describe why an OHLC row is inconsistent, or return None when it is fine."""
    if not (o > 0 and h > 0 and l > 0 and c > 0):
        return "non-positive price"
    if h < max(o, c):
        return "high below max(open, close)"
    if l > min(o, c):
        return "low above min(open, close)"
    if v is not None and not np.isnan(v) and v < 0:
        return "negative volume"
    return None


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Immutable daily bars of one symbol, stored column-wise.

    Dates are ``datetime64[D]`` and strictly increasing.
    """

    ticker: str
    dates: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray | None = None

    def __post_init__(self):
        for name in ("dates", "open", "high", "low", "close", "volume"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.array(arr, dtype="datetime64[D]" if name == "dates" else np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.dates.shape[0]
        if any(getattr(self, k).shape[0] != n for k in ("open", "high", "low", "close")):
            raise SchemaError(f"{self.ticker}: column lengths differ")
        if n > 1 and not np.all(self.dates[1:] > self.dates[:-1]):
            raise SchemaError(f"{self.ticker}: dates must be strictly increasing")

    def __len__(self):
        return self.dates.shape[0]

    @classmethod
    def from_bars(cls, ticker: str, bars: Iterable[Bar]) -> "PriceSeries":
        bars = list(bars)
        vol = [b.volume for b in bars]
        return cls(
            ticker,
            np.array([to_day(b.date) for b in bars], dtype="datetime64[D]"),
            np.array([b.open for b in bars]),
            np.array([b.high for b in bars]),
            np.array([b.low for b in bars]),
            np.array([b.close for b in bars]),
            None if all(v is None for v in vol) else np.array([np.nan if v is None else v for v in vol]),
        )

    @property
    def bars(self) -> list[Bar]:
        vol = self.volume if self.volume is not None else [None] * len(self)
        return [
            Bar(d.astype(object), float(o), float(h), float(l), float(c),
                None if v is None or np.isnan(v) else float(v))
            for d, o, h, l, c, v in zip(self.dates, self.open, self.high, self.low, self.close, vol)
        ]

    def entry_index(self, signal_day) -> int:
        """Index of the first bar strictly after ``signal_day`` (may equal ``len(self)``)."""
        return int(np.searchsorted(self.dates, to_day(signal_day), side="right"))

    def entry_indices(self, signal_days) -> np.ndarray:
        days = np.asarray(signal_days, dtype="datetime64[D]")
        return np.searchsorted(self.dates, days, side="right").astype(np.int64)

    def window(self, start=None, end=None) -> "PriceSeries":
        """Bars with ``start <= date <= end`` (either bound optional)."""
        lo = 0 if start is None else int(np.searchsorted(self.dates, to_day(start), side="left"))
        hi = len(self) if end is None else int(np.searchsorted(self.dates, to_day(end), side="right"))
        sl = slice(lo, hi)
        return PriceSeries(self.ticker, self.dates[sl], self.open[sl], self.high[sl], self.low[sl],
                           self.close[sl], None if self.volume is None else self.volume[sl])

    def close_returns(self) -> pd.Series:
        """Close-to-close simple returns in percent, indexed by date (first bar dropped)."""
        r = self.close[1:] / self.close[:-1] - 1.0
        return pd.Series(r * 100.0, index=pd.DatetimeIndex(self.dates[1:]), name=self.ticker)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"ticker": self.ticker, "date": pd.DatetimeIndex(self.dates),
                           "open": self.open, "high": self.high, "low": self.low, "close": self.close})
        if self.volume is not None:
            df["volume"] = self.volume
        return df


BenchmarkSeries = PriceSeries


@dataclass(frozen=True, eq=False)
class TradingCalendar:
    sessions: np.ndarray

    def __post_init__(self):
        s = np.array(self.sessions, dtype="datetime64[D]")
        if s.shape[0] > 1 and not np.all(s[1:] > s[:-1]):
            raise SchemaError("calendar sessions must be strictly increasing")
        s.setflags(write=False)
        object.__setattr__(self, "sessions", s)

    def __len__(self):
        return self.sessions.shape[0]

    def __contains__(self, day):
        d = to_day(day)
        i = np.searchsorted(self.sessions, d)
        return bool(i < len(self) and self.sessions[i] == d)

    @classmethod
    def from_series(cls, series: Iterable[PriceSeries]) -> "TradingCalendar":
        parts = [s.dates for s in series]
        if not parts:
            return cls(np.array([], dtype="datetime64[D]"))
        return cls(np.unique(np.concatenate(parts)))

    def next_session(self, day) -> np.datetime64:
        return next_session(self, day)

    def index_at_or_before(self, days) -> np.ndarray:
        """Index of the last session ``<= day`` (``-1`` if none), vectorized."""
        return np.searchsorted(self.sessions, np.asarray(days, dtype="datetime64[D]"), side="right") - 1


def next_session(calendar: TradingCalendar, day) -> np.datetime64:
    """Smallest session strictly after ``day``."""
    if len(calendar) == 0:
        raise NoSessionAfterError("calendar is empty")
    i = int(np.searchsorted(calendar.sessions, to_day(day), side="right"))
    if i >= len(calendar):
        raise NoSessionAfterError(f"no session after {to_day(day)}")
    return calendar.sessions[i]


def holding_return(series: PriceSeries, signal_day, h: int) -> float:
    """Simple return from the open of the entry bar to the close ``h`` bars later.

    The entry bar is the first bar of ``series`` after ``signal_day``.
    """
    if not 0 <= h <= 10:
        raise ValueError(f"holding period must be in 0..10, got {h}")
    e = series.entry_index(signal_day)
    if e + h >= len(series):
        raise InsufficientHistoryError(
            f"{series.ticker}: need bar {e + h} after {to_day(signal_day)}, series has {len(series)}")
    return float(series.close[e + h] / series.open[e] - 1.0)


def holding_returns(series: PriceSeries, signal_days, h: int) -> np.ndarray:
    """Vectorized ``holding_return``; NaN where history is insufficient."""
    e = series.entry_indices(signal_days)
    out = np.full(e.shape[0], np.nan)
    ok = e + h < len(series)
    out[ok] = series.close[e[ok] + h] / series.open[e[ok]] - 1.0
    return out


@dataclass(frozen=True)
class RowDiagnostic:
    line: int
    ticker: str | None
    date: str | None
    reason: str

    def __str__(self):
        return f"line {self.line} ({self.ticker}, {self.date}): {self.reason}"


@dataclass
class PriceUniverse:
    series: dict[str, PriceSeries]
    calendar: TradingCalendar
    rejected: list[RowDiagnostic] = field(default_factory=list)

    def __getitem__(self, ticker):
        return self.series[ticker]

    def __iter__(self):
        return iter(sorted(self.series))

    def __len__(self):
        return len(self.series)

    @property
    def tickers(self) -> list[str]:
        return sorted(self.series)


def _read_table(source, schema: Mapping[str, str] | None) -> pd.DataFrame:
    df = pd.read_csv(source, dtype=str, keep_default_na=False, comment="#", skipinitialspace=True)
    if schema:
        df = df.rename(columns={v: k for k, v in schema.items()})
    df.columns = [c.strip().lower() for c in df.columns]
    missing = [c for c in PRICE_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"{source}: missing columns {missing}")
    return df


def _parse(x) -> float:
    try:
        return float(x)
    except (TypeError, ValueError):
        return np.nan


def _parse_floats(col: pd.Series) -> pd.Series:
    """Correctly rounded decimal parsing (pandas' fast parser can be off by an ulp); bad cells become NaN."""
    text = col.astype(str).str.strip()
    try:
        vals = text.to_numpy(dtype=str).astype(np.float64)
    except ValueError:
        vals = np.array([_parse(x) for x in text], dtype=np.float64)
    vals[(text.to_numpy() == "") | ~np.isfinite(vals)] = np.nan
    return pd.Series(vals, index=col.index)


def frame_to_universe(df: pd.DataFrame, strict: bool = True, source: str = "<frame>") -> PriceUniverse:
    """Validate a raw string frame (columns per PRICE_COLUMNS) into a PriceUniverse."""
    lines = np.arange(len(df)) + 2  # header is line 1
    tick = df["ticker"].astype(str).str.strip()
    date_raw = df["date"].astype(str).str.strip()
    dates = pd.to_datetime(date_raw, format="%Y-%m-%d", errors="coerce")
    num = {k: _parse_floats(df[k]) for k in ("open", "high", "low", "close")}
    has_vol = "volume" in df.columns
    vol = pd.to_numeric(df["volume"].replace("", np.nan), errors="coerce") if has_vol else None

    diags: list[RowDiagnostic] = []
    bad = dates.isna() | (tick == "")
    for k in num:
        bad |= num[k].isna()
    if has_vol:
        bad |= vol.isna() & (df["volume"].astype(str).str.strip() != "")
    for i in np.flatnonzero(bad.to_numpy()):
        diags.append(RowDiagnostic(int(lines[i]), tick.iat[i] or None, date_raw.iat[i] or None, "malformed row"))
    n_malformed = len(diags)

    o, h, l, c = (num[k].to_numpy(dtype=float) for k in ("open", "high", "low", "close"))
    with np.errstate(invalid="ignore"):
        nonpos = ~((o > 0) & (h > 0) & (l > 0) & (c > 0))
        high_bad = h < np.maximum(o, c)
        low_bad = l > np.minimum(o, c)
        vol_bad = (vol.to_numpy(dtype=float) < 0) if has_vol else np.zeros(len(df), bool)
    incons = (nonpos | high_bad | low_bad | vol_bad) & ~bad.to_numpy()
    for i in np.flatnonzero(incons):
        reason = bar_problem(o[i], h[i], l[i], c[i], None if vol is None else vol.iat[i])
        diags.append(RowDiagnostic(int(lines[i]), tick.iat[i], date_raw.iat[i], reason))

    good = ~(bad.to_numpy() | incons)
    clean = pd.DataFrame({"ticker": tick, "date": dates, "open": o, "high": h, "low": l, "close": c})
    if has_vol:
        clean["volume"] = vol.to_numpy(dtype=float)
    clean["line"] = lines
    clean = clean[good]

    dup = clean.duplicated(["ticker", "date"], keep="first")
    if dup.any():
        dd = [RowDiagnostic(int(r.line), r.ticker, r.date.strftime("%Y-%m-%d"), "duplicate (ticker, date)")
              for r in clean[dup].itertuples()]
        first = dd[0]
        raise DuplicateRowError(
            f"{source}: duplicate row for ticker {first.ticker} on {first.date} (line {first.line})", dd)

    if diags and strict:
        cls = MalformedRowError if n_malformed else OHLCInconsistencyError
        summary = "; ".join(str(d) for d in diags[:5])
        more = f" (+{len(diags) - 5} more)" if len(diags) > 5 else ""
        raise cls(f"{source}: {len(diags)} invalid row(s): {summary}{more}", diags)
    for d in diags:
        logger.warning("rejected %s", d)

    series = {}
    for t, g in clean.sort_values(["ticker", "date"]).groupby("ticker", sort=True):
        series[t] = PriceSeries(
            t, g["date"].to_numpy(dtype="datetime64[D]"), g["open"].to_numpy(), g["high"].to_numpy(),
            g["low"].to_numpy(), g["close"].to_numpy(), g["volume"].to_numpy() if has_vol else None)
    return PriceUniverse(series, TradingCalendar.from_series(series.values()), diags)


def ingest_prices(source, schema: Mapping[str, str] | None = None, strict: bool = True) -> PriceUniverse:
    """Read and validate a delimited price file.

    Args:
        source: path to a file with header ``ticker,date,open,high,low,close[,volume]``.
        schema: optional mapping from canonical column name to the file's column name.
        strict: raise on any malformed or OHLC-inconsistent row. When false those
            rows are dropped and listed in ``PriceUniverse.rejected``.

    Duplicate ``(ticker, date)`` rows always raise ``DuplicateRowError``.
    """
    return frame_to_universe(_read_table(source, schema), strict=strict, source=str(source))


def ingest_benchmark(source, schema: Mapping[str, str] | None = None, strict: bool = True) -> PriceSeries:
    uni = ingest_prices(source, schema, strict)
    if len(uni) != 1:
        raise SchemaError(f"{source}: benchmark file must hold exactly one symbol, found {uni.tickers}")
    return uni[uni.tickers[0]]


def prices_frame(universe: Mapping[str, PriceSeries] | PriceUniverse) -> pd.DataFrame:
    """Series in the canonical price-file layout (rows sorted by ticker, date)."""
    items = universe.series if isinstance(universe, PriceUniverse) else universe
    frames = [items[t].to_frame() for t in sorted(items)]
    df = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=list(PRICE_COLUMNS))
    if len(df):
        df["date"] = df["date"].dt.strftime("%Y-%m-%d")
    return df


def write_prices(universe: Mapping[str, PriceSeries] | PriceUniverse, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    prices_frame(universe).to_csv(path, index=False, lineterminator="\n")
