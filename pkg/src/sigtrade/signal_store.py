"""Multi-horizon forecast records: loading, indexing, direction codes and the
ex-ante timestamp screen.

A record is admissible for simulation only after ``SignalSet.screen`` has
confirmed it was created before the open of its target session and that its
target date sits exactly ``horizon`` sessions after the creation session.
Records that fail are quarantined with a reason, never silently dropped.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from .errors import DuplicateRowError, HorizonRangeError, SchemaError, UnscreenedSignalsError
from .market_data import TradingCalendar, to_day

SIGNAL_COLUMNS = ("created_at", "ticker", "target_date", "forecast_return", "horizon")
TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M"
DEFAULT_OPEN_TIME = dt.time(9, 30)
MAX_HORIZON = 10

LONG, FLAT, SHORT = 1, 0, -1


@dataclass(frozen=True)
class SignalRecord:
    created_at: dt.datetime
    ticker: str
    target_date: dt.date
    forecast_return: float  # percent
    horizon: int

    def __post_init__(self):
        if not 1 <= self.horizon <= MAX_HORIZON:
            raise HorizonRangeError(f"horizon {self.horizon} outside 1..{MAX_HORIZON}")


def direction_of(forecast_return: float, deadband: float = 0.0) -> int:
    """Ternary direction code of a forecast: +1 above ``deadband``, -1 below ``-deadband``, else 0."""
    if deadband < 0:
        raise ValueError("deadband must be non-negative")
    if forecast_return > deadband:
        return LONG
    if forecast_return < -deadband:
        return SHORT
    return FLAT


def directions(forecasts, deadband: float = 0.0) -> np.ndarray:
    """Vectorized ``direction_of``."""
    if deadband < 0:
        raise ValueError("deadband must be non-negative")
    f = np.asarray(forecasts, dtype=np.float64)
    return np.where(f > deadband, LONG, np.where(f < -deadband, SHORT, FLAT)).astype(np.int64)


class LeakageResult(NamedTuple):
    ok: bool
    reasons: tuple[str, ...] = ()


def _open_time(open_time) -> dt.time:
    if isinstance(open_time, dt.time):
        return open_time
    return dt.datetime.strptime(str(open_time), "%H:%M").time()


def leakage_check(record: SignalRecord, calendar: TradingCalendar, open_time=DEFAULT_OPEN_TIME) -> LeakageResult:
    """Check one record against the ex-ante contract.

    ``ok`` is true iff the record was created before the open of its target
    session and ``target_date`` is the ``horizon``-th session after the
    session containing the creation date.
    """
    ot = _open_time(open_time)
    reasons = []
    target = to_day(record.target_date)
    if record.created_at >= dt.datetime.combine(target.astype(object), ot):
        reasons.append("created at or after target session open")
    base = int(calendar.index_at_or_before(to_day(record.created_at)))
    k = base + record.horizon
    if k >= len(calendar) or k < 0:
        reasons.append("target session beyond calendar")
    elif calendar.sessions[k] != target:
        reasons.append(f"target date is not {record.horizon} session(s) after creation "
                       f"(expected {calendar.sessions[k]})")
    return LeakageResult(not reasons, tuple(reasons))


def _screen_frame(df: pd.DataFrame, calendar: TradingCalendar, open_time) -> np.ndarray:
    """Vectorized leakage screen; returns a reason string per row ('' when clean)."""
    ot = _open_time(open_time)
    n = len(df)
    reasons = np.full(n, "", dtype=object)
    if n == 0:
        return reasons
    target = df["target_date"].to_numpy(dtype="datetime64[D]")
    opens = pd.DatetimeIndex(target) + pd.Timedelta(hours=ot.hour, minutes=ot.minute)
    late = df["created_at"].to_numpy() >= opens.to_numpy()
    base = calendar.index_at_or_before(df["created_at"].to_numpy(dtype="datetime64[D]"))
    k = base + df["horizon"].to_numpy(dtype=np.int64)
    beyond = (k >= len(calendar)) | (k < 0)
    expected = np.full(n, np.datetime64("NaT"), dtype="datetime64[D]")
    expected[~beyond] = calendar.sessions[k[~beyond]]
    mismatch = ~beyond & (expected != target)
    for i in np.flatnonzero(late | beyond | mismatch):
        parts = []
        if late[i]:
            parts.append("created at or after target session open")
        if beyond[i]:
            parts.append("target session beyond calendar")
        if mismatch[i]:
            parts.append("target date/horizon mismatch")
        reasons[i] = "; ".join(parts)
    return reasons


class SignalSet:
    """Indexed collection of forecast records backed by a sorted DataFrame.

    Records are unique on ``(ticker, created date, horizon)``. Use
    ``screen`` to obtain a set whose records may be simulated.
    """

    def __init__(self, frame: pd.DataFrame, screened: bool = False, quarantine: pd.DataFrame | None = None):
        self.frame = _validate_frame(frame)
        self.screened = screened
        self.quarantine = quarantine if quarantine is not None else self.frame.iloc[0:0].assign(reason="")
        self._streams: dict | None = None
        self._by_target: dict | None = None

    def __len__(self):
        return len(self.frame)

    def __repr__(self):
        return f"SignalSet({len(self)} records, screened={self.screened}, quarantined={len(self.quarantine)})"

    @property
    def tickers(self) -> list[str]:
        return sorted(self.frame["ticker"].unique())

    @property
    def horizons(self) -> list[int]:
        return sorted(int(h) for h in self.frame["horizon"].unique())

    def records(self) -> list[SignalRecord]:
        return [
            SignalRecord(r.created_at.to_pydatetime(), r.ticker, r.target_date.date(), float(r.forecast_return),
                         int(r.horizon))
            for r in self.frame.itertuples(index=False)
        ]

    def screen(self, calendar: TradingCalendar, open_time=DEFAULT_OPEN_TIME) -> "SignalSet":
        """Split into admissible records and a quarantine of leakage violations."""
        reasons = _screen_frame(self.frame, calendar, open_time)
        bad = reasons != ""
        quarantine = pd.concat([self.quarantine, self.frame[bad].assign(reason=reasons[bad])], ignore_index=True)
        return SignalSet(self.frame[~bad].reset_index(drop=True), screened=True, quarantine=quarantine)

    def for_ticker(self, ticker: str) -> "SignalSet":
        return SignalSet(self.frame[self.frame["ticker"] == ticker].reset_index(drop=True), self.screened,
                         self.quarantine[self.quarantine["ticker"] == ticker])

    def by_creation(self, ticker: str, created_date, horizon: int) -> SignalRecord | None:
        d = pd.Timestamp(to_day(created_date))
        f = self.frame
        hit = f[(f["ticker"] == ticker) & (f["created_at"].dt.normalize() == d) & (f["horizon"] == horizon)]
        return None if hit.empty else _row_record(hit.iloc[0])

    def by_target(self, ticker: str, target_date) -> list[SignalRecord]:
        if self._by_target is None:
            self._by_target = {k: idx for k, idx in self.frame.groupby(["ticker", "target_date"]).indices.items()}
        idx = self._by_target.get((ticker, pd.Timestamp(to_day(target_date))), [])
        return [_row_record(self.frame.iloc[i]) for i in idx]

    def stream(self, ticker: str, horizon: int, start=None, end=None, deadband: float = 0.0):
        """Signal days and direction codes of one (ticker, horizon), ordered by creation.

        Only screened sets may be streamed. ``start``/``end`` bound the
        creation date inclusively.
        """
        if not self.screened:
            raise UnscreenedSignalsError("run SignalSet.screen(calendar) before simulating signals")
        if self._streams is None:
            f = self.frame
            self._streams = {}
            days_all = f["created_at"].to_numpy(dtype="datetime64[D]")
            fc_all = f["forecast_return"].to_numpy(dtype=np.float64)
            for key, idx in f.groupby(["ticker", "horizon"], sort=True).indices.items():
                idx = np.sort(idx)
                self._streams[(key[0], int(key[1]))] = (days_all[idx], fc_all[idx])
        days, fc = self._streams.get((ticker, int(horizon)),
                                     (np.array([], dtype="datetime64[D]"), np.array([], dtype=np.float64)))
        if start is not None or end is not None:
            keep = np.ones(days.shape[0], dtype=bool)
            if start is not None:
                keep &= days >= to_day(start)
            if end is not None:
                keep &= days <= to_day(end)
            days, fc = days[keep], fc[keep]
        return days, directions(fc, deadband)

    def to_csv(self, path) -> None:
        write_signals(self.frame, path)


def _row_record(row) -> SignalRecord:
    return SignalRecord(row["created_at"].to_pydatetime(), row["ticker"], row["target_date"].date(),
                        float(row["forecast_return"]), int(row["horizon"]))


def _validate_frame(df: pd.DataFrame) -> pd.DataFrame:
    missing = [c for c in SIGNAL_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"signal frame missing columns {missing}")
    df = df.loc[:, list(SIGNAL_COLUMNS)].copy()
    df["created_at"] = pd.to_datetime(df["created_at"]).astype("datetime64[ns]")
    df["target_date"] = pd.to_datetime(df["target_date"]).dt.normalize().astype("datetime64[ns]")
    df["ticker"] = df["ticker"].astype(str)
    df["forecast_return"] = df["forecast_return"].astype(np.float64)
    df["horizon"] = df["horizon"].astype(np.int64)
    out_of_range = (df["horizon"] < 1) | (df["horizon"] > MAX_HORIZON)
    if out_of_range.any():
        r = df[out_of_range].iloc[0]
        raise HorizonRangeError(f"horizon {r.horizon} outside 1..{MAX_HORIZON} for {r.ticker} at {r.created_at}")
    key = [df["ticker"], df["created_at"].dt.normalize(), df["horizon"]]
    dup = pd.DataFrame({"t": key[0], "d": key[1], "h": key[2]}).duplicated()
    if dup.any():
        r = df[dup.to_numpy()].iloc[0]
        raise DuplicateRowError(
            f"duplicate signal for {r.ticker} created {r.created_at:%Y-%m-%d} horizon {r.horizon}")
    return df.sort_values(["ticker", "created_at", "horizon"], kind="mergesort").reset_index(drop=True)


def load_signals(source) -> SignalSet:
    """Load a signal file (``created_at,ticker,target_date,forecast_return,horizon``).

    The returned set is unscreened; call ``screen`` with the trading calendar
    before passing it to any simulation.
    """
    try:
        raw = pd.read_csv(source, dtype=str, keep_default_na=False, comment="#", skipinitialspace=True)
    except pd.errors.EmptyDataError:
        return SignalSet(pd.DataFrame({c: [] for c in SIGNAL_COLUMNS}))
    raw.columns = [c.strip().lower() for c in raw.columns]
    missing = [c for c in SIGNAL_COLUMNS if c not in raw.columns]
    if missing:
        raise SchemaError(f"{source}: missing columns {missing}")
    try:
        frame = pd.DataFrame({
            "created_at": pd.to_datetime(raw["created_at"].str.strip(), format=TIMESTAMP_FORMAT),
            "ticker": raw["ticker"].str.strip(),
            "target_date": pd.to_datetime(raw["target_date"].str.strip(), format="%Y-%m-%d"),
            "forecast_return": pd.to_numeric(raw["forecast_return"]),
            "horizon": pd.to_numeric(raw["horizon"], downcast="integer"),
        })
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"{source}: {exc}") from exc
    if len(frame) and (frame["horizon"] != np.floor(frame["horizon"])).any():
        raise SchemaError(f"{source}: non-integer horizon")
    return SignalSet(frame)


def signals_frame(frame: pd.DataFrame) -> pd.DataFrame:
    """Records in the canonical signal-file layout, four-decimal signed forecasts."""
    df = frame.loc[:, list(SIGNAL_COLUMNS)].sort_values(["ticker", "created_at", "horizon"], kind="mergesort")
    return pd.DataFrame({
        "created_at": pd.to_datetime(df["created_at"]).dt.strftime(TIMESTAMP_FORMAT),
        "ticker": df["ticker"],
        "target_date": pd.to_datetime(df["target_date"]).dt.strftime("%Y-%m-%d"),
        "forecast_return": [f"{x:+.4f}" for x in df["forecast_return"]],
        "horizon": df["horizon"].astype(int),
    })


def write_signals(frame: pd.DataFrame, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    signals_frame(frame).to_csv(path, index=False, lineterminator="\n")
