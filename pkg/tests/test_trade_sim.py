import numpy as np
import pytest

from sigtrade.errors import NoEntryError
from sigtrade.market_data import PriceSeries
from sigtrade.trade_sim import ExecParams, simulate_stream, simulate_trade

from conftest import random_ohlc
from oracles import stream_oracle, trade_oracle


def bars(rows, start="2022-01-03"):
    d = np.busday_offset(np.datetime64(start, "D"), np.arange(len(rows)))
    a = np.array(rows, dtype=float)
    return PriceSeries("X", d, a[:, 0], a[:, 1], a[:, 2], a[:, 3])


FLAT = (100, 100, 100, 100)
P = ExecParams(mhp=3, pt=0.02, sl=-0.01)


def test_exec_params_validation():
    for bad in [(0, 0.01, -0.01), (1, 0.0, -0.01), (1, 0.01, 0.01), (1.5, 0.01, -0.01)]:
        with pytest.raises(ValueError):
            ExecParams(*bad)


def test_long_profit_taker_exits_at_threshold():
    s = bars([FLAT, (100, 101, 99.5, 100.5), (100.5, 102.5, 100, 102)])
    t = simulate_trade(s, s.dates[0], 1, P)
    assert (t.exit_reason, t.trade_return, t.realized_holding) == ("profit_taker", 0.02, 1)
    assert t.entry_date == s.dates[1].astype(object) and t.exit_date == s.dates[2].astype(object)


def test_long_stop_loss():
    s = bars([FLAT, (100, 100.5, 98.9, 99)])
    t = simulate_trade(s, s.dates[0], 1, P)
    assert (t.exit_reason, t.trade_return, t.realized_holding) == ("stop_loss", -0.01, 0)


def test_same_bar_tiebreak():
    s = bars([FLAT, (100, 103, 98, 100)])
    assert simulate_trade(s, s.dates[0], 1, P).exit_reason == "stop_loss"
    t = simulate_trade(s, s.dates[0], 1, P, tiebreak="profit_first")
    assert (t.exit_reason, t.trade_return) == ("profit_taker", 0.02)


def test_expiry_at_mhp_close_and_truncation():
    rows = [FLAT] + [(100, 100.5, 99.5, 100.2)] * 3 + [(100.2, 100.6, 99.6, 100.4)]
    s = bars(rows)
    t = simulate_trade(s, s.dates[0], 1, P)
    assert t.exit_reason == "expiry" and t.realized_holding == 3
    assert t.trade_return == pytest.approx(0.004)
    short = bars(rows[:3])
    t = simulate_trade(short, short.dates[0], 1, P)
    assert t.exit_reason == "truncated" and t.realized_holding == 1


def test_short_side_thresholds():
    s = bars([FLAT, (100, 100.5, 97.9, 99)])
    t = simulate_trade(s, s.dates[0], -1, P)
    assert (t.exit_reason, t.trade_return) == ("profit_taker", 0.02)
    s = bars([FLAT, (100, 101.1, 99.5, 100.5)])
    t = simulate_trade(s, s.dates[0], -1, P)
    assert (t.exit_reason, t.trade_return) == ("stop_loss", -0.01)
    s = bars([FLAT, (100, 100.5, 99.5, 99.6), FLAT])
    t = simulate_trade(s, s.dates[0], -1, ExecParams(1, 0.02, -0.01))
    assert t.exit_reason == "expiry"
    assert t.trade_return == 0.0


def test_no_entry_bar_raises():
    s = bars([FLAT, FLAT])
    with pytest.raises(NoEntryError):
        simulate_trade(s, s.dates[1], 1, P)
    with pytest.raises(ValueError):
        simulate_trade(s, s.dates[0], 0, P)


def test_trade_matches_oracle_small_sample(rng):
    s = random_ohlc(rng, 40)
    args = (list(s.dates), s.open, s.high, s.low, s.close)
    for _ in range(200):
        k = int(rng.integers(0, 39))
        d = int(rng.choice([-1, 1]))
        p = ExecParams(int(rng.integers(1, 11)), float(rng.uniform(0.001, 0.04)), float(rng.uniform(-0.04, -0.001)))
        tb = str(rng.choice(["stop_first", "profit_first"]))
        got = simulate_trade(s, s.dates[k], d, p, tb)
        exp = trade_oracle(*args, s.dates[k], d, p.mhp, p.pt, p.sl, tb)
        assert got.exit_reason == exp["exit_reason"]
        assert got.trade_return == exp["trade_return"]
        assert np.datetime64(got.exit_date) == exp["exit_date"]


def test_single_position_skips_overlapping_signals():
    s = bars([FLAT] * 10)
    p = ExecParams(3, 0.5, -0.5)
    res = simulate_stream(s, s.dates[:6], [1] * 6, p)
    # entries at bars 1 and 5; the first trade exits at bar 4
    assert [np.datetime64(t.entry_date) for t in res.trades] == [s.dates[1], s.dates[5]]
    allow = simulate_stream(s, s.dates[:6], [1] * 6, p, overlap="allow_overlap")
    assert allow.n_trades == 6


def test_direction_policy_and_flat_signals():
    s = bars([FLAT] * 8)
    p = ExecParams(1, 0.5, -0.5)
    days, dirs = s.dates[:6:2], [1, -1, 0]
    assert simulate_stream(s, days, dirs, p).n_trades == 2
    assert [t.direction for t in simulate_stream(s, days, dirs, p, "long_only").trades] == [1]
    assert [t.direction for t in simulate_stream(s, days, dirs, p, "short_only").trades] == [-1]


def test_stream_books_percent_on_exit_dates(rng):
    s = random_ohlc(rng, 120)
    days = np.sort(s.dates[rng.choice(110, 40, replace=False)])
    dirs = rng.choice([-1, 1], 40)
    p = ExecParams(4, 0.015, -0.01)
    res = simulate_stream(s, days, dirs, p)
    exp = stream_oracle(list(s.dates), s.open, s.high, s.low, s.close, list(zip(days, dirs)), 4, 0.015, -0.01)
    assert len(res.trades) == len(exp)
    booked = np.zeros(len(s))
    for t in exp:
        booked[list(s.dates).index(t["exit_date"])] += 100 * t["trade_return"]
    np.testing.assert_allclose(res.daily_returns.to_numpy(), booked, rtol=0, atol=1e-12)


def test_stream_skips_signals_without_entry_and_requires_order():
    s = bars([FLAT] * 3)
    res = simulate_stream(s, [s.dates[0], s.dates[2]], [1, 1], ExecParams(1, 0.5, -0.5))
    assert res.n_trades == 1 and len(res.skipped) == 1
    with pytest.raises(ValueError):
        simulate_stream(s, [s.dates[1], s.dates[0]], [1, 1], ExecParams(1, 0.5, -0.5))
