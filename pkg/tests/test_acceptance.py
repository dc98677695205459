"""Acceptance criteria, one test each. Every test prints a single
``[ACCEPTANCE n] PASS|FAIL name: detail`` line to the terminal."""

import math
import time

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from sigtrade import perf_metrics as pm
from sigtrade.cli import main
from sigtrade.market_data import PriceSeries, PriceUniverse, TradingCalendar
from sigtrade.portfolio_engine import LeverageSpec, SelectionRule, apply_leverage, build_schedule, run_walk_forward
from sigtrade.reports import tree_digest
from sigtrade.scenario_grid import GridSpec, OptimalConfig, default_grid, run_grid, run_grid_universe
from sigtrade.signal_stats import directional_accuracy, wald_ci, ztest_vs_baseline
from sigtrade.signal_store import SignalSet
from sigtrade.synth_signals import (GeneratorSpec, calibrated_signals, random_signals, synthetic_calendar,
                                    synthetic_prices)
from sigtrade.trade_sim import ExecParams, simulate_stream, simulate_trade

from conftest import random_ohlc
from oracles import mean_std_oracle, sharpe_oracle, trade_oracle


@pytest.fixture
def report(capsys):
    def emit(n, name, ok, detail):
        with capsys.disabled():
            print(f"\n[ACCEPTANCE {n:>2}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, detail
    return emit


def test_01_ztest_worked_example(report):
    t = ztest_vs_baseline(0.6, 200)
    ok = abs(t.se0 - 0.0354) <= 1e-4 and abs(t.z - 2.82) <= 0.01 and t.p_value < 0.05
    report(1, "z-test worked example", ok, f"se0={t.se0:.5f} z={t.z:.4f} p={t.p_value:.5f}")


def test_02_wald_ci_worked_examples(report):
    a, b = wald_ci(0.6, 20), wald_ci(0.6, 200)
    exp = [(0.385, 0.815), (0.532, 0.668)]
    ok = all(abs(x - y) <= 1e-3 for got, want in zip((a, b), exp) for x, y in zip(got, want))
    report(2, "Wald CI worked examples", ok, f"n=20 [{a[0]:.4f}, {a[1]:.4f}] n=200 [{b[0]:.4f}, {b[1]:.4f}]")


def test_03_default_grid_cardinality(report):
    g = default_grid()
    s = random_ohlc(np.random.default_rng(3), 120, ticker="G")
    days = s.dates[:100:3]
    frame = pd.DataFrame({"created_at": pd.to_datetime(days) + pd.Timedelta(hours=21, minutes=30), "ticker": "G",
                          "target_date": pd.to_datetime(np.busday_offset(days, 1)), "forecast_return": 1.0,
                          "horizon": 1})
    sig = SignalSet(frame).screen(TradingCalendar(s.dates))
    sizes = run_grid(s, sig, g).frame.groupby(["ticker", "horizon", "side"]).size().tolist()
    ok = len(g) == 2280 and sizes == [2280, 2280]
    report(3, "default grid cardinality", ok, f"len(grid)={len(g)} rows per (ticker, horizon, side)={sizes}")


def _random_path(rng):
    n = int(rng.integers(2, 16))
    vol = float(rng.choice([0.005, 0.02, 0.05]))
    dates = np.busday_offset(np.datetime64("2023-01-02"), np.arange(n))
    c = 50.0 * np.exp(np.cumsum(rng.normal(0, vol, n)))
    o = np.concatenate([[50.0], c[:-1]]) * np.exp(rng.normal(0, vol / 3, n))
    h = np.maximum(o, c) * np.exp(np.abs(rng.normal(0, vol, n)))
    l = np.minimum(o, c) * np.exp(-np.abs(rng.normal(0, vol, n)))
    return PriceSeries("P", dates, o, h, l, c)


def test_04_trade_simulator_oracle(report):
    rng = np.random.default_rng(404)
    t0 = time.perf_counter()
    n_paths = 10_000
    checked = mismatches = 0
    reasons = set()
    for _ in range(n_paths):
        s = _random_path(rng)
        p = ExecParams(int(rng.integers(1, 11)), float(rng.uniform(0.001, 0.05)), float(rng.uniform(-0.05, -0.001)))
        dates = list(s.dates)
        for d in (1, -1):
            for tb in ("stop_first", "profit_first"):
                got = simulate_trade(s, s.dates[0], d, p, tb)
                exp = trade_oracle(dates, s.open, s.high, s.low, s.close, s.dates[0], d, p.mhp, p.pt, p.sl, tb)
                fields = (got.direction, np.datetime64(got.entry_date), np.datetime64(got.exit_date),
                          got.trade_return, got.exit_reason, got.realized_holding)
                want = (exp["direction"], exp["entry_date"], exp["exit_date"], exp["trade_return"],
                        exp["exit_reason"], exp["realized_holding"])
                mismatches += fields != want
                reasons.add(got.exit_reason)
                checked += 1
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and checked >= 40_000 and len(reasons) == 4 and dt < 60
    report(4, "trade simulator vs day-by-day oracle", ok,
           f"{checked} trades on {n_paths} paths, {mismatches} mismatches, reasons={sorted(reasons)}, {dt:.1f}s")


def test_05_mdd_oracle(report):
    rng = np.random.default_rng(505)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(1000):
        n = int(rng.integers(1, 1001))
        cum = np.cumsum(rng.normal(0, 1, n) * rng.choice([0.1, 1.0, 10.0]))
        diff = cum[:, None] - cum[None, :]
        brute = max(0.0, float(np.triu(diff).max()))
        bad += pm.max_drawdown(cum) != brute
    dt = time.perf_counter() - t0
    report(5, "MDD vs O(n^2) brute force", bad == 0 and dt < 30, f"1000 series, {bad} mismatches, {dt:.1f}s")


def _ticker_pvalues(universe, signals):
    out = []
    for t in universe.tickers:
        a = directional_accuracy(signals, universe[t], "both", 0)
        out.append((a, ztest_vs_baseline(a.accuracy / 100.0, a.n)))
    return out


def test_06_null_calibration(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    names = [f"N{i:04d}" for i in range(1000)]
    cal = synthetic_calendar("2021-07-01", 602)
    uni = synthetic_prices(names, cal, seed=606, lengths=rng.integers(302, 603, len(names)))
    sig = random_signals(uni, GeneratorSpec(0.5, seed=607)).screen(uni.calendar)
    res = _ticker_pvalues(uni, sig)
    p = np.array([t.p_value for _, t in res])
    frac = float(np.mean(p < 0.05))
    ks = stats.kstest(p, "uniform").statistic
    crit = stats.kstwo.ppf(0.99, len(p))
    dt = time.perf_counter() - t0
    ok = min(a.n for a, _ in res) >= 300 and 0.03 <= frac <= 0.07 and ks < crit and dt < 120
    report(6, "null calibration", ok,
           f"min n={min(a.n for a, _ in res)}, p<0.05 in {100 * frac:.1f}%, KS={ks:.4f} (1% critical {crit:.4f}), "
           f"{dt:.1f}s")


def test_07_power_calibration(report):
    t0 = time.perf_counter()
    names = [f"A{i:04d}" for i in range(500)]
    cal = synthetic_calendar("2021-07-01", 301)
    uni = synthetic_prices(names, cal, seed=707)
    sig = calibrated_signals(uni, GeneratorSpec(0.6, seed=708, holding=0)).screen(uni.calendar)
    res = _ticker_pvalues(uni, sig)
    covered = np.mean([(lambda ci: ci[0] <= 0.6 <= ci[1])(wald_ci(a.accuracy / 100.0, a.n, 0.99)) for a, _ in res])
    reject = np.mean([t.p_value < 0.05 for _, t in res])
    ns = {a.n for a, _ in res}
    dt = time.perf_counter() - t0
    ok = ns == {300} and covered >= 0.98 and reject >= 0.90 and dt < 120
    report(7, "power calibration", ok,
           f"n={sorted(ns)}, target inside 99% Wald interval for {100 * covered:.1f}%, "
           f"reject 50% at 5% for {100 * reject:.1f}%, {dt:.1f}s")


def _perturb(universe, signals, start, end, rng):
    series = {}
    for t in universe.tickers:
        s = universe[t]
        f = np.where((s.dates >= start) & (s.dates <= end), rng.uniform(0.8, 1.25, len(s)), 1.0)
        series[t] = PriceSeries(t, s.dates, s.open * f, s.high * f, s.low * f, s.close * f)
    frame = signals.frame.copy()
    day = frame["created_at"].to_numpy(dtype="datetime64[D]")
    inside = (day >= start) & (day <= end)
    frame.loc[inside, "forecast_return"] *= -1.0
    return PriceUniverse(series, universe.calendar), SignalSet(frame).screen(universe.calendar)


def test_08_walk_forward_no_lookahead(report, small_universe, small_signals):
    schedule = build_schedule(small_universe.calendar, "2021Q3", "2023Q3")
    grid = GridSpec((1, 3), (0.005, 0.015), (-0.02, -0.01))
    kw = dict(rule=SelectionRule("sharpe", top_n=3), grid=grid, min_trades=5)
    base = run_walk_forward(small_universe, small_signals, schedule, **kw)
    rng = np.random.default_rng(808)
    results = []
    for step in schedule:
        uni, sig = _perturb(small_universe, small_signals, step.trade_start, step.trade_end, rng)
        run = run_walk_forward(uni, sig, schedule, **kw)
        q = step.label
        same = run.books[q].__dict__ == base.books[q].__dict__ and run.configs[q] == base.configs[q]
        moved = not run.streams.loc[str(step.trade_start):str(step.trade_end)].equals(
            base.streams.loc[str(step.trade_start):str(step.trade_end)])
        results.append((q, same, moved))
    ok = len(results) == 3 and all(s for _, s, _ in results) and all(m for _, _, m in results)
    report(8, "walk-forward no look-ahead", ok,
           ", ".join(f"{q}: book {'identical' if s else 'CHANGED'}, trading stream {'changed' if m else 'unchanged'}"
                     for q, s, m in results))


def test_09_leverage_linearity(report, small_universe, small_signals):
    s = random_ohlc(np.random.default_rng(909), 253, ticker="L")
    days = s.dates[:-1]
    dirs = np.random.default_rng(910).choice([-1, 1], len(days))
    base = simulate_stream(s, days, dirs, ExecParams(3, 0.01, -0.01)).daily_returns.iloc[1:]
    assert len(base) == 252
    double = apply_leverage(base, LeverageSpec(2.0, 0.0)).sum()
    costly = apply_leverage(base, LeverageSpec(2.0, 4.0)).sum()
    schedule = build_schedule(small_universe.calendar, "2021Q3", "2023Q1")
    run = run_walk_forward(small_universe, small_signals, schedule, SelectionRule(top_n=3),
                           configs={t: OptimalConfig(t, "both", 1, ExecParams(3, 0.01, -0.02))
                                    for t in small_universe.tickers},
                           leverage=LeverageSpec(2.0, 0.0))
    wf = run.streams["levered"].sum() == 2 * run.streams["combined"].sum()
    ok = double == 2 * base.sum() and abs(costly - (2 * base.sum() - 4.0)) <= 1e-9 and wf
    report(9, "leverage linearity", ok,
           f"base={base.sum():.6f} x2={double:.6f} x2 cost 4%={costly:.9f} "
           f"(expected {2 * base.sum() - 4.0:.9f}), walk-forward levered exact={wf}")


def test_10_determinism_and_scale(report, tmp_path):
    spec = {"seed": 10, "min_trades": 10, "horizons": [1, 2],
            "synth": {"tickers": 20, "sessions": 300, "target_accuracy": 0.55, "horizons": [1, 2]}}
    cfg = tmp_path / "run.json"
    cfg.write_text(pd.Series(spec).to_json())
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "data")]) == 0
    spec.update(prices=str(tmp_path / "data" / "prices.csv"), signals=str(tmp_path / "data" / "signals.csv"))
    cfg.write_text(pd.Series(spec).to_json())
    digests = {}
    for w in (1, 4, 13):
        out = tmp_path / f"w{w}"
        assert main(["grid", "--config", str(cfg), "--workers", str(w), "--out", str(out)]) == 0
        digests[w] = tree_digest(out)
    identical = digests[1] == digests[4] == digests[13]

    cal = synthetic_calendar("2021-07-01", 1000)
    uni = synthetic_prices([f"D{i:02d}" for i in range(20)], cal, seed=11)
    sig = calibrated_signals(uni, GeneratorSpec(0.55, horizons=tuple(range(1, 11)), seed=12)).screen(uni.calendar)
    t0 = time.perf_counter()
    table = run_grid_universe(uni, sig, default_grid(), workers=4)
    dt = time.perf_counter() - t0
    rows = len(table) == 20 * 10 * 2 * 2280
    ok = identical and rows and dt < 600
    report(10, "determinism and desk-scale performance", ok,
           f"grid artifacts identical for workers 1/4/13: {identical}; full scale {len(table)} scenarios in {dt:.1f}s")


def test_11_sharpe_properties(report):
    rng = np.random.default_rng(1111)
    r = rng.normal(0.05, 1.0, 252)
    base = pm.ann_sharpe(r)
    exact = all(pm.ann_sharpe(c * r) == base for c in (0.25, 0.5, 2.0, 8.0, 1024.0))
    close = all(abs(pm.ann_sharpe(c * r) / base - 1) <= 1e-12 for c in (0.3, 3.0, 7.0, 123.456))
    undefined = math.isnan(pm.ann_sharpe(np.full(252, 0.4))) and math.isnan(pm.ann_sharpe([1.0]))
    m, s = mean_std_oracle(list(r))
    factor = abs(base / (m / s) - math.sqrt(252)) <= 1e-10 * math.sqrt(252)
    oracle = abs(base - sharpe_oracle(list(r))) <= 1e-10 * abs(base)
    ok = exact and close and undefined and factor and oracle
    report(11, "Sharpe properties", ok,
           f"power-of-two scaling exact={exact}, other scales within 1e-12={close}, zero variance NaN={undefined}, "
           f"sqrt(252) factor={factor}, two-pass oracle={oracle}")


def test_12_schedule_reproduction(report):
    days = np.arange(np.datetime64("2021-07-01"), np.datetime64("2025-07-01"))
    cal = TradingCalendar(days[np.is_busday(days)])
    q = build_schedule(cal).trading_quarters
    ok = q[0] == "2023Q1" and q[-1] == "2025Q2"
    report(12, "schedule reproduction", ok, f"trading quarters {q[0]}..{q[-1]} ({len(q)} steps)")
