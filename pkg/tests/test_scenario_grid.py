import math

import numpy as np
import pandas as pd
import pytest

from sigtrade.errors import NoQualifyingScenarioError
from sigtrade.scenario_grid import (GridSpec, ScenarioTable, configs_frame, default_grid, load_configs,
                                    optimize_universe, run_grid, run_grid_universe, select_optimal, shard)
from sigtrade.trade_sim import ExecParams, simulate_stream

from oracles import mdd_oracle, sharpe_oracle

SMALL = GridSpec((1, 3), (0.005, 0.02), (-0.03, -0.01))


def test_default_grid_cardinality():
    g = default_grid()
    assert (len(g.mhp_values), len(g.pt_values), len(g.sl_values)) == (10, 38, 6)
    assert len(g) == 2280
    assert g.pt_values[0] == 0.001 and g.pt_values[-1] == 0.0195
    assert g.sl_values == (-0.04, -0.035, -0.03, -0.025, -0.02, -0.015)
    assert len(default_grid(inclusive=True)) == 2730
    assert len(g.points()) == 2280


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec((), (0.01,), (-0.01,))
    with pytest.raises(ValueError):
        GridSpec((1,), (0.01,), (0.01,))
    with pytest.raises(ValueError):
        GridSpec((2, 1), (0.01,), (-0.01,))


def test_run_grid_rows_and_order(small_universe, small_signals):
    t = small_universe.tickers[0]
    tab = run_grid(small_universe[t], small_signals, SMALL)
    assert len(tab) == len(SMALL) * 2 * 2
    f = tab.frame
    assert list(f.columns) == ["ticker", "horizon", "side", "mhp", "pt", "sl", "cum_return", "sharpe", "mdd",
                               "n_trades", "win_rate"]
    block = f.iloc[:len(SMALL)]
    assert (block["side"] == "long").all() and (block["horizon"] == f["horizon"].min()).all()
    assert list(zip(block["mhp"], block["pt"], block["sl"])) == [(p.mhp, p.pt, p.sl) for p in SMALL.points()]


def test_run_grid_matches_stream_oracle(small_universe, small_signals):
    t = small_universe.tickers[1]
    s = small_universe[t]
    tab = run_grid(s, small_signals, SMALL, horizons=[2], exclude_truncated=False)
    days, dirs = small_signals.stream(t, 2)
    for r in tab:
        policy = {"long": "long_only", "short": "short_only"}[r.side]
        res = simulate_stream(s, days, dirs, r.params, direction_policy=policy)
        daily = res.daily_returns.to_numpy()
        assert r.n_trades == res.n_trades
        assert r.cum_return == pytest.approx(daily.sum(), abs=1e-9)
        assert r.mdd == pytest.approx(mdd_oracle(list(np.cumsum(daily))), abs=1e-9)
        assert r.sharpe == pytest.approx(sharpe_oracle(list(daily)), rel=1e-9)
        wins = sum(tr.trade_return > 0 for tr in res.trades)
        assert r.win_rate == pytest.approx(100 * wins / res.n_trades)


def test_truncated_trades_excluded_from_metrics():
    from sigtrade.market_data import PriceSeries, TradingCalendar
    from sigtrade.signal_store import SignalSet

    d = np.busday_offset(np.datetime64("2022-01-03"), np.arange(5))
    one = np.full(5, 100.0)
    s = PriceSeries("X", d, one, one, one, one)
    frame = pd.DataFrame({"created_at": pd.to_datetime([str(d[2]) + " 21:30"]), "ticker": ["X"],
                          "target_date": pd.to_datetime([str(d[3])]), "forecast_return": [1.0], "horizon": [1]})
    sig = SignalSet(frame).screen(TradingCalendar(d))
    g = GridSpec((5,), (0.01,), (-0.01,))
    assert run_grid(s, sig, g, sides=["long"]).frame["n_trades"].iloc[0] == 0
    assert run_grid(s, sig, g, sides=["long"], exclude_truncated=False).frame["n_trades"].iloc[0] == 1


def test_window_restricts_bars_and_signals(small_universe, small_signals):
    t = small_universe.tickers[0]
    s = small_universe[t]
    w = (s.dates[100], s.dates[300])
    full = run_grid(s, small_signals, SMALL, horizons=[1], window=w)
    manual = run_grid(s.window(*w), small_signals, SMALL, horizons=[1], window=w)
    pd.testing.assert_frame_equal(full.frame, manual.frame)
    n_all = run_grid(s, small_signals, SMALL, horizons=[1]).frame["n_trades"].sum()
    assert full.frame["n_trades"].sum() < n_all


def test_shard_round_robin():
    assert shard(list(range(5)), 2) == [[0, 2, 4], [1, 3]]
    assert shard([], 3) == []
    assert shard([1], 8) == [[1]]


def test_universe_results_independent_of_workers(small_universe, small_signals):
    a = run_grid_universe(small_universe, small_signals, SMALL, workers=1)
    b = run_grid_universe(small_universe, small_signals, SMALL, workers=3)
    pd.testing.assert_frame_equal(a.frame, b.frame)
    assert a.frame["ticker"].is_monotonic_increasing


def _table(rows):
    recs = [dict(ticker="X", horizon=h, side=side, mhp=m, pt=p, sl=s, cum_return=c, sharpe=sh, mdd=dd, n_trades=n,
                 win_rate=50.0) for h, side, m, p, s, c, sh, dd, n in rows]
    return ScenarioTable(pd.DataFrame(recs))


def test_select_optimal_criteria_and_tiebreaks():
    tab = _table([
        (1, "long", 1, 0.01, -0.01, 5.0, 1.0, 2.0, 40),
        (1, "long", 2, 0.01, -0.01, 6.0, 2.0, 3.0, 40),
        (1, "short", 1, 0.01, -0.01, 9.0, 2.0, 1.0, 40),
        (2, "long", 1, 0.01, -0.01, 20.0, 9.0, 0.5, 10),
    ])
    best = select_optimal(tab)
    assert (best.strategy, best.period_signal, best.params.mhp) == ("short_only", 1, 1)
    assert select_optimal(tab, "max_cum_return").strategy == "short_only"
    assert select_optimal(tab, "min_mdd").strategy == "short_only"
    assert select_optimal(tab, min_trades=5).period_signal == 2
    # identical metrics: smaller mhp, then larger pt, then larger sl
    tie = _table([(1, "long", 3, 0.01, -0.01, 1.0, 1.0, 1.0, 40), (1, "long", 2, 0.01, -0.02, 1.0, 1.0, 1.0, 40),
                  (1, "long", 2, 0.02, -0.03, 1.0, 1.0, 1.0, 40), (1, "long", 2, 0.02, -0.02, 1.0, 1.0, 1.0, 40)])
    p = select_optimal(tie).params
    assert (p.mhp, p.pt, p.sl) == (2, 0.02, -0.02)


def test_select_optimal_nan_sharpe_ranks_last_and_insufficient_history():
    tab = _table([(1, "long", 1, 0.01, -0.01, 5.0, math.nan, 0.0, 40),
                  (1, "long", 2, 0.01, -0.01, -5.0, -1.0, 6.0, 40)])
    assert select_optimal(tab).params.mhp == 2
    with pytest.raises(NoQualifyingScenarioError):
        select_optimal(tab, min_trades=100)


def test_optimize_universe_reports_unqualified(small_universe, small_signals, tmp_path):
    tab = run_grid_universe(small_universe, small_signals, SMALL)
    cfgs, diags = optimize_universe(tab, min_trades=10)
    assert set(cfgs) == set(small_universe.tickers) and diags == []
    none, diags = optimize_universe(tab, min_trades=10 ** 6)
    assert none == {} and len(diags) == len(small_universe.tickers)
    path = tmp_path / "cfg.csv"
    configs_frame(cfgs).to_csv(path, index=False)
    assert load_configs(path) == cfgs


def test_flat_prices_give_zero_pnl(small_signals):
    from sigtrade.market_data import PriceSeries

    t = small_signals.tickers[0]
    days, _ = small_signals.stream(t, 1)
    d = np.unique(np.concatenate([days, np.busday_offset(days[-1], np.arange(1, 15))]))
    one = np.full(len(d), 50.0)
    tab = run_grid(PriceSeries(t, d, one, one, one, one), small_signals, default_grid(), horizons=[1])
    assert len(tab) == 2 * 2280
    assert (tab.frame["cum_return"] == 0).all() and tab.frame["sharpe"].isna().all()
    assert ExecParams(1, 0.001, -0.04) == tab[0].params
