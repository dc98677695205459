"""Command-line entry point.

Usage: ``sigtrade <subcommand> [--config run.json] [--workers N] [--seed N] [--out DIR]``

Exit status is 0 on success, 1 on bad input and 2 on a computation error; on
failure a one-line JSON error record is written to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from . import perf_metrics as pm
from .config import RunConfig
from .errors import InputError, SigTradeError
from .market_data import PriceSeries, ingest_benchmark, ingest_prices, prices_frame
from .portfolio_engine import build_schedule, run_walk_forward, turnover_grid
from .reports import tree_digest, write_csv, write_json
from .scenario_grid import (OptimalConfig, configs_frame, load_configs, optimize_universe,
                            run_grid_universe, select_optimal)
from .signal_stats import accuracy_table, ci_plot_data, pvalue_summary
from .signal_store import SignalSet, load_signals, signals_frame
from .synth_signals import calibrated_signals, random_signals, synthetic_calendar, synthetic_prices, \
    synthetic_series, ticker_rng
from .trade_sim import ExecParams, simulate_stream

logger = logging.getLogger("sigtrade")

PCT = "units: returns, drawdowns and accuracies in percent; pt/sl/ci_lower/ci_upper/p-values as fractions"


class Context:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.hash = cfg.config_hash()
        self.out = Path(cfg.out)
        self._universe = self._signals = self._benchmark = None

    def path(self, name: str) -> Path:
        return self.out / name

    def csv(self, name, df, notes=(), index=False):
        write_csv(self.path(name), df, self.hash, notes, index)

    def json(self, name, payload):
        write_json(self.path(name), payload, self.hash)

    @property
    def universe(self):
        if self._universe is None:
            if not self.cfg.prices:
                raise InputError("no price file configured (set 'prices' or pass --prices)")
            self._universe = ingest_prices(self.cfg.prices)
        return self._universe

    @property
    def signals(self) -> SignalSet:
        if self._signals is None:
            if not self.cfg.signals:
                raise InputError("no signal file configured (set 'signals' or pass --signals)")
            raw = load_signals(self.cfg.signals)
            self._signals = raw.screen(self.universe.calendar)
            if len(self._signals.quarantine):
                logger.warning("%d signal records quarantined by the leakage screen", len(self._signals.quarantine))
        return self._signals

    @property
    def benchmark(self) -> PriceSeries | None:
        if self._benchmark is None and self.cfg.benchmark:
            self._benchmark = ingest_benchmark(self.cfg.benchmark)
        return self._benchmark


def cmd_ingest(ctx: Context) -> int:
    cfg = ctx.cfg
    if not cfg.prices:
        raise InputError("no price file configured")
    uni = ingest_prices(cfg.prices, strict=False)
    report = {
        "tickers": uni.tickers,
        "n_sessions": len(uni.calendar),
        "first_session": str(uni.calendar.sessions[0]) if len(uni.calendar) else None,
        "last_session": str(uni.calendar.sessions[-1]) if len(uni.calendar) else None,
        "rejected_rows": [str(d) for d in uni.rejected],
    }
    if cfg.signals:
        sig = load_signals(cfg.signals).screen(uni.calendar)
        report["n_signals"] = len(sig)
        report["quarantined"] = [f"{r.ticker} {r.created_at:%Y-%m-%d %H:%M} h={r.horizon}: {r.reason}"
                                 for r in sig.quarantine.itertuples(index=False)]
    if cfg.benchmark:
        b = ingest_benchmark(cfg.benchmark, strict=False)
        report["benchmark"] = {"ticker": b.ticker, "n_bars": len(b)}
    ctx.json("ingest_report.json", report)
    if uni.rejected:
        for d in uni.rejected:
            logger.error("%s", d)
        return 1
    return 0


def cmd_synth(ctx: Context) -> int:
    cfg, s = ctx.cfg, ctx.cfg.synth
    spec = cfg.generator_spec()
    if s["from_prices"]:
        uni = ingest_prices(cfg.prices)
        cal = uni.calendar
    else:
        cal = synthetic_calendar(s["start"], int(s["sessions"]))
        names = [f"T{i:03d}" for i in range(int(s["tickers"]))]
        lengths = None
        if s["min_sessions"]:
            rng = ticker_rng(cfg.seed, "lengths")
            lengths = rng.integers(int(s["min_sessions"]), len(cal) + 1, len(names))
        uni = synthetic_prices(names, cal, cfg.seed, lengths, drift=float(s["drift"]), vol=float(s["vol"]))
        ctx.csv("prices.csv", prices_frame(uni))
        bench = synthetic_series("BENCH", cal.sessions, cfg.seed, drift=float(s["drift"]), vol=float(s["vol"]) / 2)
        ctx.csv("benchmark.csv", prices_frame({"BENCH": bench}))
    gen = random_signals if spec.target_accuracy == 0.5 else calibrated_signals
    sig = gen(uni, spec, calendar=cal)
    ctx.csv("signals.csv", signals_frame(sig.frame), ["forecast_return in percent"])
    ctx.json("synth.json", {"n_tickers": len(uni), "n_signals": len(sig), "generator": spec.__dict__,
                            "null_model": gen is random_signals})
    return 0


def _grid(ctx: Context):
    cfg = ctx.cfg
    table = run_grid_universe(ctx.universe, ctx.signals, cfg.grid_spec(), workers=cfg.workers, sides=cfg.sides,
                              horizons=cfg.horizons, deadband=cfg.deadband, tiebreak=cfg.tiebreak,
                              exclude_truncated=cfg.exclude_truncated, periods=cfg.periods)
    configs, diags = optimize_universe(table, cfg.criterion, cfg.min_trades)
    return table, configs, diags


def cmd_grid(ctx: Context) -> int:
    cfg = ctx.cfg
    grid = cfg.grid_spec()
    table, configs, diags = _grid(ctx)
    ctx.csv("scenarios.csv", table.frame, [PCT])
    ctx.csv("optimal_configs.csv", configs_frame(configs))
    ctx.json("grid.json", {"grid": grid.to_dict(), "scenarios_per_ticker_horizon_side": len(grid),
                           "n_rows": len(table), "criterion": cfg.criterion, "min_trades": cfg.min_trades,
                           "n_configs": len(configs), "diagnostics": diags})
    return 0


def _configs(ctx: Context) -> dict[str, OptimalConfig]:
    return load_configs(ctx.cfg.configs) if ctx.cfg.configs else {}


def cmd_stats(ctx: Context, configs=None) -> int:
    cfg = ctx.cfg
    configs = _configs(ctx) if configs is None else configs
    table = accuracy_table(ctx.universe, ctx.signals, configs, cfg.default_horizon, cfg.level, cfg.two_sided,
                           cfg.deadband)
    if not table.rows:
        logger.warning("no signals to score; writing an empty accuracy table")
    ctx.csv("accuracy_table.csv", table.frame(), [PCT])
    ctx.csv("pvalue_summary.csv", pvalue_summary(table.tests, table.test_sides), [PCT], index=True)
    for side in ("long", "short"):
        ctx.csv(f"ci_plot_{side}.csv", ci_plot_data(table.rows, side, cfg.level), [PCT])
    tests = {t: {**s.__dict__, "side": table.test_sides[t], "holding_period": table.test_days[t]}
             for t, s in table.tests.items()}
    ctx.json("stats.json", {"level": cfg.level, "two_sided": cfg.two_sided, "tests": tests,
                            "diagnostics": table.diagnostics})
    return 0


def _backtest_config(ctx: Context, ticker: str) -> OptimalConfig:
    b = ctx.cfg.backtest
    if all(b.get(k) is not None for k in ("mhp", "pt", "sl")):
        return OptimalConfig(ticker, b.get("strategy") or "both", int(b.get("horizon") or ctx.cfg.default_horizon),
                             ExecParams(int(b["mhp"]), float(b["pt"]), float(b["sl"])))
    configs = _configs(ctx)
    if ticker in configs:
        return configs[ticker]
    cfg = ctx.cfg
    table = run_grid_universe(_Single(ctx.universe, ticker), ctx.signals, cfg.grid_spec(), sides=cfg.sides, horizons=cfg.horizons,
                              deadband=cfg.deadband, tiebreak=cfg.tiebreak, exclude_truncated=cfg.exclude_truncated,
                              periods=cfg.periods)
    return select_optimal(table, cfg.criterion, cfg.min_trades)


class _Single:
    """One-ticker view of a universe for ``run_grid_universe``."""

    def __init__(self, universe, ticker):
        self._u, self.tickers = universe, [ticker]

    def __getitem__(self, t):
        return self._u[t]


def cmd_backtest(ctx: Context) -> int:
    cfg = ctx.cfg
    ticker = cfg.backtest.get("ticker")
    if not ticker:
        raise InputError("backtest needs a ticker (set backtest.ticker or pass --ticker)")
    if ticker not in ctx.universe.series:
        raise InputError(f"ticker {ticker!r} not in price file")
    oc = _backtest_config(ctx, ticker)
    series = ctx.universe[ticker]
    days, dirs = ctx.signals.stream(ticker, oc.period_signal, deadband=cfg.deadband)
    policy = {"long_only": "long_only", "short_only": "short_only", "both": "both"}[oc.strategy]
    res = simulate_stream(series, days, dirs, oc.params, direction_policy=policy, tiebreak=cfg.tiebreak)
    daily = res.daily_returns
    ts = pm.cum_pnl(daily).to_frame()
    ts["rolling_sharpe"] = pm.rolling_sharpe(daily, min(cfg.rolling_window, max(len(daily), 2)), cfg.rf_annual,
                                             cfg.periods)
    if ctx.benchmark is not None:
        bench = ctx.benchmark.close_returns()
        ts["rolling_corr"] = pm.rolling_corr(daily, bench, cfg.rolling_window).reindex(ts.index)
        ts["benchmark_cum_pnl"] = bench.reindex(ts.index).fillna(0.0).cumsum()
        b = bench
    else:
        b = None
    aggs = pm.trade_aggregates(res.trades, daily.index, periods=cfg.periods)
    trades = pd.DataFrame([t.__dict__ for t in res.trades],
                          columns=["ticker", "direction", "entry_date", "exit_date", "trade_return", "exit_reason",
                                   "realized_holding"])
    ctx.csv(f"backtest_{ticker}_timeseries.csv", ts, [PCT], index=True)
    ctx.csv(f"backtest_{ticker}_trades.csv", trades, ["trade_return as a fraction"])
    ctx.json(f"backtest_{ticker}.json", {
        "ticker": ticker, "strategy": oc.strategy, "period_signal": oc.period_signal,
        "params": oc.params.__dict__,
        "summary": pm.risk_summary(daily, b, aggs["combined"], cfg.rf_annual, cfg.periods).as_dict(),
        "legs": {k: v.as_dict() for k, v in aggs.items()}, "skipped": res.skipped,
    })
    return 0


def cmd_portfolio(ctx: Context, configs=None) -> int:
    cfg = ctx.cfg
    if configs is None and not cfg.reoptimize:
        if not cfg.configs:
            raise InputError("portfolio needs an optimal-config file ('configs') or reoptimize=true")
        configs = _configs(ctx)
    sch = cfg.schedule
    schedule = build_schedule(ctx.universe.calendar, sch["start_quarter"], sch["end_quarter"],
                              int(sch["calibration_quarters"]))
    lev = cfg.leverage_spec()
    run = run_walk_forward(
        ctx.universe, ctx.signals, schedule, cfg.selection_rule(), cfg.weight_scheme(), ctx.benchmark,
        configs=None if cfg.reoptimize else configs, grid=cfg.grid_spec() if cfg.reoptimize else None,
        leverage=lev if lev.multiplier > 1 else None, split_date=cfg.split_date, criterion=cfg.criterion,
        min_trades=cfg.min_trades, leg_weights=tuple(cfg.leg_weights), rolling_window=cfg.rolling_window,
        rf_annual=cfg.rf_annual, periods=cfg.periods, per_position_accrual=bool(cfg.leverage["per_position"]),
        workers=cfg.workers, tiebreak=cfg.tiebreak)
    streams = run.streams.copy()
    for c in list(run.streams.columns):
        streams[f"{c}_cum_pnl"] = run.streams[c].cumsum()
    ctx.csv("portfolio_streams.csv", streams, [PCT], index=True)
    ctx.csv("portfolio_rolling.csv", run.rolling, [PCT], index=True)
    for side in ("long", "short"):
        ctx.csv(f"turnover_{side}.csv", turnover_grid(run, side), index=True)
    trades = pd.DataFrame([{"quarter": b.quarter, "side": b.side, "weight": b.weight, **b.trade.__dict__}
                           for b in run.trades],
                          columns=["quarter", "side", "weight", "ticker", "direction", "entry_date", "exit_date",
                                   "trade_return", "exit_reason", "realized_holding"])
    ctx.csv("portfolio_trades.csv", trades, ["trade_return as a fraction"])
    ctx.json("portfolio_summary.json", {
        "trading_quarters": schedule.trading_quarters,
        "books": {q: {"long": b.long, "short": b.short} for q, b in run.books.items()},
        "summaries": {k: v.as_dict() for k, v in run.summaries.items()},
        "legs": {k: v.as_dict() for k, v in run.aggregates.items()},
        "regimes": {"split_date": cfg.split_date, **{k: v.as_dict() for k, v in run.regimes.items()}},
        "correlation_to_benchmark": run.correlation,
        "diagnostics": run.diagnostics,
    })
    return 0


def cmd_report(ctx: Context) -> int:
    table, configs, diags = _grid(ctx)
    ctx.csv("scenarios.csv", table.frame, [PCT])
    ctx.csv("optimal_configs.csv", configs_frame(configs))
    cmd_stats(ctx, configs)
    if ctx.cfg.reoptimize or configs:
        cmd_portfolio(ctx, configs)
    if ctx.cfg.backtest.get("ticker"):
        cmd_backtest(ctx)
    digests = tree_digest(ctx.out)
    digests.pop("manifest.json", None)
    ctx.json("manifest.json", {"artifacts": digests, "grid_diagnostics": diags})
    return 0


COMMANDS = {"ingest": cmd_ingest, "synth": cmd_synth, "grid": cmd_grid, "stats": cmd_stats,
            "backtest": cmd_backtest, "portfolio": cmd_portfolio, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sigtrade", description="Signal backtesting and evaluation pipelines.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--workers", type=int, help="worker processes for the scenario grid")
    p.add_argument("--seed", type=int, help="random seed for synthetic generation")
    p.add_argument("--out", help="output directory")
    p.add_argument("--prices", help="price file")
    p.add_argument("--signals", help="signal file")
    p.add_argument("--benchmark", help="benchmark price file")
    p.add_argument("--configs", help="optimal-config file from `grid`")
    p.add_argument("--ticker", help="ticker for `backtest`")
    p.add_argument("--criterion", help="optimality criterion for `grid`")
    p.add_argument("--min-trades", type=int, help="minimum trades for a qualifying scenario")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {"workers": args.workers, "seed": args.seed, "out": args.out, "prices": args.prices,
                 "signals": args.signals, "benchmark": args.benchmark, "configs": args.configs,
                 "criterion": args.criterion, "min_trades": args.min_trades}
    data = cfg.to_dict()
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.ticker:
        data["backtest"]["ticker"] = args.ticker
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        ctx = Context(load_config(args))
        return COMMANDS[args.command](ctx)
    except Exception as exc:  # noqa: BLE001
        if isinstance(exc, SigTradeError):
            code = exc.exit_code
        elif isinstance(exc, (ValueError, KeyError, OSError)):
            code = 1
        else:
            code = 2
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code, "command": args.command}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        if args.verbose:
            logger.exception("failed")
        return code


if __name__ == "__main__":
    sys.exit(main())
