"""Time the scenario-grid kernel on the numba and numpy backends.

Runs one ticker's full default grid (both sides, every horizon) on synthetic
data and reports seconds per ticker for each backend, plus the projected
cost of a 20-ticker desk-scale run.

    python benchmarks/bench_kernels.py --sessions 1000 --horizons 10 --repeat 3
"""

import argparse
import time

import numpy as np

from sigtrade import kernels
from sigtrade.scenario_grid import default_grid
from sigtrade.synth_signals import GeneratorSpec, calibrated_signals, synthetic_calendar, synthetic_prices


def _inputs(sessions, horizons, seed):
    cal = synthetic_calendar("2021-07-01", sessions)
    uni = synthetic_prices(["BENCH"], cal, seed=seed)
    sig = calibrated_signals(uni, GeneratorSpec(0.55, horizons=tuple(range(1, horizons + 1)), seed=seed))
    sig = sig.screen(uni.calendar)
    s = uni["BENCH"]
    streams = []
    for h in range(1, horizons + 1):
        days, dirs = sig.stream("BENCH", h)
        streams.append((s.entry_indices(days), dirs))
    return s, streams


def _run(mod, s, streams, grid):
    mhps = np.asarray(grid.mhp_values, dtype=np.int64)
    pts = np.asarray(grid.pt_values, dtype=np.float64)
    sls = np.asarray(grid.sl_values, dtype=np.float64)
    for entry, dirs in streams:
        for side in (1, -1):
            keep = dirs == side
            mod.grid_metrics(s.open, s.high, s.low, s.close, entry[keep].astype(np.int64),
                             dirs[keep].astype(np.int64), mhps, pts, sls, True, True, 252)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sessions", type=int, default=1000)
    p.add_argument("--horizons", type=int, default=10)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()

    s, streams = _inputs(args.sessions, args.horizons, args.seed)
    grid = default_grid()
    names = ["numpy"] + (["numba"] if kernels._numba is not None else [])
    print(f"{len(grid)} scenarios x 2 sides x {args.horizons} horizons on {args.sessions} sessions")
    best = {}
    for name in names:
        mod = kernels.backend_module(name)
        _run(mod, s, streams[:1], grid)  # warm-up, includes JIT compilation
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            _run(mod, s, streams, grid)
            times.append(time.perf_counter() - t0)
        best[name] = min(times)
        print(f"{name:>6}: {best[name]:8.3f} s/ticker  (20 tickers ~ {20 * best[name]:7.1f} s single-core)")
    if len(best) == 2:
        print(f"numba speedup: {best['numpy'] / best['numba']:.1f}x")


if __name__ == "__main__":
    main()
