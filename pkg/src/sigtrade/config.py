"""Run configuration: a JSON-serializable record of every pipeline knob."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import SchemaError
from .portfolio_engine import LeverageSpec, SelectionRule, WeightScheme
from .scenario_grid import CRITERIA, GridSpec
from .synth_signals import GeneratorSpec
from .trade_sim import TIEBREAKS

# Execution-only settings that never change artifact contents.
_UNHASHED = ("workers", "out")


def _default_grid():
    return {"mhp": [1, 10], "pt": [0.001, 0.02, 0.0005], "sl": [-0.04, -0.01, 0.005], "inclusive": False}


def _default_schedule():
    return {"start_quarter": None, "end_quarter": None, "calibration_quarters": 6}


def _default_selection():
    return {"rank_metric": "mdd", "top_n": 20, "ascending": None, "min_observations": 1,
            "exclude_beta_above": None, "exclude_beta_below": None, "exclude_sharpe_below": None}


def _default_leverage():
    return {"multiplier": 1.0, "annual_cost": 0.0, "per_position": False}


def _default_backtest():
    return {"ticker": None, "strategy": None, "horizon": None, "mhp": None, "pt": None, "sl": None}


def _default_synth():
    return {"from_prices": False, "tickers": 20, "sessions": 1000, "start": "2021-07-01", "min_sessions": None,
            "target_accuracy": 0.5, "horizons": list(range(1, 11)), "flat_share": 0.0, "holding": 0, "drift": 0.0, "vol": 0.02}


@dataclass
class RunConfig:
    """Pipeline configuration.

    Paths are resolved against the directory of the config file they were
    read from. Percent-valued fields (``deadband``, ``rf_annual``,
    ``leverage.annual_cost``) are in percent; proportions elsewhere.
    """

    prices: str | None = None
    signals: str | None = None
    benchmark: str | None = None
    configs: str | None = None
    out: str = "out"
    workers: int = 1
    seed: int = 0
    grid: dict = field(default_factory=_default_grid)
    criterion: str = "max_sharpe"
    min_trades: int = 30
    horizons: list | None = None
    sides: list = field(default_factory=lambda: ["long", "short"])
    deadband: float = 0.0
    tiebreak: str = "stop_first"
    exclude_truncated: bool = True
    level: float = 0.95
    two_sided: bool = True
    default_horizon: int = 1
    schedule: dict = field(default_factory=_default_schedule)
    selection: dict = field(default_factory=_default_selection)
    weights: str = "equal"
    leverage: dict = field(default_factory=_default_leverage)
    leg_weights: list = field(default_factory=lambda: [0.5, 0.5])
    reoptimize: bool = False
    split_date: str = "2025-01-01"
    rolling_window: int = 90
    rf_annual: float = 0.0
    periods: int = 252
    backtest: dict = field(default_factory=_default_backtest)
    synth: dict = field(default_factory=_default_synth)

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise SchemaError(f"unknown config keys {unknown}")
        cfg = cls()
        for k, v in data.items():
            default = getattr(cfg, k)
            if isinstance(default, dict) and isinstance(v, dict):
                bad = sorted(set(v) - set(default) - {"mhp_values", "pt_values", "sl_values"})
                if bad:
                    raise SchemaError(f"unknown keys {bad} in config section {k!r}")
                merged = copy.deepcopy(default)
                merged.update(v)
                v = merged
            setattr(cfg, k, v)
        if base_dir is not None:
            for k in ("prices", "signals", "benchmark", "configs", "out"):
                p = getattr(cfg, k)
                if p is not None and not Path(p).is_absolute():
                    setattr(cfg, k, str(Path(base_dir) / p))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data, Path(path).resolve().parent)

    def validate(self) -> None:
        try:
            self.grid_spec()
            self.selection_rule()
            self.weight_scheme()
            self.leverage_spec()
            self.generator_spec()
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"invalid config: {exc}") from exc
        if self.criterion not in CRITERIA:
            raise SchemaError(f"criterion must be one of {CRITERIA}")
        if self.tiebreak not in TIEBREAKS:
            raise SchemaError(f"tiebreak must be one of {TIEBREAKS}")
        if self.workers < 1:
            raise SchemaError("workers must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of every setting that can affect outputs."""
        d = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)
        return hashlib.sha256(blob.encode()).hexdigest()

    def grid_spec(self) -> GridSpec:
        g = self.grid
        if g.get("mhp_values") is not None:
            return GridSpec(tuple(g["mhp_values"]), tuple(g["pt_values"]), tuple(g["sl_values"]))
        return GridSpec.from_ranges(tuple(g["mhp"]), tuple(g["pt"]), tuple(g["sl"]), bool(g.get("inclusive")))

    def selection_rule(self) -> SelectionRule:
        return SelectionRule(**self.selection)

    def weight_scheme(self) -> WeightScheme:
        return WeightScheme(self.weights)

    def leverage_spec(self) -> LeverageSpec:
        return LeverageSpec(float(self.leverage["multiplier"]), float(self.leverage["annual_cost"]))

    def generator_spec(self) -> GeneratorSpec:
        s = self.synth
        return GeneratorSpec(float(s["target_accuracy"]), tuple(s["horizons"]), int(self.seed),
                             float(s["flat_share"]), int(s["holding"]))
