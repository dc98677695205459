"""Deterministic backtesting and evaluation of multi-horizon directional signals."""

from .errors import ComputationError, InputError, SigTradeError
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "ComputationError", "InputError", "SigTradeError", "__version__"]
