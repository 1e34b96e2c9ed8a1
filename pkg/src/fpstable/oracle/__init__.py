"""Exact reference execution and differential property testing."""

from .compiled import Compiled
from .interp import OMEGA, EvalError, Omega, eval_float, eval_real_exact, first_divergence

__all__ = ["Compiled", "EvalError", "OMEGA", "Omega", "eval_float", "eval_real_exact",
           "first_divergence"]
