"""Sparse LP solver (revised simplex) and binary branch-and-bound."""
from .bnb import MBPOptions, MBPResult, MixedBinaryProgram, solve_mbp
from .model import (Basis, LinearProgram, LPError, LPOptions, LPSolution, Status,
                    dual_objective, farkas_gap)
from .mps import read_mps, write_mps
from .simplex import solve_lp

__all__ = [
    "Basis", "LinearProgram", "LPError", "LPOptions", "LPSolution", "Status",
    "MBPOptions", "MBPResult", "MixedBinaryProgram", "dual_objective", "farkas_gap",
    "read_mps", "solve_lp", "solve_mbp", "write_mps",
]
