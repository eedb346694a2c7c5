from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp


class LPError(Exception):
    """Malformed linear program (dimensions, non-finite data)."""


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"
    NODE_LIMIT = "node_limit"


@dataclass(frozen=True)
class LPOptions:
    feas_tol: float = 1e-7
    opt_tol: float = 1e-7
    max_iters: int = 200_000
    pivot_tol: float = 1e-9
    refactor_every: int = 64
    stall_threshold: int = 60
    pricing_block: Optional[int] = None
    scale: bool = True


def _as_csr(A, n: int) -> sp.csr_matrix:
    if A is None:
        return sp.csr_matrix((0, n))
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


@dataclass(frozen=True)
class LinearProgram:
    """``min c.x  s.t.  A_eq x = b_eq,  A_le x <= b_le,  lb <= x <= ub``."""

    c: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    A_le: sp.csr_matrix
    b_le: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    names: Optional[tuple] = None
    row_names: Optional[tuple] = None

    @classmethod
    def build(
        cls,
        c,
        A_eq=None,
        b_eq=None,
        A_le=None,
        b_le=None,
        lb=None,
        ub=None,
        names: Optional[Sequence[str]] = None,
        row_names: Optional[Sequence[str]] = None,
    ) -> "LinearProgram":
        c = np.asarray(c, dtype=float).ravel()
        n = c.size
        A_eq = _as_csr(A_eq, n)
        A_le = _as_csr(A_le, n)
        b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
        b_le = np.zeros(0) if b_le is None else np.asarray(b_le, dtype=float).ravel()
        lb = np.zeros(n) if lb is None else np.broadcast_to(np.asarray(lb, dtype=float), (n,)).copy()
        ub = np.full(n, np.inf) if ub is None else np.broadcast_to(np.asarray(ub, dtype=float), (n,)).copy()
        lp = cls(c, A_eq, b_eq, A_le, b_le, lb, ub,
                 tuple(names) if names is not None else None,
                 tuple(row_names) if row_names is not None else None)
        lp.validate()
        return lp

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m_eq(self) -> int:
        return self.A_eq.shape[0]

    @property
    def m_le(self) -> int:
        return self.A_le.shape[0]

    def validate(self) -> None:
        n = self.n
        if self.A_eq.shape[1] != n or self.A_le.shape[1] != n:
            raise LPError(f"constraint matrices must have {n} columns")
        if self.b_eq.size != self.m_eq or self.b_le.size != self.m_le:
            raise LPError("right-hand side length does not match row count")
        if self.lb.size != n or self.ub.size != n:
            raise LPError("bound vectors must have one entry per variable")
        for name, arr in (("c", self.c), ("b_eq", self.b_eq), ("b_le", self.b_le),
                          ("A_eq", self.A_eq.data), ("A_le", self.A_le.data)):
            if not np.all(np.isfinite(arr)):
                raise LPError(f"{name} contains non-finite entries")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)):
            raise LPError("bounds contain NaN")
        if np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise LPError("lower bound +inf or upper bound -inf")
        if self.names is not None and len(self.names) != n:
            raise LPError("names must have one entry per variable")

    def with_bounds(self, lb=None, ub=None) -> "LinearProgram":
        return replace(self,
                       lb=self.lb if lb is None else np.asarray(lb, dtype=float),
                       ub=self.ub if ub is None else np.asarray(ub, dtype=float))

    def with_objective(self, c) -> "LinearProgram":
        return replace(self, c=np.asarray(c, dtype=float))

    def primal_residuals(self, x: np.ndarray) -> dict:
        req = self.A_eq @ x - self.b_eq
        rle = self.A_le @ x - self.b_le
        return {
            "eq": float(np.max(np.abs(req), initial=0.0)),
            "le": float(np.max(rle, initial=0.0)),
            "bounds": float(max(np.max(self.lb - x, initial=0.0), np.max(x - self.ub, initial=0.0))),
        }


@dataclass(frozen=True)
class Basis:
    """Warm-start snapshot of a simplex basis over the internal columns."""

    n: int
    m_eq: int
    m_le: int
    basic: np.ndarray
    status: np.ndarray


@dataclass
class LPSolution:
    """Primal/dual result of :func:`solve_lp`.

    Duals follow ``c - A_eq' y_eq + A_le' y_le = reduced_costs`` with
    ``y_le >= 0`` (a price on each ``<=`` row).
    """

    status: Status
    x: np.ndarray
    y_eq: np.ndarray
    y_le: np.ndarray
    reduced_costs: np.ndarray
    objective: float
    iterations: int = 0
    basis: Optional[Basis] = None
    certificate: Optional[dict] = None
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == Status.OPTIMAL


def dual_objective(lp: LinearProgram, sol: LPSolution, tol: float = 1e-9) -> float:
    rc = sol.reduced_costs
    pos = np.where(rc > tol, rc, 0.0)
    neg = np.where(rc < -tol, rc, 0.0)
    lo = np.where(pos != 0.0, lp.lb, 0.0)
    hi = np.where(neg != 0.0, lp.ub, 0.0)
    # a bound-free variable with |rc| <= tol contributes nothing
    return float(lp.b_eq @ sol.y_eq - lp.b_le @ sol.y_le + pos @ np.nan_to_num(lo) + neg @ np.nan_to_num(hi))


def farkas_gap(lp: LinearProgram, y_eq: np.ndarray, y_le: np.ndarray) -> float:
    """Margin by which ``(y_eq, y_le)`` certifies infeasibility.

    Positive iff ``y.b > sup { y.(A x + s) : lb <= x <= ub, s >= 0 }`` where
    ``s`` are the slacks of the ``<=`` rows; ``-inf`` if the supremum is
    unbounded.
    """
    if np.any(y_le > 1e-12):
        return -np.inf
    coef = lp.A_eq.T @ y_eq + lp.A_le.T @ y_le
    small = np.abs(coef) <= 1e-12
    sup = 0.0
    for k in np.flatnonzero(~small):
        a = coef[k]
        bound = lp.ub[k] if a > 0 else lp.lb[k]
        if not np.isfinite(bound):
            return -np.inf
        sup += a * bound
    return float(lp.b_eq @ y_eq + lp.b_le @ y_le - sup)
