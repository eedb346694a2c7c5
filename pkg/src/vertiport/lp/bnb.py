"""Best-bound-first branch-and-bound over binary variables."""
from __future__ import annotations

import heapq
import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import LinearProgram, LPError, LPOptions, LPSolution, Status
from .simplex import solve_lp

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MixedBinaryProgram:
    lp: LinearProgram
    binaries: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.binaries, dtype=np.int64).ravel()
        if idx.size and (idx.min() < 0 or idx.max() >= self.lp.n):
            raise LPError("binary index out of range")
        if np.unique(idx).size != idx.size:
            raise LPError("duplicate binary index")
        object.__setattr__(self, "binaries", idx)
        lb = self.lp.lb.copy()
        ub = self.lp.ub.copy()
        lb[idx] = np.maximum(lb[idx], 0.0)
        ub[idx] = np.minimum(ub[idx], 1.0)
        object.__setattr__(self, "lp", self.lp.with_bounds(lb, ub))


@dataclass(frozen=True)
class MBPOptions:
    rel_gap: float = 1e-6
    node_limit: int = 200_000
    int_tol: float = 1e-6
    lex_ties: bool = True
    lp: LPOptions = field(default_factory=LPOptions)


@dataclass
class MBPResult:
    status: Status
    solution: Optional[LPSolution]
    assignment: Optional[np.ndarray]
    objective: float
    bound: float
    gap: float
    nodes: int
    wall_time: float
    bound_history: list = field(default_factory=list)
    incumbent_history: list = field(default_factory=list)


def _rel(a: float, b: float) -> float:
    return (a - b) / max(1.0, abs(a))


def solve_mbp(mbp: MixedBinaryProgram, opts: MBPOptions | None = None) -> MBPResult:
    """Minimise a mixed-binary program to a certified relative gap.

    Branches on the most fractional binary (lowest index on ties), down
    child first; among solutions whose objectives agree to within the gap
    tolerance the lexicographically smallest binary assignment wins.
    """
    opts = opts or MBPOptions()
    t0 = time.perf_counter()
    lp, idx = mbp.lp, mbp.binaries
    root = solve_lp(lp, opts.lp)
    if root.status != Status.OPTIMAL:
        return MBPResult(root.status, root, None, float("nan"), float("nan"), float("inf"), 1,
                         time.perf_counter() - t0)

    counter = itertools.count()
    heap = [(root.objective, next(counter), lp.lb[idx].copy(), lp.ub[idx].copy(), root)]
    inc_obj = np.inf
    inc_sol: Optional[LPSolution] = None
    inc_assign: Optional[tuple] = None
    nodes = 1
    pruned_lb = np.inf
    lb_hist: list = []
    inc_hist: list = []
    last_lb = -np.inf
    hit_limit = False

    def tie_tol():
        return opts.rel_gap * max(1.0, abs(inc_obj)) if np.isfinite(inc_obj) else 0.0

    cands: list = []  # every integral (objective, assignment, solution) found

    def offer(obj, assign, sol):
        nonlocal inc_obj, inc_sol, inc_assign
        cands.append((obj, tuple(int(a) for a in assign), sol))
        best = min(c[0] for c in cands)
        tol = opts.rel_gap * max(1.0, abs(best))
        if opts.lex_ties:
            pick = min((c for c in cands if c[0] <= best + tol), key=lambda c: c[1])
        else:
            pick = min(cands, key=lambda c: c[0])
        if pick[2] is not inc_sol:
            log.debug("incumbent %.9g at node %d", pick[0], nodes)
        # pruning works against the best value; the reported point is the pick
        inc_obj, inc_assign, inc_sol = best, pick[1], pick[2]
        inc_hist.append(pick[0])

    def branch(k, side, lo, hi, parent, bound):
        nonlocal nodes, pruned_lb
        clo, chi = lo.copy(), hi.copy()
        clo[k] = chi[k] = side
        lb = lp.lb.copy()
        ub = lp.ub.copy()
        lb[idx], ub[idx] = clo, chi
        child = solve_lp(lp.with_bounds(lb, ub), opts.lp, warm=parent.basis)
        nodes += 1
        if child.status == Status.OPTIMAL:
            cb = max(child.objective, bound)
            if inc_sol is None or cb < inc_obj + tie_tol():
                heapq.heappush(heap, (cb, next(counter), clo, chi, child))
            else:
                pruned_lb = min(pruned_lb, cb)
        elif child.status != Status.INFEASIBLE:
            log.warning("node LP ended with status %s; treated as pruned", child.status.value)

    while heap:
        bound, _, lo, hi, sol = heapq.heappop(heap)
        last_lb = max(last_lb, bound)
        lb_hist.append(last_lb)
        if inc_sol is not None and bound >= inc_obj - tie_tol():
            can_tie = (opts.lex_ties and bound <= inc_obj + tie_tol()
                       and tuple(int(v) for v in lo) < inc_assign)
            if not can_tie:
                pruned_lb = min(pruned_lb, bound)
                continue
        xb = sol.x[idx]
        frac = np.minimum(xb - np.floor(xb), np.ceil(xb) - xb)
        frac = np.where(np.abs(xb - np.round(xb)) <= opts.int_tol, 0.0, frac)
        if not np.any(frac > 0):
            assign = np.round(xb).astype(np.int64)
            if np.any(xb != assign):
                fixed = lp.with_bounds(*_fix(lp, idx, assign))
                polished = solve_lp(fixed, opts.lp, warm=sol.basis)
                nodes += 1
                if polished.status == Status.OPTIMAL:
                    offer(polished.objective, assign, polished)
            else:
                offer(sol.objective, assign, sol)
            if not opts.lex_ties:
                continue
            # a tied optimum may hide behind a free binary sitting at 1:
            # split on the first one so smaller assignments get examined
            ones = np.flatnonzero((lo != hi) & (assign == 1))
            if ones.size == 0 or nodes >= opts.node_limit:
                continue
            k = int(ones[0])
            branch(k, 0, lo, hi, sol, bound)
            clo, chi = lo.copy(), hi.copy()
            clo[k] = chi[k] = 1
            heapq.heappush(heap, (bound, next(counter), clo, chi, sol))
            continue
        if nodes >= opts.node_limit:
            hit_limit = True
            heapq.heappush(heap, (bound, next(counter), lo, hi, sol))
            break
        k = int(np.argmax(frac))  # first maximum = lowest index on ties
        branch(k, 0, lo, hi, sol, bound)
        branch(k, 1, lo, hi, sol, bound)

    wall = time.perf_counter() - t0
    if inc_sol is None:
        status = Status.NODE_LIMIT if hit_limit else Status.INFEASIBLE
        return MBPResult(status, None, None, float("nan"), last_lb, float("inf"), nodes, wall,
                         lb_hist, inc_hist)
    pick_obj = inc_hist[-1]
    open_lb = min([h[0] for h in heap] + [pruned_lb, inc_obj])
    gap = max(0.0, _rel(pick_obj, open_lb))
    status = Status.NODE_LIMIT if hit_limit else Status.OPTIMAL
    return MBPResult(status, inc_sol, np.array(inc_assign, dtype=np.int64), pick_obj,
                     min(open_lb, pick_obj), gap, nodes, wall, lb_hist, inc_hist)


def _fix(lp: LinearProgram, idx: np.ndarray, assign: np.ndarray):
    lb = lp.lb.copy()
    ub = lp.ub.copy()
    lb[idx] = assign
    ub[idx] = assign
    return lb, ub
