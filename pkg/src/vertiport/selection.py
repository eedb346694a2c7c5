"""Vertiport location and capacity selection.

Three solvers share one constraint model: the exact mixed-binary program
(equilibrium certificate linearised with a big-M), exhaustive enumeration of
feasible selections, and a demand-weighted knapsack baseline.
"""
from __future__ import annotations

import logging
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .equilibrium import (Equilibrium, EquilibriumError, EquilibriumOptions, InfeasibleDemand,
                          build_equilibrium, solve_equilibrium, verify_kkt)
from .lp import LinearProgram, LPOptions, MBPOptions, MixedBinaryProgram, Status, solve_mbp
from .netmodel import (DemandTable, HybridNetwork, IncidenceMatrices, ValidationError,
                       build_incidence)

log = logging.getLogger(__name__)


class SelectionError(RuntimeError):
    pass


class SelectionInfeasible(SelectionError):
    """No selection satisfies the budget and logical constraints, or the
    ground network alone cannot carry the demand."""


class OracleCapExceeded(SelectionError):
    pass


class BigMWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SelectionProblem:
    net: HybridNetwork
    inc: IncidenceMatrices
    demand: DemandTable
    G: np.ndarray
    K: np.ndarray
    A: np.ndarray
    b: np.ndarray
    gamma: float
    omega: float = 0.0
    mu: Optional[float] = None

    def __post_init__(self):
        for name in ("G", "K", "A", "b"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.A.size == 0:
            object.__setattr__(self, "A", self.A.reshape(0, self.n_v * self.n_c))
        self.validate()

    @classmethod
    def from_config(cls, net: HybridNetwork, demand: DemandTable, cfg, *, gamma=None, omega=None,
                    mu=None) -> "SelectionProblem":
        """Combine a network, demand and :class:`ScenarioConfig`; keyword
        overrides win over the config."""
        if tuple(net.vertiports) != tuple(cfg.vertiports):
            raise ValidationError("scenario vertiports differ from the network's", "vertiports")
        return cls(net, build_incidence(net), demand, cfg.G, cfg.K, cfg.A, cfg.b,
                   float(cfg.gamma if gamma is None else gamma),
                   float(cfg.omega if omega is None else omega),
                   cfg.mu if mu is None else float(mu))

    @property
    def n_v(self) -> int:
        return self.net.n_v

    @property
    def n_c(self) -> int:
        return self.G.shape[1] if self.G.ndim == 2 else 0

    @property
    def n_b(self) -> int:
        return self.A.shape[0]

    def validate(self) -> None:
        n_v = self.net.n_v
        if self.G.ndim != 2 or self.G.shape[0] != n_v or self.K.shape != self.G.shape:
            raise ValidationError(f"G and K must both be {n_v} x n_c", "G")
        if n_v and self.n_c < 1:
            raise ValidationError("need at least one capacity option", "G")
        for i, row in enumerate(self.G, start=1):
            if np.any(row <= 0) or np.any(np.diff(row) <= 0):
                raise ValidationError(
                    f"capacity options of vertiport {i} must be positive and strictly increasing",
                    "G", i)
        if np.any(self.K < 0):
            raise ValidationError("selection costs must be >= 0", "K")
        if self.A.shape[1] != n_v * self.n_c or self.b.shape != (self.A.shape[0],):
            raise ValidationError("logical rows must have n_v*n_c columns and one bound each", "A")
        if not (self.gamma >= 0 and self.omega >= 0):
            raise ValidationError("gamma and omega must be >= 0", "gamma")
        if self.mu is not None and not self.mu > 0:
            raise ValidationError("mu must be positive", "mu")

    def with_gamma(self, gamma: float) -> "SelectionProblem":
        return replace(self, gamma=float(gamma))

    def cost(self, B: np.ndarray) -> float:
        return float(np.sum(self.K * B))


@dataclass(frozen=True)
class SelectionOptions:
    rel_gap: float = 1e-6
    node_limit: int = 200_000
    int_tol: float = 1e-6
    lp: LPOptions = field(default_factory=LPOptions)
    verify_tol: float = 1e-6
    mu_safety: float = 10.0
    max_mu_retries: int = 3
    oracle_cap: int = 4096
    jobs: int = 1


@dataclass
class SelectionSolution:
    B: np.ndarray
    g: np.ndarray
    equilibrium: Equilibrium
    loading: float
    cost: float
    objective: float
    method: str
    Y: Optional[np.ndarray] = None
    gap: float = 0.0
    nodes: int = 0
    wall_time: float = 0.0
    mu: Optional[float] = None
    extra: dict = field(default_factory=dict)

    @property
    def selected(self) -> list:
        """``(vertiport position, option)`` pairs, both 1-based."""
        return [(int(i) + 1, int(c) + 1) for i, c in zip(*np.nonzero(self.B))]


def capacity_from_selection(B, G) -> np.ndarray:
    B = np.asarray(B)
    G = np.asarray(G, dtype=float)
    if B.shape != G.shape:
        raise ValidationError(f"selection matrix must be {G.shape}, got {B.shape}", "B")
    if not np.all((B == 0) | (B == 1)):
        raise ValidationError("selection matrix must be binary", "B")
    if np.any(B.sum(axis=1) > 1):
        raise ValidationError("at most one capacity option per vertiport", "B")
    return (G * B).sum(axis=1)


def is_feasible_selection(problem: SelectionProblem, B, tol: float = 1e-9) -> bool:
    B = np.asarray(B, dtype=float)
    if np.any(B.sum(axis=1) > 1):
        return False
    if problem.cost(B) > problem.gamma + tol * (1 + problem.gamma):
        return False
    return bool(np.all(problem.A @ B.ravel() <= problem.b + tol * (1 + np.abs(problem.b))))


def _digits_to_B(digits: np.ndarray, n_c: int) -> np.ndarray:
    B = np.zeros((digits.size, n_c), dtype=np.int64)
    rows = np.flatnonzero(digits > 0)
    B[rows, n_c - digits[rows]] = 1
    return B


def _feasible_digits(problem: SelectionProblem, cap: int):
    return _kernels.enumerate_selections(problem.n_v, problem.n_c, np.ascontiguousarray(problem.K),
                                         np.ascontiguousarray(problem.A), np.ascontiguousarray(problem.b),
                                         float(problem.gamma), 1e-9, int(cap))


def enumerate_feasible_selections(problem: SelectionProblem, cap: Optional[int] = None) -> Iterator[np.ndarray]:
    """Yield every feasible selection matrix in lexicographic vec(B) order.

    With ``cap`` set, raises :class:`OracleCapExceeded` once more than
    ``cap`` selections exist.
    """
    limit = cap if cap is not None else (problem.n_c + 1) ** problem.n_v
    digits, truncated = _feasible_digits(problem, limit)
    if truncated:
        raise OracleCapExceeded(f"more than {cap} feasible selections; use the MILP solver instead")
    for row in digits:
        yield _digits_to_B(row, problem.n_c)


def ground_baseline(problem: SelectionProblem, opts: Optional[SelectionOptions] = None) -> Equilibrium:
    """Equilibrium with every vertiport closed; failure means the ground
    network alone cannot carry the demand."""
    opts = opts or SelectionOptions()
    try:
        return solve_equilibrium(problem.net, problem.inc, problem.demand, np.zeros(problem.n_v),
                                 EquilibriumOptions(lp=opts.lp, verify_tol=opts.verify_tol))
    except InfeasibleDemand as exc:
        raise SelectionInfeasible(
            "ground network cannot carry the demand with all vertiports closed "
            "(capacity deficit); check link capacities or scale demand down") from exc


def potential_spread(eq: Equilibrium, demand: DemandTable) -> float:
    """Largest node-potential spread over the nodes each destination's
    demand touches."""
    spread = 0.0
    for j in range(demand.n_d):
        rows = np.flatnonzero(demand.S[:, j] != 0)
        if rows.size:
            col = eq.V[rows, j]
            spread = max(spread, float(col.max() - col.min()))
    return spread


def choose_big_m(problem: SelectionProblem, opts: Optional[SelectionOptions] = None,
                 baseline: Optional[Equilibrium] = None) -> tuple:
    """Return ``(mu, info)``.

    The bound is ``safety * q_bar * max_i G[i, -1]`` where ``q_bar`` is the
    ground-only potential spread (floored at the longest free travel time).
    A ``mu`` set on the problem wins, with a warning when it is below the
    computed bound.
    """
    opts = opts or SelectionOptions()
    if problem.n_v == 0:
        return 1.0, {"q_bar": 0.0, "computed": 1.0, "override": problem.mu}
    base = baseline if baseline is not None else ground_baseline(problem, opts)
    q_bar = max(potential_spread(base, problem.demand), float(np.max(problem.net.free_time, initial=0.0)), 1e-9)
    computed = opts.mu_safety * q_bar * float(np.max(problem.G[:, -1]))
    info = {"q_bar": q_bar, "computed": computed, "override": problem.mu}
    if problem.mu is not None:
        if problem.mu < computed:
            warnings.warn(f"big-M override {problem.mu:g} is below the computed bound {computed:g}",
                          BigMWarning, stacklevel=2)
        return float(problem.mu), info
    return computed, info


@dataclass(frozen=True)
class MilpLayout:
    n_l: int
    n_n: int
    n_d: int
    n_v: int
    n_c: int

    @property
    def X(self) -> slice:
        return slice(0, self.n_l * self.n_d)

    @property
    def U(self) -> slice:
        s = self.X.stop
        return slice(s, s + self.n_l * self.n_d)

    @property
    def V(self) -> slice:
        s = self.U.stop
        return slice(s, s + self.n_n * self.n_d)

    @property
    def p(self) -> slice:
        s = self.V.stop
        return slice(s, s + self.n_l)

    @property
    def q(self) -> slice:
        s = self.p.stop
        return slice(s, s + self.n_v)

    @property
    def Y(self) -> slice:
        s = self.q.stop
        return slice(s, s + self.n_v * self.n_c)

    @property
    def B(self) -> slice:
        s = self.Y.stop
        return slice(s, s + self.n_v * self.n_c)

    @property
    def n(self) -> int:
        return self.B.stop

    def unpack(self, x: np.ndarray) -> dict:
        return {
            "X": x[self.X].reshape(self.n_d, self.n_l).T,
            "U": x[self.U].reshape(self.n_d, self.n_l).T,
            "V": x[self.V].reshape(self.n_d, self.n_n).T,
            "p": x[self.p],
            "q": x[self.q],
            "Y": x[self.Y].reshape(self.n_v, self.n_c),
            "B": x[self.B].reshape(self.n_v, self.n_c),
        }


def _place(blocks: dict, layout: MilpLayout, rows: int) -> sp.csr_matrix:
    """Stitch per-variable-block matrices into one row block."""
    parts = []
    for name in ("X", "U", "V", "p", "q", "Y", "B"):
        sl = getattr(layout, name)
        width = sl.stop - sl.start
        parts.append(blocks[name] if name in blocks else sp.csr_matrix((rows, width)))
    return sp.hstack(parts, format="csr")


def assemble_selection_milp(problem: SelectionProblem, mu: float) -> tuple:
    """Return ``(MixedBinaryProgram, MilpLayout)`` for the selection MILP.

    Potentials are pinned to 0 at each destination; that removes the
    per-column additive freedom of ``V`` without changing any constraint.
    """
    net, inc, dem = problem.net, problem.inc, problem.demand
    n_l, n_n, n_d, n_v, n_c = net.n_links, net.n_nodes, dem.n_d, net.n_v, problem.n_c
    L = MilpLayout(n_l, n_n, n_d, n_v, n_c)
    E, D = inc.E, inc.D
    c, f = net.free_time, net.capacity
    G = problem.G
    eye_d = sp.identity(n_d, format="csr")
    ones_row = sp.csr_matrix(np.ones((1, n_d)))
    ones_col = sp.csr_matrix(np.ones((n_d, 1)))
    nvc = n_v * n_c
    # B_ic / Y_ic (row-major) -> vertiport i
    owner = sp.csr_matrix((np.ones(nvc), (np.arange(nvc), np.repeat(np.arange(n_v), n_c))), shape=(nvc, n_v))
    Gdiag = sp.diags(G.ravel())
    eye_vc = sp.identity(nvc, format="csr")

    eq_rows = [
        _place({"X": sp.kron(eye_d, E)}, L, n_n * n_d),
        _place({"U": sp.identity(n_l * n_d), "V": sp.kron(eye_d, E.T),
                "p": -sp.kron(ones_col, sp.identity(n_l)), "q": -sp.kron(ones_col, D.T)}, L, n_l * n_d),
        _place({"X": sp.csr_matrix(np.tile(c, n_d)[None, :]), "p": sp.csr_matrix(f[None, :]),
                "Y": sp.csr_matrix(np.ones((1, nvc))), "V": sp.csr_matrix(-dem.S.T.ravel()[None, :])}, L, 1),
    ]
    b_eq = np.concatenate([dem.S.T.ravel(), np.tile(c, n_d), [0.0]])

    le_rows = [
        _place({"X": sp.kron(ones_row, sp.identity(n_l))}, L, n_l),                  # X1 <= f
        _place({"X": sp.kron(ones_row, D), "B": -(owner.T @ Gdiag)}, L, n_v),        # DX1 <= (G.B)1
        _place({"Y": eye_vc, "q": -(Gdiag @ owner)}, L, nvc),                        # Y <= G.q1'
        _place({"Y": -eye_vc, "q": Gdiag @ owner, "B": mu * eye_vc}, L, nvc),       # G.q1' - Y <= mu(1 - B)
        _place({"Y": eye_vc, "B": -mu * eye_vc}, L, nvc),                            # Y <= mu B
        _place({"B": owner.T.tocsr()}, L, n_v),                                      # B1 <= 1
        _place({"B": sp.csr_matrix(problem.K.ravel()[None, :])}, L, 1),              # budget
        _place({"B": sp.csr_matrix(problem.A)}, L, problem.n_b),                     # logical
    ]
    b_le = np.concatenate([f, np.zeros(n_v), np.zeros(nvc), np.full(nvc, mu), np.zeros(nvc),
                           np.ones(n_v), [problem.gamma], problem.b])

    cost = np.zeros(L.n)
    cost[L.X] = np.tile(c, n_d)
    cost[L.p] = f
    cost[L.Y] = 1.0
    cost[L.B] = problem.omega * problem.K.ravel()
    lb = np.zeros(L.n)
    ub = np.full(L.n, np.inf)
    lb[L.V] = -np.inf
    pins = np.array([L.V.start + j * n_n + (s - 1) for j, s in enumerate(dem.destinations)], dtype=np.int64)
    lb[pins] = 0.0
    ub[pins] = 0.0
    ub[L.B] = 1.0
    lp = LinearProgram.build(cost, sp.vstack(eq_rows, format="csr"), b_eq,
                             sp.vstack(le_rows, format="csr"), b_le, lb, ub)
    binaries = np.arange(L.B.start, L.B.stop)
    return MixedBinaryProgram(lp, binaries), L


def _finish(problem: SelectionProblem, B: np.ndarray, eq: Equilibrium, method: str, opts: SelectionOptions,
            **kw) -> SelectionSolution:
    g = capacity_from_selection(B, problem.G)
    if eq.residuals is None:
        eq.residuals = verify_kkt(problem.net, problem.inc, problem.demand, g, eq, opts.verify_tol)
    loading = eq.objective + eq.capacity_value(problem.net.capacity)
    cost = problem.cost(B)
    return SelectionSolution(B=B, g=g, equilibrium=eq, loading=loading, cost=cost,
                             objective=loading + problem.omega * cost, method=method, **kw)


def evaluate_selection(problem: SelectionProblem, B, opts: Optional[SelectionOptions] = None,
                       warm: Optional[Equilibrium] = None) -> SelectionSolution:
    """Combined objective of one fixed selection: refined equilibrium
    loading plus weighted selection cost."""
    opts = opts or SelectionOptions()
    B = np.asarray(B, dtype=np.int64).reshape(problem.n_v, problem.n_c)
    g = capacity_from_selection(B, problem.G)
    t0 = time.perf_counter()
    eq = solve_equilibrium(problem.net, problem.inc, problem.demand, g,
                           EquilibriumOptions(lp=opts.lp, verify_tol=opts.verify_tol), warm=warm)
    return _finish(problem, B, eq, "fixed", opts, wall_time=time.perf_counter() - t0)


def _big_m_active(parts: dict, G: np.ndarray, mu: float, tol: float = 1e-6) -> bool:
    gq = G * parts["q"][:, None]
    B = np.round(parts["B"])
    near = mu * (1.0 - tol)
    return bool(np.any(gq[B == 0] >= near) or np.any(parts["Y"][B == 1] >= near))


def solve_selection(problem: SelectionProblem, opts: Optional[SelectionOptions] = None) -> SelectionSolution:
    """Globally optimal selection via branch-and-bound on the MILP.

    When the big-M bound is active at the optimum the solve is repeated
    with a ten times larger constant, up to ``opts.max_mu_retries`` times.
    """
    opts = opts or SelectionOptions()
    t0 = time.perf_counter()
    base = ground_baseline(problem, opts)
    mu, info = choose_big_m(problem, opts, base)
    mbp_opts = MBPOptions(rel_gap=opts.rel_gap, node_limit=opts.node_limit, int_tol=opts.int_tol, lp=opts.lp)
    history = []
    prev_obj = None
    nodes = 0
    for attempt in range(opts.max_mu_retries + 1):
        mbp, layout = assemble_selection_milp(problem, mu)
        res = solve_mbp(mbp, mbp_opts)
        nodes += res.nodes
        history.append({"mu": mu, "status": res.status.value, "objective": res.objective, "nodes": res.nodes})
        if res.status == Status.INFEASIBLE:
            raise SelectionInfeasible("no selection satisfies the budget and logical constraints")
        if res.solution is None:
            raise SelectionError(f"selection MILP stopped without a solution ({res.status.value})")
        parts = layout.unpack(res.solution.x)
        active = _big_m_active(parts, problem.G, mu)
        same = prev_obj is not None and abs(res.objective - prev_obj) <= opts.rel_gap * (1 + abs(prev_obj))
        if not active or same or attempt == opts.max_mu_retries:
            if active and not same:
                log.warning("big-M bound still active after %d retries (mu=%g)", attempt, mu)
            break
        log.info("big-M bound active at mu=%g; retrying with %g", mu, 10 * mu)
        prev_obj = res.objective
        mu *= 10.0

    B = np.round(parts["B"]).astype(np.int64)
    g = capacity_from_selection(B, problem.G)
    eq = build_equilibrium(problem.net, problem.inc, problem.demand, g,
                           np.maximum(parts["X"], 0.0), parts["V"], np.maximum(parts["p"], 0.0),
                           np.maximum(parts["q"], 0.0), parts["U"], refined=True,
                           iterations=res.solution.iterations)
    sol = _finish(problem, B, eq, "milp", opts, Y=parts["Y"], gap=res.gap, nodes=nodes,
                  wall_time=time.perf_counter() - t0, mu=mu)
    sol.extra.update(milp_objective=res.objective, bound=res.bound, status=res.status.value,
                     mu_info=info, attempts=history, big_m_active=active,
                     bound_history=res.bound_history, incumbent_history=res.incumbent_history)
    return sol


def linearization_residuals(sol: SelectionSolution, G: np.ndarray) -> dict:
    """How far ``Y`` is from ``G * q * B`` elementwise and in total."""
    q = sol.equilibrium.q
    target = G * q[:, None] * sol.B
    gq = float(sol.g @ q)
    return {"max_abs": float(np.max(np.abs(sol.Y - target), initial=0.0)),
            "total": abs(float(sol.Y.sum()) - gq), "gq": gq}


def _oracle_chunk(args):
    # every selection warm-starts from the same baseline so results do not
    # depend on how the selections are split across workers
    problem, digits, opts, warm = args
    out = []
    for row in digits:
        B = _digits_to_B(row, problem.n_c)
        g = (problem.G * B).sum(axis=1)
        try:
            eq = solve_equilibrium(problem.net, problem.inc, problem.demand, g,
                                   EquilibriumOptions(lp=opts.lp, check=False), warm=warm)
        except InfeasibleDemand:
            out.append(math.inf)
            continue
        out.append(eq.objective + eq.capacity_value(problem.net.capacity) + problem.omega * problem.cost(B))
    return out


def solve_selection_oracle(problem: SelectionProblem, opts: Optional[SelectionOptions] = None,
                           jobs: Optional[int] = None) -> SelectionSolution:
    """Exhaustive search: one refined equilibrium per feasible selection.

    Ties (relative 1e-9) go to the lexicographically smallest vec(B). The
    result does not depend on ``jobs``.
    """
    opts = opts or SelectionOptions()
    jobs = opts.jobs if jobs is None else jobs
    t0 = time.perf_counter()
    base = ground_baseline(problem, opts)
    digits, truncated = _feasible_digits(problem, opts.oracle_cap)
    if truncated:
        raise OracleCapExceeded(f"more than {opts.oracle_cap} feasible selections; use the MILP solver instead")
    if digits.shape[0] == 0:
        raise SelectionInfeasible("no selection satisfies the budget and logical constraints")
    jobs = max(1, min(int(jobs), digits.shape[0]))
    if jobs == 1:
        objs = _oracle_chunk((problem, digits, opts, base))
    else:
        chunks = np.array_split(digits, jobs)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(_oracle_chunk, [(problem, ch, opts, base) for ch in chunks])
            objs = [v for part in parts for v in part]
    best = None
    for idx, val in enumerate(objs):
        if best is None or val < objs[best] - 1e-9 * (1.0 + abs(objs[best])):
            best = idx
    if not math.isfinite(objs[best]):
        raise SelectionInfeasible("no selection admits a feasible equilibrium")
    B = _digits_to_B(digits[best], problem.n_c)
    sol = evaluate_selection(problem, B, opts)
    sol.method = "oracle"
    sol.wall_time = time.perf_counter() - t0
    sol.extra.update(evaluated=len(objs), objectives=objs)
    return sol


def demand_value_vector(demand: DemandTable, vertiports) -> np.ndarray:
    """Total demand attracted to each vertiport node."""
    col = {s: j for j, s in enumerate(demand.destinations)}
    w = np.zeros(len(vertiports))
    for k, v in enumerate(vertiports):
        if v not in col:
            raise ValidationError(f"vertiport node {v} is not a destination node", "vertiports", v)
        w[k] = abs(demand.S[v - 1, col[v]])
    return w


def solve_knapsack(problem: SelectionProblem, w: Optional[np.ndarray] = None,
                   opts: Optional[SelectionOptions] = None) -> SelectionSolution:
    """Baseline: maximise the demand-weighted capacity ``w.g`` under the same
    budget and logical rules, then evaluate the induced equilibrium."""
    opts = opts or SelectionOptions()
    t0 = time.perf_counter()
    if w is None:
        w = demand_value_vector(problem.demand, problem.net.vertiports)
    w = np.asarray(w, dtype=float).ravel()
    if w.size != problem.n_v:
        raise ValidationError(f"value vector must have {problem.n_v} entries", "w")
    n_v, n_c = problem.n_v, problem.n_c
    nvc = n_v * n_c
    owner = sp.csr_matrix((np.ones(nvc), (np.repeat(np.arange(n_v), n_c), np.arange(nvc))), shape=(n_v, nvc))
    A_le = sp.vstack([owner, sp.csr_matrix(problem.K.ravel()[None, :]), sp.csr_matrix(problem.A)], format="csr")
    b_le = np.concatenate([np.ones(n_v), [problem.gamma], problem.b])
    lp = LinearProgram.build(-(w[:, None] * problem.G).ravel(), A_le=A_le, b_le=b_le, lb=0.0, ub=1.0)
    res = solve_mbp(MixedBinaryProgram(lp, np.arange(nvc)),
                    MBPOptions(rel_gap=opts.rel_gap, node_limit=opts.node_limit, int_tol=opts.int_tol, lp=opts.lp))
    if res.status == Status.INFEASIBLE:
        raise SelectionInfeasible("no selection satisfies the budget and logical constraints")
    if res.assignment is None:
        raise SelectionError(f"knapsack stopped without a solution ({res.status.value})")
    B = res.assignment.reshape(n_v, n_c)
    try:
        sol = evaluate_selection(problem, B, opts)
    except InfeasibleDemand as exc:
        raise SelectionInfeasible("ground network cannot carry the demand") from exc
    except EquilibriumError:
        raise
    sol.method = "knapsack"
    sol.gap = res.gap
    sol.nodes = res.nodes
    sol.wall_time = time.perf_counter() - t0
    sol.extra.update(value_vector=w.tolist(), knapsack_value=-res.objective)
    return sol


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
