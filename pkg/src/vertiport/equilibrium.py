"""Capacity-constrained static equilibria: LP assembly, duals, certificates.

Flows are stored destination-major in the LP, i.e. entry ``[X]_{kj}`` is
variable ``j * n_l + k`` and node potential ``[V]_{ij}`` is equality row
``j * n_n + i``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .lp import Basis, LinearProgram, LPOptions, LPSolution, Status, solve_lp
from .netmodel import (DemandTable, HybridNetwork, IncidenceMatrices, ResidualReport,
                       ValidationError)

log = logging.getLogger(__name__)


class EquilibriumError(RuntimeError):
    pass


class InfeasibleDemand(EquilibriumError):
    """The demand cannot be routed within the link and vertiport capacities."""

    def __init__(self, message: str, certificate: Optional[dict] = None):
        super().__init__(message)
        self.certificate = certificate or {}


@dataclass(frozen=True)
class EquilibriumOptions:
    lp: LPOptions = field(default_factory=LPOptions)
    refine: bool = True
    verify_tol: float = 1e-6
    check: bool = True


@dataclass
class Equilibrium:
    X: np.ndarray
    V: np.ndarray
    U: np.ndarray
    p: np.ndarray
    q: np.ndarray
    g: np.ndarray
    free_time: np.ndarray
    effective_cost: np.ndarray
    objective: float
    dual_value: float
    residuals: Optional[ResidualReport] = None
    refined: bool = False
    iterations: int = 0
    basis: Optional[Basis] = field(default=None, repr=False)
    refine_basis: Optional[Basis] = field(default=None, repr=False)

    @property
    def link_flow(self) -> np.ndarray:
        return self.X.sum(axis=1)

    @property
    def loading(self) -> float:
        return network_loading(self)

    def capacity_value(self, f: np.ndarray) -> float:
        """``f.p + g.q``: the congestion part of the certificate loading."""
        return float(np.dot(f, self.p) + np.dot(self.g, self.q))


def _dims(net: HybridNetwork, inc: IncidenceMatrices, demand: DemandTable, g) -> np.ndarray:
    g = np.asarray(g, dtype=float).ravel()
    if inc.E.shape != (net.n_nodes, net.n_links) or inc.D.shape != (net.n_v, net.n_links):
        raise ValidationError("incidence matrices do not match the network", "incidence")
    if demand.S.shape != (net.n_nodes, demand.n_d):
        raise ValidationError("demand matrix does not match the network", "S")
    if g.size != net.n_v:
        raise ValidationError(f"vertiport capacity vector must have {net.n_v} entries", "g")
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise ValidationError("vertiport capacities must be finite and >= 0", "g")
    return g


def assemble_equilibrium_lp(net: HybridNetwork, inc: IncidenceMatrices, demand: DemandTable,
                            g) -> LinearProgram:
    """Multicommodity flow LP: ``min c.X1`` s.t. ``EX = S``, ``X >= 0``,
    ``X1 <= f`` then ``DX1 <= g``."""
    g = _dims(net, inc, demand, g)
    n_d = demand.n_d
    eye_d = sp.identity(n_d, format="csr")
    ones_d = sp.csr_matrix(np.ones((1, n_d)))
    A_eq = sp.kron(eye_d, inc.E, format="csr")
    A_le = sp.vstack([sp.kron(ones_d, sp.identity(net.n_links), format="csr"),
                      sp.kron(ones_d, inc.D, format="csr")], format="csr")
    return LinearProgram.build(
        np.tile(net.free_time, n_d), A_eq, demand.S.T.ravel(), A_le,
        np.concatenate([net.capacity, g]), 0.0, np.inf)


def _effective_cost(net: HybridNetwork, inc: IncidenceMatrices, p, q) -> np.ndarray:
    return net.free_time + p + inc.D.T @ q


def build_equilibrium(net, inc, demand, g, X, V, p, q, U=None, **extra) -> Equilibrium:
    """Assemble an :class:`Equilibrium` from raw primal/dual parts; ``U`` is
    recomputed from dual feasibility when omitted."""
    g = np.asarray(g, dtype=float)
    cbar = _effective_cost(net, inc, p, q)
    if U is None:
        U = cbar[:, None] - inc.E.T @ V
    X = np.asarray(X, dtype=float)
    return Equilibrium(
        X=X, V=np.asarray(V, dtype=float), U=np.asarray(U, dtype=float),
        p=np.asarray(p, dtype=float), q=np.asarray(q, dtype=float), g=g,
        free_time=net.free_time, effective_cost=cbar,
        objective=float(net.free_time @ X.sum(axis=1)),
        dual_value=float(np.sum(V * demand.S)), **extra)


def refine_duals(net: HybridNetwork, inc: IncidenceMatrices, demand: DemandTable, g,
                 primal_obj: float, opts: Optional[LPOptions] = None,
                 warm: Optional[Basis] = None):
    """Dual optimum minimising ``f.p + g.q`` over the dual-optimal face.

    Returns ``(V, U, p, q, lp_solution)``.
    """
    g = _dims(net, inc, demand, g)
    n_n, n_l, n_v, n_d = net.n_nodes, net.n_links, net.n_v, demand.n_d
    f, c = net.capacity, net.free_time
    # potential rows: (E'V)_kj - p_k - (D'q)_k <= c_k
    A_pot = sp.hstack([
        sp.kron(sp.identity(n_d), inc.E.T),
        -sp.kron(sp.csr_matrix(np.ones((n_d, 1))), sp.identity(n_l)),
        -sp.kron(sp.csr_matrix(np.ones((n_d, 1))), inc.D.T),
    ], format="csr")
    # optimal face: tr(V'S) - f.p - g.q >= z*
    face = sp.csr_matrix(np.concatenate([-demand.S.T.ravel(), f, g])[None, :])
    A_le = sp.vstack([A_pot, face], format="csr")
    cost = np.concatenate([np.zeros(n_n * n_d), f, g])
    lb = np.concatenate([np.full(n_n * n_d, -np.inf), np.zeros(n_l + n_v)])
    # any slack on the face row is amplified in f.p + g.q, so it is only a fallback
    for slack in (0.0, 1e-9 * (1.0 + abs(primal_obj))):
        lp = LinearProgram.build(cost, A_le=A_le, b_le=np.concatenate([np.tile(c, n_d), [-primal_obj + slack]]),
                                 lb=lb, ub=np.inf)
        sol = solve_lp(lp, opts, warm=warm)
        if sol.status != Status.INFEASIBLE:
            break
        log.debug("optimal-face LP infeasible at slack %g", slack)
    if sol.status != Status.OPTIMAL:
        raise EquilibriumError(f"dual refinement failed: {sol.status.value} {sol.message}")
    V = sol.x[:n_n * n_d].reshape(n_d, n_n).T
    p = np.maximum(sol.x[n_n * n_d:n_n * n_d + n_l], 0.0)
    q = np.maximum(sol.x[n_n * n_d + n_l:], 0.0)
    U = _effective_cost(net, inc, p, q)[:, None] - inc.E.T @ V
    return V, U, p, q, sol


def solve_equilibrium(net: HybridNetwork, inc: IncidenceMatrices, demand: DemandTable, g,
                      opts: Optional[EquilibriumOptions] = None, warm: Optional[Equilibrium] = None
                      ) -> Equilibrium:
    """Solve the equilibrium LP and return flows with a verified certificate.

    Raises :class:`InfeasibleDemand` (with a Farkas certificate) when the
    capacities cannot carry the demand.
    """
    opts = opts or EquilibriumOptions()
    g = _dims(net, inc, demand, g)
    n_n, n_l, n_v, n_d = net.n_nodes, net.n_links, net.n_v, demand.n_d
    if n_d == 0:
        eq = build_equilibrium(net, inc, demand, g, np.zeros((n_l, 0)), np.zeros((n_n, 0)),
                               np.zeros(n_l), np.zeros(n_v), refined=opts.refine)
        eq.residuals = verify_kkt(net, inc, demand, g, eq, opts.verify_tol) if opts.check else None
        return eq
    lp = assemble_equilibrium_lp(net, inc, demand, g)
    sol = solve_lp(lp, opts.lp, warm=None if warm is None else warm.basis)
    if sol.status == Status.INFEASIBLE:
        raise InfeasibleDemand("demand exceeds network capacity", sol.certificate)
    if sol.status == Status.UNBOUNDED:
        raise EquilibriumError("equilibrium LP unbounded; free travel times must be >= 0")
    if sol.status != Status.OPTIMAL:
        raise EquilibriumError(f"equilibrium LP stopped: {sol.status.value} {sol.message}")
    X = np.maximum(sol.x.reshape(n_d, n_l).T, 0.0)
    iters = sol.iterations
    refine_basis = None
    if opts.refine:
        V, U, p, q, rsol = refine_duals(net, inc, demand, g, sol.objective, opts.lp,
                                        warm=None if warm is None else warm.refine_basis)
        iters += rsol.iterations
        refine_basis = rsol.basis
    else:
        V = sol.y_eq.reshape(n_d, n_n).T
        p = np.maximum(sol.y_le[:n_l], 0.0)
        q = np.maximum(sol.y_le[n_l:], 0.0)
        U = sol.reduced_costs.reshape(n_d, n_l).T
    eq = build_equilibrium(net, inc, demand, g, X, V, p, q, U, refined=opts.refine,
                           iterations=iters, basis=sol.basis, refine_basis=refine_basis)
    if opts.check:
        eq.residuals = verify_kkt(net, inc, demand, g, eq, opts.verify_tol)
        if not eq.residuals.passed:
            log.warning("equilibrium certificate failed checks: %s", ", ".join(eq.residuals.failures()))
    return eq


def verify_kkt(net: HybridNetwork, inc: IncidenceMatrices, demand: DemandTable, g,
               eq: Equilibrium, tol: float = 1e-6) -> ResidualReport:
    """Check every primal, dual, complementarity and gap condition of the
    equilibrium certificate; residuals are compared against ``tol * scale``."""
    g = np.asarray(g, dtype=float).ravel()
    S, E, D = demand.S, inc.E, inc.D
    X, V, U, p, q = eq.X, eq.V, eq.U, eq.p, eq.q
    n_l, n_d = net.n_links, demand.n_d
    shapes = {"X": (X.shape, (n_l, n_d)), "V": (V.shape, (net.n_nodes, n_d)), "U": (U.shape, (n_l, n_d)),
              "p": (p.shape, (n_l,)), "q": (q.shape, (net.n_v,)), "g": (g.shape, (net.n_v,))}
    for name, (got, want) in shapes.items():
        if got != want:
            raise ValidationError(f"{name} has shape {got}, expected {want}", name)
    c, f = net.free_time, net.capacity
    load = X.sum(axis=1)
    cbar = c + p + D.T @ q
    primal = float(c @ load)
    fp, gq = float(f @ p), float(g @ q)
    trace = float(np.sum(V * S))
    big = 1.0 + abs(primal) + abs(fp) + abs(gq) + abs(trace)
    amax = lambda a: float(np.max(np.abs(a), initial=0.0))  # noqa: E731
    neg = lambda a: max(0.0, -float(np.min(a, initial=0.0)))  # noqa: E731

    rep = ResidualReport()
    rep.add("flow conservation", amax(E @ X - S), 1.0 + amax(S), tol)
    rep.add("link capacity", max(0.0, float(np.max(load - f, initial=0.0))), 1.0 + amax(f), tol)
    rep.add("vertiport capacity", max(0.0, float(np.max(D @ load - g, initial=0.0))), 1.0 + amax(g), tol)
    rep.add("dual feasibility", amax(cbar[:, None] - E.T @ V - U), 1.0 + amax(cbar) + amax(U), tol)
    rep.add("flow nonnegativity", neg(X), 1.0 + amax(X), tol)
    rep.add("dual nonnegativity", max(neg(U), neg(p), neg(q)), 1.0 + amax(cbar) + amax(U), tol)
    rep.add("flow complementarity", float(np.sum(np.abs(X * U))), big, tol)
    rep.add("link complementarity", abs(float(p @ load) - fp), big, tol)
    rep.add("vertiport complementarity", abs(float(q @ (D @ load)) - gq), big, tol)
    rep.add("duality gap", abs(primal + fp + gq - trace), big, tol)
    return rep


@dataclass
class ODCheck:
    origin: int
    destination: int
    demand: float
    shortest: float
    potential_gap: float
    residual: float
    reachable: bool
    passed: bool


@dataclass
class WardropReport:
    pairs: list = field(default_factory=list)
    used_link_violations: list = field(default_factory=list)
    tol: float = 1e-6

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.pairs) and not self.used_link_violations

    @property
    def unreachable(self) -> list:
        return [(p.origin, p.destination) for p in self.pairs if not p.reachable]

    def __str__(self) -> str:
        bad = [p for p in self.pairs if not p.passed]
        return (f"{len(self.pairs)} OD pairs, {len(bad)} failing, "
                f"{len(self.used_link_violations)} used links with positive reduced cost")


def _incoming(net: HybridNetwork):
    heads = net.heads
    order = np.argsort(heads, kind="stable").astype(np.int64)
    ptr = np.zeros(net.n_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(heads, minlength=net.n_nodes), out=ptr[1:])
    return ptr, order


def shortest_to(net: HybridNetwork, weights: np.ndarray, target: int) -> np.ndarray:
    """Least-cost distance from every node to 1-based node ``target``."""
    ptr, order = _incoming(net)
    w = np.maximum(np.asarray(weights, dtype=float), 0.0)
    return _kernels.dist_to(net.n_nodes, ptr, order, net.tails, w, int(target) - 1)


def verify_wardrop(net: HybridNetwork, inc: IncidenceMatrices, demand: DemandTable,
                   eq: Equilibrium, tol: float = 1e-6) -> WardropReport:
    """Every OD pair's potential difference must equal its least effective
    cost, and every used link must have zero reduced cost."""
    cbar = np.maximum(eq.effective_cost, 0.0)
    ptr, order = _incoming(net)
    tails = net.tails
    rep = WardropReport(tol=tol)
    xscale = 1.0 + float(np.max(np.abs(eq.X), initial=0.0))
    uscale = 1.0 + float(np.max(np.abs(cbar), initial=0.0))
    for j, s in enumerate(demand.destinations):
        dist = _kernels.dist_to(net.n_nodes, ptr, order, tails, cbar, s - 1)
        for i in np.flatnonzero(demand.S[:, j] > 0):
            sp_cost = float(dist[i])
            gap = float(eq.V[i, j] - eq.V[s - 1, j])
            reachable = math.isfinite(sp_cost)
            resid = abs(sp_cost - gap) if reachable else math.inf
            ok = reachable and resid <= tol * (1.0 + abs(sp_cost))
            rep.pairs.append(ODCheck(int(i) + 1, s, float(demand.S[i, j]), sp_cost, gap, resid, reachable, ok))
        used = np.flatnonzero(eq.X[:, j] > tol * xscale)
        for k in used:
            if eq.U[k, j] > tol * uscale:
                rep.used_link_violations.append((int(k) + 1, s, float(eq.U[k, j])))
    return rep


def link_loading(eq: Equilibrium, k: Optional[int] = None):
    """Per-link loading ``cbar_k * (X1)_k``; a single entry when the 1-based
    link id ``k`` is given."""
    vals = eq.effective_cost * eq.link_flow
    return vals if k is None else float(vals[k - 1])


def network_loading(eq: Equilibrium) -> float:
    return math.fsum(link_loading(eq).tolist())


# ---------------------------------------------------------------- export

SCHEMA = "vertiport.equilibrium/1"


def network_to_dict(net: HybridNetwork) -> dict:
    return {
        "n_nodes": net.n_nodes,
        "vertiports": list(net.vertiports),
        "links": [{"id": lk.id, "tail": lk.tail, "head": lk.head, "kind": lk.kind,
                   "free_time": lk.free_time, "capacity": lk.capacity} for lk in net.links],
    }


def network_from_dict(doc: dict) -> HybridNetwork:
    links = doc["links"]
    ground = [(d["tail"], d["head"], d["free_time"], d["capacity"]) for d in links if d["kind"] == "ground"]
    air = [(d["tail"], d["head"], d["free_time"], d["capacity"]) for d in links if d["kind"] == "air"]
    return HybridNetwork.build(doc["n_nodes"], ground, air, doc["vertiports"])


def equilibrium_to_dict(eq: Equilibrium, net: HybridNetwork, inc: IncidenceMatrices,
                        demand: DemandTable) -> dict:
    """Self-contained document: network, demand, certificate and per-link table."""
    lk = link_loading(eq)
    load = eq.link_flow
    through = inc.D @ load
    return {
        "schema": SCHEMA,
        "network": network_to_dict(net),
        "demand": {"destinations": list(demand.destinations), "S": demand.S.tolist()},
        "g": eq.g.tolist(),
        "objective": eq.objective,
        "loading": network_loading(eq),
        "dual_value": eq.dual_value,
        "capacity_value": eq.capacity_value(net.capacity),
        "refined": eq.refined,
        "links": [{"id": k + 1, "kind": net.links[k].kind, "flow": float(load[k]),
                   "effective_cost": float(eq.effective_cost[k]), "delay": float(eq.p[k]),
                   "loading": float(lk[k])} for k in range(net.n_links)],
        "vertiports": [{"node": v, "throughput": float(through[i]), "capacity": float(eq.g[i]),
                        "delay": float(eq.q[i])} for i, v in enumerate(net.vertiports)],
        "certificate": {"X": eq.X.tolist(), "V": eq.V.tolist(), "U": eq.U.tolist(),
                        "p": eq.p.tolist(), "q": eq.q.tolist()},
        "residuals": None if eq.residuals is None else eq.residuals.as_dict(),
    }


def equilibrium_from_dict(doc: dict):
    """Inverse of :func:`equilibrium_to_dict`; returns ``(eq, net, inc, demand)``."""
    from .netmodel import build_incidence

    if doc.get("schema") != SCHEMA:
        raise ValidationError(f"unsupported equilibrium schema {doc.get('schema')!r}", "schema")
    net = network_from_dict(doc["network"])
    inc = build_incidence(net)
    dem = doc["demand"]
    S = np.asarray(dem["S"], dtype=float).reshape(net.n_nodes, len(dem["destinations"]))
    demand = DemandTable(tuple(dem["destinations"]), S)
    cert = doc["certificate"]
    n_d = demand.n_d

    def mat(key, rows):
        return np.asarray(cert[key], dtype=float).reshape(rows, n_d)

    eq = build_equilibrium(net, inc, demand, np.asarray(doc["g"], dtype=float),
                           mat("X", net.n_links), mat("V", net.n_nodes),
                           np.asarray(cert["p"], dtype=float), np.asarray(cert["q"], dtype=float),
                           mat("U", net.n_links), refined=bool(doc.get("refined", False)))
    return eq, net, inc, demand
