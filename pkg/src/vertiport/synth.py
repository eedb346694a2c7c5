"""Small deterministic instances: the four-node toy, grid cities and random
selection scenarios used by tests, benchmarks and bundled fixtures."""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .ingest import ScenarioConfig, expand_macro
from .equilibrium import EquilibriumOptions, InfeasibleDemand, solve_equilibrium
from .netmodel import DemandTable, HybridNetwork, balance_demand, build_incidence, generate_air_links

TOY_COORDS = np.array([[0.0, 0.0], [4.0, -1.73], [4.0, 1.73], [8.0, 0.0]])
TOY_TRIPS = [(1, 2, 5.0), (1, 4, 10.0)]


def toy_network(c: Optional[Sequence[float]] = None, f: Optional[Sequence[float]] = None) -> HybridNetwork:
    """Four nodes, ground links 1->2, 1->3, 2->4, 3->4 and air links 2->3,
    3->2 between the two vertiports (nodes 2 and 3)."""
    c = [1.0, 1.0, 1.0, 1.0, 0.2, 0.2] if c is None else list(c)
    f = [1e6] * 6 if f is None else list(f)
    ends = [(1, 2), (1, 3), (2, 4), (3, 4), (2, 3), (3, 2)]
    specs = [(t, h, c[k], f[k]) for k, (t, h) in enumerate(ends)]
    return HybridNetwork.build(4, specs[:4], specs[4:], (2, 3))


def toy_demand(net: Optional[HybridNetwork] = None):
    n = 4 if net is None else net.n_nodes
    return balance_demand(TOY_TRIPS, (2, 4), n)


def grid_coords(rows: int, cols: int, spacing: float = 1.0) -> np.ndarray:
    r, c = np.divmod(np.arange(rows * cols), cols)
    return np.column_stack([c * spacing, r * spacing]).astype(float)


def grid_ground_links(rows: int, cols: int, spacing: float, speed: float, rng: np.random.Generator,
                      cap_choices=(300.0, 500.0, 800.0)) -> list:
    """Two-way street grid; free time ``spacing / speed`` with +-20% jitter."""
    links = []

    def node(r, c):
        return r * cols + c + 1

    for r in range(rows):
        for c in range(cols):
            for dr, dc in ((0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                if rr >= rows or cc >= cols:
                    continue
                t = spacing / speed * rng.uniform(0.8, 1.2)
                cap = float(rng.choice(cap_choices))
                links.append((node(r, c), node(rr, cc), t, cap))
                links.append((node(rr, cc), node(r, c), t, cap))
    return links


def grid_trips(n_nodes: int, destinations: Sequence[int], rng: np.random.Generator,
               per_dest: int = 6, lo: float = 20.0, hi: float = 120.0) -> list:
    trips = []
    for d in destinations:
        origins = rng.choice([v for v in range(1, n_nodes + 1) if v != d], size=per_dest, replace=False)
        for o in sorted(int(x) for x in origins):
            trips.append((o, int(d), float(np.round(rng.uniform(lo, hi), 1))))
    return trips


def grid_instance(rows: int = 4, cols: int = 6, vertiports: Sequence[int] = (), seed: int = 7,
                  spacing: float = 2.0, ground_speed: float = 30.0, air_speed: float = 150.0,
                  air_capacity: float = 80.0, n_dest: int = 8, per_dest: int = 6):
    """Grid city with congested streets; returns ``(net, demand, coords)``.

    Destinations include every vertiport so value vectors are defined.
    """
    rng = np.random.default_rng(seed)
    n = rows * cols
    coords = grid_coords(rows, cols, spacing)
    ground = grid_ground_links(rows, cols, spacing, ground_speed, rng)
    extra = [v for v in rng.permutation(np.arange(1, n + 1)).tolist() if v not in vertiports]
    dests = sorted(set(vertiports) | set(extra[:max(0, n_dest - len(vertiports))]))
    trips = grid_trips(n, dests, rng, per_dest)
    base = HybridNetwork.build(n, ground, (), vertiports)
    net = base.with_air_links(generate_air_links(base, vertiports, coords, air_speed, air_capacity))
    demand = balance_demand(trips, dests, n)
    return net, demand, coords


NINE_PORT_RULES = (("both_selected", (1, 2)), ("at_least_one", (3, 4)),
             ("exactly_one", (5, 6)), ("exactly_one", (7, 8)))


def logical_rows(macros, n_v: int, n_c: int):
    rows, rhs = [np.zeros((0, n_v * n_c))], [np.zeros(0)]
    for name, pos in macros:
        A, b = expand_macro(name, pos, n_v, n_c)
        rows.append(A)
        rhs.append(b)
    return np.vstack(rows), np.concatenate(rhs)


def nine_port_scenario(gamma: float = 8.0, omega: float = 0.0, seed: int = 11):
    """Nine candidate vertiports with two capacity options each on a 4x4
    grid, constrained by four pairwise logical rules.

    Returns ``(net, demand, coords, config)``.
    """
    vertiports = (1, 4, 13, 16, 6, 11, 2, 15, 8)
    net, demand, coords = grid_instance(4, 4, vertiports, seed=seed, spacing=2.0, n_dest=11,
                                        per_dest=7, ground_speed=25.0, air_speed=120.0)
    n_v, n_c = len(vertiports), 2
    A, b = logical_rows(NINE_PORT_RULES, n_v, n_c)
    cfg = ScenarioConfig(vertiports=vertiports, G=np.tile([100.0, 200.0], (n_v, 1)),
                         K=np.tile([1.0, 2.0], (n_v, 1)), A=A, b=b, gamma=gamma, omega=omega,
                         air_speed=120.0, air_capacity=80.0)
    return net, demand, coords, cfg


def random_scenario(rng: np.random.Generator, max_v: int = 6, max_c: int = 2):
    """Random small scenario for oracle cross-checks: ``(net, demand, config)``."""
    n_v = int(rng.integers(1, max_v + 1))
    n_c = int(rng.integers(1, max_c + 1))
    rows, cols = (3, 3) if n_v <= 4 else (3, 4)
    n = rows * cols
    coords = grid_coords(rows, cols, 1.0) + rng.uniform(-0.2, 0.2, size=(n, 2))
    ground = grid_ground_links(rows, cols, 1.0, 1.0, rng, cap_choices=(30.0, 50.0, 80.0))
    vertiports = tuple(int(v) for v in rng.choice(np.arange(1, n + 1), size=n_v, replace=False))
    base = HybridNetwork.build(n, ground, (), vertiports)
    air = generate_air_links(base, vertiports, coords, speed=float(rng.uniform(1.5, 4.0)),
                             air_capacity=float(rng.choice([10.0, 20.0, 40.0])))
    net = base.with_air_links(air)
    dests = sorted(set(vertiports) | {int(rng.integers(1, n + 1))})
    trips = grid_trips(n, dests, rng, per_dest=int(rng.integers(2, 5)), lo=5.0, hi=40.0)
    demand = balance_demand(trips, dests, n)
    streets = HybridNetwork.build(n, ground)
    inc = build_incidence(streets)
    for _ in range(20):
        # shrink demand until the streets alone can carry it
        try:
            solve_equilibrium(streets, inc, demand, np.zeros(0), EquilibriumOptions(refine=False, check=False))
            break
        except InfeasibleDemand:
            demand = DemandTable(demand.destinations, demand.S * 0.7)
    base_cap = np.sort(rng.choice([10.0, 20.0, 30.0, 50.0], size=n_c, replace=False))
    G = np.tile(base_cap, (n_v, 1))
    K = np.tile(np.arange(1, n_c + 1, dtype=float), (n_v, 1)) * rng.choice([1.0, 2.0], size=(n_v, 1))
    macros = []
    for _ in range(int(rng.integers(0, 3))):
        if n_v < 2:
            break
        name = str(rng.choice(["both_selected", "at_least_one", "exactly_one", "at_most_one"]))
        pos = tuple(int(x) for x in rng.choice(np.arange(1, n_v + 1), size=2, replace=False))
        macros.append((name, pos))
    A, b = logical_rows(macros, n_v, n_c)
    gamma = float(rng.integers(0, 2 * n_v + 1))
    omega = float(rng.choice([0.0, 0.5, 5.0]))
    cfg = ScenarioConfig(vertiports=vertiports, G=G, K=K, A=A, b=b, gamma=gamma, omega=omega)
    return net, demand, cfg


__all__ = ["TOY_COORDS", "TOY_TRIPS", "NINE_PORT_RULES", "grid_coords", "grid_instance",
           "logical_rows", "nine_port_scenario", "random_scenario", "toy_demand", "toy_network"]
