"""Hybrid air-ground network, incidence structure and demand data."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

GROUND = "ground"
AIR = "air"


class ValidationError(ValueError):
    """Model data violates a structural rule.

    ``field`` names the offending piece of data and ``index`` locates it
    (1-based link id, node id, ...) when that makes sense.
    """

    def __init__(self, message: str, field: str = "", index: Optional[int] = None):
        super().__init__(message)
        self.field = field
        self.index = index


@dataclass(frozen=True)
class Link:
    id: int
    tail: int
    head: int
    kind: str
    free_time: float
    capacity: float

    def __post_init__(self):
        if self.kind not in (GROUND, AIR):
            raise ValidationError(f"link {self.id}: kind must be 'ground' or 'air'", "kind", self.id)
        if self.tail == self.head:
            raise ValidationError(f"link {self.id}: tail equals head ({self.tail})", "tail", self.id)
        if not (self.free_time >= 0 and math.isfinite(self.free_time)):
            raise ValidationError(f"link {self.id}: free travel time must be finite and >= 0", "free_time", self.id)
        if not (self.capacity > 0 and math.isfinite(self.capacity)):
            raise ValidationError(f"link {self.id}: capacity must be finite and > 0", "capacity", self.id)


LinkSpec = Union[Link, Sequence[float]]


def _to_link(spec: LinkSpec, kind: str, lid: int) -> Link:
    if isinstance(spec, Link):
        return Link(lid, spec.tail, spec.head, kind, spec.free_time, spec.capacity)
    tail, head, free_time, capacity = spec
    return Link(lid, int(tail), int(head), kind, float(free_time), float(capacity))


@dataclass(frozen=True)
class HybridNetwork:
    n_nodes: int
    links: tuple
    vertiports: tuple = ()

    @classmethod
    def build(cls, n_nodes: int, ground: Iterable[LinkSpec], air: Iterable[LinkSpec] = (),
              vertiports: Sequence[int] = ()) -> "HybridNetwork":
        """Number ground links 1..n_g and air links n_g+1..n_l, then validate.

        Link specs are ``Link`` objects or ``(tail, head, free_time, capacity)``.
        """
        ground = list(ground)
        air = list(air)
        links = [_to_link(s, GROUND, i + 1) for i, s in enumerate(ground)]
        links += [_to_link(s, AIR, len(ground) + i + 1) for i, s in enumerate(air)]
        net = cls(int(n_nodes), tuple(links), tuple(int(v) for v in vertiports))
        net.validate()
        return net

    def validate(self) -> None:
        if self.n_nodes < 1:
            raise ValidationError("network needs at least one node", "n_nodes")
        vset = set(self.vertiports)
        if len(vset) != len(self.vertiports):
            raise ValidationError("vertiport ids must be distinct", "vertiports")
        for v in self.vertiports:
            if not 1 <= v <= self.n_nodes:
                raise ValidationError(f"vertiport node {v} outside 1..{self.n_nodes}", "vertiports", v)
        seen_air = False
        for pos, link in enumerate(self.links, start=1):
            if link.id != pos:
                raise ValidationError(f"link ids must run 1..n_l in order (got {link.id} at {pos})", "id", link.id)
            for end in (link.tail, link.head):
                if not 1 <= end <= self.n_nodes:
                    raise ValidationError(f"link {link.id} references node {end} outside 1..{self.n_nodes}",
                                          "node", link.id)
            if link.kind == AIR:
                seen_air = True
                if link.tail not in vset or link.head not in vset:
                    raise ValidationError(f"air link {link.id} must join two vertiport nodes", "air", link.id)
            elif seen_air:
                raise ValidationError(f"ground link {link.id} listed after an air link", "order", link.id)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_ground(self) -> int:
        return sum(1 for link in self.links if link.kind == GROUND)

    @property
    def n_air(self) -> int:
        return self.n_links - self.n_ground

    @property
    def n_v(self) -> int:
        return len(self.vertiports)

    @property
    def free_time(self) -> np.ndarray:
        return np.array([link.free_time for link in self.links], dtype=float)

    @property
    def capacity(self) -> np.ndarray:
        return np.array([link.capacity for link in self.links], dtype=float)

    @property
    def tails(self) -> np.ndarray:
        """0-based tail node index per link."""
        return np.array([link.tail - 1 for link in self.links], dtype=np.int64)

    @property
    def heads(self) -> np.ndarray:
        return np.array([link.head - 1 for link in self.links], dtype=np.int64)

    @property
    def is_air(self) -> np.ndarray:
        return np.array([link.kind == AIR for link in self.links], dtype=bool)

    def ground_links(self) -> list:
        return [link for link in self.links if link.kind == GROUND]

    def air_links(self) -> list:
        return [link for link in self.links if link.kind == AIR]

    def with_air_links(self, air: Iterable[LinkSpec]) -> "HybridNetwork":
        """Copy of this network whose air links are replaced by ``air``."""
        return HybridNetwork.build(self.n_nodes, self.ground_links(), air, self.vertiports)

    def with_vertiports(self, vertiports: Sequence[int]) -> "HybridNetwork":
        return HybridNetwork.build(self.n_nodes, self.ground_links(), self.air_links(), vertiports)


@dataclass(frozen=True)
class IncidenceMatrices:
    E: sp.csr_matrix
    D: sp.csr_matrix


def build_incidence(net: HybridNetwork) -> IncidenceMatrices:
    """Signed node-link incidence ``E`` (+1 tail, -1 head) and the unsigned
    vertiport-to-air-link incidence ``D``."""
    net.validate()
    n_l = net.n_links
    cols = np.arange(n_l)
    tails, heads = net.tails, net.heads
    E = sp.csr_matrix(
        (np.concatenate([np.ones(n_l), -np.ones(n_l)]),
         (np.concatenate([tails, heads]), np.concatenate([cols, cols]))),
        shape=(net.n_nodes, n_l))
    pos = {v - 1: i for i, v in enumerate(net.vertiports)}
    rows, dcols = [], []
    for k, link in enumerate(net.links):
        if link.kind != AIR:
            continue
        for end in (link.tail - 1, link.head - 1):
            if end in pos:
                rows.append(pos[end])
                dcols.append(k)
    D = sp.csr_matrix((np.ones(len(rows)), (rows, dcols)), shape=(net.n_v, n_l))
    return IncidenceMatrices(E, D)


@dataclass(frozen=True)
class DemandTable:
    """Per-destination demand columns; ``S[i, j]`` is trips/hour from node
    ``i + 1`` to ``destinations[j]``, balanced so each column sums to 0."""

    destinations: tuple
    S: np.ndarray = field(repr=False)

    @property
    def n_d(self) -> int:
        return len(self.destinations)

    def validate(self, n_nodes: Optional[int] = None, tol: float = 1e-9) -> None:
        S = self.S
        if S.ndim != 2 or S.shape[1] != self.n_d:
            raise ValidationError("demand matrix must have one column per destination", "S")
        if n_nodes is not None and S.shape[0] != n_nodes:
            raise ValidationError(f"demand matrix has {S.shape[0]} rows, network has {n_nodes} nodes", "S")
        if len(set(self.destinations)) != self.n_d:
            raise ValidationError("destinations must be distinct", "destinations")
        for j, s in enumerate(self.destinations):
            if not 1 <= s <= S.shape[0]:
                raise ValidationError(f"destination {s} outside 1..{S.shape[0]}", "destinations", s)
            col = S[:, j]
            off = np.delete(col, s - 1)
            if np.any(off < 0):
                raise ValidationError(f"negative demand towards destination {s}", "S", s)
            if abs(col.sum()) > tol * (1.0 + np.abs(off).sum()):
                raise ValidationError(f"demand column for destination {s} does not sum to zero", "S", s)

    def total(self) -> float:
        return float(sum(-self.S[s - 1, j] for j, s in enumerate(self.destinations)))

    def od_pairs(self):
        """Yield ``(origin, destination, trips)`` for every positive entry."""
        for j, s in enumerate(self.destinations):
            for i in np.flatnonzero(self.S[:, j] > 0):
                yield int(i) + 1, s, float(self.S[i, j])


def balance_demand(raw: Iterable[tuple], destinations: Optional[Sequence[int]], n_nodes: int,
                   scale: float = 1.0) -> DemandTable:
    """Aggregate raw ``(origin, destination, trips)`` triples into a
    :class:`DemandTable`.

    ``destinations=None`` uses every destination that appears in ``raw``,
    in increasing node order.
    """
    raw = list(raw)
    if destinations is None:
        destinations = sorted({int(d) for _, d, _ in raw})
    destinations = tuple(int(d) for d in destinations)
    col = {d: j for j, d in enumerate(destinations)}
    S = np.zeros((n_nodes, len(destinations)))
    for origin, dest, trips in raw:
        origin, dest, trips = int(origin), int(dest), float(trips)
        if dest not in col:
            raise ValidationError(f"destination {dest} is not in the destination list", "destinations", dest)
        if trips < 0 or not math.isfinite(trips):
            raise ValidationError(f"trips {origin}->{dest} must be finite and >= 0", "trips", origin)
        if origin == dest:
            raise ValidationError(f"origin equals destination ({origin})", "origin", origin)
        if not 1 <= origin <= n_nodes:
            raise ValidationError(f"origin {origin} outside 1..{n_nodes}", "origin", origin)
        S[origin - 1, col[dest]] += trips * scale
    for j, d in enumerate(destinations):
        if not 1 <= d <= n_nodes:
            raise ValidationError(f"destination {d} outside 1..{n_nodes}", "destinations", d)
        S[d - 1, j] = 0.0
        S[d - 1, j] = -S[:, j].sum()
    table = DemandTable(destinations, S)
    table.validate(n_nodes)
    return table


def _coords_array(coords, n_nodes: int) -> np.ndarray:
    if isinstance(coords, Mapping):
        out = np.full((n_nodes, 2), np.nan)
        for node, xy in coords.items():
            out[int(node) - 1] = xy
    else:
        out = np.asarray(coords, dtype=float)
    if out.shape != (n_nodes, 2) or not np.all(np.isfinite(out)):
        raise ValidationError("coordinates must be given for every node", "coords")
    return out


def median_pairwise_distance(coords: np.ndarray) -> float:
    xy = np.asarray(coords, dtype=float)
    n = xy.shape[0]
    if n < 2:
        return 0.0
    iu, ju = np.triu_indices(n, k=1)
    return float(np.median(np.hypot(*(xy[iu] - xy[ju]).T)))


def generate_air_links(net: HybridNetwork, vertiport_nodes: Sequence[int], coords,
                       speed: float, air_capacity: float = 80.0) -> list:
    """Air links between every ordered vertiport pair that lies farther apart
    than the median distance over all node pairs of the network.

    Free travel time is ``distance / speed``. Link ids continue after the
    network's ground links.
    """
    xy = _coords_array(coords, net.n_nodes)
    nodes = [int(v) for v in vertiport_nodes]
    if len(set(nodes)) != len(nodes):
        raise ValidationError("vertiport nodes must be distinct", "vertiports")
    if len(nodes) < 2:
        return []
    if not speed > 0:
        raise ValidationError("air speed must be positive", "speed")
    cutoff = median_pairwise_distance(xy)
    out = []
    lid = net.n_ground
    for u, w in itertools.permutations(nodes, 2):
        dist = float(np.hypot(*(xy[u - 1] - xy[w - 1])))
        if dist > cutoff:
            lid += 1
            out.append(Link(lid, u, w, AIR, dist / speed, float(air_capacity)))
    return out


@dataclass
class Check:
    name: str
    residual: float
    scale: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tol * self.scale)


@dataclass
class ResidualReport:
    checks: list = field(default_factory=list)

    def add(self, name: str, residual: float, scale: float, tol: float) -> None:
        self.checks.append(Check(name, float(residual), float(scale), float(tol)))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {c.name: {"residual": c.residual, "scale": c.scale, "tol": c.tol, "passed": c.passed}
                for c in self.checks}

    def __str__(self) -> str:
        w = max((len(c.name) for c in self.checks), default=4)
        lines = [f"{c.name:<{w}}  {c.residual:12.3e}  {'ok' if c.passed else 'FAIL'}" for c in self.checks]
        return "\n".join(lines)


def validate_flow(net: HybridNetwork, inc: IncidenceMatrices, X: np.ndarray, demand: DemandTable,
                  g: np.ndarray, tol: float = 1e-9) -> ResidualReport:
    """Residuals of flow conservation, nonnegativity, link and vertiport
    capacity for a candidate flow matrix ``X`` (links x destinations)."""
    X = np.asarray(X, dtype=float)
    g = np.asarray(g, dtype=float).ravel()
    S = demand.S
    if X.shape != (net.n_links, demand.n_d):
        raise ValidationError(f"flow matrix must be {net.n_links}x{demand.n_d}, got {X.shape}", "X")
    if S.shape[0] != net.n_nodes:
        raise ValidationError("demand rows do not match node count", "S")
    if g.size != net.n_v:
        raise ValidationError(f"vertiport capacity vector must have {net.n_v} entries", "g")
    f = net.capacity
    load = X.sum(axis=1)
    rep = ResidualReport()
    rep.add("flow conservation", np.max(np.abs(inc.E @ X - S), initial=0.0),
            max(1.0, np.max(np.abs(S), initial=0.0)), tol)
    rep.add("flow nonnegativity", max(0.0, -np.min(X, initial=0.0)), max(1.0, np.max(np.abs(X), initial=0.0)), tol)
    rep.add("link capacity", max(0.0, np.max(load - f, initial=0.0)), max(1.0, np.max(f, initial=0.0)), tol)
    rep.add("vertiport capacity", max(0.0, np.max(inc.D @ load - g, initial=0.0)),
            max(1.0, np.max(np.abs(g), initial=0.0)), tol)
    return rep
