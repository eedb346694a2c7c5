"""TNTP network/trip/node files and YAML scenario documents.

Scenario schema (all keys optional unless noted)::

    network:
      net: anaheim_net.tntp       # paths are relative to the scenario file
      trips: anaheim_trips.tntp
      nodes: anaheim_node.tntp    # needed only when air links are generated
      time_scale: 0.016666667     # multiplies TNTP free-flow times (minutes -> hours)
      demand_scale: 1.0           # multiplies every trip count
      destinations: [..]          # default: every destination found in the trips file
    vertiports: [2, 3]            # required; node ids, order defines v(1..n_v)
    air:
      speed: 1.0                  # coordinate units per hour
      capacity: 80
      links: [[2, 3, 0.2, 4]]     # explicit (tail, head, free_time, capacity); skips generation
    capacities: [600, 1200]       # required; one option row shared by all, or an n_v x n_c matrix
    costs: [1, 2]                 # required; same shapes as capacities
    logical:                      # 1-based positions in the vertiport list
      - both_selected: [1, 2]
      - at_least_one: [3, 4]
      - exactly_one: [5, 6]
      - at_most_one: [7, 8]
      - {A: [[...]], b: [...]}    # raw rows over vec(B), row-major by vertiport
    gamma: 8
    omega: 0.0
    mu: null                      # big-M override
    solver: {rel_gap: 1.0e-6, node_limit: 200000}
"""
from __future__ import annotations

import logging
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import yaml

from .netmodel import (DemandTable, HybridNetwork, ValidationError, balance_demand,
                       generate_air_links)

log = logging.getLogger(__name__)

PathLike = str | os.PathLike


class ParseError(ValidationError):
    def __init__(self, message: str, path: Optional[PathLike] = None, line: Optional[int] = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message, "file", line)
        self.path = path
        self.line = line


@dataclass(frozen=True)
class LinkRecord:
    tail: int
    head: int
    capacity: float
    free_time: float


@dataclass(frozen=True)
class NetworkFile:
    n_nodes: int
    links: tuple
    coords: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __iter__(self):
        # allows ``n, links, coords = parse_network(...)``
        return iter((self.n_nodes, self.links, self.coords))


_META = re.compile(r"^\s*<([^>]+)>\s*(.*?)\s*$")


def _strip(line: str) -> str:
    line = line.split("~", 1)[0].strip()
    return line.rstrip(";").strip()


def _read_lines(path: PathLike) -> list:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read file ({exc.strerror})", path) from exc


def _metadata(lines: list, path: PathLike) -> tuple:
    """Return ``(metadata dict, index of first body line, saw end tag)``."""
    meta: dict = {}
    for idx, raw in enumerate(lines):
        m = _META.match(raw.split("~", 1)[0])
        if not m:
            if raw.split("~", 1)[0].strip():
                return meta, idx, False
            continue
        key = m.group(1).strip().upper()
        if key == "END OF METADATA":
            return meta, idx + 1, True
        meta[key] = (m.group(2), idx + 1)
    return meta, len(lines), False


def _meta_int(meta: dict, key: str, path: PathLike) -> int:
    if key not in meta:
        raise ParseError(f"missing metadata tag <{key}>", path)
    value, line = meta[key]
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"metadata <{key}> is not an integer: {value!r}", path, line) from None


def _number(tok: str, path: PathLike, line: int, what: str) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise ParseError(f"non-numeric {what}: {tok!r}", path, line) from None
    if not math.isfinite(val):
        raise ParseError(f"non-finite {what}: {tok!r}", path, line)
    return val


def _node_id(tok: str, path: PathLike, line: int, what: str) -> int:
    val = _number(tok, path, line, what)
    if val != int(val):
        raise ParseError(f"{what} must be an integer: {tok!r}", path, line)
    return int(val)


def parse_network(path: PathLike) -> NetworkFile:
    """Read a TNTP ``_net`` file.

    Only init node, term node, capacity and free-flow time are kept; the
    remaining columns and ``<FIRST THRU NODE>`` are accepted and ignored.
    """
    lines = _read_lines(path)
    meta, start, ended = _metadata(lines, path)
    n_nodes = _meta_int(meta, "NUMBER OF NODES", path)
    n_links = _meta_int(meta, "NUMBER OF LINKS", path)
    if not ended:
        raise ParseError("missing metadata tag <END OF METADATA>", path, start + 1)
    links = []
    for idx in range(start, len(lines)):
        lineno = idx + 1
        body = _strip(lines[idx])
        if not body:
            continue
        toks = body.replace(";", " ").split()
        if len(toks) < 5:
            raise ParseError(f"expected at least 5 columns, found {len(toks)}", path, lineno)
        tail = _node_id(toks[0], path, lineno, "init node")
        head = _node_id(toks[1], path, lineno, "term node")
        cap = _number(toks[2], path, lineno, "capacity")
        fft = _number(toks[4], path, lineno, "free flow time")
        for end in (tail, head):
            if not 1 <= end <= n_nodes:
                raise ParseError(f"link references node {end} outside 1..{n_nodes}", path, lineno)
        if tail == head:
            raise ParseError(f"self-loop link {tail}->{head}", path, lineno)
        if cap <= 0:
            raise ParseError(f"capacity must be positive, got {cap}", path, lineno)
        if fft < 0:
            raise ParseError(f"free flow time must be >= 0, got {fft}", path, lineno)
        links.append(LinkRecord(tail, head, cap, fft))
    if len(links) != n_links:
        raise ParseError(f"<NUMBER OF LINKS> declares {n_links} links, file has {len(links)}", path)
    return NetworkFile(n_nodes, tuple(links), None, {k: v for k, (v, _) in meta.items()})


_ENTRY = re.compile(r"^\s*([^:;\s]+)\s*:\s*([^:;\s]+)\s*$")


def parse_trips(path: PathLike) -> list:
    """Read a TNTP ``_trips`` file into ``(origin, destination, trips)``
    triples in file order, skipping zero entries and self-trips."""
    lines = _read_lines(path)
    _, start, _ = _metadata(lines, path)
    out = []
    origin: Optional[int] = None
    for idx in range(start, len(lines)):
        lineno = idx + 1
        body = lines[idx].split("~", 1)[0].strip()
        if not body:
            continue
        if body.lower().startswith("origin"):
            parts = body.split()
            if len(parts) != 2:
                raise ParseError("malformed Origin line", path, lineno)
            origin = _node_id(parts[1], path, lineno, "origin")
            continue
        for chunk in body.split(";"):
            if not chunk.strip():
                continue
            m = _ENTRY.match(chunk)
            if not m:
                raise ParseError(f"malformed trip entry {chunk.strip()!r}", path, lineno)
            if origin is None:
                raise ParseError("trip entry before any Origin line", path, lineno)
            dest = _node_id(m.group(1), path, lineno, "destination")
            trips = _number(m.group(2), path, lineno, "trip count")
            if trips < 0:
                raise ParseError(f"negative trip count {trips}", path, lineno)
            if trips == 0:
                continue
            if dest == origin:
                log.warning("%s:%d: dropping %g trips from node %d to itself", path, lineno, trips, origin)
                continue
            out.append((origin, dest, trips))
    return out


def parse_nodes(path: PathLike, n_nodes: Optional[int] = None) -> np.ndarray:
    """Read a TNTP ``_node`` file (node, x, y) into an ``(n, 2)`` array."""
    lines = _read_lines(path)
    rows = {}
    for idx, raw in enumerate(lines):
        body = _strip(raw)
        if not body:
            continue
        toks = body.replace(";", " ").split()
        if not re.match(r"^[+-]?\d", toks[0]):
            continue  # header row
        if len(toks) < 3:
            raise ParseError("expected node, x, y", path, idx + 1)
        node = _node_id(toks[0], path, idx + 1, "node id")
        if node in rows:
            raise ParseError(f"duplicate node {node}", path, idx + 1)
        rows[node] = (_number(toks[1], path, idx + 1, "x"), _number(toks[2], path, idx + 1, "y"))
    n = n_nodes if n_nodes is not None else max(rows, default=0)
    missing = [v for v in range(1, n + 1) if v not in rows]
    if missing:
        raise ParseError(f"no coordinates for node(s) {missing[:5]}", path)
    extra = [v for v in rows if not 1 <= v <= n]
    if extra:
        raise ParseError(f"coordinates for unknown node(s) {extra[:5]}", path)
    return np.array([rows[v] for v in range(1, n + 1)], dtype=float).reshape(n, 2)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_network(path: PathLike, n_nodes: int, links: Iterable, zones: Optional[int] = None) -> None:
    """Write TNTP net format; ``links`` are :class:`LinkRecord` or anything
    with ``tail``, ``head``, ``capacity`` and ``free_time``."""
    links = list(links)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"<NUMBER OF ZONES> {zones if zones is not None else n_nodes}\n")
        fh.write(f"<NUMBER OF NODES> {n_nodes}\n<FIRST THRU NODE> 1\n")
        fh.write(f"<NUMBER OF LINKS> {len(links)}\n<END OF METADATA>\n\n")
        fh.write("~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;\n")
        for lk in links:
            fh.write(f"\t{lk.tail}\t{lk.head}\t{_fmt(lk.capacity)}\t0\t{_fmt(lk.free_time)}\t0\t0\t0\t0\t1\t;\n")


def write_trips(path: PathLike, trips: Iterable[tuple]) -> None:
    by_origin: dict = {}
    for o, d, t in trips:
        by_origin.setdefault(int(o), []).append((int(d), float(t)))
    total = sum(t for rows in by_origin.values() for _, t in rows)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"<NUMBER OF ZONES> {max(by_origin, default=0)}\n<TOTAL OD FLOW> {_fmt(total)}\n")
        fh.write("<END OF METADATA>\n\n")
        for o in sorted(by_origin):
            fh.write(f"Origin {o}\n")
            fh.write("".join(f"\t{d} : {_fmt(t)};\n" for d, t in by_origin[o]))
            fh.write("\n")


def write_nodes(path: PathLike, coords: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("Node\tX\tY\t;\n")
        for i, (x, y) in enumerate(np.asarray(coords, dtype=float), start=1):
            fh.write(f"{i}\t{_fmt(x)}\t{_fmt(y)}\t;\n")


# ---------------------------------------------------------------- scenarios

@dataclass
class ScenarioConfig:
    vertiports: tuple
    G: np.ndarray
    K: np.ndarray
    A: np.ndarray
    b: np.ndarray
    gamma: float
    omega: float = 0.0
    mu: Optional[float] = None
    air_speed: float = 1.0
    air_capacity: float = 80.0
    air_links: Optional[tuple] = None
    demand_scale: float = 1.0
    time_scale: float = 1.0
    destinations: Optional[tuple] = None
    net_path: Optional[str] = None
    trips_path: Optional[str] = None
    nodes_path: Optional[str] = None
    rel_gap: float = 1e-6
    node_limit: int = 200_000
    base_dir: Optional[str] = field(default=None, compare=False)

    @property
    def n_v(self) -> int:
        return len(self.vertiports)

    @property
    def n_c(self) -> int:
        return self.G.shape[1]

    def validate(self) -> None:
        check_scenario(self)

    def resolve(self, rel: Optional[str]) -> Optional[Path]:
        if rel is None:
            return None
        p = Path(rel)
        if not p.is_absolute() and self.base_dir is not None:
            p = Path(self.base_dir) / p
        return p

    def as_dict(self) -> dict:
        """Plain-data form that :func:`scenario_from_dict` accepts back."""
        net = {k: v for k, v in (("net", self.net_path), ("trips", self.trips_path),
                                 ("nodes", self.nodes_path)) if v is not None}
        net["time_scale"] = float(self.time_scale)
        net["demand_scale"] = float(self.demand_scale)
        if self.destinations is not None:
            net["destinations"] = [int(d) for d in self.destinations]
        air = {"speed": float(self.air_speed), "capacity": float(self.air_capacity)}
        if self.air_links is not None:
            air["links"] = [[int(t), int(h), float(c), float(f)] for t, h, c, f in self.air_links]
        out = {
            "network": net,
            "vertiports": [int(v) for v in self.vertiports],
            "air": air,
            "capacities": self.G.tolist(),
            "costs": self.K.tolist(),
            "logical": [{"A": self.A.tolist(), "b": self.b.tolist()}] if self.A.shape[0] else [],
            "gamma": float(self.gamma),
            "omega": float(self.omega),
            "mu": None if self.mu is None else float(self.mu),
            "solver": {"rel_gap": float(self.rel_gap), "node_limit": int(self.node_limit)},
        }
        return out


_MACROS = ("both_selected", "at_least_one", "exactly_one", "at_most_one")


def expand_macro(name: str, positions: Sequence[int], n_v: int, n_c: int) -> tuple:
    """Rows ``(A, b)`` over vec(B) for a named logical constraint on the
    1-based vertiport positions ``positions``."""
    pos = [int(p) for p in positions]
    if not pos:
        raise ValidationError(f"{name}: needs at least one vertiport position", "logical")
    for p in pos:
        if not 1 <= p <= n_v:
            raise ValidationError(f"{name}: vertiport position {p} outside 1..{n_v}", "logical", p)
    if len(set(pos)) != len(pos):
        raise ValidationError(f"{name}: repeated vertiport position", "logical")

    def row(members):
        r = np.zeros(n_v * n_c)
        for p in members:
            r[(p - 1) * n_c:p * n_c] = 1.0
        return r

    if name == "both_selected":
        rows = [-row([p]) for p in pos]
        rhs = [-1.0] * len(pos)
    elif name == "at_least_one":
        rows, rhs = [-row(pos)], [-1.0]
    elif name == "exactly_one":
        rows, rhs = [row(pos), -row(pos)], [1.0, -1.0]
    elif name == "at_most_one":
        rows, rhs = [row(pos)], [1.0]
    else:
        raise ValidationError(f"unknown logical constraint {name!r}; expected one of {_MACROS}", "logical")
    return np.array(rows), np.array(rhs)


def _option_matrix(value, n_v: int, what: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{what} must be numeric", what) from None
    if arr.ndim == 1:
        arr = np.tile(arr, (n_v, 1))
    if arr.ndim != 2 or arr.shape[0] != n_v or arr.shape[1] < 1:
        raise ValidationError(f"{what} must be a list of options or a {n_v}-row matrix", what)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} contains non-finite values", what)
    return arr


def check_scenario(cfg: ScenarioConfig) -> None:
    n_v = cfg.n_v
    if len(set(cfg.vertiports)) != n_v:
        raise ValidationError("vertiport node ids must be distinct", "vertiports")
    if cfg.G.shape != cfg.K.shape or cfg.G.shape[0] != n_v:
        raise ValidationError("capacities and costs must both be n_v x n_c", "capacities")
    for i, row in enumerate(cfg.G, start=1):
        if np.any(row <= 0) or np.any(np.diff(row) <= 0):
            raise ValidationError(
                f"capacity options of vertiport {i} must be positive and strictly increasing, "
                f"got {row.tolist()}", "capacities", i)
    if np.any(cfg.K < 0):
        raise ValidationError("selection costs must be >= 0", "costs")
    if cfg.A.ndim != 2 or cfg.A.shape[1] != n_v * cfg.G.shape[1] or cfg.b.shape != (cfg.A.shape[0],):
        raise ValidationError("logical rows must have n_v*n_c columns and one bound each", "logical")
    for name in ("gamma", "omega"):
        val = getattr(cfg, name)
        if not (val >= 0 and math.isfinite(val)):
            raise ValidationError(f"{name} must be finite and >= 0", name)
    if cfg.mu is not None and not cfg.mu > 0:
        raise ValidationError("mu override must be positive", "mu")
    if not cfg.air_speed > 0 or not cfg.air_capacity > 0:
        raise ValidationError("air speed and capacity must be positive", "air")
    if not cfg.demand_scale >= 0 or not cfg.time_scale > 0:
        raise ValidationError("demand_scale must be >= 0 and time_scale > 0", "network")


def scenario_from_dict(doc: dict, base_dir: Optional[PathLike] = None) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ValidationError("scenario must be a mapping", "scenario")
    known = {"network", "vertiports", "air", "capacities", "costs", "logical", "gamma", "omega", "mu", "solver"}
    unknown = set(doc) - known
    if unknown:
        raise ValidationError(f"unknown scenario key(s): {sorted(unknown)}", "scenario")
    for key in ("vertiports", "capacities", "costs"):
        if key not in doc:
            raise ValidationError(f"scenario is missing {key!r}", key)
    vertiports = tuple(int(v) for v in doc["vertiports"])
    n_v = len(vertiports)
    G = _option_matrix(doc["capacities"], n_v, "capacities")
    K = _option_matrix(doc["costs"], n_v, "costs")
    n_c = G.shape[1]
    rows, rhs = [np.zeros((0, n_v * n_c))], [np.zeros(0)]
    for item in doc.get("logical") or []:
        if not isinstance(item, dict) or len(item) not in (1, 2):
            raise ValidationError(f"malformed logical constraint {item!r}", "logical")
        if set(item) == {"A", "b"}:
            A = np.atleast_2d(np.asarray(item["A"], dtype=float))
            b = np.atleast_1d(np.asarray(item["b"], dtype=float))
            if A.size == 0:
                continue
            if A.shape[1] != n_v * n_c or b.shape != (A.shape[0],):
                raise ValidationError(f"raw logical rows must be k x {n_v * n_c} with k bounds", "logical")
        elif len(item) == 1:
            (name, positions), = item.items()
            A, b = expand_macro(str(name), positions, n_v, n_c)
        else:
            raise ValidationError(f"malformed logical constraint {item!r}", "logical")
        rows.append(A)
        rhs.append(b)
    net = doc.get("network") or {}
    air = doc.get("air") or {}
    solver = doc.get("solver") or {}
    links = air.get("links")
    cfg = ScenarioConfig(
        vertiports=vertiports, G=G, K=K, A=np.vstack(rows), b=np.concatenate(rhs),
        gamma=float(doc.get("gamma", 0.0)), omega=float(doc.get("omega", 0.0)),
        mu=None if doc.get("mu") is None else float(doc["mu"]),
        air_speed=float(air.get("speed", 1.0)), air_capacity=float(air.get("capacity", 80.0)),
        air_links=None if links is None else tuple(
            (int(t), int(h), float(c), float(f)) for t, h, c, f in links),
        demand_scale=float(net.get("demand_scale", 1.0)), time_scale=float(net.get("time_scale", 1.0)),
        destinations=None if net.get("destinations") is None else tuple(int(d) for d in net["destinations"]),
        net_path=net.get("net"), trips_path=net.get("trips"), nodes_path=net.get("nodes"),
        rel_gap=float(solver.get("rel_gap", 1e-6)), node_limit=int(solver.get("node_limit", 200_000)),
        base_dir=None if base_dir is None else str(base_dir),
    )
    check_scenario(cfg)
    return cfg


def parse_scenario(path: PathLike) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read scenario ({exc.strerror})", path) from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(f"invalid YAML: {exc}", path, None if mark is None else mark.line + 1) from exc
    return scenario_from_dict(doc or {}, Path(path).resolve().parent)


def dump_scenario(cfg: ScenarioConfig, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.as_dict(), fh, sort_keys=False, default_flow_style=None)


@dataclass(frozen=True)
class Instance:
    net: HybridNetwork
    demand: DemandTable
    coords: Optional[np.ndarray] = None


def load_instance(cfg: ScenarioConfig, net_path: Optional[PathLike] = None,
                  trips_path: Optional[PathLike] = None, nodes_path: Optional[PathLike] = None,
                  demand_scale: Optional[float] = None) -> Instance:
    """Build the hybrid network and demand table a scenario describes.

    Explicit paths override the ones stored in the scenario.
    """
    net_path = net_path or cfg.resolve(cfg.net_path)
    trips_path = trips_path or cfg.resolve(cfg.trips_path)
    nodes_path = nodes_path or cfg.resolve(cfg.nodes_path)
    if net_path is None or trips_path is None:
        raise ValidationError("scenario needs a network and a trips file", "network")
    nf = parse_network(net_path)
    ground = [(lk.tail, lk.head, lk.free_time * cfg.time_scale, lk.capacity) for lk in nf.links]
    for v in cfg.vertiports:
        if not 1 <= v <= nf.n_nodes:
            raise ValidationError(f"vertiport node {v} outside 1..{nf.n_nodes}", "vertiports", v)
    coords = parse_nodes(nodes_path, nf.n_nodes) if nodes_path is not None else None
    base = HybridNetwork.build(nf.n_nodes, ground, (), cfg.vertiports)
    if cfg.air_links is not None:
        net = base.with_air_links(cfg.air_links)
    elif cfg.n_v >= 2:
        if coords is None:
            raise ValidationError("air links must be listed or node coordinates supplied", "air")
        net = base.with_air_links(generate_air_links(base, cfg.vertiports, coords, cfg.air_speed,
                                                     cfg.air_capacity))
    else:
        net = base
    raw = parse_trips(trips_path)
    scale = cfg.demand_scale if demand_scale is None else demand_scale
    demand = balance_demand(raw, cfg.destinations, net.n_nodes, scale)
    return Instance(net, demand, coords)
