"""Budget sweeps, baseline comparisons and CSV/JSON exports.

Sweep CSV columns, in order: ``gamma, obj_milp, obj_knapsack,
reduction_milp, reduction_knapsack, links_decreased_milp,
links_decreased_knapsack, cost_milp, cost_knapsack, gap_milp,
selection_milp, selection_knapsack, error``. Missing values are ``nan``
(numbers) or empty (text). Selections are written as ``position:option``
pairs separated by spaces, both 1-based.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .equilibrium import Equilibrium, equilibrium_to_dict, link_loading
from .netmodel import ValidationError
from .selection import (SelectionError, SelectionOptions, SelectionProblem, SelectionSolution,
                        ground_baseline, linearization_residuals, solve_knapsack, solve_selection)

log = logging.getLogger(__name__)

SWEEP_SCHEMA = "vertiport.sweep/1"
SELECTION_SCHEMA = "vertiport.selection/1"


class SweepInvariantError(AssertionError):
    pass


@dataclass
class SweepRow:
    gamma: float
    obj_milp: float = math.nan
    obj_knapsack: float = math.nan
    reduction_milp: float = math.nan
    reduction_knapsack: float = math.nan
    links_decreased_milp: float = math.nan
    links_decreased_knapsack: float = math.nan
    cost_milp: float = math.nan
    cost_knapsack: float = math.nan
    gap_milp: float = math.nan
    selection_milp: str = ""
    selection_knapsack: str = ""
    error: str = ""


COLUMNS = tuple(f.name for f in fields(SweepRow))
_TEXT = {"selection_milp", "selection_knapsack", "error"}


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)
    method: str = "both"
    baseline_loading: float = math.nan

    @property
    def gammas(self) -> list:
        return [r.gamma for r in self.rows]

    def check_monotone(self, tol: float = 1e-6) -> None:
        """MILP objective must not increase with the budget."""
        prev = None
        for r in self.rows:
            if r.error or math.isnan(r.obj_milp):
                continue
            if prev is not None and r.obj_milp > prev.obj_milp + tol * (1.0 + abs(prev.obj_milp)):
                raise SweepInvariantError(
                    f"MILP objective rose from {prev.obj_milp:.9g} (gamma={prev.gamma:g}) "
                    f"to {r.obj_milp:.9g} (gamma={r.gamma:g})")
            prev = r


def baseline_ground(problem: SelectionProblem, opts: Optional[SelectionOptions] = None) -> Equilibrium:
    """Equilibrium with every vertiport closed (no air traffic)."""
    return ground_baseline(problem, opts)


def ground_loading_delta(problem: SelectionProblem, base: Equilibrium, eq: Equilibrium) -> tuple:
    """``(total reduction, links with strictly lower loading)`` over ground links."""
    ground = ~problem.net.is_air
    before = link_loading(base)[ground]
    after = link_loading(eq)[ground]
    scale = max(float(np.max(before, initial=0.0)), float(np.max(after, initial=0.0)))
    diff = before - after
    return float(math.fsum(diff.tolist())), int(np.sum(diff > 1e-6 * scale))


def selection_label(B: np.ndarray) -> str:
    return " ".join(f"{i + 1}:{c + 1}" for i, c in zip(*np.nonzero(B)))


def _sweep_point(args) -> SweepRow:
    problem, base, gamma, method, opts = args
    row = SweepRow(gamma=float(gamma))
    p = problem.with_gamma(gamma)
    errors = []
    if method in ("milp", "both"):
        try:
            sol = solve_selection(p, opts)
            row.obj_milp, row.cost_milp, row.gap_milp = sol.objective, sol.cost, sol.gap
            row.reduction_milp, n = ground_loading_delta(p, base, sol.equilibrium)
            row.links_decreased_milp = float(n)
            row.selection_milp = selection_label(sol.B)
        except (SelectionError, ValidationError, ArithmeticError) as exc:
            errors.append(f"milp: {exc}")
    if method in ("knapsack", "both"):
        try:
            sol = solve_knapsack(p, None, opts)
            row.obj_knapsack, row.cost_knapsack = sol.objective, sol.cost
            row.reduction_knapsack, n = ground_loading_delta(p, base, sol.equilibrium)
            row.links_decreased_knapsack = float(n)
            row.selection_knapsack = selection_label(sol.B)
        except (SelectionError, ValidationError, ArithmeticError) as exc:
            errors.append(f"knapsack: {exc}")
    row.error = "; ".join(errors)
    return row


def run_sweep(problem: SelectionProblem, gammas: Sequence[float], method: str = "both",
              opts: Optional[SelectionOptions] = None, jobs: int = 1) -> SweepResult:
    """Solve every budget in ``gammas``; rows come back in increasing budget
    order whatever ``jobs`` is. Per-budget failures land in the row's
    ``error`` column."""
    if method not in ("milp", "knapsack", "both"):
        raise ValidationError(f"method must be milp, knapsack or both, not {method!r}", "method")
    opts = opts or SelectionOptions()
    gammas = sorted({float(g) for g in gammas})
    if any(g < 0 for g in gammas):
        raise ValidationError("budgets must be >= 0", "gamma")
    base = baseline_ground(problem, opts)
    tasks = [(problem, base, g, method, opts) for g in gammas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    result = SweepResult(rows, method, base.loading)
    result.check_monotone()
    return result


# ---------------------------------------------------------------- export

def _cell(name: str, value) -> str:
    if name in _TEXT:
        return str(value)
    return repr(float(value))


def sweep_to_csv(sweep: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in sweep.rows:
        w.writerow([_cell(c, getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def sweep_from_csv(text: str) -> SweepResult:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return SweepResult()
    missing = [c for c in COLUMNS if c not in reader.fieldnames]
    if missing:
        raise ValidationError(f"sweep CSV lacks columns {missing}", "csv")
    rows = [SweepRow(**{c: (rec[c] if c in _TEXT else float(rec[c])) for c in COLUMNS}) for rec in reader]
    return SweepResult(rows)


def _json_num(x: float):
    return None if isinstance(x, float) and math.isnan(x) else x


def sweep_to_dict(sweep: SweepResult) -> dict:
    return {"schema": SWEEP_SCHEMA, "method": sweep.method, "baseline_loading": _json_num(sweep.baseline_loading),
            "columns": list(COLUMNS),
            "rows": [{k: _json_num(v) for k, v in asdict(r).items()} for r in sweep.rows]}


def sweep_from_dict(doc: dict) -> SweepResult:
    if doc.get("schema") != SWEEP_SCHEMA:
        raise ValidationError(f"unsupported sweep schema {doc.get('schema')!r}", "schema")
    rows = [SweepRow(**{k: (math.nan if v is None else v) for k, v in r.items()}) for r in doc["rows"]]
    base = doc.get("baseline_loading")
    return SweepResult(rows, doc.get("method", "both"), math.nan if base is None else base)


def selection_to_dict(sol: SelectionSolution, problem: SelectionProblem) -> dict:
    eq = sol.equilibrium
    through = problem.inc.D @ eq.link_flow
    doc = {
        "schema": SELECTION_SCHEMA,
        "method": sol.method,
        "gamma": problem.gamma,
        "omega": problem.omega,
        "B": sol.B.tolist(),
        "g": sol.g.tolist(),
        "selected": [{"vertiport": int(problem.net.vertiports[i - 1]), "position": i, "option": c,
                      "capacity": float(problem.G[i - 1, c - 1]), "cost": float(problem.K[i - 1, c - 1])}
                     for i, c in sol.selected],
        "vertiports": [{"node": int(v), "capacity": float(sol.g[i]), "throughput": float(through[i]),
                        "delay": float(eq.q[i])} for i, v in enumerate(problem.net.vertiports)],
        "loading": sol.loading,
        "cost": sol.cost,
        "objective": sol.objective,
        "gap": sol.gap,
        "nodes": sol.nodes,
        "mu": sol.mu,
        "equilibrium": equilibrium_to_dict(eq, problem.net, problem.inc, problem.demand),
    }
    if sol.Y is not None:
        doc["Y"] = sol.Y.tolist()
        doc["linearization"] = linearization_residuals(sol, problem.G)
    return doc


def equilibrium_to_csv(eq: Equilibrium, net) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["link", "tail", "head", "kind", "flow", "effective_cost", "delay", "loading"])
    lk = link_loading(eq)
    flow = eq.link_flow
    for k, link in enumerate(net.links):
        w.writerow([link.id, link.tail, link.head, link.kind, repr(float(flow[k])),
                    repr(float(eq.effective_cost[k])), repr(float(eq.p[k])), repr(float(lk[k]))])
    return buf.getvalue()


def render(obj, fmt: str, *, net=None, inc=None, demand=None, problem=None) -> str:
    """Serialize a sweep, equilibrium or selection as ``csv`` or ``json`` text.

    Equilibria need ``net``, ``inc`` and ``demand``; selections need
    ``problem``.
    """
    if fmt not in ("csv", "json"):
        raise ValidationError(f"format must be csv or json, not {fmt!r}", "format")
    if isinstance(obj, SweepResult):
        return sweep_to_csv(obj) if fmt == "csv" else _dumps(sweep_to_dict(obj))
    if isinstance(obj, Equilibrium):
        if net is None:
            raise ValidationError("equilibrium export needs the network", "net")
        return equilibrium_to_csv(obj, net) if fmt == "csv" else _dumps(equilibrium_to_dict(obj, net, inc, demand))
    if isinstance(obj, SelectionSolution):
        if problem is None:
            raise ValidationError("selection export needs the problem", "problem")
        if fmt == "csv":
            return equilibrium_to_csv(obj.equilibrium, problem.net)
        return _dumps(selection_to_dict(obj, problem))
    raise TypeError(f"cannot export {type(obj).__name__}")


def export(obj, fmt: str, path, **kw) -> Path:
    """:func:`render` to a file."""
    path = Path(path)
    path.write_text(render(obj, fmt, **kw), encoding="utf-8")
    return path


def _dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def load_sweep(path) -> SweepResult:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return sweep_from_dict(json.loads(text))
    return sweep_from_csv(text)


# ---------------------------------------------------------------- text tables

def format_sweep(sweep: SweepResult) -> str:
    head = f"{'gamma':>6} {'obj_milp':>14} {'obj_knapsack':>14} {'red_milp':>12} {'red_knap':>12} {'dec_m':>5} {'dec_k':>5}"
    lines = [head]
    for r in sweep.rows:
        lines.append(f"{r.gamma:6g} {r.obj_milp:14.6f} {r.obj_knapsack:14.6f} {r.reduction_milp:12.4f} "
                     f"{r.reduction_knapsack:12.4f} {r.links_decreased_milp:5.0f} {r.links_decreased_knapsack:5.0f}"
                     + (f"  ! {r.error}" if r.error else ""))
    return "\n".join(lines)


def format_selection(sol: SelectionSolution, problem: SelectionProblem) -> str:
    eq = sol.equilibrium
    through = problem.inc.D @ eq.link_flow
    lines = [f"{'vertiport':>9} {'option':>6} {'capacity':>10} {'throughput':>11} {'delay':>10}"]
    for i, v in enumerate(problem.net.vertiports):
        opt = int(np.argmax(sol.B[i])) + 1 if sol.B[i].any() else 0
        lines.append(f"{v:9d} {opt:6d} {sol.g[i]:10.1f} {through[i]:11.3f} {eq.q[i]:10.5f}")
    lines.append(f"method={sol.method} loading={sol.loading:.6f} cost={sol.cost:g} "
                 f"objective={sol.objective:.6f} gap={sol.gap:.2e} nodes={sol.nodes}")
    return "\n".join(lines)
