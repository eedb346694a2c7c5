"""``vertiport`` command line.

Exit codes: 0 success, 2 invalid input or failed verification, 3 infeasible
(demand exceeds capacity, or no selection satisfies the constraints),
1 anything else.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .equilibrium import (EquilibriumError, EquilibriumOptions, InfeasibleDemand, assemble_equilibrium_lp,
                          equilibrium_from_dict, solve_equilibrium, verify_kkt, verify_wardrop)
from .ingest import ParseError, load_instance, parse_scenario
from .lp import LPOptions, write_mps
from .netmodel import ValidationError, build_incidence
from .report import SweepInvariantError, format_selection, format_sweep, render, run_sweep
from .selection import (OracleCapExceeded, SelectionError, SelectionInfeasible, SelectionOptions,
                        SelectionProblem, assemble_selection_milp, choose_big_m, default_jobs,
                        solve_knapsack, solve_selection, solve_selection_oracle)

log = logging.getLogger("vertiport")

DATA_ENV = "VERTIPORT_DATA"
EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2, 3


def data_dir() -> Path:
    """Directory searched for relative input paths that do not exist as given."""
    env = os.environ.get(DATA_ENV)
    return Path(env) if env else Path(__file__).with_name("data")


def resolve(path: Optional[str]) -> Optional[Path]:
    if path is None:
        return None
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p
    alt = data_dir() / p
    return alt if alt.exists() else p


def _floats(text: str) -> list:
    """``"5,6,7"`` or ``"5:11"`` (inclusive, step 1) or ``"5:11:2"``."""
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        lo, hi = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1.0
        if step <= 0:
            raise argparse.ArgumentTypeError("range step must be positive")
        return [float(v) for v in np.arange(lo, hi + step / 2, step)]
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vertiport", description="Hybrid air-ground equilibria and vertiport selection.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, instance=True):
        p.add_argument("-v", "--verbose", action="count", default=0)
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        if not instance:
            return
        p.add_argument("--scenario", help="scenario YAML")
        p.add_argument("--net", help="TNTP network file (overrides the scenario)")
        p.add_argument("--trips", help="TNTP trips file (overrides the scenario)")
        p.add_argument("--nodes", help="TNTP node coordinate file (overrides the scenario)")
        p.add_argument("--demand-scale", type=float)
        p.add_argument("--feas-tol", type=float, default=1e-7)
        p.add_argument("--opt-tol", type=float, default=1e-7)
        p.add_argument("--verify-tol", type=float, default=1e-6)
        p.add_argument("--dump-lp", metavar="MPS", help="write the assembled LP/MILP in MPS format")

    def selection(p):
        p.add_argument("--gamma", type=float)
        p.add_argument("--omega", type=float)
        p.add_argument("--mu", type=float)
        p.add_argument("--rel-gap", type=float)
        p.add_argument("--node-limit", type=int)
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")

    p = sub.add_parser("equilibrium", help="solve the equilibrium for fixed vertiport capacities")
    common(p)
    p.add_argument("--g", type=_floats, help="vertiport capacities, comma separated (default: all 0)")
    p.add_argument("--no-refine", action="store_true", help="report the solver's vertex duals as-is")

    p = sub.add_parser("verify", help="check an exported equilibrium or selection certificate")
    common(p, instance=False)
    p.add_argument("--equilibrium", required=True, help="JSON written by equilibrium/select/oracle/knapsack")
    p.add_argument("--tol", type=float, default=1e-6)

    for name, text in (("select", "optimal selection via the MILP"),
                       ("oracle", "optimal selection by enumeration"),
                       ("knapsack", "demand-weighted knapsack baseline")):
        p = sub.add_parser(name, help=text)
        common(p)
        selection(p)
        if name == "oracle":
            p.add_argument("--cap", type=int, default=4096, help="maximum feasible selections to enumerate")

    p = sub.add_parser("sweep", help="MILP vs knapsack over a range of budgets")
    common(p)
    selection(p)
    p.add_argument("--gammas", type=_floats, required=True, help="e.g. 5:11 or 5,6,8")
    p.add_argument("--method", choices=("milp", "knapsack", "both"), default="both")
    return ap


class _Context:
    def __init__(self, args):
        self.args = args
        if args.scenario is None:
            raise ValidationError("--scenario is required (it names the vertiports and capacity options)", "scenario")
        self.cfg = parse_scenario(resolve(args.scenario))
        self.inst = load_instance(self.cfg, resolve(args.net), resolve(args.trips), resolve(args.nodes),
                                  args.demand_scale)
        self.net, self.demand = self.inst.net, self.inst.demand
        self.inc = build_incidence(self.net)
        self.lp_opts = LPOptions(feas_tol=args.feas_tol, opt_tol=args.opt_tol)

    def problem(self) -> SelectionProblem:
        a = self.args
        return SelectionProblem.from_config(self.net, self.demand, self.cfg, gamma=getattr(a, "gamma", None),
                                            omega=getattr(a, "omega", None), mu=getattr(a, "mu", None))

    def selection_options(self) -> SelectionOptions:
        a = self.args
        jobs = a.jobs if getattr(a, "jobs", None) else default_jobs()
        return SelectionOptions(
            rel_gap=a.rel_gap if getattr(a, "rel_gap", None) is not None else self.cfg.rel_gap,
            node_limit=a.node_limit if getattr(a, "node_limit", None) is not None else self.cfg.node_limit,
            lp=self.lp_opts, verify_tol=a.verify_tol, oracle_cap=getattr(a, "cap", 4096), jobs=jobs)


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dump_lp(path: Optional[str], lp, binaries=None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            write_mps(lp, fh, binaries)


def cmd_equilibrium(args) -> int:
    ctx = _Context(args)
    g = np.zeros(ctx.net.n_v) if args.g is None else np.asarray(args.g, dtype=float)
    if g.size != ctx.net.n_v:
        raise ValidationError(f"--g needs {ctx.net.n_v} values", "g")
    _dump_lp(args.dump_lp, assemble_equilibrium_lp(ctx.net, ctx.inc, ctx.demand, g))
    eq = solve_equilibrium(ctx.net, ctx.inc, ctx.demand, g,
                           EquilibriumOptions(lp=ctx.lp_opts, refine=not args.no_refine, verify_tol=args.verify_tol))
    _write(args, eq, net=ctx.net, inc=ctx.inc, demand=ctx.demand)
    log.info("objective %.9g loading %.9g", eq.objective, eq.loading)
    return EXIT_OK if eq.residuals.passed else EXIT_INVALID


def _write(args, obj, **kw) -> None:
    _emit(args, render(obj, args.format, **kw))


def cmd_verify(args) -> int:
    try:
        doc = json.loads(Path(args.equilibrium).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read {args.equilibrium}: {exc}", "equilibrium") from exc
    if isinstance(doc, dict) and "equilibrium" in doc and "schema" in doc and doc["schema"].startswith("vertiport.selection"):
        doc = doc["equilibrium"]
    try:
        eq, net, inc, demand = equilibrium_from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed equilibrium document: {exc}", "equilibrium") from exc
    kkt = verify_kkt(net, inc, demand, eq.g, eq, args.tol)
    wardrop = verify_wardrop(net, inc, demand, eq, args.tol)
    report = {"kkt": kkt.as_dict(), "wardrop": {"passed": wardrop.passed, "summary": str(wardrop)},
              "passed": kkt.passed and wardrop.passed}
    _emit(args, json.dumps(report, indent=1) + "\n")
    if not kkt.passed:
        print(f"verification failed: {', '.join(kkt.failures())}", file=sys.stderr)
    if not wardrop.passed:
        print(f"wardrop check failed: {wardrop}", file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_INVALID


def _selection_cmd(args, solver) -> int:
    ctx = _Context(args)
    problem = ctx.problem()
    opts = ctx.selection_options()
    if args.dump_lp:
        mu, _ = choose_big_m(problem, opts)
        mbp, _ = assemble_selection_milp(problem, mu)
        _dump_lp(args.dump_lp, mbp.lp, mbp.binaries)
    sol = solver(problem, opts)
    _write(args, sol, problem=problem)
    print(format_selection(sol, problem), file=sys.stdout if args.out else sys.stderr)
    return EXIT_OK


def cmd_select(args) -> int:
    return _selection_cmd(args, solve_selection)


def cmd_oracle(args) -> int:
    return _selection_cmd(args, lambda p, o: solve_selection_oracle(p, o, jobs=o.jobs))


def cmd_knapsack(args) -> int:
    return _selection_cmd(args, lambda p, o: solve_knapsack(p, None, o))


def cmd_sweep(args) -> int:
    ctx = _Context(args)
    problem = ctx.problem()
    opts = ctx.selection_options()
    sweep = run_sweep(problem, args.gammas, args.method, opts, jobs=opts.jobs)
    _write(args, sweep)
    print(format_sweep(sweep), file=sys.stdout if args.out else sys.stderr)
    return EXIT_OK


COMMANDS = {"equilibrium": cmd_equilibrium, "verify": cmd_verify, "select": cmd_select,
            "oracle": cmd_oracle, "knapsack": cmd_knapsack, "sweep": cmd_sweep}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (InfeasibleDemand, SelectionInfeasible) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        cert = getattr(exc, "certificate", None) or getattr(exc.__cause__, "certificate", None)
        if cert and "gap" in cert:
            print(f"  Farkas certificate margin {cert['gap']:.3e} "
                  f"({int(np.count_nonzero(cert.get('y_le', [])))} capacity rows involved)", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ParseError, ValidationError, OracleCapExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SelectionError, EquilibriumError, SweepInvariantError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
