"""Compare the numba kernels with their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Part one times individual kernels in-process on synthetic inputs. Part two
re-runs a whole equilibrium and selection solve in a subprocess per backend,
toggled with VERTIPORT_DISABLE_JIT, and checks both give the same answer.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from vertiport import _kernels as K


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(rng):
    n = 2000
    d = rng.normal(size=n)
    status = rng.integers(0, 4, size=n).astype(np.int8)
    weight = np.ones(n)
    yield "price_primal", (d, status, weight, 1e-7, n, 1, 0, False)

    n_nodes, deg = 400, 4
    tails = rng.integers(0, n_nodes, size=n_nodes * deg).astype(np.int64)
    heads = rng.integers(0, n_nodes, size=n_nodes * deg).astype(np.int64)
    order = np.argsort(heads, kind="stable").astype(np.int64)
    ptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(ptr, heads + 1, 1)
    ptr = np.cumsum(ptr)
    w = rng.uniform(0.1, 2.0, size=tails.size)
    yield "dist_to", (n_nodes, ptr, order, tails, w, 0)

    n_v, n_c = 8, 2
    Kc = np.tile([1.0, 2.0], (n_v, 1))
    A = np.zeros((0, n_v * n_c))
    yield "enumerate_selections", (n_v, n_c, Kc, A, np.zeros(0), 8.0, 1e-9, 100_000)


def end_to_end(disable: bool) -> dict:
    code = (
        "import json,time,numpy as np\n"
        "from vertiport import _kernels\n"
        "from vertiport.netmodel import build_incidence\n"
        "from vertiport.equilibrium import solve_equilibrium\n"
        "from vertiport.selection import SelectionProblem, SelectionOptions, solve_selection\n"
        "from vertiport.synth import nine_port_scenario\n"
        "net, demand, _, cfg = nine_port_scenario(gamma=6)\n"
        "inc = build_incidence(net)\n"
        "solve_equilibrium(net, inc, demand, np.zeros(net.n_v))\n"
        "t0 = time.perf_counter()\n"
        "eq = solve_equilibrium(net, inc, demand, np.full(net.n_v, 100.0))\n"
        "t1 = time.perf_counter()\n"
        "sol = solve_selection(SelectionProblem.from_config(net, demand, cfg), SelectionOptions())\n"
        "t2 = time.perf_counter()\n"
        "print(json.dumps({'backend': _kernels.backend(), 'equilibrium_s': t1 - t0, 'selection_s': t2 - t1,\n"
        "                  'eq_objective': eq.objective, 'sel_objective': sol.objective}))\n"
    )
    env = dict(os.environ)
    env.pop("VERTIPORT_DISABLE_JIT", None)
    if disable:
        env["VERTIPORT_DISABLE_JIT"] = "1"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    if out.returncode:
        sys.exit(f"end-to-end run failed:\n{out.stderr}")
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        print("numba is not installed; both columns use numpy")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<22} {'numba [ms]':>11} {'numpy [ms]':>11} {'speedup':>8}")
    for name, argv in kernel_cases(rng):
        t_jit = best_of(lambda: K.JIT_IMPL[name](*argv), args.repeat)
        t_np = best_of(lambda: K.PY_IMPL[name](*argv), args.repeat)
        print(f"{name:<22} {t_jit * 1e3:11.3f} {t_np * 1e3:11.3f} {t_np / t_jit:8.1f}x")

    if args.skip_end_to_end:
        return
    jit, ref = end_to_end(False), end_to_end(True)
    print()
    print(f"{'solve':<22} {jit['backend'] + ' [s]':>11} {ref['backend'] + ' [s]':>11} {'speedup':>8}")
    for key in ("equilibrium_s", "selection_s"):
        print(f"{key[:-2]:<22} {jit[key]:11.3f} {ref[key]:11.3f} {ref[key] / jit[key]:8.1f}x")
    diff = max(abs(jit[k] - ref[k]) / (1 + abs(ref[k])) for k in ("eq_objective", "sel_objective"))
    print(f"max relative objective difference across backends: {diff:.1e}")


if __name__ == "__main__":
    main()
