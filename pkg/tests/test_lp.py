import io

import numpy as np
import pytest
import scipy.optimize as so
from hypothesis import given, settings
from hypothesis import strategies as st

from vertiport.lp import (LinearProgram, LPError, LPOptions, MBPOptions, MixedBinaryProgram, Status,
                          dual_objective, farkas_gap, read_mps, solve_lp, solve_mbp, write_mps)


def random_lp(seed, n, m_eq, m_le, boxed):
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0, 2, size=n)
    A_eq = rng.normal(size=(m_eq, n)).round(2)
    A_le = rng.normal(size=(m_le, n)).round(2)
    b_eq = A_eq @ x0
    b_le = A_le @ x0 + rng.uniform(0, 1, size=m_le)
    c = rng.normal(size=n).round(2)
    ub = np.where(rng.random(n) < 0.5, 3.0, np.inf) if boxed else np.full(n, np.inf)
    if not boxed:
        # keep the feasible region bounded so the optimum exists
        A_le = np.vstack([A_le, np.ones((1, n))])
        b_le = np.append(b_le, x0.sum() + 5.0)
    return LinearProgram.build(c, A_eq, b_eq, A_le, b_le, 0.0, ub)


def scipy_solve(lp):
    return so.linprog(lp.c, A_ub=lp.A_le.toarray() if lp.m_le else None, b_ub=lp.b_le if lp.m_le else None,
                      A_eq=lp.A_eq.toarray() if lp.m_eq else None, b_eq=lp.b_eq if lp.m_eq else None,
                      bounds=list(zip(lp.lb, [None if not np.isfinite(u) else u for u in lp.ub])),
                      method="highs")


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(1, 12), m_eq=st.integers(0, 4), m_le=st.integers(0, 6),
       boxed=st.booleans())
def test_random_lp_matches_highs_with_zero_duality_gap(seed, n, m_eq, m_le, boxed):
    m_eq = min(m_eq, n)
    lp = random_lp(seed, n, m_eq, m_le, boxed)
    ref = scipy_solve(lp)
    sol = solve_lp(lp)
    if ref.status == 3:
        assert sol.status == Status.UNBOUNDED
        return
    assert ref.status == 0
    assert sol.status == Status.OPTIMAL
    assert sol.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)
    res = lp.primal_residuals(sol.x)
    assert max(res.values()) <= 1e-7
    assert np.all(sol.y_le >= -1e-9)
    assert dual_objective(lp, sol) == pytest.approx(sol.objective, rel=1e-7, abs=1e-7)


def test_small_textbook_lp():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
    lp = LinearProgram.build([-3, -5], A_le=[[1, 0], [0, 2], [3, 2]], b_le=[4, 12, 18])
    sol = solve_lp(lp)
    assert sol.optimal
    np.testing.assert_allclose(sol.x, [2, 6], atol=1e-12)
    assert sol.objective == pytest.approx(-36)
    np.testing.assert_allclose(sol.y_le, [0, 1.5, 1], atol=1e-12)


def test_degenerate_lp_terminates():
    # Klee-Minty-like degenerate vertex: many constraints active at the origin
    n = 6
    A = np.vstack([np.eye(n), -np.eye(n) + np.eye(n, k=1), np.ones((1, n))])
    b = np.concatenate([np.ones(n), np.zeros(n), [n / 2]])
    lp = LinearProgram.build(-np.arange(1, n + 1, dtype=float), A_le=A, b_le=b)
    sol = solve_lp(lp)
    assert sol.optimal
    assert sol.objective == pytest.approx(scipy_solve(lp).fun, abs=1e-9)


def test_infeasible_lp_returns_farkas_certificate():
    lp = LinearProgram.build([1, 1], A_eq=[[1, 1]], b_eq=[5], A_le=[[1, 0], [0, 1]], b_le=[2, 2])
    sol = solve_lp(lp)
    assert sol.status == Status.INFEASIBLE
    cert = sol.certificate
    assert cert["gap"] > 0
    assert farkas_gap(lp, cert["y_eq"], cert["y_le"]) == pytest.approx(cert["gap"])


def test_unbounded_lp_returns_ray():
    lp = LinearProgram.build([-1, 0], A_le=[[0, 1]], b_le=[1])
    sol = solve_lp(lp)
    assert sol.status == Status.UNBOUNDED
    ray = sol.certificate["ray"]
    assert lp.c @ ray < 0
    assert np.all(lp.A_le @ ray <= 1e-12)


def test_free_and_fixed_variables():
    lp = LinearProgram.build([1, -1, 0], A_eq=[[1, 1, 1]], b_eq=[3], lb=[-np.inf, 0, 2], ub=[np.inf, 4, 2])
    sol = solve_lp(lp)
    assert sol.optimal
    np.testing.assert_allclose(sol.x, [-3, 4, 2], atol=1e-12)


def test_rowless_lp():
    sol = solve_lp(LinearProgram.build([1, -1], lb=[0, -1], ub=[1, 2]))
    np.testing.assert_allclose(sol.x, [0, 2])


def test_warm_start_reuses_basis():
    lp = random_lp(3, 10, 3, 5, True)
    cold = solve_lp(lp)
    warm = solve_lp(lp.with_objective(lp.c + 0.01), warm=cold.basis)
    again = solve_lp(lp.with_objective(lp.c + 0.01))
    assert warm.objective == pytest.approx(again.objective, rel=1e-9)
    assert warm.iterations <= again.iterations


def test_iteration_limit_status():
    lp = random_lp(5, 12, 2, 6, False)
    sol = solve_lp(lp, LPOptions(max_iters=1))
    assert sol.status in (Status.ITERATION_LIMIT, Status.OPTIMAL)


def test_build_rejects_inconsistent_shapes():
    with pytest.raises(LPError):
        LinearProgram.build([1, 2], A_eq=[[1, 2, 3]], b_eq=[1])


def test_mps_round_trip():
    lp = random_lp(11, 6, 2, 3, True)
    buf = io.StringIO()
    write_mps(lp, buf, binaries=[0, 2])
    back, bins = read_mps(io.StringIO(buf.getvalue()))
    assert bins == [0, 2]
    np.testing.assert_allclose(back.c, lp.c)
    np.testing.assert_allclose(back.A_eq.toarray(), lp.A_eq.toarray())
    np.testing.assert_allclose(back.A_le.toarray(), lp.A_le.toarray())
    np.testing.assert_allclose(back.b_eq, lp.b_eq)
    np.testing.assert_allclose(back.b_le, lp.b_le)
    np.testing.assert_array_equal(back.ub, lp.ub)
    # fixed-format fields hold 12 characters per number
    assert solve_lp(back).objective == pytest.approx(solve_lp(lp).objective, rel=1e-8)


# ------------------------------------------------------------ branch and bound

@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_mbp_matches_highs_milp(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    nb = int(rng.integers(1, n + 1))
    m = int(rng.integers(1, 5))
    c = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    b = rng.uniform(0, 3, size=m)
    ub = np.full(n, 3.0)
    ub[:nb] = 1.0
    lp = LinearProgram.build(c, A_le=A, b_le=b, lb=0.0, ub=ub)
    res = solve_mbp(MixedBinaryProgram(lp, np.arange(nb)))
    integ = np.zeros(n)
    integ[:nb] = 1
    ref = so.milp(c, constraints=[so.LinearConstraint(A, -np.inf, b)], integrality=integ,
                  bounds=so.Bounds(0, ub))
    if ref.status == 2:
        assert res.status == Status.INFEASIBLE
        return
    assert res.status == Status.OPTIMAL
    assert res.objective == pytest.approx(ref.fun, rel=1e-6, abs=1e-6)
    assert res.gap <= 1e-6
    assert np.all(np.abs(res.assignment - np.round(res.assignment)) == 0)


def test_mbp_breaks_ties_lexicographically():
    # choose exactly one of four identical items: every choice is optimal
    lp = LinearProgram.build(np.full(4, -1.0), A_le=[[1, 1, 1, 1]], b_le=[1], lb=0, ub=1)
    res = solve_mbp(MixedBinaryProgram(lp, np.arange(4)))
    np.testing.assert_array_equal(res.assignment, [0, 0, 0, 1])


def test_mbp_prefers_zero_when_tied_with_empty_selection():
    lp = LinearProgram.build(np.zeros(3), A_le=[[1, 1, 1]], b_le=[2], lb=0, ub=1)
    res = solve_mbp(MixedBinaryProgram(lp, np.arange(3)))
    np.testing.assert_array_equal(res.assignment, [0, 0, 0])


def test_mbp_node_limit_reports_status():
    rng = np.random.default_rng(0)
    n = 14
    w = rng.integers(5, 30, size=n).astype(float)
    v = w + rng.integers(-3, 4, size=n)
    lp = LinearProgram.build(-v, A_le=[w], b_le=[w.sum() / 2 + 0.5], lb=0, ub=1)
    res = solve_mbp(MixedBinaryProgram(lp, np.arange(n)), MBPOptions(node_limit=2))
    assert res.status in (Status.NODE_LIMIT, Status.OPTIMAL)
    assert res.nodes <= 3


def test_mbp_bound_history_is_monotone():
    rng = np.random.default_rng(1)
    n = 10
    w = rng.integers(5, 30, size=n).astype(float)
    lp = LinearProgram.build(-(w + rng.integers(-3, 4, size=n)), A_le=[w], b_le=[w.sum() / 2], lb=0, ub=1)
    res = solve_mbp(MixedBinaryProgram(lp, np.arange(n)))
    bounds = [b for _, b in res.bound_history] if res.bound_history and isinstance(res.bound_history[0], tuple) \
        else list(res.bound_history)
    assert all(b2 >= b1 - 1e-9 for b1, b2 in zip(bounds, bounds[1:]))


def test_mbp_rejects_bad_binary_index():
    lp = LinearProgram.build([1.0, 1.0])
    with pytest.raises(LPError):
        MixedBinaryProgram(lp, [2])
