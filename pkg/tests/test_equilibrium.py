import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from oracles import min_capacity_value, route_equilibrium
from vertiport.equilibrium import (Equilibrium, EquilibriumOptions, InfeasibleDemand, assemble_equilibrium_lp,
                                   build_equilibrium, equilibrium_from_dict, equilibrium_to_dict, link_loading,
                                   network_loading, refine_duals, shortest_to, solve_equilibrium, verify_kkt,
                                   verify_wardrop)
from vertiport.lp import farkas_gap
from vertiport.netmodel import DemandTable, HybridNetwork, balance_demand, build_incidence
from vertiport.synth import grid_instance, toy_demand, toy_network


def solve(net, inc, demand, g, **kw):
    return solve_equilibrium(net, inc, demand, np.asarray(g, dtype=float), EquilibriumOptions(**kw))


def three_way(eq, net, demand):
    return (eq.loading, eq.objective + eq.capacity_value(net.capacity), float(np.sum(eq.V * demand.S)))


def test_lp_dimensions_for_toy(toy):
    net, inc, demand = toy
    lp = assemble_equilibrium_lp(net, inc, demand, np.array([10.0, 10.0]))
    assert (lp.n, lp.m_eq, lp.m_le) == (12, 8, 8)
    np.testing.assert_array_equal(lp.c, np.tile(net.free_time, 2))
    np.testing.assert_array_equal(lp.b_le, np.concatenate([net.capacity, [10, 10]]))


def test_no_destinations_gives_empty_equilibrium(toy):
    net, inc, _ = toy
    empty = DemandTable((), np.zeros((4, 0)))
    assert assemble_equilibrium_lp(net, inc, empty, np.zeros(2)).n == 0
    eq = solve(net, inc, empty, [0, 0])
    assert eq.objective == 0 and eq.loading == 0 and eq.residuals.passed


def test_zero_demand_has_zero_flow_and_duals(toy):
    net, inc, _ = toy
    zero = balance_demand([], (2, 4), 4)
    eq = solve(net, inc, zero, [5, 5])
    assert not eq.X.any() and not eq.p.any() and not eq.q.any()
    assert eq.loading == 0


def test_closed_vertiports_keep_flow_on_the_ground(toy):
    net, inc, demand = toy
    eq = solve(net, inc, demand, [0, 0])
    assert not eq.X[net.is_air].any()


def test_toy_congested_objective_matches_route_oracle():
    net = toy_network(f=[8, 8, 8, 8, 4, 4])
    inc, demand = build_incidence(net), toy_demand(net)
    eq = solve(net, inc, demand, [10, 10])
    ref, _ = route_equilibrium(net, demand, np.array([10.0, 10.0]))
    assert eq.objective == pytest.approx(ref, rel=1e-9)
    assert eq.objective == pytest.approx(25.0)
    assert verify_kkt(net, inc, demand, eq.g, eq).passed
    assert verify_wardrop(net, inc, demand, eq).passed


def test_toy_air_shortcut_used_when_street_saturates(congested_toy):
    net, inc, demand = congested_toy
    eq = solve(net, inc, demand, [4, 4])
    np.testing.assert_allclose(eq.link_flow, [15, 0, 6, 4, 4, 0], atol=1e-12)
    ref, flow = route_equilibrium(net, demand, np.array([4.0, 4.0]))
    assert eq.objective == pytest.approx(ref, rel=1e-12)
    np.testing.assert_allclose(eq.link_flow, flow, atol=1e-9)
    assert eq.loading == pytest.approx(27.0)


def test_uncongested_toy_uses_free_shortest_paths(toy):
    net, inc, demand = toy
    eq = solve(net, inc, demand, [1e6, 1e6])
    assert not eq.p.any() and not eq.q.any()
    assert eq.loading == pytest.approx(eq.objective)
    for j, s in enumerate(demand.destinations):
        dist = shortest_to(net, net.free_time, s)
        for i in np.flatnonzero(demand.S[:, j] > 0):
            assert eq.V[i, j] - eq.V[s - 1, j] == pytest.approx(dist[i])


def test_used_routes_share_effective_cost(congested_toy):
    net, inc, demand = congested_toy
    eq = solve(net, inc, demand, [4, 4])
    cbar = eq.effective_cost
    ground_route = cbar[0] + cbar[2]  # 1->2->4
    air_route = cbar[0] + cbar[4] + cbar[3]  # 1->2->3->4
    unused_route = cbar[1] + cbar[3]  # 1->3->4
    assert ground_route == pytest.approx(air_route)
    assert unused_route >= ground_route - 1e-12
    j = demand.destinations.index(4)
    assert eq.V[0, j] - eq.V[3, j] == pytest.approx(ground_route)


def test_infeasible_demand_carries_farkas_certificate(toy):
    net = toy_network(f=[2, 2, 2, 2, 1, 1])
    inc, demand = build_incidence(net), toy_demand(net)
    with pytest.raises(InfeasibleDemand, match="exceeds network capacity") as err:
        solve(net, inc, demand, [0, 0])
    cert = err.value.certificate
    lp = assemble_equilibrium_lp(net, inc, demand, np.zeros(2))
    assert farkas_gap(lp, cert["y_eq"], cert["y_le"]) > 0


def test_refined_duals_drop_removable_capacity_price():
    # two parallel links of equal cost; the flow exactly fills link 1
    net = HybridNetwork.build(2, [(1, 2, 1.0, 5.0), (1, 2, 1.0, 5.0)])
    inc = build_incidence(net)
    demand = balance_demand([(1, 2, 10.0)], (2,), 2)
    eq = solve(net, inc, demand, [])
    assert not eq.p.any()
    assert eq.loading == pytest.approx(eq.objective)


def test_refine_reaches_minimum_capacity_value(congested_toy):
    net, inc, demand = congested_toy
    g = np.array([4.0, 4.0])
    eq = solve(net, inc, demand, g)
    best, least = min_capacity_value(net, inc, demand, g)
    assert eq.objective == pytest.approx(best, rel=1e-9)
    assert eq.capacity_value(net.capacity) == pytest.approx(least, rel=1e-7, abs=1e-9)


def test_refine_duals_direct_call(congested_toy):
    net, inc, demand = congested_toy
    g = np.array([4.0, 4.0])
    raw = solve(net, inc, demand, g, refine=False)
    V, U, p, q, sol = refine_duals(net, inc, demand, g, raw.objective)
    refined = build_equilibrium(net, inc, demand, g, raw.X, V, p, q, U)
    assert verify_kkt(net, inc, demand, g, refined).passed
    assert refined.capacity_value(net.capacity) <= raw.capacity_value(net.capacity) + 1e-9


def test_kkt_flags_tampered_flow(congested_toy):
    net, inc, demand = congested_toy
    eq = solve(net, inc, demand, [4, 4])
    eq.X[0, 0] += 1.0
    assert "flow conservation" in verify_kkt(net, inc, demand, eq.g, eq).failures()


def test_kkt_flags_foreign_duals(congested_toy, toy):
    net, inc, demand = congested_toy
    eq = solve(net, inc, demand, [4, 4])
    other = solve(*toy, [1e6, 1e6])
    eq.V, eq.p, eq.q = other.V + 3.0 * (other.V != 0), other.p, other.q
    assert "dual feasibility" in verify_kkt(net, inc, demand, eq.g, eq).failures()


def test_loading_sums_link_loadings(congested_toy):
    net, inc, demand = congested_toy
    eq = solve(net, inc, demand, [4, 4])
    per_link = link_loading(eq)
    assert network_loading(eq) == pytest.approx(per_link.sum(), rel=1e-15)
    assert link_loading(eq, 3) == per_link[2]
    np.testing.assert_allclose(eq.effective_cost, net.free_time + eq.p + inc.D.T @ eq.q)


def test_grid_equilibrium_certified(grid24):
    net, inc, demand = grid24
    for g in (np.zeros(4), np.full(4, 100.0), np.array([100.0, 200.0, 0.0, 100.0])):
        eq = solve(net, inc, demand, g)
        assert verify_kkt(net, inc, demand, g, eq, 1e-6).passed
        assert verify_wardrop(net, inc, demand, eq, 1e-6).passed
        lo, mid, hi = three_way(eq, net, demand)
        assert lo == pytest.approx(mid, rel=1e-6) and mid == pytest.approx(hi, rel=1e-6)


def test_repeated_solves_are_bit_identical(grid24):
    net, inc, demand = grid24
    a = solve(net, inc, demand, np.full(4, 100.0))
    b = solve(net, inc, demand, np.full(4, 100.0))
    assert a.objective == b.objective and a.loading == b.loading
    np.testing.assert_array_equal(a.X, b.X)


def test_objective_invariant_under_link_permutation(grid24):
    net, inc, demand = grid24
    base = solve(net, inc, demand, np.full(4, 100.0)).objective
    rng = np.random.default_rng(0)
    ground, air = net.ground_links(), net.air_links()
    shuffled = HybridNetwork.build(net.n_nodes, [ground[i] for i in rng.permutation(len(ground))],
                                   [air[i] for i in rng.permutation(len(air))], net.vertiports)
    other = solve(shuffled, build_incidence(shuffled), demand, np.full(4, 100.0)).objective
    assert other == pytest.approx(base, rel=1e-8)


def test_warm_start_gives_same_answer(grid24):
    net, inc, demand = grid24
    first = solve(net, inc, demand, np.full(4, 100.0))
    again = solve_equilibrium(net, inc, demand, np.full(4, 150.0), warm=first)
    cold = solve(net, inc, demand, np.full(4, 150.0))
    assert again.objective == pytest.approx(cold.objective, rel=1e-10)
    assert again.loading == pytest.approx(cold.loading, rel=1e-8)


def test_export_round_trip(congested_toy):
    net, inc, demand = congested_toy
    eq = solve(net, inc, demand, [4, 4])
    doc = json.loads(json.dumps(equilibrium_to_dict(eq, net, inc, demand)))
    back, net2, inc2, demand2 = equilibrium_from_dict(doc)
    assert net2 == net
    np.testing.assert_array_equal(demand2.S, demand.S)
    np.testing.assert_array_equal(back.X, eq.X)
    assert back.loading == eq.loading
    assert verify_kkt(net2, inc2, demand2, back.g, back).passed
    assert doc["loading"] == eq.loading
    assert [row["loading"] for row in doc["links"]] == link_loading(eq).tolist()


# ---------------------------------------------------------------- properties

def small_instance(seed):
    net, demand, _ = grid_instance(3, 3, (1, 3, 7, 9), seed=seed, spacing=1.0, ground_speed=1.0,
                                   air_speed=3.0, air_capacity=15.0, n_dest=4, per_dest=3)
    # shrink street capacities so congestion prices appear
    net = HybridNetwork.build(net.n_nodes, [(lk.tail, lk.head, lk.free_time, lk.capacity / 20)
                                            for lk in net.ground_links()], net.air_links(), net.vertiports)
    return net, build_incidence(net), DemandTable(demand.destinations, demand.S * 0.1)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=st.integers(0, 5000), g=st.lists(st.sampled_from([0.0, 5.0, 10.0, 40.0]), min_size=4, max_size=4))
def test_random_equilibria_match_route_oracle_and_certify(seed, g):
    net, inc, demand = small_instance(seed)
    g = np.array(g)
    ref = route_equilibrium(net, demand, g)
    if ref is None:
        with pytest.raises(InfeasibleDemand):
            solve(net, inc, demand, g)
        return
    eq = solve(net, inc, demand, g)
    assert eq.objective == pytest.approx(ref[0], rel=1e-8, abs=1e-9)
    assert verify_kkt(net, inc, demand, g, eq, 1e-6).passed
    assert verify_wardrop(net, inc, demand, eq, 1e-6).passed
    lo, mid, hi = three_way(eq, net, demand)
    assert abs(lo - mid) <= 1e-6 * (1 + abs(mid)) and abs(mid - hi) <= 1e-6 * (1 + abs(mid))
    _, least = min_capacity_value(net, inc, demand, g)
    assert eq.capacity_value(net.capacity) == pytest.approx(least, rel=1e-6, abs=1e-7)


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=st.integers(0, 5000), i=st.integers(0, 3), extra=st.sampled_from([1.0, 5.0, 50.0]))
def test_more_vertiport_capacity_never_raises_travel_cost(seed, i, extra):
    net, inc, demand = small_instance(seed)
    g = np.full(4, 5.0)
    try:
        lo = solve(net, inc, demand, g).objective
    except InfeasibleDemand:
        return
    g2 = g.copy()
    g2[i] += extra
    assert solve(net, inc, demand, g2).objective <= lo + 1e-8 * (1 + abs(lo))


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=st.integers(0, 5000))
def test_ample_capacity_routes_on_free_shortest_paths(seed):
    net, _, demand = small_instance(seed)
    big = demand.total() + 1.0
    roomy = HybridNetwork.build(net.n_nodes, [(lk.tail, lk.head, lk.free_time, big) for lk in net.ground_links()],
                                [(lk.tail, lk.head, lk.free_time, big) for lk in net.air_links()], net.vertiports)
    inc = build_incidence(roomy)
    eq = solve(roomy, inc, demand, np.full(4, 2 * big))
    assert not eq.p.any() and not eq.q.any()
    expected = 0.0
    for o, d, trips in demand.od_pairs():
        expected += trips * shortest_to(roomy, roomy.free_time, d)[o - 1]
    assert eq.objective == pytest.approx(expected, rel=1e-9)
