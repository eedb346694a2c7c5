import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vertiport.netmodel import (DemandTable, HybridNetwork, Link, ValidationError, balance_demand,
                                build_incidence, generate_air_links, median_pairwise_distance, validate_flow)
from vertiport.synth import toy_demand, toy_network

TOY_E = np.array([[1, 1, 0, 0, 0, 0],
                  [-1, 0, 1, 0, 1, -1],
                  [0, -1, 0, 1, -1, 1],
                  [0, 0, -1, -1, 0, 0]])
TOY_D = np.array([[0, 0, 0, 0, 1, 1],
                  [0, 0, 0, 0, 1, 1]])
TOY_S = np.array([[5, 10], [-5, 0], [0, 0], [0, -10]], dtype=float)
TOY_X = np.array([[5, 0, 0, 0, 0, 0],
                  [3, 7, 7, 3, 0, 4]], dtype=float).T


def test_toy_incidence_is_exact():
    inc = build_incidence(toy_network())
    np.testing.assert_array_equal(inc.E.toarray(), TOY_E)
    np.testing.assert_array_equal(inc.D.toarray(), TOY_D)


def test_toy_demand_balances():
    demand = toy_demand()
    assert demand.destinations == (2, 4)
    np.testing.assert_array_equal(demand.S, TOY_S)


def test_toy_flow_passes_all_checks_with_zero_residual():
    net = toy_network()
    report = validate_flow(net, build_incidence(net), TOY_X, toy_demand(), np.array([1e6, 1e6]))
    assert report.passed
    assert [c.name for c in report.checks] == ["flow conservation", "flow nonnegativity",
                                               "link capacity", "vertiport capacity"]
    assert all(c.residual == 0.0 for c in report.checks)


def test_vertiport_capacity_at_exact_load_passes_and_tighter_fails():
    net = toy_network()
    inc = build_incidence(net)
    np.testing.assert_array_equal(inc.D @ TOY_X.sum(axis=1), [4, 4])
    assert validate_flow(net, inc, TOY_X, toy_demand(), np.array([4.0, 4.0])).passed
    report = validate_flow(net, inc, TOY_X, toy_demand(), np.array([3.0, 3.0]))
    assert report.failures() == ["vertiport capacity"]
    assert report["vertiport capacity"].residual == pytest.approx(1.0)


def test_zero_flow_fails_conservation_by_largest_demand():
    net = toy_network()
    report = validate_flow(net, build_incidence(net), np.zeros((6, 2)), toy_demand(), np.zeros(2))
    assert "flow conservation" in report.failures()
    assert report["flow conservation"].residual == pytest.approx(10.0)


def test_link_capacity_violation_is_reported():
    net = toy_network(f=[1e6, 5, 1e6, 1e6, 1e6, 1e6])
    report = validate_flow(net, build_incidence(net), TOY_X, toy_demand(), np.array([10.0, 10.0]))
    assert report.failures() == ["link capacity"]
    assert report["link capacity"].residual == pytest.approx(2.0)


def test_flow_dimension_mismatch_raises():
    net = toy_network()
    with pytest.raises(ValidationError):
        validate_flow(net, build_incidence(net), np.zeros((5, 2)), toy_demand(), np.zeros(2))


def test_no_air_links_gives_zero_d():
    net = HybridNetwork.build(3, [(1, 2, 1, 1), (2, 3, 1, 1)], vertiports=(1, 3))
    inc = build_incidence(net)
    assert inc.D.shape == (2, 2)
    assert inc.D.nnz == 0


def test_single_link_column():
    inc = build_incidence(HybridNetwork.build(2, [(1, 2, 1.0, 1.0)]))
    np.testing.assert_array_equal(inc.E.toarray(), [[1], [-1]])


def test_parallel_links_are_distinct_columns():
    inc = build_incidence(HybridNetwork.build(2, [(1, 2, 1.0, 1.0), (1, 2, 2.0, 3.0)]))
    np.testing.assert_array_equal(inc.E.toarray(), [[1, 1], [-1, -1]])


@pytest.mark.parametrize("spec, field", [
    ((1, 1, 1.0, 1.0), "tail"),
    ((1, 2, -1.0, 1.0), "free_time"),
    ((1, 2, 1.0, 0.0), "capacity"),
    ((1, 5, 1.0, 1.0), "node"),
])
def test_malformed_links_raise_with_field(spec, field):
    with pytest.raises(ValidationError) as err:
        HybridNetwork.build(3, [spec])
    assert err.value.field == field


def test_air_link_must_join_vertiports():
    with pytest.raises(ValidationError, match="vertiport"):
        HybridNetwork.build(3, [(1, 2, 1, 1)], [(1, 3, 1, 1)], vertiports=(1, 2))


def test_duplicate_vertiports_rejected():
    with pytest.raises(ValidationError):
        HybridNetwork.build(3, [(1, 2, 1, 1)], vertiports=(2, 2))


def test_ground_links_renumbered_before_air():
    net = HybridNetwork.build(3, [(1, 2, 1, 1), (2, 3, 1, 1)], [(1, 3, 0.1, 5)], vertiports=(1, 3))
    assert [lk.id for lk in net.links] == [1, 2, 3]
    assert [lk.kind for lk in net.links] == ["ground", "ground", "air"]
    with pytest.raises(ValidationError):
        HybridNetwork(3, (Link(1, 1, 3, "air", 0.1, 5), Link(2, 1, 2, "ground", 1, 1)), (1, 3)).validate()


def test_balance_single_trip():
    np.testing.assert_array_equal(balance_demand([(1, 2, 5)], [2], 2).S, [[5], [-5]])


def test_balance_aggregates_repeated_pairs():
    table = balance_demand([(1, 3, 2), (1, 3, 3), (2, 3, 1)], [3], 3)
    np.testing.assert_array_equal(table.S[:, 0], [5, 1, -6])


def test_balance_empty_is_zero():
    table = balance_demand([], [1, 2], 3)
    assert not table.S.any()


@pytest.mark.parametrize("raw, dests", [
    ([(1, 3, 1)], [2]),
    ([(1, 2, -1)], [2]),
    ([(2, 2, 1)], [2]),
])
def test_balance_rejects_bad_trips(raw, dests):
    with pytest.raises(ValidationError):
        balance_demand(raw, dests, 3)


def test_demand_validate_catches_unbalanced_column():
    with pytest.raises(ValidationError):
        DemandTable((2,), np.array([[5.0], [-4.0]])).validate(2)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(0, 1000)), max_size=30))
def test_balanced_columns_sum_to_exactly_zero(raw):
    raw = [(o, d, t / 8) for o, d, t in raw if o != d]  # dyadic trips keep sums exact
    dests = sorted({d for _, d, _ in raw}) or [1]
    table = balance_demand(raw, dests, 6)
    assert np.all(table.S.sum(axis=0) == 0.0)
    for j, s in enumerate(table.destinations):
        assert np.all(np.delete(table.S[:, j], s - 1) >= 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 12), st.integers(0, 25))
def test_incidence_invariants(seed, n, m):
    rng = np.random.default_rng(seed)
    ground = []
    for _ in range(m):
        t, h = rng.choice(np.arange(1, n + 1), size=2, replace=False)
        ground.append((int(t), int(h), 1.0, 1.0))
    ports = tuple(int(v) for v in rng.choice(np.arange(1, n + 1), size=min(n, 3), replace=False))
    air = [(u, w, 0.5, 2.0) for u in ports for w in ports if u != w]
    net = HybridNetwork.build(n, ground, air, ports)
    inc = build_incidence(net)
    E = inc.E.toarray()
    assert np.all(E.sum(axis=0) == 0)
    assert np.all((E == 1).sum(axis=0) == 1) and np.all((E == -1).sum(axis=0) == 1)
    assert inc.D.nnz == 2 * net.n_air
    assert not inc.D.toarray()[:, :net.n_ground].any()


def test_air_links_between_far_pair_only():
    # collinear nodes at 0, 1, 3: pair distances 1, 3, 2 with median 2
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    net = HybridNetwork.build(3, [(1, 2, 1, 1), (2, 3, 1, 1)], vertiports=(1, 2, 3))
    assert median_pairwise_distance(coords) == 2.0
    links = generate_air_links(net, (1, 2, 3), coords, speed=2.0)
    assert [(lk.tail, lk.head) for lk in links] == [(1, 3), (3, 1)]
    assert all(lk.capacity == 80 and lk.free_time == 1.5 and lk.kind == "air" for lk in links)
    assert [lk.id for lk in links] == [3, 4]


def test_close_vertiports_get_no_air_links():
    coords = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 0.0], [9.0, 0.0]])
    net = HybridNetwork.build(4, [(1, 2, 1, 1)], vertiports=(1, 2))
    assert generate_air_links(net, (1, 2), coords, 1.0) == []


def test_fewer_than_two_vertiports_gives_no_links():
    net = HybridNetwork.build(2, [(1, 2, 1, 1)], vertiports=(1,))
    assert generate_air_links(net, (1,), np.zeros((2, 2)), 1.0) == []


def test_coordinates_accept_mapping():
    net = HybridNetwork.build(3, [(1, 2, 1, 1)], vertiports=(1, 3))
    links = generate_air_links(net, (1, 3), {1: (0, 0), 2: (1, 0), 3: (3, 0)}, 1.0, air_capacity=10)
    assert [(lk.tail, lk.head, lk.capacity) for lk in links] == [(1, 3, 10.0), (3, 1, 10.0)]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 8))
def test_generated_air_links_are_symmetric(seed, n_v):
    rng = np.random.default_rng(seed)
    n = n_v + 3
    coords = rng.uniform(0, 10, size=(n, 2))
    ports = tuple(range(1, n_v + 1))
    net = HybridNetwork.build(n, [(1, 2, 1, 1)], vertiports=ports)
    pairs = {(lk.tail, lk.head) for lk in generate_air_links(net, ports, coords, 3.0)}
    assert pairs == {(w, u) for u, w in pairs}
    full = net.with_air_links(generate_air_links(net, ports, coords, 3.0))
    assert full.n_air == len(pairs)
