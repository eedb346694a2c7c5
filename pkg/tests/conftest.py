from pathlib import Path

import numpy as np
import pytest

from vertiport.netmodel import build_incidence
from vertiport.synth import grid_instance, toy_demand, toy_network

DATA = Path(__file__).resolve().parents[1] / "src" / "vertiport" / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture
def toy():
    net = toy_network()
    return net, build_incidence(net), toy_demand(net)


@pytest.fixture
def congested_toy():
    """Toy whose street 2->4 saturates so the air shuttle matters."""
    net = toy_network(c=[1, 1.5, 1, 1, 0.2, 0.2], f=[20, 8, 6, 20, 4, 4])
    return net, build_incidence(net), toy_demand(net)


@pytest.fixture(scope="session")
def grid24():
    net, demand, coords = grid_instance(4, 6, (1, 6, 19, 24), seed=7)
    return net, build_incidence(net), demand


def assert_close(a, b, rel=1e-9, abs_=1e-9):
    np.testing.assert_allclose(a, b, rtol=rel, atol=abs_)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
