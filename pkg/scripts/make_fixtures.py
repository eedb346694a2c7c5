"""Regenerate the bundled fixtures in src/vertiport/data.

Run from the repository root: ``python3 scripts/make_fixtures.py``.
The golden equilibrium is written by the CLI itself so the test that
compares against it exercises the same code path.
"""
from pathlib import Path

import numpy as np

from vertiport.cli import main
from vertiport.ingest import LinkRecord, write_network, write_nodes, write_trips
from vertiport.synth import TOY_COORDS, TOY_TRIPS, grid_instance, nine_port_scenario

DATA = Path(__file__).resolve().parents[1] / "src" / "vertiport" / "data"

TOY_GROUND = [(1, 2, 1.0, 20.0), (1, 3, 1.5, 8.0), (2, 4, 1.0, 6.0), (3, 4, 1.0, 20.0)]

TOY_YAML = """\
# Four-node toy: two street paths from 1 to 4 and a shuttle between the
# vertiports at nodes 2 and 3.
network:
  net: toy_net.tntp
  trips: toy_trips.tntp
  nodes: toy_node.tntp
vertiports: [2, 3]
air:
  links:
    - [2, 3, 0.2, 4]
    - [3, 2, 0.2, 4]
capacities: [2, 4]
costs: [1, 2]
gamma: 4
omega: 0.0
"""

GRID_YAML = """\
# 24-node street grid with four corner vertiports.
network:
  net: grid_net.tntp
  trips: grid_trips.tntp
  nodes: grid_node.tntp
vertiports: [1, 6, 19, 24]
air:
  speed: 150
  capacity: 80
capacities: [100, 200]
costs: [1, 2]
logical:
  - at_least_one: [1, 4]
gamma: 4
omega: 0.0
"""

NINE_YAML = """\
# 4x4 grid, nine candidate vertiports, two capacity options each and four
# pairwise rules on the candidates.
network:
  net: nine_net.tntp
  trips: nine_trips.tntp
  nodes: nine_node.tntp
vertiports: [1, 4, 13, 16, 6, 11, 2, 15, 8]
air:
  speed: 120
  capacity: 80
capacities: [100, 200]
costs: [1, 2]
logical:
  - both_selected: [1, 2]
  - at_least_one: [3, 4]
  - exactly_one: [5, 6]
  - exactly_one: [7, 8]
gamma: 8
omega: 0.0
"""


def trips_from_demand(demand):
    out = []
    for j, d in enumerate(demand.destinations):
        col = demand.S[:, j]
        for i in np.flatnonzero(col > 0):
            out.append((int(i) + 1, int(d), float(col[i])))
    return sorted(out)


def write_instance(stem, net, demand, coords):
    ground = [LinkRecord(lk.tail, lk.head, lk.capacity, lk.free_time) for lk in net.ground_links()]
    write_network(DATA / f"{stem}_net.tntp", net.n_nodes, ground)
    write_trips(DATA / f"{stem}_trips.tntp", trips_from_demand(demand))
    write_nodes(DATA / f"{stem}_node.tntp", coords)


def main_():
    DATA.mkdir(parents=True, exist_ok=True)
    write_network(DATA / "toy_net.tntp", 4, [LinkRecord(t, h, f, c) for t, h, c, f in TOY_GROUND])
    write_trips(DATA / "toy_trips.tntp", TOY_TRIPS)
    write_nodes(DATA / "toy_node.tntp", TOY_COORDS)
    (DATA / "toy.yaml").write_text(TOY_YAML)

    net, demand, coords = grid_instance(4, 6, (1, 6, 19, 24), seed=7)
    write_instance("grid", net, demand, coords)
    (DATA / "grid.yaml").write_text(GRID_YAML)

    net, demand, coords, _ = nine_port_scenario()
    write_instance("nine", net, demand, coords)
    (DATA / "nine.yaml").write_text(NINE_YAML)

    main(["equilibrium", "--scenario", str(DATA / "toy.yaml"), "--g", "4,4",
          "--out", str(DATA / "toy_equilibrium.json")])


if __name__ == "__main__":
    main_()
