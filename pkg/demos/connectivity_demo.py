"""Connected components on the simulated cluster, phase by phase.

Run with ``python3 demos/connectivity_demo.py``.
"""

from __future__ import annotations

from mpcgraph import generators, oracles
from mpcgraph.connectivity import connectivity, connectivity_mpf
from mpcgraph.mpc_runtime import GridConfig


def show(name, res, graph) -> None:
    ok = oracles.same_partition(res.coloring, oracles.uf_components(graph))
    print(f"  {name}: {res.iterations} iterations, {res.report.rounds_total} simulated rounds, oracle agrees: {ok}")
    print(f"    vertices per phase: {res.phase_sizes}")


def main() -> None:
    config = GridConfig(delta=0.5, mode="strict", seed=1)

    print("A random graph with 5000 vertices and 20000 edges")
    g = generators.gnm(5000, 20000, seed=1)
    show("random leaders", connectivity(g, config=config), g)
    show("min-parent leaders", connectivity_mpf(g, config=config), g)

    print("\nA long path: the depth of the contraction grows with log D")
    for n in (256, 1024, 4096):
        p = generators.path(n)
        res = connectivity(p, config=config)
        print(f"  path:{n}: {res.iterations} iterations over {len(res.phases)} phases")

    print("\nA richer space budget shortens the run")
    p = generators.path(4096)
    for m in (8 * 4096, 64 * 4096):
        res = connectivity(p, m=m, config=config)
        print(f"  m={m}: {res.iterations} iterations")

    print("\nHash-to-Min on the hub graph with 2^D rows and D columns")
    for d in (4, 6, 8):
        h = generators.grid_hub(2**d, d)
        _, rounds = oracles.hash_to_min(h)
        res = connectivity(h, config=config)
        print(f"  D={d}: Hash-to-Min {rounds} rounds, connectivity {res.iterations} iterations")


if __name__ == "__main__":
    main()
