"""Minimum, approximate, and bottleneck spanning forests against Kruskal.

Run with ``python3 demos/msf_demo.py``.
"""

from __future__ import annotations

from mpcgraph import generators, oracles
from mpcgraph.msf import approx_msf, bottleneck_sf, exact_msf
from mpcgraph.mpc_runtime import GridConfig


def main() -> None:
    config = GridConfig(delta=0.5, seed=7)
    g = generators.weighted(generators.gnm(400, 2000, seed=7), 1, 1000, seed=7)
    best = oracles.kruskal_msf(g)
    opt = int(g.weights[best].sum())
    print(f"Kruskal: {len(best)} edges, weight {opt}")

    res = exact_msf(g, config=config)
    print(f"exact: weight {res.weight(g)}, same edges {list(res.edges) == list(best)}, "
          f"{res.levels} levels, {res.calls} subroutine calls, {res.rounds_total} rounds")

    for gamma in (0.0, 0.25, 0.5):
        r = exact_msf(g, gamma=gamma, config=GridConfig(delta=0.5, gamma=gamma, seed=7))
        print(f"  gamma={gamma}: {r.levels} levels, peak machine load {r.peak_machine_words} words")

    for eps in (0.1, 0.5):
        a = approx_msf(g, eps, config=config)
        print(f"approx eps={eps}: ratio {a.weight(g) / opt:.4f}, {a.extra['classes']} weight classes")

    b = bottleneck_sf(g, config=config)
    print(f"bottleneck: {b.bottleneck}, heaviest Kruskal edge {int(g.weights[best].max())}")


if __name__ == "__main__":
    main()
