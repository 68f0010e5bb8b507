"""From a graph to a rooted spanning tree, its DFS sequence, and range minima.

Run with ``python3 demos/forest_dfs_demo.py``.
"""

from __future__ import annotations

import numpy as np

from mpcgraph import generators, oracles
from mpcgraph.dfs_rmq import DfsApplications, dfs, rmq_query, sparse_table
from mpcgraph.forest import estimate_diameter, orientate, spanning_forest
from mpcgraph.mpc_runtime import GridConfig


def main() -> None:
    config = GridConfig(delta=0.5, mode="strict", seed=3)
    g = generators.gnm(2000, 12000, seed=3)

    trace = spanning_forest(g, config=config)
    print(f"spanning forest: {len(trace.forest_edges)} edges, valid: {oracles.is_spanning_forest(g, trace.forest_edges)}")
    parent = orientate(trace, config=config)
    roots = np.flatnonzero(parent == np.arange(g.n))
    print(f"oriented: {len(roots)} root(s), valid: {oracles.is_rooted_spanning_forest(g, parent)}")

    est, _ = estimate_diameter(g, config=config)
    print(f"diameter estimate {est}, exact {oracles.bfs_diameter(g)}")

    if len(roots) == 1:
        res = dfs(parent, config=config)
        seq = res.sequence
        print(f"DFS sequence: {len(seq)} entries (2n - 1 = {2 * g.n - 1}), {res.rounds_used} round(s) after the first pass")
        print(f"  matches the recursive walk: {seq.tolist() == oracles.recursive_dfs(parent)}")
        print(f"  starts {seq[:12].tolist()}")
        app = DfsApplications(parent, seq)
        print(f"  subtree of the root holds {app.subtree_size(int(roots[0]))} vertices")

    print("\nSmaller sample constants spread the DFS over several rounds")
    tree = generators.random_parent_tree(3000, seed=4, shape="deep")
    for c in (640.0, 0.05, 0.01):
        res = dfs(tree, config=config, sample_constant=c)
        print(f"  constant {c}: {res.rounds_used} round(s) after the first pass, covered {res.covered_per_round}")

    print("\nRange minimum queries in constant rounds")
    rng = np.random.default_rng(5)
    a = rng.integers(0, 100, size=10**4)
    table = sparse_table(a, 0.5, config=config)
    p = np.array([1, 10, 500, 9000])
    q = np.array([10**4, 20, 5000, 9999])
    print(f"  answers {rmq_query(table, p, q).tolist()}, build rounds {table.build_rounds}")


if __name__ == "__main__":
    main()
