"""Neighbourhood growth, leader sampling, contraction and the connectivity driver."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import PROPERTY_SETTINGS, graph_of, make_grid
from mpcgraph import generators, oracles
from mpcgraph.connectivity import (
    BudgetTooSmall,
    InvalidPointers,
    ceil_root,
    connectivity,
    connectivity_mpf,
    min_parent_forest,
    neighbor_increment,
    sample_leaders,
    tree_contraction,
)
from mpcgraph.graph import Graph
from mpcgraph.mpc_runtime import GridConfig, MachineGrid


@st.composite
def small_graphs(draw, max_n=24):
    n = draw(st.integers(1, max_n))
    pairs = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
    edges = draw(st.lists(pairs, max_size=3 * n))
    return Graph.from_edges(n, np.array(edges, dtype=np.int64).reshape(-1, 2))


def _components(graph):
    comp = oracles.uf_components(graph)
    out = {}
    for v, c in enumerate(comp.tolist()):
        out.setdefault(c, []).append(v)
    return list(out.values())


def check_increment(g, h, m, r):
    """The four output properties of neighbourhood growth."""
    assert {tuple(e) for e in g.edges.tolist()} <= {tuple(e) for e in h.edges.tolist()}
    assert h.m <= g.m + m
    assert oracles.same_partition(oracles.uf_components(g), oracles.uf_components(h))
    t = ceil_root(m, g.n, 2)
    deg = h.degrees()
    adj = [set(a) for a in h.adjacency()]
    for comp in _components(h):
        clique = all(len(adj[v]) == len(comp) - 1 for v in comp)
        for v in comp:
            assert deg[v] >= t - 1 or clique
    diam = oracles.bfs_diameter(g)
    assert r <= min(math.ceil(math.log2(max(diam, 1))), math.ceil(math.log2(m / g.n))) + 1


def test_ceil_root_is_exact():
    assert ceil_root(64, 4, 2) == 4
    assert ceil_root(65, 4, 2) == 5
    assert ceil_root(324, 4, 4) == 3
    assert ceil_root(1, 1, 3) == 1


class TestNeighborIncrement:
    def test_single_edge_is_already_a_clique(self):
        g = graph_of(2, [[0, 1]])
        h, r = neighbor_increment(g, 16)
        assert h.edges.tolist() == [[0, 1]] and r == 1

    def test_path_of_four_becomes_k4(self):
        g = graph_of(4, [[0, 1], [1, 2], [2, 3]])
        h, r = neighbor_increment(g, 64)
        assert h.m == 6 and set(h.degrees().tolist()) == {3}
        assert r <= 3

    def test_random_graph_meets_all_postconditions(self):
        g = generators.gnm(100, 300, seed=1)
        h, r = neighbor_increment(g, 4 * 10**4)
        check_increment(g, h, 4 * 10**4, r)

    def test_budget_too_small(self):
        with pytest.raises(BudgetTooSmall):
            neighbor_increment(generators.path(10), 39)


class TestSampleLeaders:
    def _star(self, n):
        arcs = np.array([(0, v) for v in range(1, n)] + [(v, 0) for v in range(1, n)])
        return np.arange(n), arcs

    def test_probability_one_makes_everyone_a_leader(self):
        verts, arcs = self._star(20)
        _, leader, pointer = sample_leaders(make_grid(), verts, arcs, 1.0, 20)
        assert leader.all() and np.array_equal(pointer, verts)

    def test_fixed_seed_regression(self):
        verts, arcs = self._star(50)
        grid = MachineGrid.sized(10_000, GridConfig(seed=7))
        flags, leader, _ = sample_leaders(grid, verts, arcs, 0.1, 50)
        assert int(flags.sum()) == 6
        assert int(leader.sum()) == 49

    def test_monte_carlo_leader_count(self):
        n, half = 300, 32
        arcs = np.array([(v, (v + d) % n) for v in range(n) for d in range(-half, half + 1) if d])
        verts = np.arange(n)
        p = min((30 * math.log2(n) + 100) / 64, 0.5)
        sizes, covered = [], 0
        for seed in range(200):
            grid = MachineGrid.sized(4 * len(arcs), GridConfig(seed=seed))
            _, leader, pointer = sample_leaders(grid, verts, arcs, p, n)
            sizes.append(int(leader.sum()))
            nb = set(map(tuple, arcs.tolist()))
            ok = all(leader[pointer[v]] and (v, int(pointer[v])) in nb for v in verts[~leader])
            covered += ok
        assert np.mean(sizes) <= 1.5 * p * n
        assert covered >= 0.99 * 200


class TestTreeContraction:
    def test_identity_pointers(self):
        g = graph_of(3, [[0, 1], [1, 2]])
        h, roots, root_of, r = tree_contraction(g, [0, 1, 2])
        assert r == 0 and roots.tolist() == [0, 1, 2] and h.m == 2

    def test_chain_collapses_in_two_doublings(self):
        g = graph_of(4, [[0, 1], [1, 2], [2, 3]])
        h, roots, root_of, r = tree_contraction(g, [0, 0, 1, 2])
        assert roots.tolist() == [0] and root_of.tolist() == [0, 0, 0, 0]
        assert h.n == 1 and h.m == 0 and r == 2

    def test_cycle_is_rejected(self):
        g = graph_of(3, [[0, 1], [1, 2]])
        with pytest.raises(InvalidPointers):
            tree_contraction(g, [1, 2, 0])

    def test_random_forest_matches_pointer_chasing(self):
        rng = np.random.default_rng(11)
        n = 1000
        parent = np.array([i if rng.random() < 0.05 else int(rng.integers(0, i)) if i else 0 for i in range(n)])
        g = Graph.from_edges(n, np.column_stack([np.arange(n), parent]))
        _, _, root_of, r = tree_contraction(g, parent)
        want = [oracles.root_of(parent, v)[0] for v in range(n)]
        depth = max(oracles.root_of(parent, v)[1] for v in range(n))
        assert root_of.tolist() == want
        assert r <= math.ceil(math.log2(max(depth, 1))) + (depth > 0)


class TestConnectivity:
    def test_edge_plus_isolated_vertex(self):
        res = connectivity(graph_of(3, [[0, 1]]))
        col = res.coloring
        assert col[0] == col[1] != col[2]

    def test_path_1024_matches_union_find(self):
        g = generators.path(1024)
        res = connectivity(g, m=8 * 1024)
        assert not res.failed
        assert oracles.same_partition(res.coloring, oracles.uf_components(g))
        assert res.iterations == sum(p.neighbor_iterations + p.contraction_iterations for p in res.phases)

    def test_failure_rate_on_sparse_random_graphs(self):
        g = generators.gnm(10**4, 5 * 10**4, seed=2)
        truth = oracles.uf_components(g)
        fails = 0
        for seed in range(50):
            res = connectivity(g, config=GridConfig(seed=seed), retries=0)
            if res.failed:
                fails += 1
            else:
                assert oracles.same_partition(res.coloring, truth)
        assert fails <= 5

    def test_too_few_rounds_fails_without_raising(self):
        res = connectivity(generators.path(512), m=8 * 512, r=1, retries=1)
        assert res.failed and res.coloring is None and res.retries_used == 1

    def test_labels_are_returned(self):
        g = Graph.from_edges(3, [[0, 1]], labels=[10, 20, 30])
        col = connectivity(g).coloring
        assert col.tolist() == [10, 10, 30]

    def test_budget_too_small(self):
        with pytest.raises(BudgetTooSmall):
            connectivity(generators.path(10), m=30)


class TestMinParentForest:
    def test_isolated_vertex_is_a_root(self):
        assert min_parent_forest(graph_of(1, []), [5]).tolist() == [0]

    def test_points_at_lightest_neighbour(self):
        g = graph_of(4, [[0, 1], [1, 2], [2, 3]])
        assert min_parent_forest(g, [3, 1, 4, 2]).tolist() == [1, 1, 1, 3]

    def test_weight_ties_use_the_label(self):
        g = graph_of(3, [[0, 1], [1, 2]])
        w = np.array([[5, 0], [5, 1], [5, 2]])
        assert min_parent_forest(g, w).tolist() == [0, 0, 1]

    def test_mpf_two_vertices(self):
        res = connectivity_mpf(graph_of(2, [[0, 1]]))
        assert res.coloring[0] == res.coloring[1]

    def test_mpf_first_phase_shrinks_as_predicted(self):
        g = generators.path(256)
        m = 8 * 256
        h, _ = neighbor_increment(g, m)
        predicted = float((1.0 / (h.degrees() + 1)).sum())
        kept = []
        for seed in range(20):
            res = connectivity_mpf(g, m=m, config=GridConfig(seed=seed), retries=0)
            assert oracles.same_partition(res.coloring, oracles.uf_components(g))
            kept.append(res.phase_sizes[1])
        assert np.mean(kept) <= 1.1 * predicted

    def test_mpf_partition_equals_random_leader_partition(self):
        g = generators.path(1024)
        a = connectivity(g, m=8 * 1024)
        b = connectivity_mpf(g, m=8 * 1024)
        assert oracles.same_partition(a.coloring, b.coloring)


class TestProperties:
    @PROPERTY_SETTINGS
    @given(small_graphs(), st.integers(4, 64))
    def test_increment_properties(self, g, ratio):
        m = ratio * g.n
        h, r = neighbor_increment(g, m)
        check_increment(g, h, m, r)

    @PROPERTY_SETTINGS
    @given(small_graphs(), st.integers(0, 2**32))
    def test_contraction_preserves_partition(self, g, seed):
        rng = np.random.default_rng(seed)
        # random parent pointers along a BFS forest
        parent = np.arange(g.n)
        seen = np.zeros(g.n, dtype=bool)
        adj = g.adjacency()
        for s in rng.permutation(g.n).tolist():
            if seen[s]:
                continue
            seen[s] = True
            queue = [s]
            while queue:
                u = queue.pop()
                for v in adj[u]:
                    if not seen[v]:
                        seen[v] = True
                        parent[v] = u
                        queue.append(v)
        h, roots, root_of, _ = tree_contraction(g, parent)
        comp = oracles.uf_components(g)
        hcomp = oracles.uf_components(h)
        pos = {int(r): i for i, r in enumerate(roots.tolist())}
        lifted = [int(hcomp[pos[int(root_of[v])]]) for v in range(g.n)]
        assert oracles.same_partition(comp, lifted)

    @PROPERTY_SETTINGS
    @given(small_graphs(40), st.integers(0, 2**32), st.sampled_from(["random", "min-parent"]))
    def test_successful_coloring_is_exact(self, g, seed, leader):
        res = connectivity(g, config=GridConfig(seed=seed), leader=leader, retries=0)
        if not res.failed:
            assert oracles.same_partition(res.coloring, oracles.uf_components(g))

    @PROPERTY_SETTINGS
    @given(small_graphs(40), st.integers(0, 2**32))
    def test_min_parent_forest_is_acyclic(self, g, seed):
        w = np.random.default_rng(seed).integers(0, 10, size=g.n)
        rows = np.column_stack([w, np.arange(g.n)])
        f = min_parent_forest(g, rows)
        adj = [set(a) for a in g.adjacency()]
        for v in range(g.n):
            closed = adj[v] | {v}
            best = min(closed, key=lambda u: (w[u], u))
            assert f[v] == best
        assert all(oracles.root_of(f, v)[1] <= g.n for v in range(g.n))
