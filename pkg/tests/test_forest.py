"""Shortest path trees, pointer utilities, forest expansion and the spanning forest driver."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import PROPERTY_SETTINGS, graph_of
from mpcgraph import generators, oracles
from mpcgraph.connectivity import BudgetTooSmall
from mpcgraph.forest import (
    BadWitness,
    InvalidInput,
    Lcspt,
    estimate_diameter,
    find_ancestors,
    find_path,
    forest_expansion,
    multi_radius_lcspt,
    multiple_large_trees,
    orientate,
    root_change,
    spanning_forest,
    tree_expansion,
)
from mpcgraph.graph import Graph
from mpcgraph.mpc_runtime import GridConfig


def ball_tree(graph, v, s, adj=None):
    """Complete shortest path tree of radius ``s`` from BFS; parent = smallest closer neighbour."""
    adj = adj or graph.adjacency()
    dist = oracles.bfs_ball(graph, v, s, adj)
    members = np.array(sorted(dist), dtype=np.int64)
    parent = [x if x == v else min(u for u in adj[x] if dist.get(u) == dist[x] - 1) for x in members.tolist()]
    depth = [dist[x] for x in members.tolist()]
    return Lcspt(v, members, np.array(parent), np.array(depth), s)


def random_parent(n, seed, roots=1):
    rng = np.random.default_rng(seed)
    p = np.arange(n)
    for i in range(roots, n):
        p[i] = int(rng.integers(0, i))
    perm = rng.permutation(n)
    out = np.empty(n, dtype=np.int64)
    out[perm] = perm[p]
    return out


@st.composite
def parent_arrays(draw, max_n=40):
    n = draw(st.integers(1, max_n))
    seed = draw(st.integers(0, 2**32))
    roots = draw(st.integers(1, n))
    return random_parent(n, seed, roots)


@st.composite
def small_graphs(draw, max_n=30):
    n = draw(st.integers(1, max_n))
    pairs = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
    edges = draw(st.lists(pairs, max_size=3 * n))
    return Graph.from_edges(n, np.array(edges, dtype=np.int64).reshape(-1, 2))


class TestTreeExpansion:
    def test_zero_radius_expansion_is_identity(self):
        g = generators.path(5)
        base = ball_tree(g, 2, 2)
        trivial = {u: Lcspt(u, np.array([u]), np.array([u]), np.array([0]), 0) for u in base.members.tolist()}
        out = tree_expansion(base, trivial)
        assert out.members.tolist() == base.members.tolist()
        assert out.parent.tolist() == base.parent.tolist() and out.depth.tolist() == base.depth.tolist()

    def test_path_of_three(self):
        g = graph_of(3, [[0, 1], [1, 2]])
        out = tree_expansion(ball_tree(g, 0, 1), {u: ball_tree(g, u, 1) for u in (0, 1)})
        assert out.depth_of()[2] == 2 and out.parent_of()[2] == 1 and out.radius == 2

    def test_random_graph_matches_ball_oracle(self):
        g = generators.gnm(200, 600, seed=3)
        adj = g.adjacency()
        rng = np.random.default_rng(3)
        for v in rng.integers(0, 200, size=5).tolist():
            base = ball_tree(g, v, 2, adj)
            trees = {u: ball_tree(g, u, 2, adj) for u in base.members.tolist()}
            out = tree_expansion(base, trees)
            want = oracles.bfs_ball(g, v, 4, adj)
            assert out.depth_of() == want
            out.validate()

    def test_malformed_tree_is_rejected(self):
        bad = Lcspt(0, np.array([0, 1]), np.array([0, 0]), np.array([0, 2]), 1)
        with pytest.raises(InvalidInput):
            tree_expansion(bad, {0: bad, 1: bad})


class TestMultiRadius:
    def test_path_null_marker(self):
        mr = multi_radius_lcspt(generators.path(4), 324)
        assert mr.threshold == 3
        assert mr.tree(0, 1) is None
        assert mr.tree(0, 0).members.tolist() == [0, 1]

    def test_isolated_vertex(self):
        mr = multi_radius_lcspt(graph_of(1, []), 64)
        assert all(mr.tree(i, 0).members.tolist() == [0] for i in range(mr.r + 1))
        assert mr.r <= 1

    def test_null_pattern_matches_ball_sizes(self):
        g = generators.gnm(100, 250, seed=4)
        m = 10**4
        mr = multi_radius_lcspt(g, m)
        adj = g.adjacency()
        for i in range(mr.r + 1):
            for v in range(g.n):
                ball = oracles.bfs_ball(g, v, 2**i, adj)
                t = mr.tree(i, v)
                assert (t is None) == (len(ball) >= mr.threshold)
                if t is not None:
                    assert t.depth_of() == ball
        diam = oracles.bfs_diameter(g)
        assert mr.r <= min(math.ceil(math.log2(diam)), math.ceil(math.log2(m / g.n))) + 1

    def test_budget_too_small(self):
        with pytest.raises(BudgetTooSmall):
            multi_radius_lcspt(generators.path(10), 9)


class TestLargeTrees:
    def test_clique_trees_span(self):
        g = graph_of(5, [[a, b] for a in range(5) for b in range(a + 1, 5)])
        trees, _ = multiple_large_trees(g, 10**6)
        assert all(t.members.tolist() == list(range(5)) for t in trees.values())

    def _check(self, g, m, trees):
        adj = g.adjacency()
        lo = math.ceil((m / g.n) ** 0.25 - 1e-9)
        hi = math.floor((m / g.n) ** 0.5 + 1e-9)
        comp = oracles.uf_components(g)
        for v, t in trees.items():
            dist = oracles.bfs_distances(g, v, adj)
            size = len(t.members)
            whole = size == int((comp == comp[v]).sum())
            assert whole or lo <= size <= hi
            assert size <= hi or whole
            dep = t.depth_of()
            assert all(dist[x] == d for x, d in dep.items())
            far = max(dep.values())
            assert all(x in dep for x, d in dist.items() if d < far)

    def test_cycle_sizes_and_dominance(self):
        g = generators.cycle(64)
        trees, _ = multiple_large_trees(g, 16 * 64)
        assert len(trees) == 64
        self._check(g, 16 * 64, trees)

    def test_two_components(self):
        g = graph_of(43, [[0, 1], [1, 2]] + [[i, i + 1] for i in range(3, 42)])
        m = 16 * 43 * 16
        trees, _ = multiple_large_trees(g, m)
        assert trees[0].members.tolist() == [0, 1, 2]
        assert len(trees[10].members) < 40
        self._check(g, m, trees)


class TestPointerUtilities:
    def test_identity_ancestors(self):
        r, dep, gs = find_ancestors([0, 1, 2])
        assert r <= 1 and dep.tolist() == [0, 0, 0]

    def test_chain_ancestors(self):
        r, dep, gs = find_ancestors([0, 0, 1, 2])
        assert dep.tolist() == [0, 1, 2, 3]
        assert gs[1].tolist() == [0, 0, 0, 1]

    def test_random_forest_ancestors(self):
        p = random_parent(1000, 5, roots=20)
        r, dep, gs = find_ancestors(p)
        assert dep.tolist() == [oracles.root_of(p, v)[1] for v in range(1000)]
        for i, g in enumerate(gs):
            for v in range(0, 1000, 37):
                x = v
                for _ in range(2**i):
                    x = p[x]
                assert g[v] == x

    def test_path_from_root(self):
        _, path, w = find_path([0, 0, 1, 2], 0)
        assert path.tolist() == [0] and w is None

    def test_path_on_chain(self):
        _, path, w = find_path([0, 0, 1, 2], 3)
        assert path.tolist() == [0, 1, 2, 3] and w == 1

    def test_random_path(self):
        p = random_parent(500, 6)
        for q in (0, 17, 250, 499):
            _, path, _ = find_path(p, q)
            assert sorted(path.tolist()) == sorted(oracles.ancestors(p, q))

    def test_root_change_noop(self):
        assert root_change([0, 0, 1], 0).tolist() == [0, 0, 1]

    def test_root_change_reverses_chain(self):
        assert root_change([0, 0, 1, 2], 3).tolist() == [1, 2, 3, 3]

    def test_random_root_change(self):
        p = random_parent(300, 7)
        depth = max(oracles.root_of(p, v)[1] for v in range(300))
        q = 123
        out = root_change(p, q)
        und = lambda a: sorted(tuple(sorted((v, int(a[v])))) for v in range(len(a)) if a[v] != v)
        assert und(out) == und(p) and out[q] == q
        assert max(oracles.root_of(out, v)[1] for v in range(300)) <= 2 * depth


class TestForestExpansion:
    def test_no_contraction(self):
        p = {0: 0, 1: 1, 2: 2}
        assert forest_expansion(p, [0, 1, 2], {}).tolist() == [0, 1, 2]

    def test_root_moves_to_witness(self):
        # tree {0,1,2} rooted at 0 hangs under tree {3,4,5} through edge (2, 5)
        out = forest_expansion({0: 3, 3: 3}, [0, 0, 0, 3, 3, 3], {(0, 3): (2, 5), (3, 0): (5, 2)})
        assert out.tolist() == [2, 0, 5, 3, 3, 3]

    def test_bad_witness(self):
        with pytest.raises(BadWitness):
            forest_expansion({0: 3, 3: 3}, [0, 0, 0, 3, 3, 3], {(0, 3): (1, 2)})

    def test_random_two_level_contraction(self):
        rng = np.random.default_rng(8)
        n, k = 500, 40
        g = generators.gnm(n, 3000, seed=8)
        assert len(set(oracles.uf_components(g).tolist())) == 1
        adj = g.adjacency()
        # BFS trees grown from k seeds partition the vertices
        owner = -np.ones(n, dtype=int)
        p_tilde = np.arange(n)
        frontier = rng.choice(n, size=k, replace=False).tolist()
        for s in frontier:
            owner[s] = s
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if owner[v] < 0:
                        owner[v] = owner[u]
                        p_tilde[v] = u
                        nxt.append(v)
            frontier = nxt
        cross = {}
        for a, b in g.edges.tolist():
            if owner[a] != owner[b]:
                cross.setdefault((owner[a], owner[b]), (a, b))
                cross.setdefault((owner[b], owner[a]), (b, a))
        roots = sorted(set(owner.tolist()))
        cg = Graph.from_edges(len(roots), [[roots.index(a), roots.index(b)] for a, b in cross])
        tp = orientate(spanning_forest(cg))
        p = {roots[i]: roots[int(tp[i])] for i in range(len(roots))}
        out = forest_expansion(p, p_tilde, cross)
        assert oracles.is_rooted_spanning_forest(g, out)


class TestSpanningForest:
    def test_tree_input_returns_its_edges(self):
        g = generators.random_tree(300, seed=9)
        tr = spanning_forest(g)
        assert np.array_equal(tr.forest_edges, g.edges)

    def test_random_graph(self):
        g = generators.gnm(1000, 10**4, seed=10)
        tr = spanning_forest(g, m=16 * 1000)
        assert not tr.failed
        f = tr.forest_edges
        assert len(f) == g.n - len(set(oracles.uf_components(g).tolist()))
        assert oracles.is_spanning_forest(g, f)
        assert sum(tr.phase_sizes) <= 40 * g.n

    def test_two_components(self):
        g = graph_of(6, [[0, 1], [1, 2], [0, 2], [3, 4], [4, 5]])
        f = spanning_forest(g).forest_edges
        assert oracles.is_spanning_forest(g, f) and len(f) == 4

    def test_small_budget_is_raised(self):
        g = generators.path(50)
        assert spanning_forest(g, m=10).space_budget == 16 * 50


class TestOrientate:
    def test_single_edge(self):
        p = orientate(spanning_forest(graph_of(2, [[0, 1]])))
        assert sorted(p.tolist()) in ([0, 0], [1, 1])

    def test_path_32(self):
        g = generators.path(32)
        p = orientate(spanning_forest(g))
        assert oracles.is_rooted_spanning_forest(g, p)
        assert int((p == np.arange(32)).sum()) == 1

    def test_random_graph(self):
        g = generators.gnm(400, 900, seed=12)
        tr = spanning_forest(g)
        p = orientate(tr)
        assert oracles.is_rooted_spanning_forest(g, p)
        edges = sorted(tuple(sorted((v, int(p[v])))) for v in range(g.n) if p[v] != v)
        assert edges == [tuple(e) for e in tr.forest_edges.tolist()]

    def test_failed_trace_is_rejected(self):
        tr = spanning_forest(generators.path(200), r=1, retries=0)
        assert tr.failed
        with pytest.raises(ValueError):
            orientate(tr)


class TestDiameter:
    def test_single_vertex(self):
        assert estimate_diameter(graph_of(1, []))[0] == 0

    def test_path_100(self):
        est, _ = estimate_diameter(generators.path(100))
        assert 99 <= est <= 2 * 99

    def test_grid(self):
        rows, cols = 10, 10
        edges = [[r * cols + c, r * cols + c + 1] for r in range(rows) for c in range(cols - 1)]
        edges += [[r * cols + c, (r + 1) * cols + c] for r in range(rows - 1) for c in range(cols)]
        g = graph_of(rows * cols, edges)
        est, _ = estimate_diameter(g)
        assert est >= oracles.bfs_diameter(g) == 18


class TestProperties:
    @PROPERTY_SETTINGS
    @given(small_graphs(), st.integers(0, 2**32))
    def test_spanning_forest_and_orientation(self, g, seed):
        tr = spanning_forest(g, config=GridConfig(seed=seed))
        if tr.failed:
            return
        assert oracles.is_spanning_forest(g, tr.forest_edges)
        p = orientate(tr)
        assert oracles.is_rooted_spanning_forest(g, p)
        _, dep, _ = find_ancestors(p)
        assert all(oracles.root_of(p, v)[1] == dep[v] for v in range(g.n))

    @PROPERTY_SETTINGS
    @given(parent_arrays(), st.data())
    def test_pointer_utilities_match_iteration(self, p, data):
        n = len(p)
        q = data.draw(st.integers(0, n - 1))
        _, dep, _ = find_ancestors(p)
        assert dep.tolist() == [oracles.root_of(p, v)[1] for v in range(n)]
        _, path, w = find_path(p, q)
        chain = oracles.ancestors(p, q)
        assert sorted(path.tolist()) == sorted(chain)
        assert w == (chain[-2] if len(chain) > 1 else None)
        out = root_change(p, q)
        assert out[q] == q
        und = lambda a: sorted(tuple(sorted((v, int(a[v])))) for v in range(n) if a[v] != v)
        assert und(out) == und(p)
        assert max(oracles.root_of(out, v)[1] for v in range(n)) <= 2 * max(dep.max(), 0) or dep.max() == 0

    @PROPERTY_SETTINGS
    @given(small_graphs(20), st.integers(1, 3), st.integers(0, 2))
    def test_expansion_gives_larger_ball(self, g, s1, s2):
        adj = g.adjacency()
        v = 0
        base = ball_tree(g, v, s1, adj)
        trees = {u: ball_tree(g, u, s2, adj) for u in base.members.tolist()}
        out = tree_expansion(base, trees)
        assert out.depth_of() == oracles.bfs_ball(g, v, s1 + s2, adj)
        out.validate()
