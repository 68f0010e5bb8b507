"""Seeded graph and tree generators addressed by ``kind:params`` strings."""

from __future__ import annotations

import numpy as np

from .graph import INT, Graph


def path(n: int) -> Graph:
    i = np.arange(max(n - 1, 0), dtype=INT)
    return Graph.from_edges(n, np.column_stack([i, i + 1]))


def cycle(n: int) -> Graph:
    if n < 3:
        return path(n)
    i = np.arange(n, dtype=INT)
    return Graph.from_edges(n, np.column_stack([i, (i + 1) % n]))


def star(n: int) -> Graph:
    leaves = np.arange(1, n, dtype=INT)
    return Graph.from_edges(n, np.column_stack([np.zeros_like(leaves), leaves]))


def caterpillar(n: int) -> Graph:
    """A spine ``0..k-1`` (k = ceil(n/2)) with one pendant leaf per spine vertex."""
    k = (n + 1) // 2
    spine = np.arange(max(k - 1, 0), dtype=INT)
    legs = np.arange(n - k, dtype=INT)
    edges = np.vstack([np.column_stack([spine, spine + 1]), np.column_stack([legs, legs + k])])
    return Graph.from_edges(n, edges)


def gnm(n: int, m: int, seed: int = 0) -> Graph:
    """Uniform simple graph with ``min(m, n(n-1)/2)`` edges."""
    rng = np.random.default_rng(seed)
    cap = n * (n - 1) // 2
    m = min(m, cap)
    if m == 0:
        return Graph.from_edges(n, np.zeros((0, 2), dtype=INT))
    if m > cap // 4:
        iu, iv = np.triu_indices(n, 1)
        pick = rng.choice(cap, size=m, replace=False)
        return Graph.from_edges(n, np.column_stack([iu[pick], iv[pick]]))
    found = np.zeros(0, dtype=INT)
    while len(found) < m:
        k = 2 * (m - len(found)) + 16
        u = rng.integers(0, n, size=k, dtype=INT)
        v = rng.integers(0, n, size=k, dtype=INT)
        ok = u != v
        lo, hi = np.minimum(u, v)[ok], np.maximum(u, v)[ok]
        codes = np.concatenate([found, lo * n + hi])
        _, first = np.unique(codes, return_index=True)
        found = codes[np.sort(first)]
    found = found[:m]
    return Graph.from_edges(n, np.column_stack([found // n, found % n]))


def grid_hub(rows: int, cols: int) -> Graph:
    """Thin grid with a hub joined to the first column.

    The hub is vertex 0 and row ``i`` (1-based) holds ``(i-1)*cols+1 .. i*cols``
    from the first column to the last.
    """
    n = rows * cols + 1
    ids = np.arange(1, n, dtype=INT).reshape(rows, cols)
    horiz = np.column_stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()])
    vert = np.column_stack([ids[:-1, :].ravel(), ids[1:, :].ravel()])
    hub = np.column_stack([np.zeros(rows, dtype=INT), ids[:, 0]])
    return Graph.from_edges(n, np.vstack([horiz, vert, hub]))


def random_tree(n: int, seed: int = 0) -> Graph:
    """Uniform random recursive tree: vertex ``i`` attaches to a random earlier vertex."""
    rng = np.random.default_rng(seed)
    if n <= 1:
        return Graph.from_edges(max(n, 0), np.zeros((0, 2), dtype=INT))
    child = np.arange(1, n, dtype=INT)
    parent = (rng.random(n - 1) * child).astype(INT)
    return Graph.from_edges(n, np.column_stack([parent, child]))


def random_parent_tree(n: int, seed: int = 0, shape: str = "recursive") -> np.ndarray:
    """Parent array of a random rooted tree with relabeled vertices.

    ``shape`` is ``recursive`` (shallow), ``deep`` (long chains) or
    ``bushy`` (few internal vertices). The root is a random vertex and is its
    own parent.
    """
    rng = np.random.default_rng(seed)
    if n == 0:
        return np.zeros(0, dtype=INT)
    order = np.arange(n, dtype=INT)
    par = np.zeros(n, dtype=INT)
    for i in range(1, n):
        if shape == "deep":
            par[i] = i - 1 - min(i - 1, int(rng.geometric(0.5)) - 1)
        elif shape == "bushy":
            par[i] = int(rng.integers(0, max(1, min(i, 1 + i // 20))))
        else:
            par[i] = int(rng.integers(0, i))
    perm = rng.permutation(n).astype(INT)
    out = np.empty(n, dtype=INT)
    out[perm[order]] = perm[par]
    return out


def weighted(graph: Graph, low: int = 1, high: int = 10**6, seed: int = 0) -> Graph:
    rng = np.random.default_rng(seed)
    w = rng.integers(low, high + 1, size=graph.m, dtype=INT)
    return Graph(graph.n, graph.edges, w, graph.labels)


def gen(kind: str, params=(), seed: int = 0) -> Graph:
    """Build a graph from a kind name and integer parameters."""
    p = [int(x) for x in params]
    need = {"path": 1, "cycle": 1, "star": 1, "caterpillar": 1, "tree": 1, "gnm": 2, "grid_hub": 2}
    if kind not in need:
        raise ValueError(f"unknown generator {kind!r}")
    if len(p) != need[kind]:
        raise ValueError(f"{kind} takes {need[kind]} parameter(s)")
    if any(x < 0 for x in p):
        raise ValueError("generator parameters must be non-negative")
    if kind == "path":
        return path(p[0])
    if kind == "cycle":
        return cycle(p[0])
    if kind == "star":
        return star(p[0])
    if kind == "caterpillar":
        return caterpillar(p[0])
    if kind == "tree":
        return random_tree(p[0], seed)
    if kind == "gnm":
        return gnm(p[0], p[1], seed)
    return grid_hub(p[0], p[1])


def gen_spec(spec: str, seed: int = 0) -> Graph:
    """Parse ``kind:a[:b]`` (for example ``gnm:100:300``) and generate."""
    kind, *params = spec.split(":")
    try:
        values = [int(x) for x in params]
    except ValueError:
        raise ValueError(f"bad generator spec {spec!r}") from None
    return gen(kind, values, seed)
