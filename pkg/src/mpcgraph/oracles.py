"""Sequential reference implementations used to check the parallel algorithms.

Nothing here touches the machine grid. The oracles are deliberately
straightforward (union-find, breadth-first search, Kruskal, an explicit-stack
DFS, linear scans) so that agreement with them is meaningful.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .graph import Graph


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def uf_components(graph: Graph) -> np.ndarray:
    """Component id of every vertex: the smallest vertex of its component."""
    uf = UnionFind(graph.n)
    for u, v in graph.edges.tolist():
        uf.union(u, v)
    smallest: dict[int, int] = {}
    for v in range(graph.n):
        r = uf.find(v)
        if r not in smallest:
            smallest[r] = v
    return np.array([smallest[uf.find(v)] for v in range(graph.n)], dtype=np.int64)


def same_partition(a, b) -> bool:
    """Whether two colorings induce the same partition of the vertices."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        return False
    fwd: dict = {}
    back: dict = {}
    for x, y in zip(a.tolist(), b.tolist()):
        if fwd.setdefault(x, y) != y or back.setdefault(y, x) != x:
            return False
    return True


def bfs_distances(graph: Graph, source: int, adj=None) -> dict[int, int]:
    adj = adj if adj is not None else graph.adjacency()
    dist = {source: 0}
    queue = deque([source])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in dist:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


def bfs_ball(graph: Graph, v: int, s: int, adj=None) -> dict[int, int]:
    """Vertices within distance ``s`` of ``v`` with their distances."""
    adj = adj if adj is not None else graph.adjacency()
    dist = {v: 0}
    queue = deque([v])
    while queue:
        x = queue.popleft()
        if dist[x] == s:
            continue
        for y in adj[x]:
            if y not in dist:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


def bfs_diameter(graph: Graph) -> int:
    """Largest eccentricity over all vertices (exact, one BFS per vertex)."""
    adj = graph.adjacency()
    best = 0
    for v in range(graph.n):
        d = bfs_distances(graph, v, adj)
        best = max(best, max(d.values()))
    return best


def path_diameter_bound(graph: Graph) -> int:
    """Double-sweep lower bound on the diameter (exact on trees)."""
    adj = graph.adjacency()
    best = 0
    seen: set[int] = set()
    for v in range(graph.n):
        if v in seen:
            continue
        d = bfs_distances(graph, v, adj)
        seen.update(d)
        far = max(d, key=lambda x: (d[x], -x))
        d2 = bfs_distances(graph, far, adj)
        best = max(best, max(d2.values()))
    return best


def kruskal_msf(graph: Graph) -> np.ndarray:
    """Indices of the minimum spanning forest edges under ``(weight, index)`` order."""
    if graph.weights is None:
        raise ValueError("kruskal_msf needs a weighted graph")
    order = sorted(range(graph.m), key=lambda k: (int(graph.weights[k]), k))
    uf = UnionFind(graph.n)
    chosen = [k for k in order if uf.union(int(graph.edges[k, 0]), int(graph.edges[k, 1]))]
    return np.array(sorted(chosen), dtype=np.int64)


def recursive_dfs(parent) -> list[int]:
    """DFS sequence of a rooted tree, children in ascending label order.

    Each vertex is written on entry and again after each of its children, so
    a vertex with ``c`` children appears ``c + 1`` times.
    """
    parent = [int(x) for x in parent]
    n = len(parent)
    children: list[list[int]] = [[] for _ in range(n)]
    roots = []
    for v, p in enumerate(parent):
        if p == v:
            roots.append(v)
        else:
            children[p].append(v)
    if len(roots) != 1:
        raise ValueError(f"expected one root, found {len(roots)}")
    seq: list[int] = []
    stack = [(roots[0], 0)]
    seq.append(roots[0])
    while stack:
        v, k = stack[-1]
        if k < len(children[v]):
            stack[-1] = (v, k + 1)
            c = children[v][k]
            seq.append(c)
            stack.append((c, 0))
        else:
            stack.pop()
            if stack:
                seq.append(stack[-1][0])
    return seq


def scan_rmq(a, p: int, q: int) -> int:
    """1-based index of the minimum of ``a[p..q]``, smallest index on ties."""
    if not 1 <= p <= q <= len(a):
        raise IndexError("query outside 1..n")
    best = p
    for i in range(p + 1, q + 1):
        if a[i - 1] < a[best - 1]:
            best = i
    return best


def root_of(parent, v: int) -> tuple[int, int]:
    """Root and depth of ``v`` by walking parent pointers."""
    depth = 0
    while int(parent[v]) != v:
        v = int(parent[v])
        depth += 1
        if depth > len(parent):
            raise ValueError("parent pointers contain a cycle")
    return v, depth


def ancestors(parent, v: int) -> list[int]:
    """``v`` followed by its ancestors up to the root."""
    out = [v]
    while int(parent[out[-1]]) != out[-1]:
        out.append(int(parent[out[-1]]))
        if len(out) > len(parent) + 1:
            raise ValueError("parent pointers contain a cycle")
    return out


def is_spanning_forest(graph: Graph, forest_edges) -> bool:
    """Acyclic, inside ``E``, and spanning every component of ``graph``."""
    f = np.asarray(forest_edges, dtype=np.int64).reshape(-1, 2)
    edge_set = {(int(u), int(v)) for u, v in graph.edges.tolist()}
    uf = UnionFind(graph.n)
    for u, v in f.tolist():
        if (min(u, v), max(u, v)) not in edge_set:
            return False
        if not uf.union(u, v):
            return False
    comps = len(set(uf_components(graph).tolist()))
    return len(f) == graph.n - comps


def is_rooted_spanning_forest(graph: Graph, parent) -> bool:
    """Parent pointers whose edges form a spanning forest with one root per component."""
    parent = [int(x) for x in parent]
    if len(parent) != graph.n:
        return False
    edge_set = {(int(u), int(v)) for u, v in graph.edges.tolist()}
    tree_edges = []
    for v, p in enumerate(parent):
        if p != v:
            if (min(v, p), max(v, p)) not in edge_set:
                return False
            tree_edges.append((v, p))
    try:
        roots = {root_of(parent, v)[0] for v in range(graph.n)}
    except ValueError:
        return False
    comp = uf_components(graph)
    if len(roots) != len(set(comp.tolist())):
        return False
    return is_spanning_forest(graph, tree_edges)


def hash_to_min(graph: Graph, max_rounds: int | None = None) -> tuple[np.ndarray, int]:
    """The Hash-to-Min baseline: returns (component of each vertex, rounds).

    Each vertex starts from itself and its neighbours. In every round a vertex
    sends its whole set to the set's minimum ``u`` and sends ``u`` to every
    other member; its next set is itself plus whatever it received. The
    procedure stops in the first round in which no set changes.
    """
    n = graph.n
    ar = np.arange(n, dtype=np.int64)
    # a pair (owner, member) is kept as the key owner * n + member
    e = graph.edges.astype(np.int64)
    keys = np.unique(np.concatenate([e[:, 0] * n + e[:, 1], e[:, 1] * n + e[:, 0], ar * n + ar]))
    rounds = 0
    limit = max_rounds if max_rounds is not None else 4 * n + 8
    while rounds < limit:
        rounds += 1
        owner, member = np.divmod(keys, max(n, 1))
        head = np.ones(len(keys), dtype=bool)
        head[1:] = owner[1:] != owner[:-1]
        u = np.repeat(member[head], np.diff(np.append(np.flatnonzero(head), len(keys))))
        rest = member != u
        nxt = np.unique(np.concatenate([u * n + member, member[rest] * n + u[rest], ar * n + ar]))
        if len(nxt) == len(keys) and np.array_equal(nxt, keys):
            break
        keys = nxt
    owner, member = np.divmod(keys, max(n, 1))
    head = np.ones(len(keys), dtype=bool)
    head[1:] = owner[1:] != owner[:-1]
    comp = member[head]
    return comp, rounds
