"""Spanning forests built from local shortest path trees.

Tree families are stored as rows ``(root, member, parent, depth)``: one row
per member of the tree rooted at ``root``. A tree of radius ``s`` that holds
exactly the ball of radius ``s`` around its root is *complete*.

The pipeline per phase of :func:`spanning_forest`:

1. :func:`multiple_large_trees` gives every vertex a shortest path tree that
   is either large or spans its whole component.
2. Components covered by one tree are finished: their vertices point along
   the tree of the component's smallest vertex.
3. Every other vertex samples leaders inside its tree and points one step
   toward the nearest leader; contracting those pointers merges each vertex
   into a leader.

:func:`orientate` replays the phases backwards and stitches the per-phase
pointer forests into one rooted spanning forest using root changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import dist_collections as dc
from .connectivity import (
    BudgetTooSmall,
    InvalidPointers,
    budget_grid,
    ceil_root,
    default_budget,
    default_rounds,
    tree_contraction_arrays,
)
from .graph import Graph
from .mpc_runtime import INT, GridConfig, MachineGrid, RoundReport

EMPTY4 = np.zeros((0, 4), dtype=INT)


class InvalidInput(ValueError):
    """A supplied tree is not a well-formed shortest path tree."""


class BadWitness(ValueError):
    """An edge witness does not join the two trees it is supposed to join."""


# ---------------------------------------------------------------- single trees
@dataclass
class Lcspt:
    """A rooted shortest path tree with explicit depths."""

    root: int
    members: np.ndarray
    parent: np.ndarray
    depth: np.ndarray
    radius: int | None = None

    def rows(self) -> np.ndarray:
        k = len(self.members)
        return np.column_stack([np.full(k, self.root), self.members, self.parent, self.depth]).astype(INT)

    @classmethod
    def from_rows(cls, rows: np.ndarray, radius: int | None = None) -> "Lcspt":
        rows = rows[np.argsort(rows[:, 1], kind="stable")]
        return cls(int(rows[0, 0]), rows[:, 1].copy(), rows[:, 2].copy(), rows[:, 3].copy(), radius)

    def parent_of(self) -> dict[int, int]:
        return dict(zip(self.members.tolist(), self.parent.tolist()))

    def depth_of(self) -> dict[int, int]:
        return dict(zip(self.members.tolist(), self.depth.tolist()))

    def validate(self) -> None:
        """Structural checks: one root at depth 0, parents inside, depths consistent."""
        par = self.parent_of()
        dep = self.depth_of()
        if len(par) != len(self.members):
            raise InvalidInput(f"tree {self.root} lists a member twice")
        if par.get(self.root) != self.root or dep.get(self.root) != 0:
            raise InvalidInput(f"tree {self.root} does not hold its root at depth 0")
        for x, p in par.items():
            if x == self.root:
                continue
            if p not in par:
                raise InvalidInput(f"tree {self.root}: parent {p} of {x} is not a member")
            if dep[x] != dep[p] + 1:
                raise InvalidInput(f"tree {self.root}: depth of {x} is not its parent's plus one")


def family_to_trees(rows: np.ndarray) -> dict[int, Lcspt]:
    """Split a family of tree rows into one :class:`Lcspt` per root."""
    if len(rows) == 0:
        return {}
    rows = rows[np.lexsort((rows[:, 1], rows[:, 0]))]
    cut = np.flatnonzero(np.diff(rows[:, 0])) + 1
    return {int(b[0, 0]): Lcspt.from_rows(b) for b in np.split(rows, cut)}


def _tree_sizes(grid: MachineGrid, rows: np.ndarray, n_total: int) -> np.ndarray:
    size = np.zeros(n_total, dtype=INT)
    if len(rows):
        keys, cnt = dc.group_sizes(grid, rows[:, 0])
        size[keys] = cnt
    return size


def _all_members(grid: MachineGrid, rows: np.ndarray, good: np.ndarray, n_total: int) -> np.ndarray:
    """Per root: whether every member ``u`` of its tree has ``good[u]``."""
    out = np.zeros(n_total, dtype=bool)
    if len(rows) == 0:
        return out
    flag = dc.lookup(grid, np.arange(n_total, dtype=INT), good.astype(INT), rows[:, 1])
    worst = dc.first_per_group(grid, np.column_stack([rows[:, 0], flag]))
    out[worst[:, 0]] = worst[:, 1] == 1
    return out


def _expand(grid: MachineGrid, base: np.ndarray, small: np.ndarray) -> np.ndarray:
    """Batched tree expansion.

    ``base`` holds trees ``T~(v)``; ``small`` holds a tree ``T(u)`` for every
    member ``u`` of every base tree. New members ``x`` take their parent from
    the ``T(u)`` minimising ``dep_T~(u) + dep_T(u)(x)``, smallest ``u`` on ties;
    old members keep their pointer and depth.
    """
    if len(base) == 0:
        return EMPTY4
    i, j = dc.join(grid, base[:, 1], np.column_stack([small[:, 0], np.arange(len(small), dtype=INT)]))
    cand = dc.lookup(grid, np.arange(len(small), dtype=INT), small, j)
    b = base[i]
    grown = np.column_stack([b[:, 0], cand[:, 1], np.ones(len(i), dtype=INT), b[:, 3] + cand[:, 3], b[:, 1], cand[:, 2]])
    kept = np.column_stack([base[:, 0], base[:, 1], np.zeros(len(base), dtype=INT), base[:, 3], base[:, 1], base[:, 2]])
    best = dc.first_per_group(grid, np.vstack([kept, grown]), group_width=2)
    return best[:, [0, 1, 5, 3]].copy()


def tree_expansion(
    tree: Lcspt,
    trees: Mapping[int, Lcspt],
    grid: MachineGrid | None = None,
    check: bool = True,
    config: GridConfig | None = None,
) -> Lcspt:
    """Grow a complete tree of radius ``s1`` by trees of radius ``s2`` at its members.

    The result is the complete tree of radius ``s1 + s2`` around the same root.
    """
    if check:
        tree.validate()
        for u in tree.members.tolist():
            if u not in trees:
                raise InvalidInput(f"no tree supplied for member {u}")
            trees[u].validate()
            if trees[u].root != u:
                raise InvalidInput(f"tree supplied for {u} is rooted at {trees[u].root}")
    small = np.vstack([trees[u].rows() for u in tree.members.tolist()])
    grid = grid or MachineGrid.sized(16 * (len(small) + len(tree.members)), config)
    out = _expand(grid, tree.rows(), small)
    radius = None
    if tree.radius is not None and all(trees[u].radius is not None for u in tree.members.tolist()):
        radius = tree.radius + min(trees[u].radius for u in tree.members.tolist())
    return Lcspt.from_rows(out, radius)


# ---------------------------------------------------------------- families of trees
@dataclass
class MultiRadius:
    """Complete trees of radius ``2**i`` for ``i = 0..r``.

    ``levels[i]`` holds the rows of every non-null ``T_i(v)``; ``alive[i][v]``
    says whether ``T_i(v)`` is non-null.
    """

    r: int
    threshold: int
    levels: list = field(default_factory=list)
    alive: list = field(default_factory=list)

    def tree(self, i: int, v: int) -> Lcspt | None:
        if not self.alive[i][v]:
            return None
        rows = self.levels[i]
        return Lcspt.from_rows(rows[rows[:, 0] == v], radius=2**i)


def _closed_rows(verts: np.ndarray, arcs: np.ndarray) -> np.ndarray:
    """Rows ``(v, x, v, dep)`` of the radius-one tree of every vertex."""
    self_rows = np.column_stack([verts, verts, verts, np.zeros(len(verts), dtype=INT)])
    if len(arcs) == 0:
        return self_rows.astype(INT)
    nb = np.column_stack([arcs[:, 0], arcs[:, 1], arcs[:, 0], np.ones(len(arcs), dtype=INT)])
    return np.vstack([self_rows, nb]).astype(INT)


def _multi_radius(
    grid: MachineGrid, verts: np.ndarray, arcs: np.ndarray, m: int, n_total: int
) -> MultiRadius:
    n = len(verts)
    if m < n:
        raise BudgetTooSmall(f"budget {m} < {n}")
    thr = ceil_root(m, max(n, 1), 4)
    closed = _closed_rows(verts, arcs)
    size = _tree_sizes(grid, closed, n_total)
    alive = np.zeros(n_total, dtype=bool)
    alive[verts] = size[verts] < thr
    out = MultiRadius(0, thr, [closed[alive[closed[:, 0]]]], [alive])
    if n == 0:
        return out
    limit = max(1, math.ceil(math.log2(max(m / n, 2)))) + 2
    r = 1
    while True:
        prev, prev_alive = out.levels[-1], out.alive[-1]
        ready = prev_alive & _all_members(grid, prev, prev_alive, n_total)
        new = _expand(grid, prev[ready[prev[:, 0]]], prev)
        new_size = _tree_sizes(grid, new, n_total)
        now_alive = ready & (new_size < thr)
        out.levels.append(new[now_alive[new[:, 0]]])
        out.alive.append(now_alive)
        out.r = r
        grid.count_iteration("multi_radius_lcspt")
        prev_size = _tree_sizes(grid, prev, n_total)
        if np.all(~now_alive[verts] | (new_size[verts] == prev_size[verts])):
            return out
        r += 1
        if r > limit:
            raise RuntimeError("tree doubling did not settle")


def multi_radius_lcspt(
    graph: Graph, m: int, grid: MachineGrid | None = None, config: GridConfig | None = None
) -> MultiRadius:
    """Complete trees of radius 1, 2, 4, ... until every ball is big or final.

    ``T_i(v)`` is null exactly when the ball of radius ``2**i`` around ``v``
    has at least ``ceil((m/n)**(1/4))`` vertices.
    """
    grid = grid or budget_grid(graph, m, config)
    return _multi_radius(grid, np.arange(graph.n, dtype=INT), graph.arcs(), m, graph.n)


def _large_trees(
    grid: MachineGrid, verts: np.ndarray, arcs: np.ndarray, m: int, n_total: int
) -> tuple[np.ndarray, int, int]:
    """Rows of ``T~(v)`` for every ``v``; also the threshold and the iteration count."""
    n = len(verts)
    if m < 16 * n:
        raise BudgetTooSmall(f"budget {m} < 16 * {n}")
    mr = _multi_radius(grid, verts, arcs, m, n_total)
    thr, r = mr.threshold, mr.r
    if n == 0:
        return EMPTY4, thr, r
    final = mr.alive[r]
    done = mr.levels[r]
    open_v = np.zeros(n_total, dtype=bool)
    open_v[verts] = ~final[verts]
    rest = verts[open_v[verts]]
    cur = np.column_stack([rest, rest, rest, np.zeros(len(rest), dtype=INT)]).astype(INT)
    for i in range(1, r + 1):
        level, alive = mr.levels[r - i], mr.alive[r - i]
        ready = open_v & _all_members(grid, cur, alive, n_total)
        grown = _expand(grid, cur[ready[cur[:, 0]]], level)
        size = _tree_sizes(grid, grown, n_total)
        take = ready & (size < thr)
        cur = np.vstack([cur[~take[cur[:, 0]]], grown[take[grown[:, 0]]]])
        grid.count_iteration("multiple_large_trees")
    # final step: one more radius-one layer, or a neighbourhood of a dense member
    alive0 = mr.alive[0]
    ready = open_v & _all_members(grid, cur, alive0, n_total)
    grown = _expand(grid, cur[ready[cur[:, 0]]], mr.levels[0])
    stuck = cur[~ready[cur[:, 0]]]
    extra = EMPTY4
    if len(stuck):
        dense = stuck[~alive0[stuck[:, 1]]]
        u_v = dc.first_per_group(grid, dense[:, [0, 1, 3]])
        with grid.scope():
            name = grid.hold("closed", _closed_rows(verts, arcs)[:, :2])
            ranked = dc.index_elements(grid, name)
        near = ranked[ranked[:, 2] <= thr, :2]
        i, x = dc.join(grid, u_v[:, 1], near)
        cand = np.column_stack([u_v[i, 0], x, np.ones(len(i), dtype=INT), u_v[i, 1], u_v[i, 2] + 1])
        kept = np.column_stack([stuck[:, 0], stuck[:, 1], np.zeros(len(stuck), dtype=INT), stuck[:, 2], stuck[:, 3]])
        best = dc.first_per_group(grid, np.vstack([kept, cand]), group_width=2)
        extra = best[:, [0, 1, 3, 4]].copy()
    rows = np.vstack([done, grown, extra])
    rows = rows[np.lexsort((rows[:, 1], rows[:, 0]))]
    return rows, thr, r


def multiple_large_trees(
    graph: Graph, m: int, grid: MachineGrid | None = None, config: GridConfig | None = None
) -> tuple[dict[int, Lcspt], int]:
    """A shortest path tree per vertex: large, or spanning the whole component.

    Returns the trees keyed by root and the iteration count. Sizes lie between
    ``ceil((m/n)**(1/4))`` and ``floor((m/n)**(1/2))`` unless the tree already
    covers its component.
    """
    grid = grid or budget_grid(graph, m, config)
    rows, _, r = _large_trees(grid, np.arange(graph.n, dtype=INT), graph.arcs(), m, graph.n)
    return family_to_trees(rows), r


# ---------------------------------------------------------------- pointer utilities
def _ancestors(
    grid: MachineGrid, verts: np.ndarray, parent: np.ndarray
) -> tuple[int, np.ndarray, list[np.ndarray]]:
    """Depths and ``2**i``-th ancestors by doubling (arrays aligned with ``verts``)."""
    verts = np.asarray(verts, dtype=INT)
    parent = np.asarray(parent, dtype=INT)
    if len(verts) == 0:
        return 0, np.zeros(0, dtype=INT), [parent.copy()]
    pos = np.searchsorted(verts, parent)
    if np.any(pos >= len(verts)) or np.any(verts[np.minimum(pos, len(verts) - 1)] != parent):
        raise InvalidPointers("a pointer leaves the vertex set")
    gs = [parent.copy()]
    h = np.where(parent == verts, 0, -1).astype(INT)
    limit = max(1, math.ceil(math.log2(max(len(verts), 2)))) + 1
    l = 0
    while np.any(h < 0):
        l += 1
        if l > limit:
            raise InvalidPointers("parent pointers contain a cycle")
        g = gs[-1]
        h_up = dc.lookup(grid, verts, h, g)
        h = np.where(h >= 0, h, np.where(h_up >= 0, h_up + 2 ** (l - 1), -1))
        gs.append(dc.lookup(grid, verts, g, g))
        grid.count_iteration("find_ancestors")
    return l, h, gs


def _split_paths(
    grid: MachineGrid,
    verts: np.ndarray,
    parent: np.ndarray,
    dep: np.ndarray,
    gs: list[np.ndarray],
    src: np.ndarray,
    dst: np.ndarray,
    levels: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Vertices on each path ``src[j] -> dst[j]`` by halving segments.

    Every ``dst[j]`` must be an ancestor of ``src[j]``; ``levels`` must satisfy
    ``2**levels >= dep(src) - dep(dst)``. Returns ``(query index, vertex)``
    pairs, one per path vertex, with each path listed from ``src`` upward.
    """
    q = len(src)
    if q == 0:
        return np.zeros(0, dtype=INT), np.zeros(0, dtype=INT)
    seg = np.column_stack([np.arange(q, dtype=INT), src, dst]).astype(INT)
    for i in range(1, levels + 1):
        step = 2 ** (levels - i)
        dx = dc.lookup(grid, verts, dep, seg[:, 1])
        dy = dc.lookup(grid, verts, dep, seg[:, 2])
        cut = dx - dy > step
        if cut.any():
            mid = dc.lookup(grid, verts, gs[levels - i], seg[cut, 1])
            left = np.column_stack([seg[cut, 0], seg[cut, 1], mid])
            right = np.column_stack([seg[cut, 0], mid, seg[cut, 2]])
            seg = np.vstack([seg[~cut], left, right])
        grid.count_iteration("find_path")
    seg = dc.sort_rows(grid, seg)
    ends = seg[:, 2]
    ends_dep = dc.lookup(grid, verts, dep, ends)
    starts_dep = dc.lookup(grid, verts, dep, seg[:, 1])
    up = dc.lookup(grid, verts, parent, seg[:, 1])
    good = (seg[:, 1] == ends) | ((starts_dep - ends_dep == 1) & (up == ends))
    if not good.all():
        raise InvalidPointers("a path target is not an ancestor of its source")
    qi = np.concatenate([np.arange(q, dtype=INT), seg[seg[:, 1] != ends, 0]])
    vx = np.concatenate([np.asarray(src, dtype=INT), ends[seg[:, 1] != ends]])
    order = np.lexsort((-dc.lookup(grid, verts, dep, vx), qi))
    return qi[order], vx[order]


def _levels_for(lengths: np.ndarray) -> int:
    top = int(lengths.max()) if len(lengths) else 0
    return max(0, math.ceil(math.log2(top))) if top > 1 else 0


def _root_change_arrays(
    grid: MachineGrid, verts: np.ndarray, parent: np.ndarray, queries: np.ndarray
) -> np.ndarray:
    """Re-root the trees containing ``queries`` (at most one query per tree)."""
    queries = np.asarray(queries, dtype=INT)
    out = parent.copy()
    if len(queries) == 0:
        return out
    r, dep, gs = _ancestors(grid, verts, parent)
    root = dc.lookup(grid, verts, gs[-1], queries)
    qd = dc.lookup(grid, verts, dep, queries)
    qi, vx = _split_paths(grid, verts, parent, dep, gs, queries, root, _levels_for(qd))
    vdep = dc.lookup(grid, verts, dep, vx)
    nxt = dc.lookup(grid, np.column_stack([qi, vdep]), vx, np.column_stack([qi, vdep + 1]), default=-1)
    pos = np.searchsorted(verts, vx)
    out[pos] = np.where(nxt >= 0, nxt, vx)
    return out


def _as_parent(parent) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(parent, dtype=INT)
    return np.arange(len(p), dtype=INT), p


def _small_grid(n: int, grid: MachineGrid | None, config: GridConfig | None) -> MachineGrid:
    return grid or MachineGrid.sized(64 * max(n, 1), config)


def find_ancestors(
    parent, grid: MachineGrid | None = None, config: GridConfig | None = None
) -> tuple[int, np.ndarray, list[np.ndarray]]:
    """``(r, dep, [g_0, ..., g_r])`` with ``g_i = p^(2^i)`` for parents ``0..n-1``."""
    verts, p = _as_parent(parent)
    return _ancestors(_small_grid(len(p), grid, config), verts, p)


def find_path(
    parent, q: int, grid: MachineGrid | None = None, config: GridConfig | None = None
) -> tuple[np.ndarray, np.ndarray, int | None]:
    """``(dep, P, w)``: the vertices from ``q`` to its root and the root's child on it."""
    verts, p = _as_parent(parent)
    grid = _small_grid(len(p), grid, config)
    r, dep, gs = _ancestors(grid, verts, p)
    root = np.array([gs[-1][q]], dtype=INT)
    _, path = _split_paths(grid, verts, p, dep, gs, np.array([q], dtype=INT), root, _levels_for(dep[[q]]))
    w = path[dep[path] == 1]
    return dep, np.sort(path), (int(w[0]) if len(w) else None)


def root_change(
    parent, q: int, grid: MachineGrid | None = None, config: GridConfig | None = None
) -> np.ndarray:
    """Make ``q`` the root of its tree by reversing the pointers on its root path."""
    verts, p = _as_parent(parent)
    return _root_change_arrays(_small_grid(len(p), grid, config), verts, p, np.array([q], dtype=INT))


def _forest_expansion_arrays(
    grid: MachineGrid,
    v1: np.ndarray,
    p1: np.ndarray,
    v2: np.ndarray,
    p2: np.ndarray,
    f_keys: np.ndarray,
    f_vals: np.ndarray,
) -> np.ndarray:
    """Parents on ``v2`` (aligned) joining the trees of ``p2`` along the forest ``p1``."""
    roots, rt, _, _ = tree_contraction_arrays(grid, v2, p2, np.zeros((0, 2), dtype=INT))
    if not np.array_equal(roots, v1):
        raise InvalidInput("the coarse vertex set must be the roots of the fine forest")
    move = p1 != v1
    mv, mp = v1[move], p1[move]
    if len(mv) == 0:
        return p2.copy()
    try:
        wit = dc.lookup(grid, f_keys, f_vals, np.column_stack([mv, mp]))
    except dc.MissingKey as exc:
        raise BadWitness(f"no witness edge for forest edge {exc.args[0]}") from None
    x, y = wit[:, 0], wit[:, 1]
    rx = dc.lookup(grid, v2, rt, x, default=-1)
    ry = dc.lookup(grid, v2, rt, y, default=-1)
    bad = (rx != mv) | (ry != mp)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise BadWitness(f"witness {(int(x[k]), int(y[k]))} does not join trees {int(mv[k])} and {int(mp[k])}")
    out = _root_change_arrays(grid, v2, p2, x)
    out[np.searchsorted(v2, x)] = y
    return out


def forest_expansion(
    p: Mapping[int, int],
    p_tilde,
    f: Mapping[tuple[int, int], tuple[int, int]],
    grid: MachineGrid | None = None,
    config: GridConfig | None = None,
) -> np.ndarray:
    """Expand a rooted forest on contracted vertices to the original vertices.

    ``p_tilde`` is a parent array on ``0..n-1`` whose roots are the contracted
    vertices; ``p`` maps each root to its parent in the contracted forest;
    ``f[(u, v)]`` is an original edge ``(x, y)`` with ``x`` in tree ``u`` and
    ``y`` in tree ``v``.
    """
    v2, p2 = _as_parent(p_tilde)
    grid = _small_grid(len(p2) + len(f), grid, config)
    v1 = np.array(sorted(int(k) for k in p), dtype=INT)
    p1 = np.array([int(p[int(k)]) for k in v1], dtype=INT)
    if len(f):
        keys = np.array(list(f.keys()), dtype=INT).reshape(-1, 2)
        vals = np.array(list(f.values()), dtype=INT).reshape(-1, 2)
    else:
        keys = vals = np.zeros((0, 2), dtype=INT)
    return _forest_expansion_arrays(grid, v1, p1, v2, p2, keys, vals)


# ---------------------------------------------------------------- spanning forest
@dataclass
class ForestPhase:
    """One contraction phase: ``parent`` and ``h`` are aligned with ``vertices``.

    ``h`` is -1 for vertices whose component finished in this phase.
    """

    vertices: np.ndarray
    parent: np.ndarray
    h: np.ndarray
    chosen: np.ndarray
    threshold: int
    probability: float
    small: int
    leaders: int
    tree_iterations: int
    path_iterations: int
    contraction_iterations: int


@dataclass
class ForestBuildTrace:
    n: int
    phases: list = field(default_factory=list)
    forest_arcs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=INT))
    failed: bool = False
    iterations: int = 0
    space_budget: int = 0
    rounds_param: int = 0
    retries_used: int = 0
    report: RoundReport | None = None

    @property
    def forest_edges(self) -> np.ndarray:
        """Undirected forest edges ``(u, v)`` with ``u < v``, sorted."""
        a = self.forest_arcs
        e = np.unique(np.sort(a, axis=1), axis=0) if len(a) else np.zeros((0, 2), dtype=INT)
        return e

    @property
    def phase_sizes(self) -> list[int]:
        return [len(ph.vertices) for ph in self.phases]


def default_forest_budget(n: int, gamma: float = 0.0) -> int:
    return max(16 * max(n, 1), default_budget(n, gamma))


def default_forest_rounds(n: int, m: int) -> int:
    """Leaders keep about half of the vertices per phase while ``(m/n)**(1/4)`` is small."""
    return default_rounds(n, m) + max(4, math.ceil(2 * math.log2(max(n, 2))))


def _witness(grid: MachineGrid, arcs: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Original oriented arcs behind the current arcs ``(a, b)`` and ``(b, a)``."""
    if len(a) == 0:
        return np.zeros((0, 2), dtype=INT)
    fwd = dc.lookup(grid, arcs[:, :2], arcs[:, 2:], np.column_stack([a, b]))
    back = dc.lookup(grid, arcs[:, :2], arcs[:, 2:], np.column_stack([b, a]))
    return np.vstack([fwd, back])


def _nearest_leader_step(
    grid: MachineGrid, trees: np.ndarray, owners: np.ndarray, leader: np.ndarray
) -> tuple[np.ndarray, int]:
    """For each owner ``v``: the child of ``v`` on the path to its nearest leader.

    ``trees`` are the rows of the owners' trees. Returns pointers aligned with
    ``owners`` (``v`` itself when ``v`` is a leader) and the path iterations.
    """
    step = owners.copy()
    if len(owners) == 0:
        return step, 0
    cand = trees[leader[trees[:, 1]]]
    z = dc.first_per_group(grid, cand[:, [0, 3, 1]])
    zmap = np.full(int(owners.max()) + 1, -1, dtype=INT)
    zmap[z[:, 0]] = z[:, 2]
    zv = zmap[owners]
    far = zv != owners
    if not far.any():
        return step, 0
    # the trees as one forest on node ids = row positions
    node_keys = trees[:, :2]
    node = np.arange(len(trees), dtype=INT)
    par_node = dc.lookup(grid, node_keys, node, trees[:, [0, 2]])
    r, dep, gs = _ancestors(grid, node, par_node)
    src = dc.lookup(grid, node_keys, node, np.column_stack([owners[far], zv[far]]))
    dst = dc.lookup(grid, node_keys, node, np.column_stack([owners[far], owners[far]]))
    k = _levels_for(dep[src])
    qi, vx = _split_paths(grid, node, par_node, dep, gs, src, dst, k)
    at1 = dep[vx] == 1
    step[np.flatnonzero(far)[qi[at1]]] = trees[vx[at1], 1]
    return step, k


def _forest_attempt(
    grid: MachineGrid, graph: Graph, m: int, r: int
) -> tuple[ForestBuildTrace, bool]:
    n = graph.n
    log_n = math.log2(max(n, 2))
    verts = np.arange(n, dtype=INT)
    base = graph.arcs()
    arcs = np.column_stack([base, base]).astype(INT)
    trace = ForestBuildTrace(n)
    total = n
    chosen_all = []
    iterations = 0
    for _ in range(r):
        n_i = len(verts)
        if n_i == 0:
            break
        with grid.scope():
            grid.hold("edges", arcs)
            trees, thr, tr = _large_trees(grid, verts, arcs[:, :2], m, n)
            grid.hold("trees", trees)
            size = _tree_sizes(grid, trees, n)
            big = np.zeros(n, dtype=bool)
            big[verts] = size[verts] >= thr
            small = verts[~big[verts]]
            v2 = verts[big[verts]]
            parent = verts.copy()
            # components covered by a single tree: follow the tree of the smallest member
            if len(small):
                srows = trees[~big[trees[:, 0]]]
                u_v = dc.first_per_group(grid, srows[:, :2])
                p_small = dc.lookup(grid, trees[:, :2], trees[:, 2], u_v[:, [1, 0]])
                parent[np.searchsorted(verts, u_v[:, 0])] = p_small
            prob = min((30.0 * log_n + 100.0) / thr, 0.5)
            flags = np.zeros(n, dtype=bool)
            flags[v2] = grid.rng.random(len(v2)) < prob
            brows = trees[big[trees[:, 0]]]
            covered = np.zeros(n, dtype=bool)
            if len(brows):
                hit = dc.first_per_group(grid, np.column_stack([brows[:, 0], (~flags[brows[:, 1]]).astype(INT)]))
                covered[hit[:, 0]] = hit[:, 1] == 0
            leader = np.zeros(n, dtype=bool)
            leader[v2] = flags[v2] | ~covered[v2]
            step, k = _nearest_leader_step(grid, brows, v2, leader)
            parent[np.searchsorted(verts, v2)] = step
            roots, g, _, rc = tree_contraction_arrays(grid, v2, step, np.zeros((0, 2), dtype=INT))
            h = np.full(n_i, -1, dtype=INT)
            h[np.searchsorted(verts, v2)] = g
            moved = parent != verts
            chosen = _witness(grid, arcs, verts[moved], parent[moved])
            chosen_all.append(chosen)
            # contracted edges keep the smallest original witness
            inner = arcs[big[arcs[:, 0]] & big[arcs[:, 1]]] if len(arcs) else arcs
            if len(inner):
                ga = dc.lookup(grid, v2, g, inner[:, 0])
                gb = dc.lookup(grid, v2, g, inner[:, 1])
                keep = ga != gb
                # rank witnesses by the undirected edge so both orientations agree
                w = inner[keep, 2:]
                rows = np.column_stack([ga[keep], gb[keep], w.min(axis=1), w.max(axis=1), w])
                best = dc.first_per_group(grid, rows, group_width=2) if len(rows) else np.zeros((0, 6), dtype=INT)
                new_arcs = best[:, [0, 1, 4, 5]].copy()
            else:
                new_arcs = np.zeros((0, 4), dtype=INT)
        iterations += tr + k + rc
        trace.phases.append(
            ForestPhase(verts, parent, h, chosen, thr, prob, len(small), len(roots), tr, k, rc)
        )
        grid.count_iteration("forest_phase")
        verts, arcs = roots, new_arcs
        total += len(verts)
        if total > 40 * n:
            trace.iterations = iterations
            return trace, False
    trace.iterations = iterations
    if len(verts):
        return trace, False
    trace.forest_arcs = np.vstack(chosen_all) if chosen_all else np.zeros((0, 2), dtype=INT)
    return trace, True


def spanning_forest(
    graph: Graph,
    m: int | None = None,
    r: int | None = None,
    grid: MachineGrid | None = None,
    config: GridConfig | None = None,
    retries: int = 3,
) -> ForestBuildTrace:
    """Spanning forest edges of ``graph`` plus the per-phase trace for :func:`orientate`.

    A budget below ``16 n`` is raised to ``16 n``. If a run does not finish
    within ``r`` phases (or the phases hold more than ``40 n`` vertices in
    total) it is retried with fresh randomness; ``failed`` is set when every
    attempt failed.
    """
    n = graph.n
    config = config or (grid.config if grid is not None else GridConfig())
    m = max(int(m) if m is not None else default_forest_budget(n, config.gamma), 16 * max(n, 1))
    r = int(r) if r is not None else default_forest_rounds(n, m)
    grid = grid or budget_grid(graph, m, config)
    trace = ForestBuildTrace(n)
    for attempt in range(retries + 1):
        if attempt:
            grid.rng = np.random.default_rng([config.seed, attempt])
        trace, ok = _forest_attempt(grid, graph, m, r)
        trace.retries_used = attempt
        if ok:
            break
    trace.failed = not ok
    trace.space_budget = m
    trace.rounds_param = r
    trace.report = grid.report
    grid.report.failed = trace.failed
    return trace


def orientate(
    trace: ForestBuildTrace, grid: MachineGrid | None = None, config: GridConfig | None = None
) -> np.ndarray:
    """Rooted spanning forest (parent array) whose edges are exactly the traced forest."""
    if trace.failed:
        raise ValueError("cannot orientate a failed spanning forest run")
    n = trace.n
    grid = grid or _small_grid(8 * (n + len(trace.forest_arcs)), None, config)
    level_arcs = trace.forest_arcs
    witnesses: list[tuple[np.ndarray, np.ndarray]] = []
    for ph in trace.phases:
        if len(level_arcs):
            hu = dc.lookup(grid, ph.vertices, ph.h, level_arcs[:, 0])
            hv = dc.lookup(grid, ph.vertices, ph.h, level_arcs[:, 1])
            keep = hu != hv
            rows = np.column_stack([hu[keep], hv[keep], level_arcs[keep]])
            best = dc.first_per_group(grid, rows, group_width=2) if len(rows) else np.zeros((0, 4), dtype=INT)
        else:
            best = np.zeros((0, 4), dtype=INT)
        witnesses.append((best[:, :2].copy(), best[:, 2:].copy()))
        level_arcs = best[:, :2].copy()
        grid.count_iteration("orientate")
    verts_next = np.zeros(0, dtype=INT)
    p_next = np.zeros(0, dtype=INT)
    for i in range(len(trace.phases), 0, -1):
        ph = trace.phases[i - 1]
        extra = ph.vertices[(ph.h < 0) & (ph.parent == ph.vertices)]
        v1 = np.concatenate([verts_next, extra])
        p1 = np.concatenate([p_next, extra])
        order = np.argsort(v1, kind="stable")
        keys, vals = witnesses[i - 1]
        p_next = _forest_expansion_arrays(grid, v1[order], p1[order], ph.vertices, ph.parent, keys, vals)
        verts_next = ph.vertices
        grid.count_iteration("orientate")
    out = np.arange(n, dtype=INT)
    if len(verts_next):
        out[verts_next] = p_next
    return out


def estimate_diameter(
    graph: Graph,
    m: int | None = None,
    r: int | None = None,
    grid: MachineGrid | None = None,
    config: GridConfig | None = None,
    retries: int = 3,
) -> tuple[int | None, ForestBuildTrace]:
    """Upper estimate ``2 * depth`` of the oriented spanning forest (``None`` on failure)."""
    trace = spanning_forest(graph, m, r, grid, config, retries)
    if trace.failed:
        return None, trace
    p = orientate(trace, config=config)
    _, dep, _ = find_ancestors(p, config=config)
    return 2 * int(dep.max()) if len(dep) else 0, trace
