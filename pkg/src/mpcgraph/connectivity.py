"""Connected components by neighbourhood growth, leader sampling and contraction.

One phase of :func:`connectivity`:

1. :func:`neighbor_increment` adds edges until every vertex either sees about
   ``sqrt(m/n)`` vertices of its component or its whole component is a clique.
2. Vertices with few neighbours form small components; each of them is
   mapped to the smallest vertex of its clique and leaves the graph.
3. The remaining vertices sample leaders. Every non-leader points at the
   smallest leader in its closed neighbourhood and :func:`tree_contraction`
   merges it into that leader.

The phases repeat on the contracted graph. When nothing is left, following the
recorded pointers gives every vertex its component representative.

All vertex ids here are compact indices; a graph's labels are kept sorted, so
"smallest label" is "smallest index".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dist_collections as dc
from .graph import Graph
from .mpc_runtime import INT, GridConfig, MachineGrid, RoundReport


class BudgetTooSmall(ValueError):
    """The space budget is below what the algorithm needs for this many vertices."""


class InvalidPointers(ValueError):
    """Parent pointers contain a cycle or point outside the vertex set."""


def ceil_root(x_num: int, x_den: int, k: int) -> int:
    """Smallest integer ``t >= 0`` with ``t**k >= x_num / x_den`` (exact)."""
    if x_den <= 0:
        raise ValueError("denominator must be positive")
    t = max(0, int(math.floor((x_num / x_den) ** (1.0 / k))) - 1)
    while t**k * x_den < x_num:
        t += 1
    return t


def budget_grid(graph: Graph, m: int, config: GridConfig | None) -> MachineGrid:
    """Grid sized for the input plus a space budget of ``m`` pair tuples."""
    return MachineGrid.sized(graph.words() + 3 * int(m), config)


# ---------------------------------------------------------------- NeighborIncrement
def _threshold(m: int, n: int) -> int:
    return ceil_root(m, n, 2)


def _initial_sets(grid: MachineGrid, verts: np.ndarray, arcs: np.ndarray, t: int) -> np.ndarray:
    """``{v}`` plus the ``t - 1`` smallest neighbours of ``v`` (fewer if ``v`` has fewer)."""
    with grid.scope():
        name = grid.hold("arcs", arcs)
        ranked = dc.index_elements(grid, name)
    keep = ranked[ranked[:, 2] <= t - 1, :2]
    pairs = np.vstack([np.column_stack([verts, verts]), keep])
    return dc.dedup_rows(grid, pairs)


def _sizes(pairs: np.ndarray, n_total: int) -> np.ndarray:
    return np.bincount(pairs[:, 0], minlength=n_total).astype(INT)


def _grow_step(grid: MachineGrid, pairs: np.ndarray, t: int, n_total: int) -> np.ndarray:
    """One round of set growth: adopt a large set, or take the union of the sets seen."""
    size = _sizes(pairs, n_total)
    large = size >= t
    owner = pairs[:, 0]
    cand = pairs[large[pairs[:, 1]]]
    chosen = dc.first_per_group(grid, cand) if len(cand) else np.zeros((0, 2), dtype=INT)
    adopt = np.zeros(n_total, dtype=bool)
    adopt[chosen[:, 0]] = True
    pieces = []
    if len(chosen):
        cv, cu = chosen[:, 0], chosen[:, 1]
        i, x = dc.join(grid, cu, pairs)
        inside = dc.lookup(grid, pairs, np.ones(len(pairs), dtype=INT), chosen[:, ::-1], default=0)
        v_of = cv[i]
        drop = (x == cu[i]) & (inside[i] == 0) & (x != v_of)
        pieces.append(np.column_stack([v_of[~drop], x[~drop]]))
        pieces.append(np.column_stack([cv, cv]))
    rest = pairs[~adopt[owner]]
    if len(rest):
        i, x = dc.join(grid, rest[:, 1], pairs)
        pieces.append(np.column_stack([rest[i, 0], x]))
    if not pieces:
        return pairs
    return dc.dedup_rows(grid, np.vstack(pieces))


def neighbor_sets(
    grid: MachineGrid, m: int, verts: np.ndarray, arcs: np.ndarray, n_total: int
) -> tuple[np.ndarray, int]:
    """Final neighbourhood sets as ``(v, x)`` pairs and the iteration count."""
    n = len(verts)
    if m < 4 * n:
        raise BudgetTooSmall(f"budget {m} < 4 * {n}")
    if n == 0:
        return np.zeros((0, 2), dtype=INT), 0
    t = _threshold(m, n)
    pairs = _initial_sets(grid, verts, arcs, t)
    r = 1
    while True:
        grid.count_iteration("neighbor_increment")
        new = _grow_step(grid, pairs, t, n_total)
        old_size = _sizes(pairs, n_total)[verts]
        new_size = _sizes(new, n_total)[verts]
        if np.all((new_size >= t) | (new_size == old_size)):
            return new, r
        pairs = new
        r += 1


def _augment(grid: MachineGrid, arcs: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    off = pairs[pairs[:, 0] != pairs[:, 1]]
    both = np.vstack([arcs, off, off[:, ::-1]])
    return dc.dedup_rows(grid, both) if len(both) else arcs


def neighbor_increment_arcs(
    grid: MachineGrid, m: int, verts: np.ndarray, arcs: np.ndarray, n_total: int
) -> tuple[np.ndarray, int]:
    pairs, r = neighbor_sets(grid, m, verts, arcs, n_total)
    return _augment(grid, arcs, pairs), r


def neighbor_increment(
    graph: Graph, m: int, grid: MachineGrid | None = None, config: GridConfig | None = None
) -> tuple[Graph, int]:
    """Add edges inside components so that vertices see ``ceil(sqrt(m/n)) - 1`` neighbours.

    Returns the augmented graph and the number of iterations.
    """
    grid = grid or budget_grid(graph, m, config)
    verts = np.arange(graph.n, dtype=INT)
    arcs, r = neighbor_increment_arcs(grid, m, verts, graph.arcs(), graph.n)
    und = arcs[arcs[:, 0] < arcs[:, 1]]
    return Graph.from_edges(graph.n, und, labels=graph.labels), r


# ---------------------------------------------------------------- pointers
def tree_contraction_arrays(
    grid: MachineGrid, verts: np.ndarray, parent: np.ndarray, arcs: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Pointer doubling until every vertex points at its root.

    ``parent`` is aligned with ``verts``. Returns ``(roots, root_of, arcs', r)``
    where ``root_of`` is aligned with ``verts`` and ``arcs'`` are the distinct
    arcs between different roots.
    """
    verts = np.asarray(verts, dtype=INT)
    parent = np.asarray(parent, dtype=INT)
    if len(verts) == 0:
        return verts, verts, np.zeros((0, 2), dtype=INT), 0
    pos = np.searchsorted(verts, parent)
    if np.any(pos >= len(verts)) or np.any(verts[np.minimum(pos, len(verts) - 1)] != parent):
        raise InvalidPointers("a pointer leaves the vertex set")
    g = parent.copy()
    limit = max(1, math.ceil(math.log2(max(len(verts), 2)))) + 1
    l = 0
    while True:
        pg = dc.lookup(grid, verts, parent, g)
        if np.all(pg == g):
            break
        l += 1
        if l > limit:
            raise InvalidPointers("parent pointers contain a cycle")
        g = dc.lookup(grid, verts, g, g)
        grid.count_iteration("tree_contraction")
    roots = verts[parent == verts]
    if len(arcs):
        gu = dc.lookup(grid, verts, g, arcs[:, 0])
        gv = dc.lookup(grid, verts, g, arcs[:, 1])
        keep = gu != gv
        new_arcs = dc.dedup_rows(grid, np.column_stack([gu[keep], gv[keep]])) if keep.any() else np.zeros((0, 2), dtype=INT)
    else:
        new_arcs = np.zeros((0, 2), dtype=INT)
    return roots, g, new_arcs, l


def tree_contraction(
    graph: Graph, parent, grid: MachineGrid | None = None, config: GridConfig | None = None
) -> tuple[Graph, np.ndarray, np.ndarray, int]:
    """Contract every vertex to the root of its pointer tree.

    Returns ``(contracted graph on the roots, roots, root_of, iterations)``.
    The contracted graph keeps the original vertex ids of the roots as labels.
    """
    grid = grid or MachineGrid.sized(graph.words(), config)
    verts = np.arange(graph.n, dtype=INT)
    roots, g, arcs, r = tree_contraction_arrays(grid, verts, np.asarray(parent, dtype=INT), graph.arcs())
    idx = np.searchsorted(roots, arcs)
    und = idx[idx[:, 0] < idx[:, 1]] if len(idx) else np.zeros((0, 2), dtype=INT)
    labels = graph.label_of(roots)
    return Graph.from_edges(len(roots), und, labels=labels), roots, g, r


# ---------------------------------------------------------------- leaders
def _closed_arcs(verts: np.ndarray, arcs: np.ndarray) -> np.ndarray:
    return np.vstack([arcs, np.column_stack([verts, verts])])


def sample_leaders(
    grid: MachineGrid,
    verts: np.ndarray,
    arcs: np.ndarray,
    p: float,
    n_total: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bernoulli(p) leaders plus every vertex with no sampled closed neighbour.

    Returns ``(flags l, leader mask, pointer)`` aligned with ``verts``; each
    non-leader points at the smallest leader of its closed neighbourhood.
    Only arcs between vertices of ``verts`` are considered.
    """
    flags = (grid.rng.random(len(verts)) < p).astype(INT)
    inside = np.zeros(n_total, dtype=bool)
    inside[verts] = True
    arcs = arcs[inside[arcs[:, 0]] & inside[arcs[:, 1]]] if len(arcs) else arcs
    closed = _closed_arcs(verts, arcs)
    lab = np.zeros(n_total, dtype=INT)
    lab[verts] = flags
    sampled_near = np.zeros(n_total, dtype=INT)
    hit = closed[lab[closed[:, 1]] == 1]
    if len(hit):
        firsts = dc.first_per_group(grid, hit)
        sampled_near[firsts[:, 0]] = 1
    leader = (flags == 1) | (sampled_near[verts] == 0)
    is_leader = np.zeros(n_total, dtype=bool)
    is_leader[verts[leader]] = True
    cand = closed[is_leader[closed[:, 1]]]
    best = dc.first_per_group(grid, cand)
    ptr = np.full(n_total, -1, dtype=INT)
    ptr[best[:, 0]] = best[:, 1]
    pointer = ptr[verts]
    pointer[leader] = verts[leader]
    return flags, leader, pointer


def min_parent_pointers(
    grid: MachineGrid,
    verts: np.ndarray,
    arcs: np.ndarray,
    weight: np.ndarray,
    n_total: int,
) -> np.ndarray:
    """Min-weight parent of every vertex (aligned with ``verts``).

    ``weight`` is indexed by vertex id; rows are compared lexicographically. A
    vertex whose own weight equals the closed-neighbourhood minimum is a root;
    otherwise it points at the lightest neighbour, smallest id on ties.
    """
    w = weight.reshape(n_total, -1)
    closed = _closed_arcs(verts, arcs)
    other = (closed[:, 0] != closed[:, 1]).astype(INT)
    rows = np.column_stack([closed[:, 0], w[closed[:, 1]], other, closed[:, 1]])
    best = dc.first_per_group(grid, rows)
    ptr = np.full(n_total, -1, dtype=INT)
    ptr[best[:, 0]] = best[:, -1]
    return ptr[verts]


def min_parent_forest(
    graph: Graph, weights, grid: MachineGrid | None = None, config: GridConfig | None = None
) -> np.ndarray:
    """Parent array of the min-parent forest for per-vertex ``weights``.

    ``weights`` is one value per vertex or one row per vertex (compared
    lexicographically).
    """
    grid = grid or MachineGrid.sized(graph.words(), config)
    w = np.asarray(weights, dtype=INT)
    if len(w) != graph.n:
        raise ValueError("one weight per vertex required")
    verts = np.arange(graph.n, dtype=INT)
    return min_parent_pointers(grid, verts, graph.arcs(), w, graph.n)


def random_weights(grid: MachineGrid, count: int, labels: np.ndarray) -> np.ndarray:
    """Weight rows ``(uniform 63-bit draw, label)``: distinct by construction."""
    draws = grid.rng.integers(0, 2**63 - 1, size=count, dtype=INT)
    return np.column_stack([draws, labels]).astype(INT)


# ---------------------------------------------------------------- driver
@dataclass
class PhaseRecord:
    vertices: int
    neighbor_iterations: int
    contraction_iterations: int
    threshold: int
    probability: float
    small: int
    leaders: int


@dataclass
class ConnectivityResult:
    coloring: np.ndarray | None
    failed: bool
    iterations: int
    phases: list = field(default_factory=list)
    report: RoundReport | None = None
    retries_used: int = 0
    space_budget: int = 0
    rounds_param: int = 0

    @property
    def phase_sizes(self) -> list[int]:
        return [ph.vertices for ph in self.phases]


def default_rounds(n: int, m: int, constant: float = 6.0) -> int:
    """Phase limit ``ceil(constant * log2(log_{m/n} n))`` (at least 4)."""
    if n <= 2:
        return 4
    ratio = max(m / n, 2.0)
    inner = max(math.log(n) / math.log(ratio), 2.0)
    return max(4, int(math.ceil(constant * math.log2(inner))) + 2)


def default_budget(n: int, gamma: float = 0.0) -> int:
    return max(8 * n, int(math.ceil(8 * max(n, 1) ** (1.0 + gamma))), 8)


def _one_attempt(
    grid: MachineGrid,
    graph: Graph,
    m: int,
    r: int,
    leader: str,
) -> tuple[np.ndarray | None, list[PhaseRecord], int]:
    n = graph.n
    labels = graph.label_of(np.arange(n, dtype=INT))
    h = np.full(n, -1, dtype=INT)
    verts = np.arange(n, dtype=INT)
    arcs = graph.arcs()
    records: list[PhaseRecord] = []
    iterations = 0
    log_n = math.log2(max(n, 2))
    for _ in range(r):
        n_prev = len(verts)
        if n_prev == 0:
            break
        with grid.scope():
            grid.hold("edges", arcs)
            g_arcs, k = neighbor_increment_arcs(grid, m, verts, arcs, n)
            grid.hold("augmented", g_arcs)
            t = _threshold(m, n_prev)
            deg = np.bincount(g_arcs[:, 0], minlength=n) if len(g_arcs) else np.zeros(n, dtype=INT)
            dc.group_sizes(grid, g_arcs[:, 0])
            big = np.zeros(n, dtype=bool)
            big[verts] = deg[verts] >= t - 1
            v2 = verts[big[verts]]
            small = verts[~big[verts]]
            e2 = arcs[big[arcs[:, 0]] & big[arcs[:, 1]]] if len(arcs) else arcs
            g2 = g_arcs[big[g_arcs[:, 0]] & big[g_arcs[:, 1]]] if len(g_arcs) else g_arcs
            prob = min((30.0 * log_n + 100.0) / t, 0.5)
            if leader == "random":
                _, is_leader, pointer = sample_leaders(grid, v2, g2, prob, n)
                n_leaders = int(is_leader.sum())
            else:
                w = np.zeros((n, 2), dtype=INT)
                w[verts] = random_weights(grid, len(verts), labels[verts])
                pointer = min_parent_pointers(grid, v2, g2, w, n)
                n_leaders = int((pointer == v2).sum())
            roots, g, new_arcs, rc = tree_contraction_arrays(grid, v2, pointer, e2)
            # small components collapse onto their smallest member
            if len(small):
                closed = np.vstack([g_arcs[~big[g_arcs[:, 0]]], np.column_stack([small, small])])
                best = dc.first_per_group(grid, closed)
                h_new = np.full(n, -1, dtype=INT)
                h_new[best[:, 0]] = best[:, 1]
                h[small] = np.where(h[small] >= 0, h[small], h_new[small])
            moved = g != v2
            h[v2[moved]] = np.where(h[v2[moved]] >= 0, h[v2[moved]], g[moved])
        iterations += k + rc
        records.append(PhaseRecord(n_prev, k, rc, t, prob, len(small), n_leaders))
        grid.count_iteration("phase")
        verts, arcs = roots, new_arcs
    if len(verts):
        return None, records, iterations
    _, col, _, _ = tree_contraction_arrays(grid, np.arange(n, dtype=INT), h, np.zeros((0, 2), dtype=INT))
    return col, records, iterations


def connectivity(
    graph: Graph,
    m: int | None = None,
    r: int | None = None,
    grid: MachineGrid | None = None,
    config: GridConfig | None = None,
    retries: int = 3,
    leader: str = "random",
) -> ConnectivityResult:
    """Component coloring of ``graph``: ``col[u] == col[v]`` iff connected.

    ``m`` is the space budget in pair tuples and ``r`` the phase limit. A run
    that leaves vertices after ``r`` phases fails; it is retried with fresh
    randomness up to ``retries`` more times. ``leader`` is ``"random"`` or
    ``"min-parent"``.
    """
    n = graph.n
    config = config or (grid.config if grid is not None else GridConfig())
    m = int(m) if m is not None else default_budget(n, config.gamma)
    if m < 4 * n:
        raise BudgetTooSmall(f"budget {m} < 4 * {n}")
    r = int(r) if r is not None else default_rounds(n, m)
    grid = grid or budget_grid(graph, m, config)
    col = None
    records: list[PhaseRecord] = []
    iterations = 0
    used = 0
    for attempt in range(retries + 1):
        if attempt:
            grid.rng = np.random.default_rng([config.seed, attempt])
            used = attempt
        col, records, iterations = _one_attempt(grid, graph, m, r, leader)
        if col is not None:
            break
    grid.report.failed = col is None
    return ConnectivityResult(
        coloring=None if col is None else graph.label_of(col),
        failed=col is None,
        iterations=iterations,
        phases=records,
        report=grid.report,
        retries_used=used,
        space_budget=m,
        rounds_param=r,
    )


def connectivity_mpf(graph: Graph, m: int | None = None, r: int | None = None, **kw) -> ConnectivityResult:
    """:func:`connectivity` with leaders taken as the roots of a random min-parent forest."""
    return connectivity(graph, m, r, leader="min-parent", **kw)
