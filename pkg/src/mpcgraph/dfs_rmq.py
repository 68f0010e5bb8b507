"""DFS sequences of rooted trees, sparse tables for range minimum queries,
and the usual applications of a DFS sequence.

Trees are parent arrays over ``0..n-1`` (a root points at itself). Children
are visited in ascending id order; ids are compact indices of sorted labels,
so this is ascending label order. A DFS sequence writes a vertex on entry and
again after each child, giving ``2n - 1`` entries for an ``n``-vertex tree.

The construction samples leaves, orders them with lowest common ancestor
queries, and writes the part of the sequence spanned by the root paths of the
sampled leaves. The subtrees it misses are handled the same way in later
rounds and spliced in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dist_collections as dc
from .connectivity import InvalidPointers, ceil_root
from .forest import InvalidInput, _ancestors, _as_parent, _levels_for, _small_grid, _split_paths
from .mpc_runtime import INT, GridConfig, MachineGrid, RoundReport

INT_MAX = np.iinfo(INT).max


class NotAnAncestor(InvalidPointers):
    """A path query whose target is not an ancestor of its source."""


class DfsFailed(RuntimeError):
    pass


# ---------------------------------------------------------------- tree context
@dataclass
class _Forest:
    """A rooted forest on ``verts`` (sorted) with its doubling tables."""

    verts: np.ndarray
    parent: np.ndarray
    dep: np.ndarray
    gs: list
    r: int

    @classmethod
    def build(cls, grid: MachineGrid, verts, parent) -> "_Forest":
        verts = np.asarray(verts, dtype=INT)
        parent = np.asarray(parent, dtype=INT)
        r, dep, gs = _ancestors(grid, verts, parent)
        return cls(verts, parent, dep, gs, r)

    @property
    def root_of(self) -> np.ndarray:
        return self.gs[-1]

    def get(self, grid: MachineGrid, values: np.ndarray, queries) -> np.ndarray:
        return dc.lookup(grid, self.verts, values, np.asarray(queries, dtype=INT))


def _rank_in_groups(grid: MachineGrid, keys: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """1-based rank of ``vals[i]`` among the values sharing ``keys[i]``."""
    out = np.zeros(len(keys), dtype=INT)
    if len(keys) == 0:
        return out
    with grid.scope():
        name = grid.hold("family", np.column_stack([keys, vals, np.arange(len(keys))]))
        ranked = dc.index_elements(grid, name)
    out[ranked[:, 2]] = ranked[:, 3]
    return out


def _children_info(grid: MachineGrid, f: _Forest) -> tuple[np.ndarray, np.ndarray]:
    """Child counts and sibling ranks (1 for roots), aligned with ``f.verts``."""
    nonroot = f.parent != f.verts
    keys, counts = dc.group_sizes(grid, f.parent[nonroot])
    nch = dc.lookup(grid, keys, counts, f.verts, default=0) if len(keys) else np.zeros(len(f.verts), dtype=INT)
    rank = np.ones(len(f.verts), dtype=INT)
    rank[nonroot] = _rank_in_groups(grid, f.parent[nonroot], f.verts[nonroot])
    return nch, rank


# ---------------------------------------------------------------- LCA
def _lca_arrays(
    grid: MachineGrid, f: _Forest, qu: np.ndarray, qv: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched lowest common ancestors by binary lifting.

    Returns ``(ancestor, child toward u, child toward v)`` with ``-1`` for
    none: all three are none across different trees, both children are none
    when ``u == v``, and the child on the ancestor's own side is none when one
    endpoint is an ancestor of the other.
    """
    qu = np.asarray(qu, dtype=INT)
    qv = np.asarray(qv, dtype=INT)
    q = len(qu)
    anc = np.full(q, -1, dtype=INT)
    cu = np.full(q, -1, dtype=INT)
    cv = np.full(q, -1, dtype=INT)
    if q == 0:
        return anc, cu, cv
    both = np.concatenate([qu, qv])
    d = f.get(grid, f.dep, both)
    rt = f.get(grid, f.root_of, both)
    du, dv, ru, rv = d[:q], d[q:], rt[:q], rt[q:]
    same = qu == qv
    anc[same] = qu[same]
    live = (ru == rv) & ~same
    swap = du < dv
    a = np.where(swap, qv, qu)
    b = np.where(swap, qu, qv)
    da = np.where(swap, dv, du)
    db = np.where(swap, du, dv)
    deeper = live & (da > db)
    # lift a to depth dep(b) + 1
    x = a.copy()
    dx = da.copy()
    for i in range(f.r - 1, -1, -1):
        move = deeper & (dx - 2**i > db)
        if move.any():
            x[move] = f.get(grid, f.gs[i], x[move])
            dx[move] -= 2**i
    grid.count_iteration("lca", f.r)
    px = f.get(grid, f.parent, x)
    on_path = deeper & (px == b)
    anc[on_path] = b[on_path]
    ca = np.full(q, -1, dtype=INT)
    cb = np.full(q, -1, dtype=INT)
    ca[on_path] = x[on_path]
    # otherwise lift both sides together while they stay apart
    joint = live & ~on_path
    x = np.where(deeper, px, a)
    y = b.copy()
    for i in range(f.r - 1, -1, -1):
        idx = np.flatnonzero(joint)
        if len(idx) == 0:
            break
        g = f.get(grid, f.gs[i], np.concatenate([x[idx], y[idx]]))
        gx, gy = g[: len(idx)], g[len(idx) :]
        move = gx != gy
        x[idx[move]] = gx[move]
        y[idx[move]] = gy[move]
    grid.count_iteration("lca", f.r)
    if joint.any():
        idx = np.flatnonzero(joint)
        anc[idx] = f.get(grid, f.parent, x[idx])
        ca[idx] = x[idx]
        cb[idx] = y[idx]
    cu = np.where(swap, cb, ca)
    cv = np.where(swap, ca, cb)
    return anc, cu, cv


def lca(parent, pairs, grid: MachineGrid | None = None, config: GridConfig | None = None) -> list[tuple]:
    """Lowest common ancestor and the two flanking children for every pair.

    Each answer is ``(ancestor, child toward u, child toward v)`` with ``None``
    where a component does not exist.
    """
    verts, p = _as_parent(parent)
    grid = _small_grid(len(p), grid, config)
    pairs = np.asarray(pairs, dtype=INT).reshape(-1, 2)
    f = _Forest.build(grid, verts, p)
    res = _lca_arrays(grid, f, pairs[:, 0], pairs[:, 1])
    return [tuple(None if x < 0 else int(x) for x in row) for row in np.column_stack(res).tolist()]


def multi_path(parent, pairs, grid: MachineGrid | None = None, config: GridConfig | None = None) -> list[set]:
    """Vertex set of the path from ``u`` up to its ancestor ``v`` for every pair."""
    verts, p = _as_parent(parent)
    grid = _small_grid(len(p), grid, config)
    pairs = np.asarray(pairs, dtype=INT).reshape(-1, 2)
    f = _Forest.build(grid, verts, p)
    try:
        qi, vx = _split_paths(grid, verts, p, f.dep, f.gs, pairs[:, 0], pairs[:, 1], f.r)
    except InvalidPointers as exc:
        raise NotAnAncestor(str(exc)) from None
    out: list[set] = [set() for _ in range(len(pairs))]
    for i, v in zip(qi.tolist(), vx.tolist()):
        out[i].add(v)
    return out


# ---------------------------------------------------------------- leaf order
def _merge_sort_groups(grid: MachineGrid, grp: np.ndarray, items: np.ndarray, less) -> np.ndarray:
    """Sort ``items`` inside each group with a batched comparator.

    Bottom-up merge sort: in every merge each element binary-searches its
    position in the partner run, all searches advancing together, so each
    step is one batch of comparisons. ``grp`` must already be sorted.
    """
    n = len(items)
    if n <= 1:
        return items.copy()
    items = items.copy()
    head = np.ones(n, dtype=bool)
    head[1:] = grp[1:] != grp[:-1]
    gstart = np.maximum.accumulate(np.where(head, np.arange(n), 0))
    starts = np.flatnonzero(head)
    sizes = np.diff(np.append(starts, n))
    gsize = np.repeat(sizes, sizes)
    j = np.arange(n, dtype=INT) - gstart
    w = 1
    while w < int(sizes.max()):
        run = j // w
        own_off = j - run * w
        partner = (run ^ 1) * w
        plen = np.clip(gsize - partner, 0, w)
        lo = np.zeros(n, dtype=INT)
        hi = plen.copy()
        while True:
            act = np.flatnonzero(lo < hi)
            if len(act) == 0:
                break
            mid = (lo[act] + hi[act]) // 2
            other = items[gstart[act] + partner[act] + mid]
            lt = less(other, items[act])
            lo[act[lt]] = mid[lt] + 1
            hi[act[~lt]] = mid[~lt]
            grid.count_iteration("leaf_order")
        newj = (run // 2) * 2 * w + own_off + lo
        out = np.empty_like(items)
        out[gstart + newj] = items
        items = out
        w *= 2
    return items


def _leaf_less(grid: MachineGrid, f: _Forest):
    """``x <_p y`` for leaves: compare the children of the LCA toward each."""

    def less(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        _, cx, cy = _lca_arrays(grid, f, x, y)
        return cx < cy

    return less


def _first_leaves(grid: MachineGrid, f: _Forest, nch: np.ndarray) -> np.ndarray:
    """First DFS leaf of every vertex's tree (descend through rank-1 children)."""
    nonroot = f.parent != f.verts
    rows = np.column_stack([f.parent[nonroot], f.verts[nonroot]])
    first = dc.first_per_group(grid, rows) if len(rows) else np.zeros((0, 2), dtype=INT)
    p1 = dc.lookup(grid, first[:, 0], first[:, 1], f.verts, default=-1) if len(first) else np.full(len(f.verts), -1, dtype=INT)
    p1 = np.where(p1 >= 0, p1, f.verts)
    _, _, gs1 = _ancestors(grid, f.verts, p1)
    return f.get(grid, gs1[-1], f.root_of)


def _sample_leaves(
    grid: MachineGrid,
    f: _Forest,
    nch: np.ndarray,
    m: int,
    delta: float,
    sample_constant: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Ordered leaf samples of every tree: arrays ``(root, leaf)`` grouped by root."""
    t = ceil_root(max(m, 1), 1, 3)
    root = f.root_of
    leaf = nch == 0
    tree_ids, tree_size = dc.group_sizes(grid, root)
    leaf_ids, leaf_cnt = dc.group_sizes(grid, root[leaf])
    size_of = dc.lookup(grid, tree_ids, tree_size, root[leaf])
    cnt_of = dc.lookup(grid, leaf_ids, leaf_cnt, root[leaf])
    take_all = (size_of <= m) | (cnt_of <= 8 * t)
    scale = sample_constant * (1.0 + math.log2(max(m, 2)) / delta) * t
    prob = np.minimum(1.0, scale / np.maximum(cnt_of, 1))
    draw = grid.rng.random(len(cnt_of))
    keep = take_all | (draw < prob)
    a1 = _first_leaves(grid, f, nch)
    is_first = np.zeros(len(f.verts), dtype=bool)
    is_first[np.searchsorted(f.verts, np.unique(a1))] = True
    keep |= is_first[leaf]
    roots = root[leaf][keep]
    leaves = f.verts[leaf][keep]
    order = np.argsort(roots, kind="stable")
    roots, leaves = roots[order], leaves[order]
    grid.count_iteration("leaf_sampling")
    return roots, _merge_sort_groups(grid, roots, leaves, _leaf_less(grid, f))


def leaf_sampling(
    parent,
    m: int,
    delta: float,
    grid: MachineGrid | None = None,
    config: GridConfig | None = None,
    sample_constant: float = 640.0,
) -> list[int]:
    """Sampled leaves of a rooted tree in DFS order, always starting with the first leaf."""
    verts, p = _as_parent(parent)
    grid = _small_grid(len(p), grid, config)
    f = _Forest.build(grid, verts, p)
    nch, _ = _children_info(grid, f)
    _, leaves = _sample_leaves(grid, f, nch, m, delta, sample_constant)
    return leaves.tolist()


# ---------------------------------------------------------------- SubDFS
def _sub_dfs_forest(
    grid: MachineGrid,
    f: _Forest,
    m: int,
    delta: float,
    sample_constant: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Partial DFS sequences of every tree of ``f``.

    Returns ``(covered vertices, root, vertex)`` where the last two arrays list
    each tree's sequence in order, trees by ascending root.
    """
    nch, rank = _children_info(grid, f)
    roots_s, leaves = _sample_leaves(grid, f, nch, m, delta, sample_constant)
    n_tree = len(leaves)
    head = np.ones(n_tree, dtype=bool)
    head[1:] = roots_s[1:] != roots_s[:-1]
    tail = np.ones(n_tree, dtype=bool)
    tail[:-1] = roots_s[1:] != roots_s[:-1]
    single = head & tail & (leaves == roots_s)
    # consecutive sampled leaves of the same tree
    nxt = np.flatnonzero(~tail)
    anc, c_left, c_right = _lca_arrays(grid, f, leaves[nxt], leaves[nxt + 1])
    pl = f.get(grid, f.parent, leaves)
    # path k = 2i-1 runs down to leaf i, path k = 2i runs up from p(leaf i)
    up_top = roots_s.copy()
    up_top[nxt] = anc
    down_top = roots_s.copy()
    down_top[nxt + 1] = c_right
    base = np.arange(n_tree, dtype=INT)
    ok = ~single
    src = np.concatenate([leaves[ok], pl[ok]])
    dst = np.concatenate([down_top[ok], up_top[ok]])
    kk = np.concatenate([2 * base[ok], 2 * base[ok] + 1])
    qd = f.get(grid, f.dep, src) - f.get(grid, f.dep, dst)
    qi, vx = _split_paths(grid, f.verts, f.parent, f.dep, f.gs, src, dst, _levels_for(qd + 1))
    # _split_paths lists each path from its source upward; down paths are reversed
    k_of = kk[qi]
    idx = np.arange(len(qi), dtype=INT)
    down = (k_of % 2) == 0
    order = np.lexsort((np.where(down, -idx, idx), k_of))
    seq_v = np.concatenate([vx[order], leaves[single]])
    seq_k = np.concatenate([k_of[order], 2 * base[single]])
    seq_r = f.get(grid, f.root_of, seq_v)
    o2 = np.lexsort((np.arange(len(seq_k)), seq_k))
    seq_v, seq_r = seq_v[o2], seq_r[o2]
    covered = dc.dedup_rows(grid, seq_v.reshape(-1, 1))[:, 0]
    # duplication counts: u's share of p'(u)'s appearances in the full sequence
    cov_par = f.get(grid, f.parent, covered)
    cov_rank = f.get(grid, rank, covered)
    nonroot = cov_par != covered
    u = covered[nonroot]
    w = cov_par[nonroot]
    rank_p = cov_rank[nonroot]
    rank_c = _rank_in_groups(grid, w, u)
    kids_c, kids_n = dc.group_sizes(grid, w)
    k_c = dc.lookup(grid, kids_c, kids_n, w)
    nxt_u = dc.lookup(grid, np.column_stack([w, rank_c]), u, np.column_stack([w, rank_c + 1]), default=-1)
    nxt_rank = np.where(nxt_u >= 0, f.get(grid, rank, np.where(nxt_u >= 0, nxt_u, u)), 0)
    nch_w = f.get(grid, nch, w)
    leaf_c = np.setdiff1d(covered, kids_c, assume_unique=True)
    key_v = [leaf_c, w[rank_c == 1]]
    key_j = [np.ones(len(leaf_c), dtype=INT), np.ones(int((rank_c == 1).sum()), dtype=INT)]
    val = [np.ones(len(leaf_c), dtype=INT), rank_p[rank_c == 1]]
    last = rank_c == k_c
    key_v += [w[last], w[~last]]
    key_j += [rank_c[last] + 1, rank_c[~last] + 1]
    val += [nch_w[last] + 1 - rank_p[last], nxt_rank[~last] - rank_p[~last]]
    ckeys = np.column_stack([np.concatenate(key_v), np.concatenate(key_j)])
    cvals = np.concatenate(val)
    appear = _rank_in_groups(grid, seq_v, np.arange(len(seq_v), dtype=INT))
    counts = dc.lookup(grid, ckeys, cvals, np.column_stack([seq_v, appear]))
    with grid.scope():
        name = grid.hold("sequence", np.column_stack([np.arange(1, len(seq_v) + 1), seq_r, seq_v]))
        out = dc.seq_duplicate(grid, name, counts).copy()
    grid.count_iteration("sub_dfs")
    return covered, out[:, 1], out[:, 2]


def sub_dfs(
    parent,
    m: int,
    delta: float,
    grid: MachineGrid | None = None,
    config: GridConfig | None = None,
    sample_constant: float = 640.0,
) -> tuple[list[int], list[int]]:
    """Covered vertices and the partial DFS sequence of a rooted tree."""
    verts, p = _as_parent(parent)
    if np.count_nonzero(p == verts) != 1:
        raise InvalidInput("sub_dfs needs a tree with exactly one root")
    grid = _small_grid(len(p), grid, config)
    f = _Forest.build(grid, verts, p)
    covered, _, seq = _sub_dfs_forest(grid, f, m, delta, sample_constant)
    return covered.tolist(), seq.tolist()


# ---------------------------------------------------------------- DFS
@dataclass
class DfsResult:
    sequence: np.ndarray | None
    failed: bool
    rounds_used: int
    rounds_param: int
    space_budget: int
    covered_per_round: list = field(default_factory=list)
    retries_used: int = 0
    report: RoundReport | None = None


def default_dfs_budget(n: int, delta: float = 0.5) -> int:
    return max(2, int(math.ceil(max(n, 1) ** delta)))


def dfs_round_limit(n: int, m: int) -> int:
    """``ceil(3 / delta) + 2`` with ``delta = 1 / log_m n``."""
    if n <= 2 or m >= n:
        return 3 + 2
    d = math.log(m) / math.log(n)
    return int(math.ceil(3.0 / d)) + 2


def _dfs_attempt(
    grid: MachineGrid, p: np.ndarray, m: int, r: int, delta: float, sample_constant: float
) -> tuple[np.ndarray | None, int, list[int]]:
    n = len(p)
    verts = np.arange(n, dtype=INT)
    f = _Forest.build(grid, verts, p)
    _, rank_full = _children_info(grid, f)
    covered, _, seq = _sub_dfs_forest(grid, f, m, delta, sample_constant)
    done = np.zeros(n, dtype=bool)
    done[covered] = True
    sizes = [len(covered)]
    used = 0
    for _ in range(r):
        if done.all():
            break
        used += 1
        rest = verts[~done]
        pr = p[rest]
        p_i = np.where(done[pr], rest, pr)
        fi = _Forest.build(grid, rest, p_i)
        cov_i, roots_i, seq_i = _sub_dfs_forest(grid, fi, m, delta, sample_constant)
        # splice each new block after the rank(v)-th appearance of p(v)
        sub_roots = np.unique(roots_i)
        appear = _rank_in_groups(grid, seq, np.arange(len(seq), dtype=INT))
        target = np.column_stack([p[sub_roots], dc.lookup(grid, verts, rank_full, sub_roots)])
        at = dc.lookup(grid, np.column_stack([seq, appear]), np.arange(1, len(seq) + 1), target)
        head = np.ones(len(roots_i), dtype=bool)
        head[1:] = roots_i[1:] != roots_i[:-1]
        starts = np.flatnonzero(head)
        j = np.arange(len(roots_i), dtype=INT) - np.repeat(starts, np.diff(np.append(starts, len(roots_i)))) + 1
        block = np.searchsorted(sub_roots, roots_i)
        with grid.scope():
            base = grid.hold("dfs", np.column_stack([np.arange(1, len(seq) + 1), seq]))
            ins = grid.hold("block", np.column_stack([block, j, seq_i]))
            pos = grid.hold("splice", np.column_stack([np.arange(len(sub_roots)), at]))
            seq = dc.seq_insert(grid, base, ins, pos)[:, 1].copy()
        done[cov_i] = True
        sizes.append(len(cov_i))
        grid.count_iteration("dfs_round")
    if not done.all():
        return None, used, sizes
    return seq, used, sizes


def dfs(
    parent,
    m: int | None = None,
    grid: MachineGrid | None = None,
    config: GridConfig | None = None,
    retries: int = 3,
    sample_constant: float = 640.0,
    rounds: int | None = None,
) -> DfsResult:
    """DFS sequence of the rooted tree ``parent`` (children by ascending id).

    ``m`` is the per-subproblem space parameter (default ``ceil(n^delta)``).
    A run that leaves vertices uncovered after the round limit fails and is
    retried with fresh randomness.
    """
    verts, p = _as_parent(parent)
    n = len(p)
    if n == 0:
        raise InvalidInput("empty tree")
    if np.count_nonzero(p == verts) != 1:
        raise InvalidInput("dfs needs a tree with exactly one root")
    config = config or (grid.config if grid is not None else GridConfig())
    m = int(m) if m is not None else default_dfs_budget(n, config.delta)
    m = max(m, 2)
    r = int(rounds) if rounds is not None else dfs_round_limit(n, m)
    delta = 1.0 if n <= 2 or m >= n else math.log(m) / math.log(n)
    grid = grid or _small_grid(n, None, config)
    seq = None
    used = 0
    sizes: list[int] = []
    attempt = 0
    for attempt in range(retries + 1):
        if attempt:
            grid.rng = np.random.default_rng([config.seed, attempt])
        seq, used, sizes = _dfs_attempt(grid, p, m, r, delta, sample_constant)
        if seq is not None:
            break
    grid.report.failed = seq is None
    return DfsResult(seq, seq is None, used, r, m, sizes, attempt, grid.report)


# ---------------------------------------------------------------- RMQ
def _better(a: np.ndarray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Of two 1-based positions (0 meaning none) the one holding the smaller value."""
    ai = np.where(i > 0, a[i], INT_MAX)
    aj = np.where(j > 0, a[j], INT_MAX)
    take_j = (j > 0) & ((i == 0) | (aj < ai) | ((aj == ai) & (j < i)))
    return np.where(take_j, j, i)


def _row_argmin_table(a: np.ndarray, pos: np.ndarray) -> list[np.ndarray]:
    """Local doubling tables over rows of positions (one block per row)."""
    tab = [pos]
    k = 1
    while k < pos.shape[1]:
        prev = tab[-1]
        shifted = np.zeros_like(prev)
        shifted[:, : prev.shape[1] - k] = prev[:, k:]
        tab.append(_better(a, prev, shifted))
        k *= 2
    return tab


def _row_range(a: np.ndarray, tab: list[np.ndarray], rows: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Argmin over columns ``lo..hi`` of the given rows (0 where ``lo > hi``)."""
    out = np.zeros(len(rows), dtype=INT)
    ok = lo <= hi
    if not ok.any():
        return out
    length = (hi - lo + 1)[ok]
    lev = np.floor(np.log2(length)).astype(INT)
    lev = np.where(2 ** (lev + 1) <= length, lev + 1, lev)
    lev = np.where(2**lev > length, lev - 1, lev)
    rr, ll, hh = rows[ok], lo[ok], hi[ok]
    res = np.zeros(len(rr), dtype=INT)
    for L in np.unique(lev):
        s = lev == L
        t = tab[int(L)]
        res[s] = _better(a, t[rr[s], ll[s]], t[rr[s], hh[s] - 2 ** int(L) + 1])
    out[ok] = res
    return out


def _blocks(n: int, m: int, start_offset: int) -> np.ndarray:
    """Positions ``j*m + 1 + start_offset + (0..m-1)`` per block, 0 beyond ``n``."""
    nb = (n + m - 1) // m
    pos = (np.arange(nb, dtype=INT)[:, None] * m + 1 + start_offset) + np.arange(m, dtype=INT)[None, :]
    return np.where((pos >= 1) & (pos <= n), pos, 0)


def _fetch(grid: MachineGrid, n: int, pos: np.ndarray) -> None:
    """Charge the queries that bring remote positions to their block's machine."""
    flat = pos.ravel()
    flat = flat[flat > 0]
    if len(flat):
        dc.lookup(grid, np.arange(1, n + 1, dtype=INT), np.arange(1, n + 1, dtype=INT), flat)


def _zstar(grid: MachineGrid, a: np.ndarray, table: dict, n: int, starts: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Per block, the best of ``table[q][starts + x]`` over the block's offsets.

    ``starts`` has one row per block and one column per offset (0 = unused).
    """
    nb = starts.shape[0]
    best = np.zeros(nb, dtype=INT)
    use = starts > 0
    if not use.any():
        return best
    bi, _ = np.nonzero(use)
    qq = np.broadcast_to(q, starts.shape)[use]
    keys = np.column_stack([starts[use], qq])
    levels = np.unique(qq)
    tkeys = np.vstack([np.column_stack([np.arange(1, n + 1), np.full(n, L)]) for L in levels.tolist()])
    tvals = np.concatenate([table[int(L)][1:] for L in levels.tolist()])
    z = dc.lookup(grid, tkeys, tvals, keys)
    rows = np.column_stack([bi, np.where(z > 0, a[z], INT_MAX), z])
    first = dc.first_per_group(grid, rows)
    best[first[:, 0]] = first[:, 2]
    return best


@dataclass
class SparseTable:
    """Argmin tables over ``a_1..a_n`` (1-based positions).

    ``coarse[q][p]`` covers ``a_p .. a_{p + m^q - 1}``; ``full[q][p]`` covers
    ``a_p .. a_{p + 2^q - 1}`` (both clipped at ``n``). Index 0 is unused.
    """

    a: np.ndarray
    m: int
    coarse: dict
    full: dict | None = None
    build_rounds: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.a) - 1

    def query(self, p, q):
        return rmq_query(self, p, q)


def _prepare(a, delta: float) -> tuple[np.ndarray, int, int]:
    vals = np.asarray(a, dtype=INT)
    n = len(vals)
    if n == 0:
        raise ValueError("empty sequence")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    m = max(2, int(math.ceil(n**delta - 1e-9)))
    levels = int(math.ceil(1.0 / delta - 1e-9))
    return np.concatenate([[INT_MAX], vals]).astype(INT), m, levels


def _coarse(grid: MachineGrid, a: np.ndarray, n: int, m: int, levels: int) -> dict:
    own = _blocks(n, m, 0)
    own_tab = _row_argmin_table(a, own)
    rows = np.arange(own.shape[0], dtype=INT)
    nb = own.shape[0]
    coarse = {0: np.arange(n + 1, dtype=INT)}
    for l in range(1, levels + 1):
        ml = m**l
        far = _blocks(n, m, ml)
        _fetch(grid, n, far)
        far_tab = _row_argmin_table(a, far)
        # z*: windows f^_{j*m+1+y*m^t, t} for t < l tile a_{j*m+m+1 .. j*m+m^l}
        offs = [y * m**t for t in range(1, l) for y in range(1, m)]
        qs = [t for t in range(1, l) for _ in range(1, m)]
        if offs:
            st = np.arange(nb, dtype=INT)[:, None] * m + 1 + np.asarray(offs, dtype=INT)[None, :]
            st = np.where(st <= n, st, 0)
            z = _zstar(grid, a, coarse, n, st, np.asarray(qs, dtype=INT)[None, :])
        else:
            z = np.zeros(nb, dtype=INT)
        out = np.zeros(n + 1, dtype=INT)
        for ip in range(m):
            p = rows * m + 1 + ip
            valid = p <= n
            t1 = _row_range(a, own_tab, rows, np.full(nb, ip), np.full(nb, m - 1))
            t2 = _row_range(a, far_tab, rows, np.zeros(nb, dtype=INT), np.full(nb, ip - 1))
            best = _better(a, _better(a, t1, t2), z)
            out[p[valid]] = best[valid]
        coarse[l] = out
        grid.count_iteration("sparse_table_plus")
    return coarse


def sparse_table_plus(a, delta: float, grid: MachineGrid | None = None, config: GridConfig | None = None) -> SparseTable:
    """Argmin table over windows of length ``ceil(n^delta)^q``, ``q = 0..ceil(1/delta)``."""
    a1, m, levels = _prepare(a, delta)
    n = len(a1) - 1
    grid = grid or MachineGrid.sized(16 * n * (levels + 1), config)
    before = grid.report.rounds_total
    coarse = _coarse(grid, a1, n, m, levels)
    return SparseTable(a1, m, coarse, None, {"coarse": grid.report.rounds_total - before})


def _pow_floor(m: int, x: int) -> int:
    """Largest ``k`` with ``m^k <= x`` (``x >= 1``)."""
    k = 0
    while m ** (k + 1) <= x:
        k += 1
    return k


def sparse_table(a, delta: float, grid: MachineGrid | None = None, config: GridConfig | None = None) -> SparseTable:
    """Argmin tables over power-of-two windows, built from the coarse table."""
    a1, m, levels = _prepare(a, delta)
    n = len(a1) - 1
    log_n = max(0, int(math.ceil(math.log2(n)))) if n > 1 else 0
    grid = grid or MachineGrid.sized(16 * n * (levels + log_n + 2), config)
    before = grid.report.rounds_total
    coarse = _coarse(grid, a1, n, m, levels)
    mid = grid.report.rounds_total
    own = _blocks(n, m, 0)
    own_tab = _row_argmin_table(a1, own)
    nb = own.shape[0]
    rows = np.arange(nb, dtype=INT)
    full = {0: np.arange(n + 1, dtype=INT)}
    # all levels t are independent: gather every z* query in one batch
    starts, qs, tags = [], [], []
    for t in range(1, log_n + 1):
        span = 2**t - m
        if span <= 0:
            continue
        k = min(_pow_floor(m, span), levels)
        mk = m**k
        xs = np.arange(1, span - mk + 2, dtype=INT)
        xs = xs[(xs % mk == 1 % mk) | ((span - xs) % mk == (mk - 1) % mk)]
        st = rows[:, None] * m + m + xs[None, :]
        starts.append(np.where(st <= n, st, 0))
        qs.append(np.full(st.shape, k, dtype=INT))
        tags.append(np.full(st.shape, t, dtype=INT))
    zt: dict[int, np.ndarray] = {}
    if starts:
        width = max(s.shape[1] for s in starts)
        pad = lambda x: np.pad(x, ((0, 0), (0, width - x.shape[1])))
        st_all = np.vstack([pad(s) for s in starts])
        q_all = np.vstack([pad(q) for q in qs])
        z_all = _zstar(grid, a1, coarse, n, st_all, q_all)
        for i, t in enumerate(sorted({int(x[0, 0]) for x in tags})):
            zt[t] = z_all[i * nb : (i + 1) * nb]
    fars = {}
    for t in range(1, log_n + 1):
        fars[t] = _blocks(n, m, 2**t)
    _fetch(grid, n, np.concatenate([x.ravel() for x in fars.values()]) if fars else np.zeros(0, dtype=INT))
    for t in range(1, log_n + 1):
        far_tab = _row_argmin_table(a1, fars[t])
        z = zt.get(t, np.zeros(nb, dtype=INT))
        out = np.zeros(n + 1, dtype=INT)
        for ip in range(m):
            p = rows * m + 1 + ip
            valid = p <= n
            t1 = _row_range(a1, own_tab, rows, np.full(nb, ip), np.full(nb, min(m - 1, ip + 2**t - 1)))
            t2 = _row_range(a1, far_tab, rows, np.full(nb, max(0, ip - 2**t)), np.full(nb, ip - 1))
            best = _better(a1, _better(a1, t1, t2), z)
            out[p[valid]] = best[valid]
        full[t] = out
    grid.count_iteration("sparse_table")
    after = grid.report.rounds_total
    return SparseTable(a1, m, coarse, full, {"coarse": mid - before, "full": after - mid})


def rmq_query(table: SparseTable, p, q):
    """1-based position of the minimum of ``a_p..a_q`` (smallest position on ties)."""
    if table.full is None:
        raise ValueError("rmq_query needs the power-of-two table")
    p_arr = np.atleast_1d(np.asarray(p, dtype=INT))
    q_arr = np.atleast_1d(np.asarray(q, dtype=INT))
    if np.any(p_arr < 1) or np.any(q_arr > table.n) or np.any(p_arr > q_arr):
        raise IndexError("query outside 1..n")
    length = q_arr - p_arr + 1
    j = np.floor(np.log2(length)).astype(INT)
    j = np.where(2 ** (j + 1) <= length, j + 1, j)
    j = np.where(2**j > length, j - 1, j)
    out = np.zeros(len(p_arr), dtype=INT)
    for J in np.unique(j):
        s = j == J
        col = table.full[int(J)]
        out[s] = _better(table.a, col[p_arr[s]], col[q_arr[s] - 2 ** int(J) + 1])
    return int(out[0]) if np.ndim(p) == 0 else out


# ---------------------------------------------------------------- applications
class DfsApplications:
    """Subtree sizes, constant-query LCA, and tree distances from a DFS sequence."""

    def __init__(self, parent, sequence, delta: float = 0.5, grid: MachineGrid | None = None):
        verts, p = _as_parent(parent)
        seq = np.asarray(sequence, dtype=INT)
        n = len(p)
        if len(seq) != 2 * n - 1:
            raise ValueError("a DFS sequence has 2n - 1 entries")
        grid = _small_grid(n, grid, None)
        f = _Forest.build(grid, verts, p)
        self.depth = f.dep
        self.sequence = seq
        pos = np.arange(1, len(seq) + 1, dtype=INT)
        rows = dc.sort_rows(grid, np.column_stack([seq, pos]))
        head = np.ones(len(rows), dtype=bool)
        head[1:] = rows[1:, 0] != rows[:-1, 0]
        tail = np.ones(len(rows), dtype=bool)
        tail[:-1] = rows[1:, 0] != rows[:-1, 0]
        self.first = np.zeros(n, dtype=INT)
        self.last = np.zeros(n, dtype=INT)
        self.first[rows[head, 0]] = rows[head, 1]
        self.last[rows[tail, 0]] = rows[tail, 1]
        self.table = sparse_table(dc.lookup(grid, verts, f.dep, seq), delta) if len(seq) > 1 else None

    def subtree_size(self, v=None):
        sizes = (self.last - self.first) // 2 + 1
        return sizes if v is None else int(sizes[v])

    def lca_o1(self, u, v):
        u_arr = np.atleast_1d(np.asarray(u, dtype=INT))
        v_arr = np.atleast_1d(np.asarray(v, dtype=INT))
        i = np.minimum(self.first[u_arr], self.first[v_arr])
        j = np.maximum(self.first[u_arr], self.first[v_arr])
        if self.table is None:
            out = self.sequence[i - 1]
        else:
            out = self.sequence[np.atleast_1d(rmq_query(self.table, i, j)) - 1]
        return int(out[0]) if np.ndim(u) == 0 else out

    def tree_distance(self, u, v):
        w = self.lca_o1(u, v)
        d = self.depth[np.asarray(u)] + self.depth[np.asarray(v)] - 2 * self.depth[np.asarray(w)]
        return int(d) if np.ndim(u) == 0 else d


def dfs_applications(parent, sequence, delta: float = 0.5) -> DfsApplications:
    return DfsApplications(parent, sequence, delta)
