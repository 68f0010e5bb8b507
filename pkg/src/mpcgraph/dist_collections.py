"""Sets, mappings and sequences stored as tuples on a :class:`MachineGrid`.

A *family of sets* is a collection whose first column is the set id and whose
remaining columns are the element payload. A *mapping* stores ``(key, value)``
rows with at most one row per key. A *sequence* stores ``(position, value)``
rows; its standard form has positions ``1..m``.

Every operation is a fixed composition of runtime primitives, so each one
costs a constant number of primitive calls. The array helpers at the bottom
(:func:`lookup`, :func:`dedup_rows`, :func:`first_per_group`, :func:`join`)
wrap the same operations for algorithm code that holds plain numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mpc_runtime import INT, GridConfig, MachineGrid, SpaceExceeded, _as_rows


class MissingKey(KeyError):
    """A query asked for a key that its mapping does not contain."""


class DuplicateInsertPosition(ValueError):
    """Two inserted sequences target the same position."""


def _row_change(rows: np.ndarray, cols: slice | None = None) -> np.ndarray:
    """Flags rows that differ from their predecessor (first row flagged)."""
    view = rows if cols is None else rows[:, cols]
    flag = np.ones(len(view), dtype=bool)
    if len(view) > 1:
        flag[1:] = np.any(view[1:] != view[:-1], axis=1)
    return flag


# ---------------------------------------------------------------- sets
def dedup(grid: MachineGrid, name: str) -> np.ndarray:
    """Remove duplicate tuples; survivors end up in sorted order."""
    grid.mpc_sort(name)
    rows = grid.rows(name)
    keep = _row_change(rows)
    grid.prefix_sum(name, lambda r: keep.astype(INT), annotate=False)
    grid.route(name, rows[keep])
    return grid.rows(name)


def _sorted_family(grid: MachineGrid, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sort a family and return (rows, index, index of the set's first row)."""
    grid.mpc_sort(name)
    rows = grid.rows(name)
    idx = grid.prefix_sum(name, annotate=False) - 1
    first = grid.predecessor(name, lambda r: _row_change(r, slice(0, 1)))
    return rows, idx, first


def set_sizes(grid: MachineGrid, name: str, out: str | None = None) -> np.ndarray:
    """Mapping ``(set_id, |S|)``; empty sets have no tuples and no entry."""
    rows, idx, first = _sorted_family(grid, name)
    last = np.ones(len(rows), dtype=bool)
    if len(rows) > 1:
        last[:-1] = rows[1:, 0] != rows[:-1, 0]
    sizes = np.column_stack([rows[last, 0], (idx - first + 1)[last]]).astype(INT)
    grid.put(out or grid.fresh("size_of"), sizes)
    return sizes


def index_elements(grid: MachineGrid, name: str, out: str | None = None) -> np.ndarray:
    """Rows ``(set_id, element..., rank)``; rank 1 is the smallest element."""
    rows, idx, first = _sorted_family(grid, name)
    ranked = np.column_stack([rows, idx - first + 1]).astype(INT)
    grid.put(out or grid.fresh("rank"), ranked)
    return ranked


def copy_sets(
    grid: MachineGrid, name: str, counts: str, out: str | None = None
) -> np.ndarray:
    """Copies ``S_{i,1..s_i}``: rows ``(set_id, copy, element...)``.

    ``counts`` is a mapping ``(set_id, s_i)``; sets without an entry get no copy.
    """
    with grid.scope():
        sizes_name = grid.fresh("sizes")
        sizes = set_sizes(grid, name, out=sizes_name)
        rows = grid.rows(name)
        cmap = grid.rows(counts)
        c = lookup(grid, cmap[:, 0], cmap[:, 1], sizes[:, 0], default=0)
        z = sizes[:, 1]
        block = c * z
        # each set's block of copies starts at the prefix sum of earlier blocks
        grid.prefix_sum(sizes_name, lambda r: block, annotate=False)
        start = np.cumsum(z) - z
        owner_set = np.repeat(np.arange(len(z)), block)
        k = np.arange(int(block.sum()), dtype=INT) - np.repeat(np.cumsum(block) - block, block)
        src = start[owner_set] + k % z[owner_set]
        copy_no = k // z[owner_set] + 1
        result = np.column_stack([rows[src, 0], copy_no, rows[src, 1:]]).astype(INT)
        # originals sit at the head of each block; the copies learn them by predecessor
        cname = grid.hold("copies", result)
        grid.predecessor(cname, lambda r: r[:, 1] == 1)
    grid.put(out or grid.fresh("copies"), result)
    return result


def merge_sets(grid: MachineGrid, name: str, out: str | None = None) -> np.ndarray:
    """Union of all sets of a family (the set id column is dropped)."""
    rows = grid.rows(name)
    target = out or grid.fresh("union")
    grid.put(target, rows[:, 1:] if rows.shape[1] > 1 else rows)
    grid.barrier(1)
    return dedup(grid, target)


def _combined_search(
    grid: MachineGrid, keys: np.ndarray, queries: np.ndarray, reserve: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Sort keys (priority first) with queries and find each query's predecessor key.

    Returns for every query the index into ``keys`` of the matching row, or -1,
    and the requesting machine of every query. Each query is held with
    ``reserve`` extra words so its machine has room for the answer.
    """
    keys = _as_rows(keys)
    queries = _as_rows(queries)
    kw = keys.shape[1]
    if queries.shape[1] != kw:
        raise ValueError("query width differs from key width")
    nk, nq = len(keys), len(queries)
    tag = np.concatenate([np.zeros(nk, dtype=INT), np.ones(nq, dtype=INT)])
    ref = np.concatenate([np.arange(nk, dtype=INT), np.arange(nq, dtype=INT)])
    comb = np.column_stack([np.vstack([keys, queries]), tag, ref]) if nk + nq else np.zeros((0, kw + 2), dtype=INT)
    with grid.scope():
        pad = np.zeros((nq, reserve), dtype=INT)
        qname = grid.hold("queries", np.column_stack([queries, pad]) if reserve else queries)
        requester = grid.owners(qname).copy()
        cname = grid.hold("search", comb)
        grid.mpc_sort(cname)
        srt = grid.rows(cname)
        pred = grid.predecessor(cname, lambda r: r[:, kw] == 0)
        is_q = srt[:, kw] == 1
        qref = srt[is_q, kw + 1]
        p = pred[is_q]
        hit = np.full(nq, -1, dtype=INT)
        ok = p >= 0
        match = np.zeros(len(p), dtype=bool)
        match[ok] = np.all(srt[p[ok], :kw] == srt[is_q][ok, :kw], axis=1)
        hit[qref[match]] = srt[p[match], kw + 1]
    return hit, requester


def membership(grid: MachineGrid, set_name: str, queries: str) -> np.ndarray:
    """1 where the query tuple is an element of the stored set, else 0."""
    hit, requester = _combined_search(grid, grid.rows(set_name), grid.rows(queries), 1)
    ans = (hit >= 0).astype(INT)
    with grid.scope():
        grid.put(grid.fresh("answer"), np.column_stack([grid.rows(queries), ans]), owner=requester)
    grid.barrier(1)
    return ans


def multi_query(
    grid: MachineGrid, mapping: str, queries: str, key_width: int = 1
) -> np.ndarray:
    """Answer every query key with its mapped value; raises :class:`MissingKey`.

    The answers return to the machines that issued the queries. The result is
    the value block aligned with the query rows.
    """
    m = grid.rows(mapping)
    q = grid.rows(queries)[:, :key_width]
    hit, requester = _combined_search(grid, m[:, :key_width], q, m.shape[1] - key_width)
    missing = np.flatnonzero(hit < 0)
    if len(missing):
        raise MissingKey(tuple(int(x) for x in q[missing[0]]))
    values = m[hit, key_width:]
    with grid.scope():
        grid.put(grid.fresh("answered"), np.column_stack([q, values]), owner=requester)
    grid.barrier(1)
    return values


# ---------------------------------------------------------------- sequences
def seq_standardize(grid: MachineGrid, name: str) -> np.ndarray:
    """Renumber positions to 1..m keeping their order."""
    grid.mpc_sort(name, key=lambda r: r[:, 0])
    rows = grid.rows(name)
    pos = grid.prefix_sum(name, annotate=False)
    out = rows.copy()
    out[:, 0] = pos
    grid.route(name, out)
    return grid.rows(name)


def seq_duplicate(grid: MachineGrid, name: str, counts: np.ndarray) -> np.ndarray:
    """Repeat the i-th element ``counts[i]`` times (sequence must be standard)."""
    rows = seq_standardize(grid, name)
    counts = np.asarray(counts, dtype=INT)
    if len(counts) != len(rows):
        raise ValueError("one count per element required")
    if len(counts) and counts.min() < 0:
        raise ValueError("counts must be non-negative")
    grid.prefix_sum(name, lambda r: counts, annotate=False)
    flags = np.zeros(int(counts.sum()), dtype=bool)
    starts = np.cumsum(counts) - counts
    flags[starts[counts > 0]] = True
    out = np.repeat(rows, counts, axis=0)
    out[:, 0] = np.arange(1, len(out) + 1)
    grid.route(name, out)
    grid.predecessor(name, lambda r: flags)
    return grid.rows(name)


def seq_insert(
    grid: MachineGrid, base: str, inserts: str, positions: str
) -> np.ndarray:
    """Insert each sequence ``A_i`` right after position ``f(i)`` of the base.

    ``inserts`` rows are ``(i, j, value...)`` with ``j`` the position inside
    ``A_i``; ``positions`` is a mapping ``(i, f(i))``; ``f(i) = 0`` inserts in
    front of the base.
    """
    pos_rows = grid.rows(positions)
    if len(np.unique(pos_rows[:, 1])) != len(pos_rows):
        dup = pos_rows[np.argsort(pos_rows[:, 1], kind="stable"), 1]
        bad = dup[1:][dup[1:] == dup[:-1]][0]
        raise DuplicateInsertPosition(f"position {int(bad)} used twice")
    b = seq_standardize(grid, base)
    ins = grid.rows(inserts)
    total = len(b) + len(ins)
    big = total + 1
    f = multi_query(grid, positions, inserts)[:, 0] if len(ins) else np.zeros(0, dtype=INT)
    if len(ins) and (ins[:, 1].min() < 1 or ins[:, 1].max() >= big):
        raise ValueError("inserted positions must be standard (1..len)")
    new_base = b.copy()
    new_base[:, 0] = b[:, 0] * big
    new_ins = np.column_stack([f * big + ins[:, 1], ins[:, 2:]]).astype(INT)
    grid.put(base, np.vstack([new_base, new_ins]) if len(ins) else new_base)
    return seq_standardize(grid, base)


# ---------------------------------------------------------------- tasks
@dataclass
class Task:
    """An independent computation with its own inputs and space demand."""

    inputs: dict
    run: Callable[[MachineGrid, dict], dict]
    demand: int | None = None
    gamma: float = 0.0
    result: dict = field(default_factory=dict)
    machines: tuple[int, int] = (0, -1)


def schedule_tasks(
    grid: MachineGrid, tasks: list[Task], constant: float = 4.0
) -> list[dict]:
    """Run tasks side by side on disjoint contiguous machine ranges.

    A task's demand defaults to ``constant * n^(1 + gamma)`` words where ``n`` is
    the size of its inputs. The grid is charged the maximum round count over the
    tasks plus two rounds to ship inputs in and outputs out.
    """
    s = grid.machine_words
    start = 0
    subgrids = []
    for t in tasks:
        n_words = sum(_as_rows(v).size + len(_as_rows(v)) for v in t.inputs.values())
        demand = t.demand if t.demand is not None else int(
            math.ceil(constant * max(n_words, 1) ** (1.0 + t.gamma))
        )
        count = max(1, -(-demand // s))
        if start + count > grid.num_machines:
            raise SpaceExceeded(grid.num_machines - 1, demand, s, "task range")
        t.machines = (start, start + count - 1)
        start += count
        seed = int(grid.rng.integers(0, 2**62))
        cfg = GridConfig(**{**grid.config.__dict__, "seed": seed})
        sub = MachineGrid(count, s, cfg)
        sub.tree_height = grid.tree_height
        subgrids.append(sub)
    grid.barrier(1)
    for t, sub in zip(tasks, subgrids):
        for key, rows in t.inputs.items():
            sub.put(key, rows)
        t.result = t.run(sub, dict(t.inputs))
    rounds = max((sub.report.rounds_total for sub in subgrids), default=0)
    grid.report.rounds_total += rounds
    grid.report.barrier_rounds += rounds
    for sub in subgrids:
        grid.report.primitive_calls.update(sub.report.primitive_calls)
        grid.report.peak_machine_words = max(
            grid.report.peak_machine_words, sub.report.peak_machine_words
        )
        grid.report.max_primitive_charge = max(
            grid.report.max_primitive_charge, sub.report.max_primitive_charge
        )
    grid.barrier(1)
    return [t.result for t in tasks]


# ---------------------------------------------------------------- array helpers
def lookup(
    grid: MachineGrid,
    keys: np.ndarray,
    values: np.ndarray,
    queries: np.ndarray,
    default: int | None = None,
) -> np.ndarray:
    """Values of ``queries`` under the mapping ``keys -> values``.

    Keys may be single words or rows. Without ``default`` a missing key raises
    :class:`MissingKey`; with it, missing keys map to ``default``.
    """
    keys = _as_rows(keys)
    queries = _as_rows(queries)
    vals = np.asarray(values, dtype=INT)
    flat = vals.ndim == 1
    vals2 = vals.reshape(-1, 1) if flat else vals.reshape(len(vals), -1)
    if len(queries) == 0:
        return np.zeros((0,) if flat else (0, vals2.shape[1]), dtype=INT)
    hit, requester = _combined_search(grid, keys, queries, vals2.shape[1])
    miss = hit < 0
    if miss.any() and default is None:
        raise MissingKey(tuple(int(x) for x in queries[np.flatnonzero(miss)[0]]))
    out = np.empty((len(queries), vals2.shape[1]), dtype=INT)
    out[~miss] = vals2[hit[~miss]]
    if miss.any():
        out[miss] = default
    with grid.scope():
        grid.put(grid.fresh("answered"), np.column_stack([queries, out]), owner=requester)
    grid.barrier(1)
    return out[:, 0] if flat else out


def dedup_rows(grid: MachineGrid, rows) -> np.ndarray:
    """Sorted distinct rows."""
    with grid.scope():
        name = grid.hold("dedup", rows)
        return dedup(grid, name).copy()


def sort_rows(grid: MachineGrid, rows, key: Callable | None = None) -> np.ndarray:
    with grid.scope():
        name = grid.hold("sort", rows)
        grid.mpc_sort(name, key)
        return grid.rows(name).copy()


def first_per_group(grid: MachineGrid, rows, group_width: int = 1) -> np.ndarray:
    """Lexicographically smallest row of every group of equal leading columns."""
    with grid.scope():
        name = grid.hold("groups", rows)
        grid.mpc_sort(name)
        srt = grid.rows(name)
        head = _row_change(srt, slice(0, group_width))
        grid.predecessor(name, lambda r: head)
        return srt[head].copy()


def group_sizes(grid: MachineGrid, keys) -> tuple[np.ndarray, np.ndarray]:
    """Distinct keys (sorted) and how often each occurs."""
    keys = np.asarray(keys, dtype=INT)
    with grid.scope():
        name = grid.hold("keys", np.column_stack([keys, np.arange(len(keys))]))
        sizes = set_sizes(grid, name)
    return sizes[:, 0].copy(), sizes[:, 1].copy()


def join(grid: MachineGrid, left_keys: np.ndarray, right: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All pairs ``(i, y)`` with ``(left_keys[i], y)`` a row of ``right``.

    ``right`` is a family ``(key, value)``. Each left row is copied once per
    matching right row (copies of sets) and the j-th copy fetches the j-th
    element of its set (multiple queries). Returns ``(left index, value)``
    arrays grouped by left index with values ascending.
    """
    left_keys = np.asarray(left_keys, dtype=INT)
    right = _as_rows(right)
    if len(left_keys) == 0 or len(right) == 0:
        return np.zeros(0, dtype=INT), np.zeros(0, dtype=INT)
    with grid.scope():
        rname = grid.hold("right", right[:, :2])
        ranked = index_elements(grid, rname)
        uk, cnt = group_sizes(grid, right[:, 0])
        c = lookup(grid, uk, cnt, left_keys, default=0)
        idx = np.repeat(np.arange(len(left_keys), dtype=INT), c)
        j = np.arange(len(idx), dtype=INT) - np.repeat(np.cumsum(c) - c, c) + 1
        lname = grid.hold("left", np.column_stack([left_keys, np.arange(len(left_keys))]))
        grid.prefix_sum(lname, lambda r: c, annotate=False)
        grid.put(lname, np.column_stack([left_keys[idx], idx]))
        grid.predecessor(lname, lambda r: np.ones(len(r), dtype=bool))
        vals = lookup(
            grid,
            ranked[:, [0, 2]],
            ranked[:, 1],
            np.column_stack([left_keys[idx], j]),
        )
    return idx, vals
