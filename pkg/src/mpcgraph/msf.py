"""Minimum, approximate minimum, and bottleneck spanning forests.

Edges are ordered by ``(weight, edge index)``, which makes every weight
distinct. The order is cut into contiguous groups; group ``i`` is solved on
the graph in which every earlier group has been contracted, and the answers
of the groups are combined. Contractions come from the connectivity routine,
all groups of one recursion level sharing a single call on the disjoint union
of their prefix graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .connectivity import connectivity
from .forest import spanning_forest
from .graph import INT, Graph
from .mpc_runtime import GridConfig


class MsfFailed(RuntimeError):
    pass


@dataclass
class MsfResult:
    edges: np.ndarray
    failed: bool = False
    levels: int = 0
    calls: int = 0
    iterations: int = 0
    rounds_total: int = 0
    peak_machine_words: int = 0
    retries_used: int = 0
    space_budget: int = 0
    bottleneck: int | None = None
    extra: dict = field(default_factory=dict)

    def weight(self, graph: Graph) -> int:
        return int(graph.weights[self.edges].sum()) if len(self.edges) else 0


class _Meter:
    """Sums the round reports of the subroutine calls."""

    def __init__(self, result: MsfResult):
        self.res = result

    def add(self, report, iterations: int, retries: int, budget: int) -> None:
        self.res.calls += 1
        self.res.iterations += int(iterations)
        self.res.rounds_total += report.rounds_total
        self.res.peak_machine_words = max(self.res.peak_machine_words, report.peak_machine_words)
        self.res.retries_used = max(self.res.retries_used, retries)
        self.res.space_budget = max(self.res.space_budget, budget)


def _union(instances: list[tuple[int, np.ndarray]]) -> tuple[Graph, np.ndarray]:
    sizes = np.array([n for n, _ in instances], dtype=INT)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(INT)
    parts = [e + offsets[i] for i, (_, e) in enumerate(instances) if len(e)]
    edges = np.vstack(parts) if parts else np.zeros((0, 2), dtype=INT)
    return Graph.from_edges(int(offsets[-1]), edges), offsets


def _components(
    instances: list[tuple[int, np.ndarray]], meter: _Meter, config: GridConfig, retries: int
) -> list[np.ndarray]:
    """Component ids of every instance ``(n_i, local edges)``, one connectivity call."""
    if not instances:
        return []
    g, offsets = _union(instances)
    if g.n == 0:
        return [np.zeros(0, dtype=INT) for _ in instances]
    res = connectivity(g, config=config, retries=retries)
    meter.add(res.report, res.iterations, res.retries_used, res.space_budget)
    if res.failed:
        raise MsfFailed("connectivity failed on a prefix graph")
    return [res.coloring[offsets[i] : offsets[i + 1]] for i in range(len(instances))]


def _forests(
    instances: list[tuple[int, np.ndarray]], meter: _Meter, config: GridConfig, retries: int
) -> list[np.ndarray]:
    """For every instance, the indices of its edges that form a spanning forest."""
    if not instances:
        return []
    g, offsets = _union(instances)
    trace = spanning_forest(g, config=config, retries=retries)
    meter.add(trace.report, trace.iterations, trace.retries_used, trace.space_budget)
    if trace.failed:
        raise MsfFailed("spanning forest failed on a weight class")
    fe = trace.forest_edges
    owner = np.searchsorted(offsets, fe[:, 0], side="right") - 1 if len(fe) else np.zeros(0, dtype=INT)
    out = []
    for i, (_, e) in enumerate(instances):
        mine = fe[owner == i] - offsets[i]
        # the union graph merged parallel edges; take the first copy
        key = {}
        for j, (a, b) in enumerate(np.sort(e, axis=1).tolist()):
            key.setdefault((a, b), j)
        out.append(np.array(sorted(key[(a, b)] for a, b in mine.tolist()), dtype=INT))
    return out


def _compact(u: np.ndarray, v: np.ndarray) -> tuple[int, np.ndarray]:
    ids, inv = np.unique(np.concatenate([u, v]), return_inverse=True)
    return len(ids), inv.reshape(2, -1).T.astype(INT)


def _group_recursion(
    graph: Graph,
    order: np.ndarray,
    cls: np.ndarray,
    gamma: float,
    config: GridConfig,
    retries: int,
) -> MsfResult:
    """Forest from the ordered edges; edges of one class are interchangeable.

    ``order`` lists edge indices by increasing key and ``cls`` is the
    (non-decreasing along ``order``) class of each listed edge. A problem
    whose edges share one class is answered by a spanning forest.
    """
    res = MsfResult(np.zeros(0, dtype=INT))
    meter = _Meter(res)
    chosen: list[np.ndarray] = []
    e = graph.edges
    problems = [(order.astype(INT), e[order, 0].copy(), e[order, 1].copy(), cls.astype(INT))]
    while problems:
        res.levels += 1
        prefix_jobs: list[tuple[int, np.ndarray]] = []
        pending = []
        base_jobs: list[tuple[int, np.ndarray]] = []
        base_ids = []
        nxt = []
        for ids, u, v, c in problems:
            loop = u == v
            ids, u, v, c = ids[~loop], u[~loop], v[~loop], c[~loop]
            if len(ids) == 0:
                continue
            if len(ids) == 1:
                chosen.append(ids)
                continue
            distinct = np.flatnonzero(np.r_[True, c[1:] != c[:-1]])
            if len(distinct) == 1:
                n_loc, loc = _compact(u, v)
                base_jobs.append((n_loc, loc))
                base_ids.append(ids)
                continue
            k = max(2, math.ceil(len(ids) ** (gamma / 2)))
            k = min(k, len(distinct))
            # cut at class boundaries into k nearly equal runs of classes
            cuts = distinct[np.linspace(0, len(distinct), k, endpoint=False).astype(int)]
            bounds = np.append(cuts, len(ids))
            n_loc, loc = _compact(u, v)
            for i in range(k):
                lo, hi = bounds[i], bounds[i + 1]
                if i == 0:
                    nxt.append((ids[lo:hi], u[lo:hi], v[lo:hi], c[lo:hi]))
                    continue
                prefix_jobs.append((n_loc, loc[:lo]))
                pending.append((ids[lo:hi], loc[lo:hi, 0], loc[lo:hi, 1], c[lo:hi]))
        for (ids, lu, lv, c), col in zip(pending, _components(prefix_jobs, meter, config, retries)):
            nxt.append((ids, col[lu], col[lv], c))
        for ids, picked in zip(base_ids, _forests(base_jobs, meter, config, retries)):
            chosen.append(ids[picked])
        problems = nxt
    res.edges = np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, dtype=INT)
    return res


def _need_weights(graph: Graph) -> None:
    if graph.weights is None:
        raise ValueError("a weighted graph is required")


def _order(graph: Graph) -> np.ndarray:
    return np.lexsort((np.arange(graph.m), graph.weights)).astype(INT)


def exact_msf(
    graph: Graph,
    gamma: float = 0.0,
    config: GridConfig | None = None,
    retries: int = 3,
) -> MsfResult:
    """The minimum spanning forest under the ``(weight, edge index)`` order."""
    _need_weights(graph)
    config = config or GridConfig(gamma=gamma)
    order = _order(graph)
    try:
        return _group_recursion(graph, order, np.arange(graph.m, dtype=INT), gamma, config, retries)
    except MsfFailed:
        return MsfResult(np.zeros(0, dtype=INT), failed=True)


def weight_classes(weights: np.ndarray, epsilon: float) -> np.ndarray:
    """Class ``floor(log_{1+eps} w)`` per weight; zero weights get class -1."""
    w = np.asarray(weights, dtype=INT)
    if np.any(w < 0):
        raise ValueError("approximate MSF needs non-negative weights")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    out = np.full(len(w), -1, dtype=INT)
    pos = w > 0
    out[pos] = np.floor(np.log(w[pos].astype(float)) / math.log1p(epsilon) + 1e-12).astype(INT)
    return out


def approx_msf(
    graph: Graph,
    epsilon: float,
    gamma: float = 0.0,
    config: GridConfig | None = None,
    retries: int = 3,
) -> MsfResult:
    """A spanning forest of weight at most ``(1 + epsilon)`` times the minimum.

    Weights are rounded down to powers of ``1 + epsilon``; the forest is
    minimum for the rounded weights, with each class solved by a plain
    spanning forest after the lighter classes are contracted.
    """
    _need_weights(graph)
    config = config or GridConfig(gamma=gamma)
    cls = weight_classes(graph.weights, epsilon)
    order = np.lexsort((np.arange(graph.m), cls)).astype(INT)
    try:
        res = _group_recursion(graph, order, cls[order], gamma, config, retries)
    except MsfFailed:
        return MsfResult(np.zeros(0, dtype=INT), failed=True)
    res.extra["classes"] = int(len(np.unique(cls)))
    return res


def bottleneck_sf(
    graph: Graph,
    gamma: float = 0.0,
    config: GridConfig | None = None,
    retries: int = 3,
) -> MsfResult:
    """A spanning forest whose heaviest edge is as light as possible.

    The shortest prefix of the ordered edges that already has the components
    of the whole graph ends at the bottleneck edge. It is located group by
    group: the prefixes ending at each group boundary are contracted together,
    the first one with the final component count marks the group holding the
    bottleneck, and the search continues inside that group on the graph with
    the earlier groups contracted.
    """
    _need_weights(graph)
    config = config or GridConfig(gamma=gamma)
    res = MsfResult(np.zeros(0, dtype=INT))
    meter = _Meter(res)
    order = _order(graph)
    if graph.m == 0:
        return res
    try:
        n_loc, loc = _compact(graph.edges[order, 0], graph.edges[order, 1])
        target = len(np.unique(_components([(n_loc, loc)], meter, config, retries)[0]))
        start = 0
        u, v = loc[:, 0], loc[:, 1]
        ids = np.arange(graph.m)
        while len(ids) > 1:
            res.levels += 1
            k = min(len(ids), max(2, math.ceil(len(ids) ** (gamma / 2))))
            bounds = np.linspace(0, len(ids), k + 1).astype(int)
            jobs = [(n_loc, np.column_stack([u[: bounds[i]], v[: bounds[i]]])) for i in range(1, k + 1)]
            cols = _components(jobs, meter, config, retries)
            counts = [len(np.unique(c)) for c in cols]
            j = next(i for i, c in enumerate(counts) if c == target)
            lo, hi = bounds[j], bounds[j + 1]
            if lo > 0:
                col = cols[j - 1]
                u, v = col[u], col[v]
                n_loc, loc = _compact(u[lo:hi], v[lo:hi])
                u, v = loc[:, 0], loc[:, 1]
                # components of the new range on the vertices it touches
                target = len(np.unique(_components([(n_loc, loc)], meter, config, retries)[0]))
            else:
                u, v = u[:hi], v[:hi]
            start += lo
            ids = ids[lo:hi]
        b = start
        prefix = order[: b + 1]
        n_p, loc_p = _compact(graph.edges[prefix, 0], graph.edges[prefix, 1])
        picked = _forests([(n_p, loc_p)], meter, config, retries)[0]
    except MsfFailed:
        return MsfResult(np.zeros(0, dtype=INT), failed=True)
    res.edges = np.sort(prefix[picked])
    res.bottleneck = int(graph.weights[order[b]])
    return res
