"""Graph containers and the plain-text edge-list format.

Vertices are stored as compact indices ``0..n-1``. The optional ``labels``
array maps an index to its original 64-bit label; labels are kept sorted, so
"smallest label" and "smallest index" select the same vertex.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

INT = np.int64


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class LabelOutOfRange(ValueError):
    pass


@dataclass
class Graph:
    """Undirected simple graph, optionally edge-weighted."""

    n: int
    edges: np.ndarray
    weights: np.ndarray | None = None
    labels: np.ndarray | None = None
    dropped_loops: int = 0
    merged_duplicates: int = 0
    _arcs: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges,
        weights=None,
        labels=None,
    ) -> "Graph":
        """Normalize an edge list: drop self-loops, orient ``u < v``, merge duplicates.

        When duplicates carry weights the lightest copy is kept.
        """
        e = np.asarray(edges, dtype=INT).reshape(-1, 2)
        w = None if weights is None else np.asarray(weights, dtype=INT).reshape(-1)
        if w is not None and len(w) != len(e):
            raise ValueError("one weight per edge required")
        if len(e) and (e.min() < 0 or e.max() >= n):
            raise LabelOutOfRange("edge endpoint outside 0..n-1")
        loops = e[:, 0] == e[:, 1]
        e = e[~loops]
        if w is not None:
            w = w[~loops]
        e = np.sort(e, axis=1)
        if w is None:
            order = np.lexsort((e[:, 1], e[:, 0]))
        else:
            order = np.lexsort((w, e[:, 1], e[:, 0]))
        e = e[order]
        keep = np.ones(len(e), dtype=bool)
        if len(e) > 1:
            keep[1:] = np.any(e[1:] != e[:-1], axis=1)
        merged = int((~keep).sum())
        e = np.ascontiguousarray(e[keep])
        if w is not None:
            w = w[order][keep]
        lab = None
        if labels is not None:
            lab = np.asarray(labels, dtype=INT)
            if len(lab) != n or np.any(np.diff(lab) <= 0):
                raise ValueError("labels must be strictly increasing, one per vertex")
        return cls(n, e, w, lab, int(loops.sum()), merged)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    def arcs(self) -> np.ndarray:
        """Both orientations of every edge, sorted by (source, target)."""
        if self._arcs is None:
            both = np.vstack([self.edges, self.edges[:, ::-1]])
            order = np.lexsort((both[:, 1], both[:, 0]))
            self._arcs = np.ascontiguousarray(both[order])
        return self._arcs

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n).astype(INT)

    def label_of(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=INT)
        return idx if self.labels is None else self.labels[idx]

    def words(self) -> int:
        """Input size in words: one tuple per vertex and per directed edge."""
        per_arc = 3 if self.weights is None else 4
        return 2 * self.n + per_arc * 2 * self.m

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges.tolist():
            adj[u].append(v)
            adj[v].append(u)
        return adj


def parse_graph(path: str | Path) -> Graph:
    """Read ``n m [weighted]`` followed by ``m`` lines ``u v`` or ``u v w``.

    Self-loops are dropped and duplicate edges merged; the number of dropped
    loops is reported through a warning and kept on the returned graph.
    """
    text = Path(path).read_text()
    lines = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, t) for i, t in lines if t and not t[0].startswith("#")]
    if not lines:
        raise ParseError(1, "missing header")
    hline, head = lines[0]
    if len(head) not in (2, 3) or (len(head) == 3 and head[2] != "weighted"):
        raise ParseError(hline, "header must be 'n m [weighted]'")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise ParseError(hline, "header counts must be integers") from None
    if n < 0 or m < 0:
        raise ParseError(hline, "header counts must be non-negative")
    weighted = len(head) == 3
    body = lines[1:]
    if len(body) != m:
        raise ParseError(
            body[-1][0] if body else hline, f"expected {m} edge lines, found {len(body)}"
        )
    width = 3 if weighted else 2
    edges = np.zeros((m, 2), dtype=INT)
    weights = np.zeros(m, dtype=INT) if weighted else None
    for k, (ln, tok) in enumerate(body):
        if len(tok) != width:
            raise ParseError(ln, f"expected {width} fields, got {len(tok)}")
        try:
            vals = [int(t) for t in tok]
        except ValueError:
            raise ParseError(ln, "fields must be integers") from None
        u, v = vals[0], vals[1]
        if not (0 <= u < n and 0 <= v < n):
            raise LabelOutOfRange(f"line {ln}: label outside 0..{n - 1}")
        edges[k] = (u, v)
        if weighted:
            if not -(2**63) <= vals[2] < 2**63:
                raise ParseError(ln, "weight outside signed 64-bit range")
            weights[k] = vals[2]
    g = Graph.from_edges(n, edges, weights)
    if g.dropped_loops:
        warnings.warn(f"dropped {g.dropped_loops} self-loop(s)", stacklevel=2)
    return g


def write_graph(graph: Graph, path: str | Path) -> None:
    lines = [f"{graph.n} {graph.m}" + (" weighted" if graph.weighted else "")]
    for k, (u, v) in enumerate(graph.edges.tolist()):
        lines.append(f"{u} {v}" + (f" {int(graph.weights[k])}" if graph.weighted else ""))
    Path(path).write_text("\n".join(lines) + "\n")
