"""Single-process simulator of a grid of memory-bounded machines.

Data lives in named collections of fixed-arity integer tuples. Every tuple is
owned by exactly one machine; a tuple with ``w`` payload words costs ``w + 1``
words (one extra word for the collection name). Storage order is
``(machine index, local slot)`` and every "before" relation used by the
algorithms resolves to it.

The heavy primitives (sort, prefix sum, predecessor, load balance) run as bulk
numpy operations. They are charged a fixed number of rounds derived from a
``d``-ary aggregation tree over the machines, so the charge never exceeds
``C / delta`` for the configured constant ``C``. In strict mode the simulator
also checks, after every data movement, that no machine stores, sends or
receives more than ``machine_words`` words, and raises :class:`SpaceExceeded`
otherwise.
"""

from __future__ import annotations

import math
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

INT = np.int64
INT_MAX = np.iinfo(np.int64).max
INT_MIN = np.iinfo(np.int64).min


class SpaceExceeded(RuntimeError):
    """A machine would hold, send or receive more than ``machine_words`` words."""

    def __init__(self, machine_id: int, words: int, limit: int, what: str = "memory"):
        super().__init__(
            f"machine {machine_id}: {what} of {words} words exceeds limit {limit}"
        )
        self.machine_id = int(machine_id)
        self.words = int(words)
        self.limit = int(limit)
        self.what = what


class RoundLawViolation(AssertionError):
    """A primitive was charged more than ``C / delta`` rounds."""


@dataclass
class GridConfig:
    """Tunable constants of the simulated grid."""

    gamma: float = 0.0
    delta: float = 0.5
    c_total: float = 4.0
    word_floor: int = 64
    round_constant: float = 8.0
    mode: str = "fast"
    seed: int = 0
    fill_divisor: int = 2

    def __post_init__(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.mode not in ("strict", "fast"):
            raise ValueError("mode must be 'strict' or 'fast'")


@dataclass
class RoundReport:
    rounds_total: int = 0
    primitive_calls: Counter = field(default_factory=Counter)
    peak_machine_words: int = 0
    iterations: dict = field(default_factory=dict)
    failed: bool = False
    barrier_rounds: int = 0
    primitive_rounds: int = 0
    max_primitive_charge: int = 0
    space_violations: int = 0

    @property
    def total_iterations(self) -> int:
        return int(sum(self.iterations.values()))


# one int64 load counter per machine is kept in memory
MAX_MACHINES = 10**8


def machine_words_for(n_words: int, delta: float, word_floor: int = 64) -> int:
    return max(int(math.ceil(max(n_words, 1) ** delta)), int(word_floor))


def num_machines_for(
    n_words: int, gamma: float, machine_words: int, c_total: float = 4.0
) -> int:
    total = c_total * max(n_words, 1) ** (1.0 + gamma)
    return max(1, int(math.ceil(total / machine_words)))


class _Collection:
    __slots__ = ("rows", "owner")

    def __init__(self, rows: np.ndarray, owner: np.ndarray):
        self.rows = rows
        self.owner = owner

    @property
    def width(self) -> int:
        return self.rows.shape[1]

    def words(self) -> np.ndarray:
        return np.full(len(self.owner), self.width + 1, dtype=INT)


def _as_rows(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=INT)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError("tuples must form a 2-D array")
    return np.ascontiguousarray(arr)


class MachineGrid:
    """The simulated cluster: machines, their memory, and the round ledger."""

    def __init__(
        self,
        num_machines: int,
        machine_words: int,
        config: GridConfig | None = None,
    ):
        self.config = config or GridConfig()
        if machine_words < 2:
            raise ValueError("machine_words must be at least 2")
        if num_machines > MAX_MACHINES:
            raise ValueError(f"{num_machines} machines is too many to simulate; lower gamma or the input size")
        self.num_machines = int(num_machines)
        self.machine_words = int(machine_words)
        self.mode = self.config.mode
        self.strict = self.mode == "strict"
        self.rng = np.random.default_rng(self.config.seed)
        self.report = RoundReport()
        self.loads = np.zeros(self.num_machines, dtype=INT)
        self._store: dict[str, _Collection] = {}
        self._scopes: list[list[str]] = []
        self._fresh = 0
        self.branching = max(2, self.machine_words // 10)
        height = 1
        reach = self.branching
        while reach < self.num_machines:
            reach *= self.branching
            height += 1
        self.tree_height = height

    @classmethod
    def sized(cls, n_words: int, config: GridConfig | None = None) -> "MachineGrid":
        """Grid for an input of ``n_words`` words under ``config``."""
        config = config or GridConfig()
        s = machine_words_for(n_words, config.delta, config.word_floor)
        p = num_machines_for(n_words, config.gamma, s, config.c_total)
        return cls(p, s, config)

    # ---------------------------------------------------------------- ledger
    @property
    def round_bound(self) -> float:
        return self.config.round_constant / self.config.delta

    def charge(self, primitive: str, rounds: int) -> None:
        if rounds > self.round_bound:
            raise RoundLawViolation(
                f"{primitive} charged {rounds} rounds > C/delta = {self.round_bound}"
            )
        self.report.rounds_total += rounds
        self.report.primitive_rounds += rounds
        self.report.primitive_calls[primitive] += 1
        self.report.max_primitive_charge = max(self.report.max_primitive_charge, rounds)

    def barrier(self, rounds: int = 1) -> None:
        """Algorithm-level synchronous rounds not covered by a primitive."""
        self.report.rounds_total += rounds
        self.report.barrier_rounds += rounds

    def count_iteration(self, phase: str, k: int = 1) -> None:
        self.report.iterations[phase] = self.report.iterations.get(phase, 0) + int(k)

    @property
    def sort_rounds(self) -> int:
        return 2 * self.tree_height + 3

    @property
    def scan_rounds(self) -> int:
        return 2 * self.tree_height + 1

    def fresh(self, stem: str = "tmp") -> str:
        self._fresh += 1
        return f"{stem}#{self._fresh}"

    # ---------------------------------------------------------------- storage
    def _track_peak(self) -> None:
        peak = int(self.loads.max()) if self.num_machines else 0
        if peak > self.report.peak_machine_words:
            self.report.peak_machine_words = peak
        if peak > self.machine_words:
            self.report.space_violations += 1
            if self.strict:
                worst = int(np.argmax(self.loads))
                raise SpaceExceeded(worst, peak, self.machine_words)

    def _place(self, count: int, row_words: int) -> np.ndarray:
        """Greedy fill: the next free slots in machine order.

        Machines are first filled up to ``machine_words / fill_divisor`` so that
        later messages have headroom, then up to the full capacity.
        """
        if count == 0:
            return np.zeros(0, dtype=INT)
        owner = np.empty(count, dtype=INT)
        placed = 0
        # placed is either 0 or count: each pass places everything or nothing
        target = self.machine_words // max(1, self.config.fill_divisor)
        for limit in (target, self.machine_words):
            need = count - placed
            # scan a growing prefix of the machines; greedy fill never looks further
            hi = min(self.num_machines, 1024)
            while True:
                free = np.maximum(0, limit - self.loads[:hi]) // row_words
                cum = np.cumsum(free)
                if cum[-1] >= need or hi == self.num_machines:
                    break
                hi = min(self.num_machines, 4 * hi)
            if cum[-1] >= need:
                idx = np.searchsorted(cum, np.arange(1, need + 1), side="left")
                owner[placed:] = idx
                placed = count
                break
            if limit == self.machine_words:
                break
        if placed < count:
            # Does not fit. Strict mode reports the first machine that would be
            # pushed past its capacity; fast mode spreads the overflow evenly.
            if self.strict:
                worst = int(np.argmax(self.loads))
                raise SpaceExceeded(
                    worst, int(self.loads[worst]) + row_words, self.machine_words
                )
            per = -(-count // self.num_machines)
            owner[:] = np.arange(count) // per
        np.add.at(self.loads, owner, row_words)
        self._track_peak()
        return owner

    def put(
        self, name: str, rows, owner: np.ndarray | None = None
    ) -> str:
        """Store ``rows`` under ``name`` (replacing any previous contents)."""
        arr = _as_rows(rows)
        if name in self._store:
            self.drop(name)
        if owner is None:
            own = self._place(len(arr), arr.shape[1] + 1)
        else:
            own = np.asarray(owner, dtype=INT)
            if len(own) != len(arr):
                raise ValueError("owner array must match rows")
            if len(own) and (own.min() < 0 or own.max() >= self.num_machines):
                raise ValueError("owner outside the grid")
            order = np.argsort(own, kind="stable")
            arr, own = arr[order], own[order]
            np.add.at(self.loads, own, arr.shape[1] + 1)
            self._track_peak()
        self._store[name] = _Collection(arr, own)
        if self._scopes:
            self._scopes[-1].append(name)
        return name

    def hold(self, stem: str, rows) -> str:
        """Store rows under a fresh name and return that name."""
        return self.put(self.fresh(stem), rows)

    def drop(self, name: str) -> None:
        coll = self._store.pop(name, None)
        if coll is not None and len(coll.owner):
            np.subtract.at(self.loads, coll.owner, coll.width + 1)

    def rows(self, name: str) -> np.ndarray:
        return self._store[name].rows

    def owners(self, name: str) -> np.ndarray:
        return self._store[name].owner

    def names(self) -> list[str]:
        return list(self._store)

    def __contains__(self, name: str) -> bool:
        return name in self._store

    def machine_words_used(self) -> np.ndarray:
        return self.loads.copy()

    def local(self, machine_id: int) -> list[tuple[str, tuple[int, ...]]]:
        """Tuples held by one machine, in storage order."""
        out = []
        for name, coll in self._store.items():
            lo = np.searchsorted(coll.owner, machine_id, side="left")
            hi = np.searchsorted(coll.owner, machine_id, side="right")
            out.extend((name, tuple(int(x) for x in row)) for row in coll.rows[lo:hi])
        return out

    @contextmanager
    def scope(self) -> Iterator["MachineGrid"]:
        """Drop every collection created inside the block when it exits."""
        self._scopes.append([])
        try:
            yield self
        finally:
            for name in self._scopes.pop():
                self.drop(name)

    # ---------------------------------------------------------------- movement
    def _check_traffic(self, src: np.ndarray, dst: np.ndarray, row_words: int) -> None:
        if not self.strict or len(src) == 0:
            return
        for what, ids in (("outbox", src), ("inbox", dst)):
            vol = np.bincount(ids, minlength=self.num_machines) * row_words
            worst = int(np.argmax(vol))
            if vol[worst] > self.machine_words:
                raise SpaceExceeded(worst, int(vol[worst]), self.machine_words, what)

    def _relayout(self, name: str, new_rows: np.ndarray) -> None:
        """Replace a collection by ``new_rows`` laid out greedily from scratch."""
        coll = self._store[name]
        old_owner = coll.owner
        if len(old_owner):
            np.subtract.at(self.loads, old_owner, coll.width + 1)
        new_owner = self._place(len(new_rows), new_rows.shape[1] + 1)
        if len(old_owner) == len(new_owner):
            self._check_traffic(old_owner, new_owner, new_rows.shape[1] + 1)
        self._store[name] = _Collection(new_rows, new_owner)

    def run_round(
        self,
        local_compute: Callable[[int, list], Iterable],
        routing: Callable[[int, tuple], int] | None = None,
    ) -> None:
        """One synchronous round executed machine by machine.

        ``local_compute(machine_id, local)`` receives the machine's tuples as
        ``(name, payload)`` pairs and returns the tuples it emits. Each emitted
        tuple goes to ``routing(machine_id, item)`` (default: the emitter).
        Emitted tuples become the entire new memory of their destinations.
        """
        outboxes: list[list[tuple[int, str, tuple]]] = []
        sent = np.zeros(self.num_machines, dtype=INT)
        for mid in range(self.num_machines):
            emitted = []
            for item in local_compute(mid, self.local(mid)):
                name, payload = item
                payload = tuple(int(x) for x in payload)
                dest = mid if routing is None else int(routing(mid, (name, payload)))
                if not 0 <= dest < self.num_machines:
                    raise ValueError(f"destination {dest} outside the grid")
                emitted.append((dest, name, payload))
                sent[mid] += len(payload) + 1
            if self.strict and sent[mid] > self.machine_words:
                raise SpaceExceeded(mid, int(sent[mid]), self.machine_words, "outbox")
            outboxes.append(emitted)
        received = np.zeros(self.num_machines, dtype=INT)
        grouped: dict[str, list[tuple[int, tuple]]] = {}
        for emitted in outboxes:
            for dest, name, payload in emitted:
                received[dest] += len(payload) + 1
                grouped.setdefault(name, []).append((dest, payload))
        if self.strict and len(received):
            worst = int(np.argmax(received))
            if received[worst] > self.machine_words:
                raise SpaceExceeded(worst, int(received[worst]), self.machine_words, "inbox")
        for name in list(self._store):
            self.drop(name)
        for name, items in grouped.items():
            widths = {len(p) for _, p in items}
            if len(widths) != 1:
                raise ValueError(f"collection {name!r} received mixed arities")
            owner = np.array([d for d, _ in items], dtype=INT)
            rows = np.array([p for _, p in items], dtype=INT).reshape(len(items), -1)
            self.put(name, rows, owner=owner)
        self.barrier(1)
        self.report.primitive_calls["run_round"] += 1

    # ---------------------------------------------------------------- primitives
    def mpc_sort(
        self,
        name: str,
        key: Callable[[np.ndarray], Sequence[np.ndarray] | np.ndarray] | None = None,
    ) -> np.ndarray:
        """Sort a collection globally; returns the permutation applied.

        ``key(rows)`` returns one key array or a sequence of key arrays,
        most significant first. Ties fall back to the full payload and then to
        the original storage position, so the result is deterministic.
        """
        coll = self._store[name]
        rows = coll.rows
        cols = [rows[:, j] for j in range(rows.shape[1] - 1, -1, -1)]
        if key is not None:
            k = key(rows)
            if isinstance(k, np.ndarray) and k.ndim == 1:
                k = [k]
            cols = cols + [np.asarray(a) for a in reversed(list(k))]
        order = np.lexsort(cols) if len(rows) else np.zeros(0, dtype=INT)
        self._relayout(name, rows[order])
        self.charge("sort", self.sort_rounds)
        return order

    def prefix_sum(
        self,
        name: str,
        value: Callable[[np.ndarray], np.ndarray] | None = None,
        annotate: bool = True,
    ) -> np.ndarray:
        """Inclusive prefix sums in storage order (``value=None`` means all ones)."""
        coll = self._store[name]
        rows = coll.rows
        vals = (
            np.ones(len(rows), dtype=INT) if value is None else np.asarray(value(rows))
        )
        if len(vals) and vals.dtype.kind in "iu":
            bound = int(np.abs(vals).max()) * len(vals)
            if bound > INT_MAX:
                exact = np.cumsum(vals.astype(object))
                if max(exact, default=0) > INT_MAX or min(exact, default=0) < INT_MIN:
                    raise OverflowError("prefix sum exceeds 64-bit range")
        sums = np.cumsum(vals.astype(INT))
        if annotate:
            self._annotate(name, sums)
        self.charge("prefix_sum", self.scan_rounds)
        return sums

    def predecessor(
        self, name: str, flag: Callable[[np.ndarray], np.ndarray]
    ) -> np.ndarray:
        """Index of the nearest preceding flagged tuple (``-1`` if none).

        Flagged tuples point at themselves. Indices refer to storage order.
        """
        rows = self._store[name].rows
        f = np.asarray(flag(rows)).astype(bool)
        idx = np.where(f, np.arange(len(rows)), -1)
        pred = np.maximum.accumulate(idx) if len(idx) else idx
        self.charge("predecessor", self.scan_rounds)
        return pred.astype(INT)

    def load_balance(self, k: float = 2.0) -> None:
        """Spread all tuples so each non-empty machine holds s/k .. 2s/k words.

        When the whole store holds fewer than s/k words a single machine keeps
        everything; no layout can meet the lower bound then.
        """
        if k <= 1:
            raise ValueError("k must exceed 1")
        names = list(self._store)
        if not names:
            self.charge("load_balance", self.scan_rounds + 1)
            return
        owner = np.concatenate([self._store[n].owner for n in names])
        words = np.concatenate([self._store[n].words() for n in names])
        tag = np.concatenate(
            [np.full(len(self._store[n].owner), i, dtype=INT) for i, n in enumerate(names)]
        )
        pos = np.concatenate([np.arange(len(self._store[n].owner)) for n in names])
        order = np.lexsort((pos, tag, owner))
        w_sorted = words[order]
        total = int(w_sorted.sum())
        hi = 2.0 * self.machine_words / k
        wmax = int(w_sorted.max()) if len(w_sorted) else 1
        q = max(1, int(math.ceil(total / max(hi - wmax, 1))))
        q = min(q, self.num_machines)
        start = np.concatenate([[0], np.cumsum(w_sorted)[:-1]])
        new_sorted = (start * q) // max(total, 1)
        new_owner = np.empty_like(owner)
        new_owner[order] = new_sorted
        self._check_traffic(owner, new_owner, 1)
        self.loads[:] = 0
        offset = 0
        for n in names:
            coll = self._store[n]
            cnt = len(coll.owner)
            own = new_owner[offset : offset + cnt]
            offset += cnt
            srt = np.argsort(own, kind="stable")
            self._store[n] = _Collection(coll.rows[srt], own[srt])
            np.add.at(self.loads, own, coll.width + 1)
        self._track_peak()
        self.charge("load_balance", self.scan_rounds + 1)

    def _annotate(self, name: str, column: np.ndarray) -> None:
        coll = self._store[name]
        rows = np.column_stack([coll.rows, np.asarray(column, dtype=INT)])
        np.add.at(self.loads, coll.owner, 1)
        self._store[name] = _Collection(rows, coll.owner)
        self._track_peak()

    def route(self, name: str, new_rows: np.ndarray | None = None) -> None:
        """One all-to-all delivery of (possibly transformed) rows of ``name``."""
        coll = self._store[name]
        rows = coll.rows if new_rows is None else _as_rows(new_rows)
        self._relayout(name, rows)
        self.barrier(1)
