"""Simulator: placement, rounds, the four primitives and strict-mode limits."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import PROPERTY_SETTINGS, make_grid
from mpcgraph.mpc_runtime import (
    GridConfig,
    MachineGrid,
    RoundLawViolation,
    SpaceExceeded,
    machine_words_for,
    num_machines_for,
)


def test_grid_dimensions_follow_input_size():
    cfg = GridConfig(delta=0.5, word_floor=1)
    g = MachineGrid.sized(256, cfg)
    assert g.machine_words == 16
    assert g.num_machines >= 16
    assert g.num_machines == math.ceil(4 * 256 / 16)


def test_word_floor_applies_to_tiny_inputs():
    assert machine_words_for(10, 0.5) == 64
    assert num_machines_for(10, 0.0, 64) == 1


@pytest.mark.parametrize("kwargs", [{"delta": 0.0}, {"delta": 1.0}, {"gamma": -1}, {"mode": "lazy"}])
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        GridConfig(**kwargs)


def test_oversized_grid_is_refused():
    with pytest.raises(ValueError, match="too many"):
        MachineGrid.sized(10**6, GridConfig(gamma=1.0))


def test_tuple_costs_arity_plus_one():
    g = make_grid()
    g.put("S", np.arange(10).reshape(5, 2))
    assert g.machine_words_used().sum() == 15
    g.drop("S")
    assert g.machine_words_used().sum() == 0


def test_scope_drops_temporaries():
    g = make_grid()
    g.put("keep", [1, 2, 3])
    with g.scope():
        g.hold("tmp", [4, 5])
    assert g.names() == ["keep"]


class TestRunRound:
    def test_identity_routing_keeps_state(self):
        g = MachineGrid(4, 16)
        g.put("S", np.arange(12).reshape(-1, 1))
        before = {m: g.local(m) for m in range(4)}
        g.run_round(lambda mid, local: [(name, payload) for name, payload in local])
        assert {m: g.local(m) for m in range(4)} == before
        assert g.report.rounds_total == 1

    def test_outbox_overflow_raises_in_strict_mode(self):
        g = MachineGrid(2, 16, GridConfig(mode="strict"))
        g.put("S", [[1]], owner=[0])
        with pytest.raises(SpaceExceeded) as exc:
            g.run_round(lambda mid, local: [("T", (0,) * 16)] if mid == 0 else [], lambda mid, item: 1)
        assert exc.value.machine_id == 0

    def test_scripted_round_stays_within_capacity(self):
        cfg = GridConfig(delta=0.5, word_floor=1, mode="strict")
        g = MachineGrid.sized(256, cfg)
        g.put("S", np.arange(128).reshape(-1, 1))
        # every tuple moves to the next machine
        g.run_round(
            lambda mid, local: list(local),
            lambda mid, item: (mid + 1) % g.num_machines,
        )
        assert len(g.rows("S")) == 128
        assert g.report.peak_machine_words <= g.machine_words == 16

    def test_inbox_overflow_raises(self):
        g = MachineGrid(4, 8, GridConfig(mode="strict"))
        g.put("S", np.arange(12).reshape(-1, 1))
        with pytest.raises(SpaceExceeded):
            g.run_round(lambda mid, local: list(local), lambda mid, item: 0)


class TestSort:
    def test_small_example(self):
        g = MachineGrid(3, 4)
        g.put("S", [[3], [1], [2]], owner=[0, 1, 2])
        g.mpc_sort("S")
        assert g.rows("S")[:, 0].tolist() == [1, 2, 3]

    def test_sorted_input_is_a_fixed_point(self):
        g = make_grid()
        g.put("S", [[1], [2], [3]])
        g.mpc_sort("S")
        first = g.report.rounds_total
        layout = (g.rows("S").copy(), g.owners("S").copy())
        g.mpc_sort("S")
        assert np.array_equal(g.rows("S"), layout[0])
        assert np.array_equal(g.owners("S"), layout[1])
        assert g.report.rounds_total == 2 * first

    def test_random_keys_match_sorted(self):
        rng = np.random.default_rng(5)
        keys = rng.integers(-(2**62), 2**62, size=10_000)
        g = make_grid(2 * 10_000)
        g.put("S", keys)
        g.mpc_sort("S")
        assert np.array_equal(g.rows("S")[:, 0], np.sort(keys))
        assert g.report.max_primitive_charge <= g.round_bound

    def test_sorted_layout_puts_small_keys_on_low_machines(self):
        g = MachineGrid(8, 8)
        g.put("S", np.arange(20)[::-1].reshape(-1, 1))
        g.mpc_sort("S")
        assert np.all(np.diff(g.owners("S")) >= 0)

    def test_custom_key_with_payload_tiebreak(self):
        g = make_grid()
        g.put("S", [[2, 9], [1, 5], [2, 3], [1, 7]])
        g.mpc_sort("S", key=lambda r: r[:, 0])
        assert g.rows("S").tolist() == [[1, 5], [1, 7], [2, 3], [2, 9]]


class TestPrefixSum:
    def test_small_example(self):
        g = make_grid()
        g.put("S", [[1], [2], [3]])
        sums = g.prefix_sum("S", lambda r: r[:, 0])
        assert sums.tolist() == [1, 3, 6]
        assert g.rows("S")[:, 1].tolist() == [1, 3, 6]

    def test_zeros(self):
        g = make_grid()
        g.put("S", np.zeros((4, 1)))
        assert g.prefix_sum("S", lambda r: r[:, 0]).tolist() == [0, 0, 0, 0]

    def test_random_values_match_scan(self):
        vals = np.random.default_rng(1).integers(0, 101, size=10_000)
        g = make_grid(3 * 10_000)
        g.put("S", vals)
        sums = g.prefix_sum("S", lambda r: r[:, 0], annotate=False)
        assert np.array_equal(sums, np.cumsum(vals))

    def test_overflow_is_reported(self):
        g = make_grid()
        big = np.iinfo(np.int64).max // 2 + 1
        g.put("S", [[big], [big]])
        with pytest.raises(OverflowError):
            g.prefix_sum("S", lambda r: r[:, 0])


class TestPredecessor:
    def test_small_example(self):
        g = make_grid()
        g.put("S", np.arange(5).reshape(-1, 1))
        pred = g.predecessor("S", lambda r: np.array([1, 0, 0, 1, 0]))
        assert pred.tolist() == [0, 0, 0, 3, 3]

    def test_all_flagged(self):
        g = make_grid()
        g.put("S", np.arange(4).reshape(-1, 1))
        assert g.predecessor("S", lambda r: np.ones(4)).tolist() == [0, 1, 2, 3]

    def test_missing_predecessor_is_marked(self):
        g = make_grid()
        g.put("S", np.arange(3).reshape(-1, 1))
        assert g.predecessor("S", lambda r: np.array([0, 1, 0])).tolist() == [-1, 1, 1]

    def test_random_flags_match_left_scan(self):
        rng = np.random.default_rng(2)
        flags = rng.integers(0, 2, size=10_000)
        g = make_grid(2 * 10_000)
        g.put("S", np.arange(10_000))
        pred = g.predecessor("S", lambda r: flags)
        last, want = -1, []
        for i, f in enumerate(flags):
            if f:
                last = i
            want.append(last)
        assert pred.tolist() == want


class TestLoadBalance:
    def test_hot_machine_is_spread(self):
        g = MachineGrid(20, 100)
        g.put("S", np.arange(200).reshape(-1, 1), owner=np.zeros(200, dtype=int))
        g.load_balance(2)
        used = g.machine_words_used()
        busy = used[used > 0]
        assert busy.min() >= 50 and busy.max() <= 100

    def test_balanced_input_keeps_bounds(self):
        g = MachineGrid(20, 100)
        g.put("S", np.arange(400).reshape(-1, 1))
        g.load_balance(2)
        busy = g.machine_words_used()[g.machine_words_used() > 0]
        assert busy.min() >= 50 and busy.max() <= 100

    def test_ten_thousand_tuples_k4(self):
        g = MachineGrid(1000, 100)
        g.put("S", np.arange(10_000).reshape(-1, 1))
        g.load_balance(4)
        busy = g.machine_words_used()[g.machine_words_used() > 0]
        assert busy.min() >= 25 and busy.max() <= 50
        assert busy.sum() == 20_000

    def test_rejects_k_at_most_one(self):
        with pytest.raises(ValueError):
            make_grid().load_balance(1)


def test_round_law_is_enforced_per_charge():
    g = make_grid(delta=0.5)
    g.charge("sort", 16)
    with pytest.raises(RoundLawViolation):
        g.charge("sort", 17)


def test_report_totals_add_up():
    g = make_grid()
    g.put("S", np.arange(100))
    g.mpc_sort("S")
    g.prefix_sum("S")
    g.barrier(2)
    rep = g.report
    assert rep.rounds_total == rep.primitive_rounds + rep.barrier_rounds
    assert rep.primitive_calls["sort"] == 1 and rep.primitive_calls["prefix_sum"] == 1


def test_strict_put_beyond_capacity_raises():
    g = MachineGrid(2, 8, GridConfig(mode="strict"))
    with pytest.raises(SpaceExceeded):
        g.put("S", np.arange(20).reshape(-1, 1))


def _script(grid, keys):
    grid.put("S", keys)
    grid.mpc_sort("S")
    grid.prefix_sum("S", lambda r: r[:, 0] % 7)
    grid.predecessor("S", lambda r: r[:, 0] % 3 == 0)
    grid.load_balance(2)
    return grid.rows("S").copy(), grid.owners("S").copy()


class TestProperties:
    @PROPERTY_SETTINGS
    @given(st.lists(st.integers(-(10**9), 10**9), max_size=300), st.integers(0, 2**32))
    def test_deterministic_replay(self, keys, seed):
        a, b = make_grid(2048, seed=seed), make_grid(2048, seed=seed)
        ra, rb = _script(a, np.array(keys, dtype=np.int64)), _script(b, np.array(keys, dtype=np.int64))
        assert np.array_equal(ra[0], rb[0]) and np.array_equal(ra[1], rb[1])
        assert a.report == b.report

    @PROPERTY_SETTINGS
    @given(st.lists(st.integers(0, 10**6), max_size=400))
    def test_strict_and_fast_agree(self, keys):
        keys = np.array(keys, dtype=np.int64)
        fast, strict = make_grid(4096), make_grid(4096, mode="strict")
        rf, rs = _script(fast, keys), _script(strict, keys)
        assert np.array_equal(rf[0], rs[0])
        assert fast.report.rounds_total == strict.report.rounds_total
        assert strict.report.peak_machine_words <= strict.machine_words

    @PROPERTY_SETTINGS
    @given(st.integers(1, 10**6), st.sampled_from([0.2, 0.5, 0.8]))
    def test_primitive_charge_is_bounded(self, n, delta):
        g = MachineGrid.sized(n, GridConfig(delta=delta))
        assert g.sort_rounds <= g.round_bound
        assert g.scan_rounds + 1 <= g.round_bound
