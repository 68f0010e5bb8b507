"""Shared fixtures and helpers."""

from __future__ import annotations

import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mpcgraph.graph import Graph
from mpcgraph.mpc_runtime import GridConfig, MachineGrid

PROPERTY_SETTINGS = settings(
    max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)


def make_grid(n_words: int = 4096, **cfg) -> MachineGrid:
    return MachineGrid.sized(n_words, GridConfig(**cfg))


def graph_of(n: int, edges) -> Graph:
    return Graph.from_edges(n, np.asarray(edges, dtype=np.int64).reshape(-1, 2))


@pytest.fixture
def grid() -> MachineGrid:
    return make_grid()


@pytest.fixture
def strict_grid() -> MachineGrid:
    return make_grid(mode="strict")


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance criterion lines after the test report."""
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
