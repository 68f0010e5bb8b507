"""Simulated memory-bounded parallel graph algorithms with sequential oracles."""

from .connectivity import connectivity, connectivity_mpf, min_parent_forest, neighbor_increment, tree_contraction
from .dfs_rmq import dfs, dfs_applications, lca, leaf_sampling, multi_path, rmq_query, sparse_table, sparse_table_plus, sub_dfs
from .forest import estimate_diameter, orientate, spanning_forest
from .graph import Graph, parse_graph, write_graph
from .mpc_runtime import GridConfig, MachineGrid, RoundLawViolation, SpaceExceeded
from .msf import approx_msf, bottleneck_sf, exact_msf

__all__ = [
    "Graph",
    "GridConfig",
    "MachineGrid",
    "RoundLawViolation",
    "SpaceExceeded",
    "approx_msf",
    "bottleneck_sf",
    "connectivity",
    "connectivity_mpf",
    "dfs",
    "dfs_applications",
    "estimate_diameter",
    "exact_msf",
    "lca",
    "leaf_sampling",
    "min_parent_forest",
    "multi_path",
    "neighbor_increment",
    "orientate",
    "parse_graph",
    "rmq_query",
    "spanning_forest",
    "sparse_table",
    "sparse_table_plus",
    "sub_dfs",
    "tree_contraction",
    "write_graph",
]
