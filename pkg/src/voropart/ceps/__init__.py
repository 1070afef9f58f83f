"""Workload-aware grouping of small spatial partitions onto as few servers as possible."""

from .clustering import (
    AhrResult,
    CapacityExhausted,
    CepsResult,
    TabuParams,
    TabuResult,
    ahr_cluster,
    ceps,
    replay_ahr,
    tabu_search,
)
from .cost import baseline_gp, baseline_gp_aas, baseline_gp_r, cost_report
from .kdtree import PRKdTree, Request, apply_data_requests, build_small_partitions
from .maintenance import Iceps, add_partition, remove_partition, update_partition
from .metrics import Clustering, InfeasibleError, Tiers, flatness, idle_time, total_fitness

__all__ = [
    "AhrResult", "CapacityExhausted", "CepsResult", "Clustering", "Iceps", "InfeasibleError",
    "PRKdTree", "Request", "TabuParams", "TabuResult", "Tiers", "add_partition", "ahr_cluster",
    "apply_data_requests", "baseline_gp", "baseline_gp_aas", "baseline_gp_r", "build_small_partitions",
    "ceps", "cost_report", "flatness", "idle_time", "remove_partition", "replay_ahr", "tabu_search",
    "total_fitness", "update_partition",
]
