"""Distributed Voronoi partitioning, local Voronoi indexing and workload-aware placement."""

__version__ = "0.1.0"
