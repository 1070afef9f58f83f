"""Access-pattern metrics, server tiers and the clustering container."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


class InfeasibleError(ValueError):
    pass


def _stack(patterns) -> np.ndarray:
    if isinstance(patterns, np.ndarray):
        a = patterns.astype(float, copy=False)
        return a.reshape(1, -1) if a.ndim == 1 else a
    rows = [np.asarray(p, dtype=float).ravel() for p in patterns]
    if not rows:
        raise ValueError("empty pattern set")
    if len({len(r) for r in rows}) != 1:
        raise ValueError("patterns have different bucket counts")
    return np.vstack(rows)


def slope_sum(aggregate) -> float:
    """Sum of absolute adjacent-bucket differences of one (aggregate) pattern."""
    return float(np.abs(np.diff(np.asarray(aggregate, dtype=float))).sum())


def flatness(patterns) -> float:
    """delta of a set of patterns: total absolute slope of their bucket-wise sum."""
    a = _stack(patterns)
    if a.shape[0] == 0:
        raise ValueError("empty pattern set")
    return slope_sum(a.sum(axis=0))


def idle_time(patterns, theta: float) -> float:
    """theta * B minus the accesses served over the horizon."""
    a = _stack(patterns)
    return float(theta * a.shape[1] - a.sum())


@dataclass(frozen=True)
class Tiers:
    """Server profiles, ascending; capacity is accesses per bucket."""

    capacities: tuple
    rates: tuple

    def __post_init__(self):
        if len(self.capacities) != len(self.rates) or not self.capacities:
            raise ValueError("one rate per capacity")
        if list(self.capacities) != sorted(self.capacities):
            raise ValueError("capacities must ascend")

    @classmethod
    def ladder(cls, theta0: float, cost0: float = 1.0, n: int = 5) -> "Tiers":
        return cls(tuple(theta0 * 2.0**i for i in range(n)), tuple(cost0 * 2.0**i for i in range(n)))

    @classmethod
    def single(cls, theta: float, cost: float = 1.0) -> "Tiers":
        return cls((float(theta),), (float(cost),))

    @property
    def theta_max(self) -> float:
        return float(self.capacities[-1])

    def tier_for(self, peak: float) -> int:
        for i, c in enumerate(self.capacities):
            if peak <= c:
                return i
        raise InfeasibleError(f"peak {peak} exceeds the largest tier {self.theta_max}")

    def capacity_for(self, peak: float) -> float:
        return float(self.capacities[self.tier_for(peak)])

    def rate_for(self, peak: float) -> float:
        return float(self.rates[self.tier_for(peak)])

    def to_dict(self) -> dict:
        return {"capacities": list(self.capacities), "rates": list(self.rates)}


@dataclass
class Clustering:
    """Partitions grouped onto servers; every cluster's peak fits some tier."""

    patterns: dict  # partition id -> pattern
    members: dict  # cluster id -> list of partition ids
    tiers: Tiers
    agg: dict = field(default_factory=dict)
    next_id: int = 0
    keep_empty: bool = False

    def __post_init__(self):
        if not self.agg:
            self.recompute()
        if self.members:
            self.next_id = max(self.next_id, max(self.members) + 1)

    @classmethod
    def from_labels(cls, patterns, labels, tiers: Tiers) -> "Clustering":
        pats = {i: np.asarray(p, dtype=float) for i, p in enumerate(_stack(patterns))}
        members: dict[int, list[int]] = {}
        for pid, c in enumerate(labels):
            members.setdefault(int(c), []).append(pid)
        return cls(pats, members, tiers)

    @property
    def buckets(self) -> int:
        return len(next(iter(self.patterns.values()))) if self.patterns else 0

    def recompute(self) -> None:
        b = self.buckets
        self.agg = {c: (np.sum([self.patterns[p] for p in m], axis=0) if m else np.zeros(b))
                    for c, m in self.members.items()}

    def copy(self) -> "Clustering":
        return Clustering(
            dict(self.patterns), {c: list(m) for c, m in self.members.items()}, self.tiers,
            {c: a.copy() for c, a in self.agg.items()}, self.next_id, self.keep_empty,
        )

    def owner(self) -> dict:
        return {p: c for c, m in self.members.items() for p in m}

    def peak(self, c) -> float:
        return float(self.agg[c].max()) if len(self.agg[c]) else 0.0

    def feasible(self, c=None) -> bool:
        cs = self.members if c is None else [c]
        return all(self.peak(k) <= self.tiers.theta_max for k in cs)

    def tau(self, c) -> float:
        a = self.agg[c]
        return float(self.tiers.capacity_for(self.peak(c)) * len(a) - a.sum())

    def delta(self, c) -> float:
        return slope_sum(self.agg[c])

    def fitness(self) -> float:
        """T = sum of idle times; raises on an infeasible cluster."""
        for c in self.members:
            if self.peak(c) > self.tiers.theta_max:
                raise InfeasibleError(f"cluster {c} exceeds server capacity")
        # exactly rounded sums keep T identical for equal capacity assignments
        cap = math.fsum(self.tiers.capacity_for(self.peak(c)) * self.buckets for c in self.members)
        used = math.fsum(float(self.patterns[p].sum()) for m in self.members.values() for p in m)
        return float(cap - used)

    def labels(self) -> dict:
        return self.owner()

    def canonical(self) -> list[list[int]]:
        return sorted(sorted(m) for m in self.members.values() if m)

    def to_json(self) -> str:
        doc = {
            "clusters": [
                {"id": int(c), "members": sorted(int(p) for p in m),
                 "tier": self.tiers.tier_for(self.peak(c)), "peak": self.peak(c)}
                for c, m in sorted(self.members.items())
            ],
            "fitness": self.fitness(),
            "tiers": self.tiers.to_dict(),
        }
        return json.dumps(doc, sort_keys=True, indent=1)


def total_fitness(clustering: Clustering) -> float:
    return clustering.fitness()
