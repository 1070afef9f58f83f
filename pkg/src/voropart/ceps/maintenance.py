"""Incremental maintenance of a clustering as partitions come and go."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clustering import TabuParams, ceps
from .kdtree import Event, PRKdTree, Request, apply_data_requests
from .metrics import Clustering, Tiers, slope_sum


@dataclass
class AddStats:
    visited: int = 0
    new_server: bool = False
    group: int = -1


def group_of(capacity: float, theta_max: float, num_groups: int) -> int:
    g = int(capacity / theta_max * num_groups)
    return min(max(g, 0), num_groups - 1)


def add_partition(cl: Clustering, pid, pattern, num_groups: int = 4, stats: AddStats | None = None):
    """Place a new partition; returns the id of the cluster that received it.

    Clusters are bucketed by spare capacity. The search starts at the group
    matching the partition's own peak and walks to roomier groups, taking the
    feasible cluster whose merged flatness is smallest. A new server is opened
    only when no group has room.
    """
    if num_groups < 1:
        raise ValueError("num_groups must be >= 1")
    if pid in cl.patterns and any(pid in m for m in cl.members.values()):
        raise KeyError(f"partition {pid} already placed")
    pat = np.asarray(pattern, dtype=float)
    if cl.patterns and len(pat) != cl.buckets:
        raise ValueError("pattern has a different bucket count")
    theta = cl.tiers.theta_max
    if pat.max() > theta:
        raise ValueError("partition alone exceeds the largest server")
    st = stats if stats is not None else AddStats()
    groups: dict[int, list] = {}
    for c in sorted(cl.members):
        groups.setdefault(group_of(theta - cl.peak(c), theta, num_groups), []).append(c)
    target = group_of(pat.max(), theta, num_groups)
    dest = None
    while target < num_groups and dest is None:
        best = None
        for c in groups.get(target, ()):
            st.visited += 1
            merged = cl.agg[c] + pat
            if merged.max() > theta:
                continue
            d = slope_sum(merged)
            if best is None or d < best[0]:
                best = (d, c)
        if best is not None:
            dest = best[1]
            st.group = target
        target += 1
    assert st.visited <= len(cl.members)
    cl.patterns[pid] = pat
    if dest is None:
        dest = cl.next_id
        cl.next_id += 1
        cl.members[dest] = []
        cl.agg[dest] = np.zeros(len(pat))
        st.new_server = True
    cl.members[dest].append(pid)
    cl.agg[dest] = cl.agg[dest] + pat
    return dest


def remove_partition(cl: Clustering, pid, drop_empty: bool = True):
    """Take a partition out; returns the cluster it came from."""
    for c, m in cl.members.items():
        if pid in m:
            m.remove(pid)
            cl.agg[c] = cl.agg[c] - cl.patterns.pop(pid)
            if not m:
                if drop_empty:
                    del cl.members[c]
                    del cl.agg[c]
                else:
                    cl.agg[c] = np.zeros_like(cl.agg[c])
            return c
    raise KeyError(f"unknown partition {pid}")


def update_partition(cl: Clustering, pid, pattern, num_groups: int = 4, drop_empty: bool = True):
    remove_partition(cl, pid, drop_empty)
    return add_partition(cl, pid, pattern, num_groups)


def cosine_unit(buckets: int = 288, extent: float = 1.0, base: float = 1.0, amplitude: float = 1.0):
    """Per-object pattern whose phase follows the x (longitude) of the leaf centre."""
    t = np.arange(buckets)

    def unit(box) -> np.ndarray:
        cx = (box[0] + box[2]) / 2
        phi = 2 * math.pi * cx / extent
        return np.clip(base + amplitude * np.cos(2 * math.pi * t / buckets + phi), 0.0, None)

    return unit


@dataclass
class BatchReport:
    requests: int
    transferred: int
    total: int
    events: int
    new_servers: int
    servers: int

    @property
    def ratio(self) -> float:
        return self.transferred / self.total if self.total else 0.0


@dataclass
class Iceps:
    """A live dataset (PR kd-tree) with its clustering kept current.

    Each leaf's pattern is its object count times ``unit(box)``; ``per_object``
    scales that unit.
    """

    tree: PRKdTree
    clustering: Clustering
    unit: object
    num_groups: int = 4
    per_object: float = 1.0
    refresh: str = "structural"  # "structural": patterns follow counts at split/merge only; "always"
    log: list = field(default_factory=list)

    @classmethod
    def build(cls, xy, max_objects: int, tiers: Tiers, unit, extent: float, num_groups: int = 4,
              per_object: float = 1.0, use_tabu: bool = True, params: TabuParams | None = None) -> "Iceps":
        tree = PRKdTree.build(xy, max_objects, extent)
        leaves = tree.leaves()
        pats = np.array([tree.count(k) * per_object * unit(tree.box(k)) for k in leaves])
        res = ceps(pats, tiers, use_tabu, params)
        members = {c: [leaves[i] for i in m] for c, m in res.clustering.members.items()}
        cl = Clustering({leaves[i]: pats[i] for i in range(len(leaves))}, members, tiers)
        return cls(tree, cl, unit, num_groups, per_object)

    def pattern(self, leaf: int) -> np.ndarray:
        return self.tree.count(leaf) * self.per_object * self.unit(self.tree.box(leaf))

    def cluster_of_objects(self) -> dict:
        own = self.clustering.owner()
        return {o: own[k] for o, k in self.tree.leaf_of.items()}

    def _handle(self, ev: Event, st: AddStats) -> None:
        cl = self.clustering
        node = self.tree.nodes.get(ev.leaf)
        live = node is not None and node.leaf
        placed = ev.leaf in cl.patterns
        if ev.kind == "remove":
            if placed:
                remove_partition(cl, ev.leaf)
        elif ev.kind == "add":
            if live and not placed:
                add_partition(cl, ev.leaf, self.pattern(ev.leaf), self.num_groups, st)
        elif ev.kind == "update":
            if not (live and placed) or self.refresh == "structural":
                return
            new = self.pattern(ev.leaf)
            host = next(c for c, m in cl.members.items() if ev.leaf in m)
            agg = cl.agg[host] - cl.patterns[ev.leaf] + new
            if agg.max() <= cl.tiers.theta_max:
                cl.patterns[ev.leaf] = new
                cl.agg[host] = agg
            else:
                remove_partition(cl, ev.leaf)
                add_partition(cl, ev.leaf, new, self.num_groups, st)

    def apply(self, requests) -> BatchReport:
        """Run a request batch; transfer counts pre-existing objects now on another server."""
        before = self.cluster_of_objects()
        n_events = 0
        new_servers = 0
        for r in requests:
            evs = apply_data_requests(self.tree, [r])
            n_events += len(evs)
            for ev in evs:
                st = AddStats()
                self._handle(ev, st)
                new_servers += st.new_server
        after = self.cluster_of_objects()
        moved = sum(1 for o, c in before.items() if o in after and after[o] != c)
        rep = BatchReport(len(requests), moved, len(before), n_events, new_servers, len(self.clustering.members))
        self.log.append(rep)
        return rep


def insert_stream(tree: PRKdTree, count: int, sf: float, seed=0, start_id: int | None = None) -> list[Request]:
    """Inserts spread over leaves by a zipf law (sf = 0 is uniform), uniform inside a leaf."""
    rng = np.random.default_rng(seed)
    leaves = tree.leaves()
    w = 1.0 / np.arange(1, len(leaves) + 1) ** sf
    w = (w / w.sum())[rng.permutation(len(leaves))]
    pick = rng.choice(len(leaves), size=count, p=w)
    u = rng.uniform(size=(count, 2))
    oid = (max(tree.pos) + 1 if tree.pos else 0) if start_id is None else start_id
    out = []
    for n, (k, (ux, uy)) in enumerate(zip(pick, u)):
        x0, y0, x1, y1 = tree.box(leaves[k])
        out.append(Request("insert", oid + n, x0 + ux * (x1 - x0), y0 + uy * (y1 - y0)))
    return out


def update_stream(tree: PRKdTree, inserts: list[Request], seed=0) -> list[Request]:
    """Turn each insert into an update of a random existing object moving to that location."""
    rng = np.random.default_rng(seed)
    ids = np.array(sorted(tree.pos))
    chosen = rng.choice(ids, size=len(inserts), replace=False)
    return [Request("update", int(o), r.x, r.y) for o, r in zip(chosen, inserts)]
