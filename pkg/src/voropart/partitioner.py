"""Pivot election and the object -> partition mapping.

Every node draws candidates, the union is shared, and each node runs the
same seeded election, so all of them end up with the same pivots.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import SPACE_EXTENT, GeometryError, Point, brute_force_voronoi

_CHUNK = 1 << 16


@dataclass(frozen=True)
class PivotSet:
    points: np.ndarray  # (P, 2); partition id = row index
    seed: int = 0
    objective: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        object.__setattr__(self, "points", pts)
        if len(np.unique(pts, axis=0)) != len(pts):
            raise GeometryError("pivots must be distinct")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def pivots(self) -> list[tuple[int, Point]]:
        return [(i, Point(float(x), float(y))) for i, (x, y) in enumerate(self.points)]


@dataclass
class PartitionPlan:
    pivot_set: PivotSet
    adjacency: list[list[int]]
    lam: float = 0.0
    extent: float = SPACE_EXTENT
    meta: dict = field(default_factory=dict)

    @property
    def n_partitions(self) -> int:
        return len(self.pivot_set)

    @property
    def pivots(self) -> np.ndarray:
        return self.pivot_set.points

    def adjacency_matrix(self) -> np.ndarray:
        p = self.n_partitions
        m = np.zeros((p, p), dtype=bool)
        for i, nb in enumerate(self.adjacency):
            m[i, nb] = True
        return m

    def to_json(self) -> str:
        doc = {
            "pivots": self.pivots.tolist(),
            "adjacency": self.adjacency,
            "lambda": self.lam,
            "seed": self.pivot_set.seed,
            "extent": self.extent,
            "meta": self.meta,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PartitionPlan":
        d = json.loads(text)
        ps = PivotSet(np.array(d["pivots"], dtype=np.float64), int(d["seed"]))
        return cls(ps, [list(a) for a in d["adjacency"]], float(d["lambda"]), float(d["extent"]), d.get("meta", {}))


def select_candidates(node_objects, s_count: int, seed) -> np.ndarray:
    """Uniform sample of ``s_count`` objects without replacement."""
    objs = np.asarray(node_objects, dtype=np.float64).reshape(-1, 2)
    if s_count > len(objs):
        raise ValueError(f"s_count {s_count} exceeds the {len(objs)} objects available")
    if s_count == len(objs):
        return objs.copy()
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(objs), size=s_count, replace=False))
    return objs[idx]


def pairwise_sum(points: np.ndarray) -> float:
    p = np.asarray(points, dtype=np.float64)
    total = 0.0
    step = max(1, (1 << 20) // max(len(p), 1))
    for s in range(0, len(p), step):
        c = p[s : s + step]
        d = np.sqrt(((c[:, None, :] - p[None, :, :]) ** 2).sum(-1))
        # keep pairs (i, j) with j > i only
        d[np.arange(len(c))[:, None] + s >= np.arange(len(p))[None, :]] = 0.0
        total += float(d.sum())
    return total


def elect_pivots(candidates, p_count: int, trials: int | None = None, seed=0) -> PivotSet:
    """Best of ``trials`` random P-subsets by total pairwise distance."""
    cand = np.asarray(candidates, dtype=np.float64).reshape(-1, 2)
    cand = np.unique(cand, axis=0)
    n = len(cand)
    if p_count < 1 or n < p_count:
        raise ValueError(f"need at least {p_count} distinct candidates, got {n}")
    if trials is None:
        trials = max(1, n // p_count)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if p_count == n:
        return PivotSet(cand, seed, pairwise_sum(cand))
    rng = np.random.default_rng(seed)
    subsets = np.stack([rng.choice(n, size=p_count, replace=False) for _ in range(trials)])
    iu = np.triu_indices(p_count, 1)
    best_val, best_idx = -1.0, None
    if p_count * p_count > (1 << 22):
        vals = [pairwise_sum(cand[sub]) for sub in subsets]
        k = int(np.argmax(vals))
        return PivotSet(cand[subsets[k]], seed, float(vals[k]))
    batch = max(1, (1 << 22) // (p_count * p_count))
    for s in range(0, trials, batch):
        pts = cand[subsets[s : s + batch]]
        diff = pts[:, :, None, :] - pts[:, None, :, :]
        d = np.sqrt((diff**2).sum(-1))[:, iu[0], iu[1]].sum(-1)
        k = int(np.argmax(d))
        if d[k] > best_val:
            best_val, best_idx = float(d[k]), subsets[s + k]
    return PivotSet(cand[best_idx], seed, best_val)


def trial_objectives(candidates, p_count: int, trials: int, seed=0) -> np.ndarray:
    """Objective of every trial subset, in draw order (for checking the election)."""
    cand = np.unique(np.asarray(candidates, dtype=np.float64).reshape(-1, 2), axis=0)
    rng = np.random.default_rng(seed)
    subsets = [rng.choice(len(cand), size=p_count, replace=False) for _ in range(trials)]
    return np.array([pairwise_sum(cand[s]) for s in subsets])


def nearest_pivot(xy, pivots) -> np.ndarray:
    """Index of the nearest pivot per row; lowest index wins exact ties."""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    piv = np.asarray(pivots, dtype=np.float64).reshape(-1, 2)
    out = np.empty(len(xy), dtype=np.int64)
    for s in range(0, len(xy), _CHUNK):
        c = xy[s : s + _CHUNK]
        d = (c[:, None, 0] - piv[None, :, 0]) ** 2 + (c[:, None, 1] - piv[None, :, 1]) ** 2
        out[s : s + _CHUNK] = np.argmin(d, axis=1)
    return out


def refine_pivots(pivot_set: PivotSet, candidates, iters: int = 40) -> PivotSet:
    """Lloyd iterations over the shared candidate sample, snapped back to candidates.

    Pure function of its inputs, so it stays identical on every node.  Each
    step moves a pivot to the candidate nearest its cell's centroid, which
    evens out cell populations far better than the max-spread election alone.
    """
    cand = np.unique(np.asarray(candidates, dtype=np.float64).reshape(-1, 2), axis=0)
    piv = pivot_set.points.copy()
    p = len(piv)
    for _ in range(iters):
        lab = nearest_pivot(cand, piv)
        cnt = np.bincount(lab, minlength=p)
        sx = np.bincount(lab, weights=cand[:, 0], minlength=p)
        sy = np.bincount(lab, weights=cand[:, 1], minlength=p)
        new = piv.copy()
        nz = cnt > 0
        cent = np.column_stack([sx[nz] / cnt[nz], sy[nz] / cnt[nz]])
        new[nz] = cand[nearest_pivot(cent, cand)]
        # keep pivots distinct; a collision keeps the old position
        seen = set()
        for i in range(p):
            key = (new[i, 0], new[i, 1])
            if key in seen:
                new[i] = piv[i]
                key = (new[i, 0], new[i, 1])
            seen.add(key)
        if np.array_equal(new, piv):
            break
        piv = new
    return PivotSet(piv, pivot_set.seed, pairwise_sum(piv))


def map_object(o, pivot_set: PivotSet) -> int:
    if len(pivot_set) == 0:
        raise ValueError("empty pivot set")
    return int(nearest_pivot(np.asarray(o, dtype=np.float64).reshape(1, 2), pivot_set.points)[0])


def pivot_adjacency(pivot_set: PivotSet, extent: float = SPACE_EXTENT) -> list[list[int]]:
    """Voronoi neighbours among the pivots (shared edge, not a shared corner)."""
    if len(pivot_set) < 2:
        return [[] for _ in range(len(pivot_set))]
    cells = brute_force_voronoi(pivot_set.points, extent)
    adj = [set(c.neighbors or ()) for c in cells]
    # symmetrize: an edge seen from one side only is a sub-epsilon sliver
    for i, nb in enumerate(adj):
        for j in list(nb):
            adj[j].add(i)
    return [sorted(a) for a in adj]


def hp_dist_matrix(xy, pivots, primary) -> np.ndarray:
    """Signed distance from each object to hp(primary, j) for every pivot j (inf at j = primary)."""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    piv = np.asarray(pivots, dtype=np.float64)
    pi = piv[primary]
    ux = pi[:, 0:1] - xy[:, 0:1]
    uy = pi[:, 1:2] - xy[:, 1:2]
    wx = piv[None, :, 0] - xy[:, 0:1]
    wy = piv[None, :, 1] - xy[:, 1:2]
    dx, dy = wx - ux, wy - uy
    den = 2.0 * np.hypot(dx, dy)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = (dx * (wx + ux) + dy * (wy + uy)) / den
    d[np.arange(len(xy)), primary] = np.inf
    return d


def min_border_distance(xy, plan: PartitionPlan, primary=None) -> np.ndarray:
    """Distance from each object to the nearest hyperplane shared with an adjacent partition."""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    if primary is None:
        primary = nearest_pivot(xy, plan.pivots)
    adj = plan.adjacency_matrix()
    out = np.empty(len(xy))
    for s in range(0, len(xy), _CHUNK):
        pr = primary[s : s + _CHUNK]
        d = hp_dist_matrix(xy[s : s + _CHUNK], plan.pivots, pr)
        d = np.where(adj[pr], d, np.inf)
        out[s : s + _CHUNK] = d.min(axis=1)
    return out


def replicate(xy, plan: PartitionPlan, primary=None) -> tuple[np.ndarray, np.ndarray]:
    """(object index, extra partition) pairs for objects within lambda of an adjacent border."""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    if primary is None:
        primary = nearest_pivot(xy, plan.pivots)
    if plan.lam <= 0 or plan.n_partitions < 2:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    adj = plan.adjacency_matrix()
    objs, parts = [], []
    for s in range(0, len(xy), _CHUNK):
        pr = primary[s : s + _CHUNK]
        d = hp_dist_matrix(xy[s : s + _CHUNK], plan.pivots, pr)
        hit = adj[pr] & (d <= plan.lam)
        o, p = np.nonzero(hit)
        objs.append(o + s)
        parts.append(p)
    return np.concatenate(objs).astype(np.int64), np.concatenate(parts).astype(np.int64)


def map_object_replicated(o, pivot_set: PivotSet, adjacency, lam: float) -> set[int]:
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    plan = PartitionPlan(pivot_set, adjacency, lam)
    pt = np.asarray(o, dtype=np.float64).reshape(1, 2)
    prim = nearest_pivot(pt, pivot_set.points)
    _, parts = replicate(pt, plan, prim)
    return {int(prim[0]), *(int(p) for p in parts)}


def auto_lambda(sample, plan: PartitionPlan, fraction: float = 0.05) -> float:
    """Smallest lambda that replicates ``fraction`` of ``sample``."""
    if not 0 <= fraction < 1:
        raise ValueError("fraction must be in [0, 1)")
    if fraction == 0 or plan.n_partitions < 2:
        return 0.0
    d = min_border_distance(sample, plan)
    d = np.sort(d[np.isfinite(d)])
    if len(d) == 0:
        return 0.0
    k = max(0, int(math.ceil(fraction * len(sample))) - 1)
    return float(d[min(k, len(d) - 1)])


def make_plan(
    node_objects: list,
    p_count: int,
    s_per_node: int,
    seed: int = 0,
    trials: int | None = None,
    refine_iters: int = 40,
    lam: float | str = 0.0,
    extent: float = SPACE_EXTENT,
    lam_fraction: float = 0.05,
) -> tuple[PartitionPlan, np.ndarray]:
    """Candidate exchange + election + adjacency.  Returns the plan and the shared candidates."""
    ss = np.random.SeedSequence(seed)
    node_seeds = ss.spawn(len(node_objects) + 1)
    cands = [
        select_candidates(objs, min(s_per_node, len(objs)), node_seeds[i])
        for i, objs in enumerate(node_objects)
    ]
    pool = np.concatenate([c for c in cands if len(c)]) if cands else np.empty((0, 2))
    elect_seed = int(node_seeds[-1].generate_state(1)[0])
    ps = elect_pivots(pool, p_count, trials, elect_seed)
    if refine_iters > 0:
        ps = refine_pivots(ps, pool, refine_iters)
    plan = PartitionPlan(ps, pivot_adjacency(ps, extent), 0.0, extent, {"seed": seed})
    if lam == "auto":
        plan.lam = auto_lambda(pool, plan, lam_fraction)
    else:
        plan.lam = float(lam)
        if plan.lam < 0:
            raise ValueError("lambda must be >= 0")
    return plan, pool
