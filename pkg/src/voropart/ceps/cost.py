"""Server cost accounting and the grid baselines."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import Clustering, InfeasibleError, Tiers


def cost_report(clusters, tiers: Tiers, hours: float = 24.0) -> float:
    """Time-based price of running one server per cluster at its cheapest adequate tier."""
    aggs = clusters.agg.values() if isinstance(clusters, Clustering) else clusters
    total = 0.0
    for a in aggs:
        a = np.asarray(a, dtype=float)
        if a.size == 0:
            continue
        total += tiers.rate_for(float(a.max())) * hours
    return total


@dataclass
class BaselineResult:
    name: str
    cost: float
    servers: int
    assignment: dict = field(default_factory=dict)  # server -> list of grid cells
    detail: dict = field(default_factory=dict)


def grid_patterns(xy, obj_part, patterns, g: int, extent: float):
    """Access pattern of every non-empty g x g grid cell.

    A partition's accesses are shared evenly by its objects, so a cell receives
    the fraction of each partition's objects that fall inside it.
    Returns ``(cell ids, (cells, buckets) patterns, object count per cell)``.
    """
    xy = np.asarray(xy, dtype=float)
    obj_part = np.asarray(obj_part, dtype=np.int64)
    patterns = np.asarray(patterns, dtype=float)
    ij = np.clip((xy / extent * g).astype(np.int64), 0, g - 1)
    cell = ij[:, 1] * g + ij[:, 0]
    per_part = np.bincount(obj_part, minlength=len(patterns)).astype(float)
    cells, inv = np.unique(cell, return_inverse=True)
    w = np.zeros((len(cells), len(patterns)))
    np.add.at(w, (inv, obj_part), 1.0)
    share = w / np.where(per_part > 0, per_part, 1.0)[None, :]
    return cells, share @ patterns, w.sum(axis=1).astype(np.int64)


def grid_size(n_objects: int, capacity: int) -> int:
    return max(1, math.ceil(math.sqrt(n_objects / capacity)))


def _servers_for(peak: float, tiers: Tiers) -> tuple[int, int]:
    """(count, tier) of identical servers sharing a cell whose peak may exceed the top tier."""
    k = max(1, math.ceil(peak / tiers.theta_max - 1e-12))
    return k, tiers.tier_for(peak / k)


def baseline_gp(xy, obj_part, patterns, tiers: Tiers, capacity: int = 100_000,
                extent: float = 1.0, hours: float = 24.0) -> BaselineResult:
    """One regular grid cell per server, each on the cheapest tier that carries its peak.

    A cell hotter than the largest tier is spread over several top servers.
    """
    g = grid_size(len(xy), capacity)
    cells, pats, _ = grid_patterns(xy, obj_part, patterns, g, extent)
    cost = 0.0
    servers = 0
    assign = {}
    for c, p in zip(cells.tolist(), pats):
        k, t = _servers_for(float(p.max()), tiers)
        cost += k * tiers.rates[t] * hours
        for _ in range(k):
            assign[servers] = [c]
            servers += 1
    return BaselineResult("GP", cost, servers, assign, {"grid": g})


def baseline_gp_r(xy, obj_part, patterns, tiers: Tiers, capacity: int = 100_000, granularity: int = 4,
                  extent: float = 1.0, hours: float = 24.0, seed=0) -> BaselineResult:
    """Fine grid cells dealt at random onto as few servers as capacity allows."""
    rng = np.random.default_rng(seed)
    g = grid_size(len(xy), capacity) * granularity
    cells, pats, _ = grid_patterns(xy, obj_part, patterns, g, extent)
    theta = tiers.theta_max
    pieces = []
    for c, p in zip(cells.tolist(), pats):
        k = max(1, math.ceil(p.max() / theta - 1e-12))
        pieces += [(c, p / k)] * k
    n0 = max(1, math.ceil(pats.sum(axis=0).max() / theta - 1e-12)) if len(pats) else 0
    loads = [np.zeros(pats.shape[1]) for _ in range(n0)]
    assign: dict[int, list] = {s: [] for s in range(n0)}
    for idx in rng.permutation(len(pieces)):
        c, p = pieces[idx]
        fit = [s for s in range(len(loads)) if (loads[s] + p).max() <= theta]
        if fit:
            s = fit[int(rng.integers(len(fit)))]
        else:
            s = len(loads)
            loads.append(np.zeros(len(p)))
            assign[s] = []
        loads[s] = loads[s] + p
        assign[s].append(c)
    used = [s for s in assign if assign[s]]
    cost = cost_report([loads[s] for s in used], tiers, hours)
    return BaselineResult("GP-R", cost, len(used), {s: assign[s] for s in used}, {"grid": g})


@dataclass
class _Server:
    cells: list
    tier: int


def baseline_gp_aas(xy, obj_part, patterns, tiers: Tiers, capacity: int = 100_000, window: int = 6,
                    low: float = 0.5, extent: float = 1.0, hours: float = 24.0) -> BaselineResult:
    """GP under a reactive scaling policy, simulated bucket by bucket.

    After each bucket: a saturated server hands half of its cells to a new
    server on the cheapest adequate tier (or steps up when it holds one cell);
    a server below ``low`` utilization for ``window`` buckets steps down a tier;
    two servers merge when one of them could have carried both over the window.
    Each grid cell is cut into 2 x 2 sub-cells so there is something to split.
    """
    g = grid_size(len(xy), capacity)
    cells, pats, _ = grid_patterns(xy, obj_part, patterns, 2 * g, extent)
    b = pats.shape[1]
    caps = np.asarray(tiers.capacities, dtype=float)
    top = len(caps) - 1

    def tier_cover(v):
        return int(min(np.searchsorted(caps, v - 1e-12), top))

    parent = {}
    for k, c in enumerate(cells.tolist()):
        x, y = c % (2 * g), c // (2 * g)
        parent.setdefault((y // 2) * g + x // 2, []).append(k)
    servers = [_Server(ks, tier_cover(pats[ks, 0].sum())) for _, ks in sorted(parent.items())]
    cost = 0.0
    dt = hours / b
    peak_servers = len(servers)
    events = {"split": 0, "up": 0, "down": 0, "merge": 0}
    for t in range(b):
        loads = [pats[s.cells, t].sum() for s in servers]
        cost += sum(tiers.rates[s.tier] for s in servers) * dt
        lo_t = max(0, t - window + 1)
        new = []
        for s, load in zip(servers, loads):
            if load <= caps[s.tier]:
                continue
            if len(s.cells) > 1:
                order = sorted(s.cells, key=lambda k: -pats[k, t])
                keep, give, lk, lg = [], [], 0.0, 0.0
                for k in order:
                    if lk <= lg:
                        keep.append(k)
                        lk += pats[k, t]
                    else:
                        give.append(k)
                        lg += pats[k, t]
                s.cells = keep
                s.tier = max(s.tier, tier_cover(lk)) if lk > caps[s.tier] else s.tier
                new.append(_Server(give, tier_cover(lg)))
                events["split"] += 1
            else:
                s.tier = tier_cover(load)
                events["up"] += 1
        servers += new
        if t - lo_t + 1 == window:
            for s in servers:
                hist = pats[s.cells, lo_t:t + 1].sum(axis=0)
                if s.tier > 0 and (hist < low * caps[s.tier]).all():
                    s.tier -= 1
                    events["down"] += 1
            merged = set()
            for i in range(len(servers)):
                if i in merged:
                    continue
                for j in range(i + 1, len(servers)):
                    if j in merged:
                        continue
                    a, c = servers[i], servers[j]
                    both = pats[a.cells + c.cells, lo_t:t + 1].sum(axis=0)
                    host = a if a.tier >= c.tier else c
                    if both.max() <= caps[host.tier]:
                        host.cells = a.cells + c.cells
                        merged.add(j if host is a else i)
                        events["merge"] += 1
                        if host is c:
                            break
            servers = [s for k, s in enumerate(servers) if k not in merged]
        peak_servers = max(peak_servers, len(servers))
    assign = {k: [int(cells[c]) for c in s.cells] for k, s in enumerate(servers)}
    return BaselineResult("GP-AAS", cost, len(servers), assign, {"grid": g, "peak_servers": peak_servers, **events})


def cost_csv(rows) -> str:
    """rows: iterable of (approach, servers, cost)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["approach", "servers", "cost"])
    for name, n, c in rows:
        w.writerow([name, n, f"{c:.6f}"])
    return buf.getvalue()


def check_feasible(clustering: Clustering) -> None:
    if not clustering.feasible():
        raise InfeasibleError("clustering exceeds server capacity")
