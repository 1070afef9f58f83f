"""Agglomerative clustering of access patterns and tabu-search refinement."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from .metrics import Clustering, InfeasibleError, Tiers, _stack, slope_sum


class CapacityExhausted(InfeasibleError):
    pass


def _tol(x: float) -> float:
    return 1e-9 * (abs(x) + 1.0)


@dataclass
class Merge:
    i: int
    j: int
    delta: float
    peak: float
    fallback: bool  # the unconstrained minimum pair was infeasible


@dataclass
class AhrResult:
    clustering: Clustering
    trace: list = field(default_factory=list)
    complete: bool = True  # False when capacity ran out before reaching the target


class _RowMin:
    """Row minima of a symmetric matrix, refreshed only where entries changed."""

    def __init__(self, m: np.ndarray):
        self.m = m
        self.val = m.min(axis=1)
        self.arg = m.argmin(axis=1)

    def refresh(self, rows) -> None:
        if len(rows):
            sub = self.m[rows]
            self.val[rows] = sub.min(axis=1)
            self.arg[rows] = sub.argmin(axis=1)

    def set_line(self, i: int, row: np.ndarray) -> None:
        """Overwrite row and column i with ``row``."""
        old = self.m[:, i].copy()
        self.m[i, :] = row
        self.m[:, i] = row
        stale = np.nonzero((self.arg == i) & (row > old))[0]
        lower = row < self.val
        self.val[lower] = row[lower]
        self.arg[lower] = i
        self.refresh(stale)
        self.refresh(np.array([i]))

    def min(self) -> float:
        return float(self.val.min())


def ahr_cluster(patterns, n_clusters: int, tiers: Tiers | float, strict: bool = True, backend=None) -> AhrResult:
    """Merge the feasible pair of minimum merged flatness until ``n_clusters`` remain.

    Ties on delta go to the smaller merged peak, then to the lowest (i, j).
    With ``strict=False`` an exhausted run returns the clustering reached so far;
    merges are deterministic, so that is what a larger target would have produced.
    """
    if not isinstance(tiers, Tiers):
        tiers = Tiers.single(tiers)
    a = _stack(patterns).copy()
    n = len(a)
    if n_clusters < 1 or n < n_clusters:
        raise ValueError("need 1 <= n_clusters <= number of patterns")
    theta = tiers.theta_max
    if (a.max(axis=1) > theta).any():
        raise InfeasibleError("a single partition exceeds the largest server")
    kern = kernels.load(backend) if backend else kernels
    d = np.diff(a, axis=1)
    delta, peak = kern.pair_flatness(a, d, np.arange(n), np.arange(n))
    np.fill_diagonal(delta, np.inf)
    np.fill_diagonal(peak, np.inf)
    free = _RowMin(delta)
    feas = _RowMin(np.where(peak <= theta, delta, np.inf))
    active = np.ones(n, dtype=bool)
    members = {i: [i] for i in range(n)}
    trace = []
    count = n
    complete = True
    inf_row = np.full(n, np.inf)
    while count > n_clusters:
        m = feas.min()
        if not math.isfinite(m):
            if strict:
                raise CapacityExhausted("capacity exhausted")
            complete = False
            break
        fallback = bool(free.min() < m - _tol(m))
        thr = m + _tol(m)
        rows = np.nonzero(feas.val <= thr)[0]
        cand = np.where(feas.m[rows] <= thr, peak[rows], np.inf)
        lo = cand.min()
        # first hit in row-major order is the lowest (i, j) with i < j
        r, j = divmod(int(np.argmax(cand <= lo + _tol(lo))), n)
        i = int(rows[r])
        trace.append(Merge(i, j, float(delta[i, j]), float(peak[i, j]), fallback))
        a[i] += a[j]
        d[i] += d[j]
        members[i].extend(members.pop(j))
        active[j] = False
        peak[j, :] = peak[:, j] = np.inf
        free.set_line(j, inf_row)
        feas.set_line(j, inf_row)
        cols = np.nonzero(active)[0]
        rd = np.full(n, np.inf)
        rp = np.full(n, np.inf)
        rd[cols], rp[cols] = (x[0] for x in kern.pair_flatness(a, d, [i], cols))
        rd[i] = np.inf
        rp[i] = np.inf
        peak[i, :] = peak[:, i] = rp
        free.set_line(i, rd)
        feas.set_line(i, np.where(rp <= theta, rd, np.inf))
        count -= 1
    pats = {p: np.asarray(row, dtype=float) for p, row in enumerate(_stack(patterns))}
    cl = Clustering(pats, {c: sorted(m) for c, m in members.items()}, tiers)
    return AhrResult(cl, trace, complete)


def replay_ahr(patterns, trace, tiers: Tiers | float) -> list[str]:
    """Independent check that each recorded merge was the minimum-delta feasible pair.

    Returns a list of problems (empty when the trace is valid).
    """
    theta = tiers.theta_max if isinstance(tiers, Tiers) else float(tiers)
    clusters = {i: np.asarray(p, dtype=float) for i, p in enumerate(_stack(patterns))}
    problems = []
    for step, mv in enumerate(trace):
        best = None
        keys = sorted(clusters)
        for x in range(len(keys)):
            for y in range(x + 1, len(keys)):
                s = clusters[keys[x]] + clusters[keys[y]]
                if s.max() > theta:
                    continue
                key = (slope_sum(s), s.max())
                if best is None or key[0] < best[0] - _tol(best[0]) or (
                    abs(key[0] - best[0]) <= _tol(best[0]) and key[1] < best[1] - _tol(best[1])
                ):
                    best = (key[0], key[1], keys[x], keys[y])
        if best is None:
            problems.append(f"step {step}: no feasible pair but a merge was recorded")
            break
        if mv.i not in clusters or mv.j not in clusters:
            problems.append(f"step {step}: merged a cluster that no longer exists")
            break
        s = clusters[mv.i] + clusters[mv.j]
        if s.max() > theta:
            problems.append(f"step {step}: infeasible merge ({mv.i}, {mv.j})")
        if slope_sum(s) > best[0] + _tol(best[0]):
            problems.append(f"step {step}: delta {slope_sum(s)} > minimum {best[0]}")
        clusters[mv.i] = s
        del clusters[mv.j]
    return problems


@dataclass
class TabuParams:
    tabu_size: int = 50
    eta: float | None = 10.0  # percent; None disables the filter
    stop_s: int = 100
    sample: int = 64  # fragments tried per iteration
    max_iters: int = 100_000
    seed: int = 0


@dataclass
class TabuResult:
    clustering: Clustering
    trace: list = field(default_factory=list)  # (iteration, T current, T best)
    iterations: int = 0


def _key(cl: Clustering) -> tuple:
    return (cl.fitness(), sum(cl.delta(c) for c in cl.members))


def _move_effect(cl: Clustering, p, src, tgt):
    """(dT, d(sum delta), admissible-by-eta data) for moving partition p from src to tgt."""
    tiers = cl.tiers
    b = cl.buckets
    pat = cl.patterns[p]
    a_src = cl.agg[src] - pat
    a_tgt = cl.agg[tgt] + pat
    pk_t = a_tgt.max()
    if pk_t > tiers.theta_max:
        return None
    old = tiers.capacity_for(cl.peak(src)) + tiers.capacity_for(cl.peak(tgt))
    empty = len(cl.members[src]) == 1
    new = (0.0 if empty else tiers.capacity_for(a_src.max())) + tiers.capacity_for(pk_t)
    d0s, d0t = cl.delta(src), cl.delta(tgt)
    d1s = 0.0 if empty else slope_sum(a_src)
    d1t = slope_sum(a_tgt)
    return (new - old) * b, (d1s + d1t) - (d0s + d0t), (d0s, d0t, d1s, d1t), empty


def _eta_ok(eta, p_delta, ds) -> bool:
    if eta is None:
        return True
    d0s, d0t, d1s, d1t = ds
    base = d0s + d0t
    if base <= 0:
        base = p_delta
    change = abs(d1s - d0s) + abs(d1t - d0t)
    return change <= eta / 100.0 * base + _tol(base)


def _apply(cl: Clustering, p, src, tgt) -> None:
    pat = cl.patterns[p]
    cl.members[src].remove(p)
    cl.members[tgt].append(p)
    cl.agg[src] = cl.agg[src] - pat
    cl.agg[tgt] = cl.agg[tgt] + pat
    if not cl.members[src]:
        del cl.members[src]
        del cl.agg[src]


def tabu_search(clustering: Clustering, params: TabuParams | None = None) -> TabuResult:
    """Improve T by single-fragment moves; returns the best clustering visited.

    Each iteration samples fragments, proposes a move of each to a random other
    cluster, keeps the feasible moves whose flatness change is within eta percent
    and walks to the best one (even when it is worse) unless it is tabu. A tabu
    move is allowed when it beats the best solution found so far. Moving a
    fragment records (fragment, cluster it left) in the FIFO tabu list. A cluster
    emptied by a move is shut down.
    """
    prm = params or TabuParams()
    rng = np.random.default_rng(prm.seed)
    cur = clustering.copy()
    if not cur.feasible():
        raise InfeasibleError("input clustering is infeasible")
    for c in [c for c, m in cur.members.items() if not m]:
        del cur.members[c]
        del cur.agg[c]
    best = cur.copy()
    cur_key = best_key = _key(cur)
    tabu: deque = deque(maxlen=max(prm.tabu_size, 0) or None)
    tabu_set: dict = {}
    p_delta = {p: slope_sum(v) for p, v in cur.patterns.items()}
    trace = [(0, cur_key[0], best_key[0])]
    stale = 0
    it = 0
    while stale < prm.stop_s and it < prm.max_iters and len(cur.members) > 1:
        it += 1
        owner = cur.owner()
        frags = sorted(owner)
        pick = rng.choice(len(frags), size=min(prm.sample, len(frags)), replace=False)
        cids = sorted(cur.members)
        chosen = None
        for fi in sorted(pick):
            p = frags[fi]
            src = owner[p]
            others = [c for c in cids if c != src]
            tgt = others[int(rng.integers(len(others)))]
            eff = _move_effect(cur, p, src, tgt)
            if eff is None:
                continue
            dT, dD, ds, _ = eff
            if not _eta_ok(prm.eta, p_delta[p], ds):
                continue
            key = (cur_key[0] + dT, cur_key[1] + dD)
            is_tabu = tabu_set.get((p, tgt), 0) > 0
            if is_tabu and not _better(key, best_key):
                continue
            if chosen is None or _better(key, chosen[0]):
                chosen = (key, p, src, tgt)
        if chosen is None:
            stale += 1
            trace.append((it, cur_key[0], best_key[0]))
            continue
        key, p, src, tgt = chosen
        _apply(cur, p, src, tgt)
        cur_key = _key(cur)
        if prm.tabu_size > 0:
            if len(tabu) == tabu.maxlen:
                old = tabu[0]
                tabu_set[old] -= 1
            tabu.append((p, src))
            tabu_set[(p, src)] = tabu_set.get((p, src), 0) + 1
        if _better(cur_key, best_key):
            best = cur.copy()
            best_key = cur_key
            stale = 0
        else:
            stale += 1
        trace.append((it, cur_key[0], best_key[0]))
    return TabuResult(best, trace, it)


def _better(a, b) -> bool:
    if a[0] < b[0] - _tol(b[0]):
        return True
    return abs(a[0] - b[0]) <= _tol(b[0]) and a[1] < b[1] - _tol(b[1])


@dataclass
class CepsResult:
    clustering: Clustering
    ahr: AhrResult
    tabu: TabuResult | None
    n_start: int


def ceps(patterns, tiers: Tiers, use_tabu: bool = True, params: TabuParams | None = None) -> CepsResult:
    """Full pipeline: AHR down to the fewest servers capacity allows, then tabu search.

    The target starts at ceil(peak of the total / largest capacity) and grows
    until AHR can reach it.
    """
    a = _stack(patterns)
    n0 = max(1, math.ceil(a.sum(axis=0).max() / tiers.theta_max - 1e-12))
    n0 = min(n0, len(a))
    res = ahr_cluster(a, n0, tiers, strict=False)
    tb = tabu_search(res.clustering, params) if use_tabu else None
    return CepsResult(tb.clustering if tb else res.clustering, res, tb, n0)
