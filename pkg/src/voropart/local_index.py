"""Per-partition local Voronoi diagrams and Voronoi hierarchies.

Bulk construction runs in the kernel layer: each cell starts as the extent
box, is clipped by its 2k Z-order neighbours, then refined by one scan of its
influence region whose bounding box shrinks as the cell does.  Because a
smaller cell has a smaller influence region, that single pass reaches the
same fixed point as the scan-until-stable loop in :func:`refine_cell`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .geometry import (
    REL_EPS,
    SPACE_EXTENT,
    CellStatus,
    Point,
    VoronoiCell,
    bisector,
    box_cell,
    clip_cell,
    influence_region,
)
from .partitioner import PartitionPlan, elect_pivots
from .zorder import z_encode_array, z_neighbors, z_region_scan, z_scale_for

# status codes stored per cell
APPROX, REFINED, ACCURATE, INACCURATE = 0, 1, 2, 3
STATUS_NAMES = {
    APPROX: CellStatus.APPROXIMATE,
    REFINED: CellStatus.LOCALLY_REFINED,
    ACCURATE: CellStatus.ACCURATE,
    INACCURATE: CellStatus.INACCURATE,
}
REFINE_CAP = 64


class RefinementError(RuntimeError):
    pass


def zsort(xy: np.ndarray, scale: float):
    codes = z_encode_array(xy, scale)
    order = np.argsort(codes, kind="stable")
    return order, codes[order]


# ---- single-cell reference path -------------------------------------------------


def build_approx_cell(o, z_sorted_objects, k: int = 3, extent: float = SPACE_EXTENT) -> VoronoiCell:
    """Box clipped by bisectors against the ``k`` Z-order predecessors and successors of ``o``."""
    pts = np.asarray(z_sorted_objects, dtype=np.float64).reshape(-1, 2)
    hits = np.nonzero((pts[:, 0] == o[0]) & (pts[:, 1] == o[1]))[0]
    if len(hits) == 0:
        raise ValueError("generator not in sequence")
    i = int(hits[0])
    cell = box_cell(o, extent)
    tol = REL_EPS * extent
    for j in z_neighbors(len(pts), i, k):
        q = pts[j]
        if q[0] == o[0] and q[1] == o[1]:
            continue
        cell = clip_cell(cell, bisector(o, q), tol)
    return VoronoiCell(Point(*o), cell.vertices, CellStatus.APPROXIMATE)


def refine_cell(o, cell: VoronoiCell, local_objects, extent: float = SPACE_EXTENT) -> VoronoiCell:
    """Scan the influence region, clip, repeat until nothing changes."""
    pts = np.asarray(local_objects, dtype=np.float64).reshape(-1, 2)
    scale = z_scale_for(extent)
    order, codes = zsort(pts, scale)
    pts = pts[order]
    tol = REL_EPS * extent
    for _ in range(REFINE_CAP):
        ir = influence_region(o, cell)
        cand = set()
        for v, r in ir.per_vertex:
            cand.update(z_region_scan(codes, pts, v, r, scale))
        changed = False
        for j in sorted(cand):
            q = pts[j]
            if q[0] == o[0] and q[1] == o[1]:
                continue
            new = clip_cell(cell, bisector(o, q), tol)
            if new is not cell:
                cell, changed = new, True
        if not changed:
            return VoronoiCell(Point(*o), cell.vertices, CellStatus.LOCALLY_REFINED)
    raise RefinementError("refinement did not converge")


# ---- bulk LVD --------------------------------------------------------------------


@dataclass
class LocalVoronoiDiagram:
    partition: int
    ids: np.ndarray  # generator object ids, in z order
    gx: np.ndarray
    gy: np.ndarray
    verts: np.ndarray  # (m, 2) concatenated rings
    offsets: np.ndarray  # (n + 1,)
    status: np.ndarray  # uint8 codes
    extent: float = SPACE_EXTENT
    stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def inaccurate(self) -> set[int]:
        return {int(i) for i in self.ids[self.status == INACCURATE]}

    def ring(self, pos: int) -> np.ndarray:
        return self.verts[self.offsets[pos] : self.offsets[pos + 1]]

    def cell(self, pos: int) -> VoronoiCell:
        return VoronoiCell(
            Point(float(self.gx[pos]), float(self.gy[pos])),
            self.ring(pos).copy(),
            STATUS_NAMES[int(self.status[pos])],
        )

    @property
    def cells(self) -> dict[int, VoronoiCell]:
        return {int(g): self.cell(i) for i, g in enumerate(self.ids)}

    def areas(self) -> np.ndarray:
        v = self.verts
        nxt = np.arange(len(v)) + 1
        ends = self.offsets[1:] - 1
        nxt[ends] = self.offsets[:-1]
        cross = v[:, 0] * v[nxt, 1] - v[nxt, 0] * v[:, 1]
        return 0.5 * np.add.reduceat(cross, self.offsets[:-1]) if len(v) else np.zeros(0)

    def dump(self) -> str:
        """One cell per line: id, status, ``x y`` pairs separated by ``;``."""
        lines = []
        for i, g in enumerate(self.ids):
            ring = ";".join(f"{x!r} {y!r}" for x, y in self.ring(i))
            lines.append(f"{int(g)} {STATUS_NAMES[int(self.status[i])].value} {ring}")
        return "\n".join(lines) + ("\n" if lines else "")


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    if n == 0:
        return []
    parts = max(1, min(n, workers * 4))
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _concat(results):
    verts = [r[0] for r in results]
    offs = [r[1] for r in results]
    total = 0
    out_off = [np.zeros(1, dtype=np.int64)]
    for o in offs:
        out_off.append(o[1:] + total)
        total += int(o[-1])
    v = np.concatenate(verts) if verts else np.empty((0, 2))
    return v, np.concatenate(out_off)


def build_cells_parallel(xs, ys, codes, gens, k, extent, scale, refine=True, workers=1, backend=None):
    """Kernel cell build over generator chunks; output order is ``gens`` order for any worker count."""
    kern = kernels.load(backend) if backend else kernels.impl
    eps = REL_EPS * extent
    spans = _chunks(len(gens), workers)
    if not spans:
        return np.empty((0, 2)), np.zeros(1, dtype=np.int64)

    def run(span):
        a, b = span
        return kern.build_cells(xs, ys, codes, gens[a:b], k, extent, eps, scale, refine)

    if workers <= 1:
        results = [run(s) for s in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, spans))
    return _concat(results)


@dataclass
class LocalPoints:
    """A partition's objects (primaries plus replicas) sorted by Z-value."""

    ids: np.ndarray
    xy: np.ndarray
    codes: np.ndarray
    primary: np.ndarray  # bool mask: generates a cell here
    scale: float

    @classmethod
    def from_arrays(cls, ids, xy, primary_mask, extent: float = SPACE_EXTENT) -> "LocalPoints":
        scale = z_scale_for(extent)
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        ids = np.asarray(ids, dtype=np.int64)
        primary_mask = np.asarray(primary_mask, dtype=bool)
        order, codes = zsort(xy, scale)
        return cls(ids[order], np.ascontiguousarray(xy[order]), codes, primary_mask[order], scale)


def build_lvd(
    partition: int,
    local: LocalPoints,
    k: int = 3,
    extent: float = SPACE_EXTENT,
    refine: bool = True,
    workers: int = 1,
    backend: str | None = None,
) -> LocalVoronoiDiagram:
    gens = np.nonzero(local.primary)[0].astype(np.int64)
    xs = np.ascontiguousarray(local.xy[:, 0])
    ys = np.ascontiguousarray(local.xy[:, 1])
    verts, offsets = build_cells_parallel(xs, ys, local.codes, gens, k, extent, local.scale, refine, workers, backend)
    status = np.full(len(gens), REFINED if refine else APPROX, dtype=np.uint8)
    return LocalVoronoiDiagram(
        partition, local.ids[gens], xs[gens].copy(), ys[gens].copy(), verts, offsets, status, extent
    )


# ---- classification ----------------------------------------------------------------


def _vertex_hp(vx, vy, pi, pivots):
    """Signed distance of vertices to hp(pi, pj) for every pivot; positive on pi's side."""
    ux = pi[:, 0:1] - vx[:, None]
    uy = pi[:, 1:2] - vy[:, None]
    wx = pivots[None, :, 0] - vx[:, None]
    wy = pivots[None, :, 1] - vy[:, None]
    dx, dy = wx - ux, wy - uy
    with np.errstate(divide="ignore", invalid="ignore"):
        return (dx * (wx + ux) + dy * (wy + uy)) / (2.0 * np.hypot(dx, dy))


def exposure(lvd: LocalVoronoiDiagram, plan: PartitionPlan, mode: str = "tight") -> np.ndarray:
    """(cells, P) bool: the cell's influence region may hold unseen points of partition j.

    tight: some vertex circle reaches past the lambda-replicated strip of j
    (past hp(i, j) itself when j is not adjacent).
    coarse: the bounding circle of radius 2 r_o does; the influence region
    always fits in that circle.
    """
    i = lvd.partition
    p = plan.n_partitions
    n = len(lvd)
    out = np.zeros((n, p), dtype=bool)
    if p < 2 or n == 0:
        return out
    piv = plan.pivots
    margin = np.where(plan.adjacency_matrix()[i], plan.lam, 0.0)
    slack = REL_EPS * plan.extent
    counts = np.diff(lvd.offsets)
    owner = np.repeat(np.arange(n), counts)
    vx, vy = lvd.verts[:, 0], lvd.verts[:, 1]
    ox, oy = lvd.gx[owner], lvd.gy[owner]
    rv = np.hypot(vx - ox, vy - oy)
    pi = np.broadcast_to(piv[i], (1, 2))
    step = max(1, (1 << 21) // p)
    if mode == "tight":
        for s in range(0, len(vx), step):
            sl = slice(s, s + step)
            d = _vertex_hp(vx[sl], vy[sl], np.repeat(pi, len(vx[sl]), 0), piv)
            hit = d < rv[sl, None] - margin[None, :] + slack
            hit[:, i] = False
            np.logical_or.at(out, owner[sl], hit)
    elif mode == "coarse":
        ro = np.zeros(n)
        np.maximum.at(ro, owner, rv)
        d = _vertex_hp(lvd.gx, lvd.gy, np.repeat(pi, n, 0), piv)
        out = d < 2.0 * ro[:, None] - margin[None, :] + slack
        out[:, i] = False
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return out


def classify_cells(lvd: LocalVoronoiDiagram, plan: PartitionPlan, mode: str = "tight") -> np.ndarray:
    """Mark cells accurate/inaccurate in place; returns the exposure matrix."""
    exp = exposure(lvd, plan, mode)
    lvd.status[:] = np.where(exp.any(axis=1), INACCURATE, ACCURATE)
    return exp


def classify_cell(o, cell: VoronoiCell, partition: int, plan: PartitionPlan, mode: str = "tight") -> CellStatus:
    lvd = LocalVoronoiDiagram(
        partition,
        np.zeros(1, dtype=np.int64),
        np.array([float(o[0])]),
        np.array([float(o[1])]),
        np.asarray(cell.vertices, dtype=np.float64),
        np.array([0, len(cell.vertices)], dtype=np.int64),
        np.zeros(1, dtype=np.uint8),
        plan.extent,
    )
    classify_cells(lvd, plan, mode)
    return STATUS_NAMES[int(lvd.status[0])]


def ir_points(local: LocalPoints, verts, offsets, gx, gy, extent: float, primaries_only: bool = True):
    """For each requested cell, the local objects inside its influence region."""
    xs = np.ascontiguousarray(local.xy[:, 0])
    ys = np.ascontiguousarray(local.xy[:, 1])
    found, off = kernels.ir_query(
        local.codes, xs, ys, local.scale, extent, verts, offsets,
        np.ascontiguousarray(gx), np.ascontiguousarray(gy), REL_EPS * extent,
    )
    if primaries_only and len(found):
        keep = local.primary[found]
        cs = np.concatenate([[0], np.cumsum(keep)]).astype(np.int64)
        found, off = found[keep], cs[off]
    return found, off


def apply_fix(lvd: LocalVoronoiDiagram, cell_pos: np.ndarray, px, py, poff) -> None:
    """Clip the listed cells by the returned remote points and mark them accurate."""
    if len(cell_pos) == 0:
        return
    sub_v = [lvd.ring(int(c)) for c in cell_pos]
    sub_off = np.concatenate([[0], np.cumsum([len(r) for r in sub_v])]).astype(np.int64)
    sv, so = kernels.clip_cells(
        np.concatenate(sub_v), sub_off, lvd.gx[cell_pos], lvd.gy[cell_pos],
        np.ascontiguousarray(px, dtype=np.float64), np.ascontiguousarray(py, dtype=np.float64),
        poff, REL_EPS * lvd.extent,
    )
    rings = [lvd.ring(i) for i in range(len(lvd))]
    for j, c in enumerate(cell_pos):
        rings[int(c)] = sv[so[j] : so[j + 1]]
    lvd.verts = np.concatenate(rings) if rings else np.empty((0, 2))
    lvd.offsets = np.concatenate([[0], np.cumsum([len(r) for r in rings])]).astype(np.int64)
    lvd.status[cell_pos] = ACCURATE


# ---- hierarchy -------------------------------------------------------------------


@dataclass
class VoronoiHierarchy:
    """levels[0] are the objects; levels[-1] is the root level (a single pivot)."""

    fanout: int
    points: list[np.ndarray]  # per level, (m, 2)
    parent: list[np.ndarray]  # per level below the top, index into the next level
    radius: list[np.ndarray]  # per level, furthest-descendant-object distance
    child_start: list[np.ndarray] = field(default_factory=list)
    child_order: list[np.ndarray] = field(default_factory=list)

    @property
    def n_levels(self) -> int:
        return len(self.points)

    @property
    def n_objects(self) -> int:
        return len(self.points[0])

    def children(self, level: int, idx: np.ndarray) -> np.ndarray:
        """Indices at ``level - 1`` of the children of entries ``idx`` at ``level``."""
        st = self.child_start[level - 1]
        order = self.child_order[level - 1]
        a, b = st[idx], st[idx + 1]
        if len(idx) == 0:
            return np.empty(0, dtype=np.int64)
        lens = b - a
        total = int(lens.sum())
        if total == 0:
            return np.empty(0, dtype=np.int64)
        rep = np.repeat(a - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens)
        return order[np.arange(total) + rep]


def build_hierarchy(objects, fanout: int = 32, seed=0, trials: int = 1) -> VoronoiHierarchy:
    if fanout < 2:
        raise ValueError("fanout must be >= 2")
    pts = np.asarray(objects, dtype=np.float64).reshape(-1, 2)
    rng = np.random.default_rng(seed)
    levels, parents = [pts], []
    cur = pts
    while len(cur) > 0:
        m = int(math.ceil(len(cur) / fanout))
        uniq = np.unique(cur, axis=0)
        m = min(m, len(uniq))
        piv = elect_pivots(uniq, m, trials, int(rng.integers(2**63))).points
        par = cKDTree(piv).query(cur, k=1)[1].astype(np.int64)
        par = _nearest_lowest(cur, piv, par)
        parents.append(par)
        levels.append(piv)
        cur = piv
        if m == 1:
            break
    if len(pts) == 0:
        return VoronoiHierarchy(fanout, [pts], [], [np.zeros(0)])
    # exact furthest-descendant distances
    anc = np.arange(len(pts))
    radius = [np.zeros(len(pts))]
    for lv in range(1, len(levels)):
        anc = parents[lv - 1][anc]
        piv = levels[lv]
        d = np.hypot(pts[:, 0] - piv[anc, 0], pts[:, 1] - piv[anc, 1])
        r = np.zeros(len(piv))
        np.maximum.at(r, anc, d)
        radius.append(r)
    h = VoronoiHierarchy(fanout, levels, parents, radius)
    for lv in range(len(parents)):
        order = np.argsort(parents[lv], kind="stable")
        cnt = np.bincount(parents[lv], minlength=len(levels[lv + 1]))
        h.child_order.append(order.astype(np.int64))
        h.child_start.append(np.concatenate([[0], np.cumsum(cnt)]).astype(np.int64))
    return h


def _nearest_lowest(cur, piv, par):
    """Resolve exact distance ties to the lowest pivot index (cKDTree leaves them arbitrary)."""
    d_best = ((cur - piv[par]) ** 2).sum(1)
    if len(piv) <= 1:
        return par
    k = min(len(piv), 4)
    dd, ii = cKDTree(piv).query(cur, k=k)
    ii = np.asarray(ii).reshape(len(cur), k)
    dd2 = ((cur[:, None, :] - piv[ii]) ** 2).sum(-1)
    tie = dd2 <= d_best[:, None]
    cand = np.where(tie, ii, np.iinfo(np.int64).max)
    return np.minimum(par, cand.min(axis=1))


def hierarchy_range(h: VoronoiHierarchy, q, r: float, slack: float = 0.0) -> np.ndarray:
    """Object indices within ``r`` of ``q`` by top-down descent."""
    if h.n_objects == 0:
        return np.empty(0, dtype=np.int64)
    qx, qy = float(q[0]), float(q[1])
    top = h.n_levels - 1
    idx = np.arange(len(h.points[top]), dtype=np.int64)
    for lv in range(top, 0, -1):
        p = h.points[lv][idx]
        d = np.hypot(p[:, 0] - qx, p[:, 1] - qy)
        idx = idx[d - h.radius[lv][idx] <= r + slack]
        idx = h.children(lv, idx)
    p = h.points[0][idx]
    dx, dy = p[:, 0] - qx, p[:, 1] - qy
    return np.sort(idx[dx * dx + dy * dy <= r * r])
