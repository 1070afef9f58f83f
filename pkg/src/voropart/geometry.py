"""Planar primitives for Voronoi cells clipped to the square index space.

Everything here is pure Python/numpy and deliberately simple: it is the
reference path that the compiled kernels are checked against.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

SPACE_EXTENT = 1e9
REL_EPS = 1e-9

# box edges carry negative labels: bottom, right, top, left
_BOX_LABELS = (-1, -2, -3, -4)


class GeometryError(ValueError):
    pass


class Point(NamedTuple):
    x: float
    y: float


def geometric_eps(extent: float = SPACE_EXTENT) -> float:
    return REL_EPS * extent


@dataclass(frozen=True)
class HalfPlane:
    """Closed half-plane ``a*x + b*y <= c``."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a == 0 and self.b == 0:
            raise GeometryError("half-plane normal must be non-zero")

    @property
    def norm(self) -> float:
        return math.hypot(self.a, self.b)

    def value(self, p) -> float:
        return self.a * p[0] + self.b * p[1] - self.c

    def distance(self, p) -> float:
        """Signed distance; negative inside."""
        return self.value(p) / self.norm

    def contains(self, p, tol: float = 0.0) -> bool:
        return self.distance(p) <= tol


class CellStatus(str, enum.Enum):
    APPROXIMATE = "approximate"
    LOCALLY_REFINED = "locally-refined"
    ACCURATE = "accurate"
    INACCURATE = "inaccurate"


@dataclass
class VoronoiCell:
    generator: Point
    vertices: np.ndarray  # (m, 2), counter-clockwise
    status: CellStatus = CellStatus.APPROXIMATE
    # ids of generators whose bisectors bound the cell, when known
    neighbors: tuple[int, ...] | None = field(default=None, compare=False)

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)

    def contains(self, p, tol: float = 0.0) -> bool:
        return point_in_convex(self.vertices, p, tol)

    def with_status(self, status: CellStatus) -> "VoronoiCell":
        return VoronoiCell(self.generator, self.vertices, status, self.neighbors)


@dataclass
class InfluenceRegion:
    center: Point
    radius: float
    per_vertex: list[tuple[Point, float]]

    def contains(self, p, tol: float = 0.0) -> bool:
        """True when ``p`` lies strictly inside some vertex circle."""
        return any(math.dist(v, p) < r - tol for v, r in self.per_vertex)

    def bounding_box(self) -> tuple[float, float, float, float]:
        xs0 = min(v.x - r for v, r in self.per_vertex)
        ys0 = min(v.y - r for v, r in self.per_vertex)
        xs1 = max(v.x + r for v, r in self.per_vertex)
        ys1 = max(v.y + r for v, r in self.per_vertex)
        return xs0, ys0, xs1, ys1


def box_cell(generator, extent: float = SPACE_EXTENT) -> VoronoiCell:
    verts = np.array([[0.0, 0.0], [extent, 0.0], [extent, extent], [0.0, extent]])
    return VoronoiCell(Point(*generator), verts, neighbors=())


def bisector(a, b) -> HalfPlane:
    """Half-plane of points at least as close to ``a`` as to ``b``."""
    nx, ny = b[0] - a[0], b[1] - a[1]
    if nx == 0 and ny == 0:
        raise GeometryError("degenerate generator pair")
    mx, my = 0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])
    return HalfPlane(nx, ny, nx * mx + ny * my)


def polygon_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def point_in_convex(vertices, p, tol: float = 0.0) -> bool:
    v = np.asarray(vertices, dtype=float)
    a = v
    b = np.roll(v, -1, axis=0)
    ex, ey = b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]
    cross = ex * (p[1] - a[:, 1]) - ey * (p[0] - a[:, 0])
    lengths = np.hypot(ex, ey)
    return bool(np.all(cross >= -tol * lengths))


def _clip_ring(ring: list, a: float, b: float, c: float, tol: float, label: int):
    """Clip a labelled ring ``[(x, y, edge_label), ...]`` by ``a*x + b*y <= c``.

    Returns the same list object when nothing is cut off.
    """
    norm = math.hypot(a, b)
    lim = tol * norm
    s = [a * x + b * y - c for x, y, _ in ring]
    if max(s) <= lim:
        return ring
    out = []
    n = len(ring)
    for i in range(n):
        x0, y0, l0 = ring[i]
        x1, y1, _ = ring[(i + 1) % n]
        s0, s1 = s[i], s[(i + 1) % n]
        in0, in1 = s0 <= lim, s1 <= lim
        if in0:
            out.append((x0, y0, l0))
        if in0 != in1:
            t = s0 / (s0 - s1) if s0 != s1 else 0.0
            t = min(1.0, max(0.0, t))
            px, py = x0 + t * (x1 - x0), y0 + t * (y1 - y0)
            # leaving: the new edge runs along the clip line
            out.append((px, py, label if in0 else l0))
    return _dedup_ring(out, tol)


def _dedup_ring(ring: list, tol: float) -> list:
    if len(ring) < 2:
        return ring
    out = [ring[0]]
    for x, y, lab in ring[1:]:
        px, py, _ = out[-1]
        if abs(x - px) <= tol and abs(y - py) <= tol:
            # zero-length edge: keep the position, take over the outgoing label
            out[-1] = (px, py, lab)
        else:
            out.append((x, y, lab))
    while len(out) > 1:
        fx, fy, _ = out[0]
        lx, ly, _ = out[-1]
        if abs(fx - lx) <= tol and abs(fy - ly) <= tol:
            # closing edge has zero length
            out.pop()
        else:
            break
    return out


def _ring_to_cell(generator: Point, ring: list, status: CellStatus) -> VoronoiCell:
    verts = np.array([(x, y) for x, y, _ in ring], dtype=float)
    labels = []
    for i, (x, y, lab) in enumerate(ring):
        if lab >= 0 and lab not in labels:
            labels.append(lab)
    return VoronoiCell(generator, verts, status, tuple(sorted(labels)))


def _default_tol(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    span = float(np.max(v.max(axis=0) - v.min(axis=0))) if len(v) else 1.0
    return REL_EPS * max(span, 1e-300)


def clip_cell(cell: VoronoiCell, h: HalfPlane, tol: float | None = None) -> VoronoiCell:
    """Intersect a convex cell with a half-plane."""
    if tol is None:
        tol = _default_tol(cell.vertices)
    ring = [(float(x), float(y), -1) for x, y in cell.vertices]
    out = _clip_ring(ring, h.a, h.b, h.c, tol, label=-5)
    if out is ring:
        return cell
    if len(out) < 3 or not point_in_convex(
        np.array([(x, y) for x, y, _ in out]), cell.generator, tol
    ):
        raise GeometryError("generator excluded")
    if h.distance(cell.generator) > tol:
        raise GeometryError("generator excluded")
    return VoronoiCell(cell.generator, np.array([(x, y) for x, y, _ in out]), cell.status)


def influence_region(o, cell: VoronoiCell) -> InfluenceRegion:
    if tuple(cell.generator) != (o[0], o[1]):
        raise ValueError("cell does not belong to this generator")
    per_vertex = [
        (Point(float(x), float(y)), math.hypot(x - o[0], y - o[1])) for x, y in cell.vertices
    ]
    radius = max(r for _, r in per_vertex)
    return InfluenceRegion(Point(*o), radius, per_vertex)


def signed_dist_to_hyperplane(o, p_i, p_j) -> float:
    """Distance from ``o`` to the bisector of ``p_i, p_j``; positive on ``p_i``'s side."""
    ux, uy = p_i[0] - o[0], p_i[1] - o[1]
    wx, wy = p_j[0] - o[0], p_j[1] - o[1]
    dx, dy = wx - ux, wy - uy
    d = math.hypot(dx, dy)
    if d == 0:
        raise GeometryError("coincident pivots")
    # |w|^2 - |u|^2 factored to avoid cancellation
    return (dx * (wx + ux) + dy * (wy + uy)) / (2.0 * d)


def dist_to_hyperplane(o, p_i, p_j) -> float:
    return abs(signed_dist_to_hyperplane(o, p_i, p_j))


def _box_ring_local(ox: float, oy: float, extent: float) -> list:
    return [
        (-ox, -oy, _BOX_LABELS[0]),
        (extent - ox, -oy, _BOX_LABELS[1]),
        (extent - ox, extent - oy, _BOX_LABELS[2]),
        (-ox, extent - oy, _BOX_LABELS[3]),
    ]


def brute_force_voronoi(
    points: Sequence, extent: float = SPACE_EXTENT, tol: float | None = None
) -> list[VoronoiCell]:
    """Reference Voronoi diagram by half-plane intersection against every generator.

    Generators are tried nearest first; once the next one is farther than twice
    the cell's furthest vertex it cannot cut the cell, and neither can any
    later one, so the loop stops there.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        raise GeometryError("no generators")
    if len(np.unique(pts, axis=0)) != n:
        raise GeometryError("duplicate generator")
    if tol is None:
        tol = geometric_eps(extent)
    cells = []
    for i in range(n):
        ox, oy = float(pts[i, 0]), float(pts[i, 1])
        rel = pts - pts[i]
        d2 = np.einsum("ij,ij->i", rel, rel)
        order = np.argsort(d2, kind="stable")
        ring = _box_ring_local(ox, oy, extent)
        reach = max(math.hypot(x, y) for x, y, _ in ring)
        for j in order[1:]:
            if math.sqrt(d2[j]) > 2.0 * reach + tol:
                break
            qx, qy = float(rel[j, 0]), float(rel[j, 1])
            new = _clip_ring(ring, qx, qy, 0.5 * (qx * qx + qy * qy), tol, int(j))
            if new is not ring:
                ring = new
                reach = max(math.hypot(x, y) for x, y, _ in ring)
        ring = [(x + ox, y + oy, lab) for x, y, lab in ring]
        cells.append(_ring_to_cell(Point(ox, oy), ring, CellStatus.ACCURATE))
    return cells


def normalize_ring(vertices, tol: float) -> np.ndarray:
    """Drop near-duplicate and near-collinear vertices."""
    v = [tuple(p) for p in np.asarray(vertices, dtype=float)]
    changed = True
    while changed and len(v) > 3:
        changed = False
        for i in range(len(v)):
            a, b, c = v[i - 1], v[i], v[(i + 1) % len(v)]
            ab = math.dist(a, b)
            ac = math.dist(a, c)
            if ab <= tol:
                del v[i]
                changed = True
                break
            if ac > 0:
                area2 = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
                if area2 / ac <= tol:
                    del v[i]
                    changed = True
                    break
    return np.array(v, dtype=float)


def rings_match(a, b, tol: float) -> bool:
    """Vertex sets equal up to ``tol`` (symmetric Hausdorff on vertices)."""
    na, nb = normalize_ring(a, tol), normalize_ring(b, tol)
    if len(na) != len(nb):
        return False
    d = np.sqrt(((na[:, None, :] - nb[None, :, :]) ** 2).sum(-1))
    return bool(d.min(axis=1).max() <= tol and d.min(axis=0).max() <= tol)


def cells_overlap_area(a, b) -> float:
    """Area of the intersection of two convex rings."""
    ring = [(float(x), float(y), -1) for x, y in a]
    bv = np.asarray(b, dtype=float)
    for i in range(len(bv)):
        p, q = bv[i], bv[(i + 1) % len(bv)]
        # left side of a ccw edge is inside: cross(q - p, x - p) >= 0
        ex, ey = q[0] - p[0], q[1] - p[1]
        ring = _clip_ring(ring, ey, -ex, ey * p[0] - ex * p[1], 0.0, -5)
        if len(ring) < 3:
            return 0.0
    return polygon_area([(x, y) for x, y, _ in ring])


def mean_neighbor_count(cells: Iterable[VoronoiCell], extent: float, margin: float) -> float:
    """Average neighbour count over cells whose vertices stay ``margin`` away from the box."""
    counts = []
    for c in cells:
        v = c.vertices
        if v.min() <= margin or v.max() >= extent - margin:
            continue
        counts.append(len(c.neighbors or ()))
    return float(np.mean(counts)) if counts else float("nan")
