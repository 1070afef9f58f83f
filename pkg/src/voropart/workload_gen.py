"""Synthetic spatial data, object movement and temporal access patterns."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .geometry import SPACE_EXTENT

OBJ_DTYPE = np.dtype([("id", "<i8"), ("x", "<f8"), ("y", "<f8")])

# Synthetic stand-in for a city population table, normalized into [1, 100].
_POPULATION = np.array(
    [21.3, 3.9, 9.6, 1.2, 14.8, 0.8, 5.5, 2.7, 36.1, 0.6, 7.4, 1.9, 11.2, 4.4, 0.9, 18.0,
     2.1, 6.3, 1.4, 26.5, 3.2, 0.7, 8.8, 1.1, 12.9, 5.0, 2.5, 0.5, 16.4, 3.6]
)


def population_weights(count: int, seed=0) -> np.ndarray:
    """Hotspot sizes drawn from the bundled table, rescaled so they span [1, 100]."""
    rng = np.random.default_rng(seed)
    w = rng.choice(_POPULATION, size=count, replace=True)
    lo, hi = w.min(), w.max()
    if hi == lo:
        return np.full(count, 100.0)
    return 1.0 + 99.0 * (w - lo) / (hi - lo)


@dataclass
class HotspotSpec:
    count: int = 10
    weights: np.ndarray | None = None  # None: equal sizes
    sigma: float = 0.02  # as a fraction of the extent
    regions: list = field(default_factory=lambda: [(0.0, 0.0, 1.0, 1.0)])  # admissible, unit coords

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("hotspot count must be >= 1")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if len(w) != self.count or (w <= 0).any():
                raise ValueError("one positive weight per hotspot")
            self.weights = w


def gen_uniform(n: int, extent: float = SPACE_EXTENT, seed=0) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, extent, size=(n, 2))


def hotspot_centers(spec: HotspotSpec, extent: float, rng) -> np.ndarray:
    regions = np.asarray(spec.regions, dtype=float)
    areas = (regions[:, 2] - regions[:, 0]) * (regions[:, 3] - regions[:, 1])
    pick = rng.choice(len(regions), size=spec.count, p=areas / areas.sum())
    r = regions[pick]
    u = rng.uniform(size=(spec.count, 2))
    cx = r[:, 0] + u[:, 0] * (r[:, 2] - r[:, 0])
    cy = r[:, 1] + u[:, 1] * (r[:, 3] - r[:, 1])
    return np.column_stack([cx, cy]) * extent


def gen_hotspots(n: int, spec: HotspotSpec | None = None, seed=0, extent: float = SPACE_EXTENT):
    """Objects around hotspots; radial distance ~ |N(0, sigma)|, counts proportional to size.

    Returns ``(points, hotspot index per point)``.
    """
    spec = spec or HotspotSpec()
    rng = np.random.default_rng(seed)
    centers = hotspot_centers(spec, extent, rng)
    w = np.ones(spec.count) if spec.weights is None else spec.weights
    counts = rng.multinomial(n, w / w.sum())
    label = np.repeat(np.arange(spec.count), counts)
    sigma = spec.sigma * extent
    out = np.empty((n, 2))
    todo = np.arange(n)
    while len(todo):
        ang = rng.uniform(0, 2 * math.pi, len(todo))
        rad = np.abs(rng.normal(0.0, sigma, len(todo)))
        c = centers[label[todo]]
        p = c + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        ok = (p >= 0).all(1) & (p <= extent).all(1)
        out[todo[ok]] = p[ok]
        todo = todo[~ok]
    return out, label


def move_objects(objects, delta_range=(-100.0, 250.0), seed=0, extent: float = SPACE_EXTENT):
    lo, hi = delta_range
    if lo > hi:
        raise ValueError("delta_range must be (lo, hi) with lo <= hi")
    xy = np.asarray(objects, dtype=np.float64)
    rng = np.random.default_rng(seed)
    d = rng.uniform(lo, hi, size=xy.shape) if hi > lo else np.full(xy.shape, float(lo))
    return np.clip(xy + d, 0.0, extent)


def gen_cosine_patterns(
    p_count: int,
    buckets: int = 288,
    amplitude: float = 1.0,
    phases="random",
    seed=0,
    base: float | None = None,
) -> np.ndarray:
    """``base + amplitude * cos(2 pi t / B + phi_i)`` clipped at zero, one day per period.

    ``phases`` may be an array, ``"random"``, ``"antiphase"`` (alternating 0, pi)
    or ``"zero"``.
    """
    if buckets < 2:
        raise ValueError("buckets must be >= 2")
    rng = np.random.default_rng(seed)
    if isinstance(phases, str):
        if phases == "random":
            phi = rng.uniform(0, 2 * math.pi, p_count)
        elif phases == "antiphase":
            phi = np.where(np.arange(p_count) % 2 == 0, 0.0, math.pi)
        elif phases == "zero":
            phi = np.zeros(p_count)
        else:
            raise ValueError(f"unknown phase mode {phases!r}")
    else:
        phi = np.asarray(phases, dtype=float)
        if len(phi) != p_count:
            raise ValueError("one phase per pattern")
    if base is None:
        base = amplitude
    t = np.arange(buckets)
    a = base + amplitude * np.cos(2 * math.pi * t[None, :] / buckets + phi[:, None])
    return np.clip(a, 0.0, None)


def zipf_weights(m: int, sf: float) -> np.ndarray:
    w = 1.0 / np.arange(1, m + 1) ** sf
    return w / w.sum()


def gen_zipf_workload(p_count: int, buckets: int = 288, sf: float = 1.0, total_accesses: int = 10**6, seed=0):
    """Integer access counts; zipf over partitions and over time buckets, summing to ``total_accesses``."""
    if sf < 0:
        raise ValueError("sf must be >= 0")
    rng = np.random.default_rng(seed)
    wp = zipf_weights(p_count, sf)[rng.permutation(p_count)]
    wt = zipf_weights(buckets, sf)[rng.permutation(buckets)]
    cells = rng.multinomial(int(total_accesses), np.outer(wp, wt).ravel())
    return cells.reshape(p_count, buckets).astype(float)


@dataclass
class CheckIn:
    user: str
    time: datetime
    lat: float
    lon: float
    location: str


def load_checkins(path, amplification: int = 1) -> list[CheckIn]:
    events = []
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), 1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                user, ts, lat, lon, loc = (c.strip() for c in row)
                ev = CheckIn(user, datetime.fromisoformat(ts.replace("Z", "+00:00")), float(lat), float(lon), loc)
            except ValueError as e:
                raise ValueError(f"{path}:{lineno}: malformed check-in: {e}") from None
            events.extend([ev] * amplification)
    return events


def bucketize(events, buckets: int = 288) -> np.ndarray:
    """Counts per time-of-day bucket."""
    out = np.zeros(buckets, dtype=np.int64)
    per = 86400 / buckets
    for ev in events:
        t = ev.time
        sec = t.hour * 3600 + t.minute * 60 + t.second
        out[min(int(sec // per), buckets - 1)] += 1
    return out


def write_objects(path, xy, ids=None) -> None:
    xy = np.asarray(xy, dtype=np.float64)
    rec = np.empty(len(xy), dtype=OBJ_DTYPE)
    rec["id"] = np.arange(len(xy)) if ids is None else ids
    rec["x"], rec["y"] = xy[:, 0], xy[:, 1]
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["id", "x", "y"])
            for r in rec:
                w.writerow([int(r["id"]), repr(float(r["x"])), repr(float(r["y"]))])
    else:
        rec.tofile(path)


def read_objects(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if path.suffix == ".csv":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return data[:, 0].astype(np.int64), data[:, 1:3].copy()
    rec = np.fromfile(path, dtype=OBJ_DTYPE)
    return rec["id"].copy(), np.column_stack([rec["x"], rec["y"]])


def write_patterns(path, patterns) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["partition_id", "bucket_index", "count"])
        for i, row in enumerate(np.asarray(patterns)):
            for t, c in enumerate(row):
                w.writerow([i, t, repr(float(c))])


def read_patterns(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    p = int(data[:, 0].max()) + 1
    b = int(data[:, 1].max()) + 1
    out = np.zeros((p, b))
    out[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2]
    return out
