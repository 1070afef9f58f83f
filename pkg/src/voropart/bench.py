"""Timing of the compiled core against the pure-Python twin, and worker scaling."""

from __future__ import annotations

import hashlib
import os
import time

import numpy as np

from . import kernels
from .geometry import SPACE_EXTENT
from .local_index import build_cells_parallel, zsort
from .workload_gen import gen_uniform
from .zorder import z_scale_for


def lvd_inputs(n: int, seed=0, extent: float = SPACE_EXTENT):
    xy = gen_uniform(n, extent, seed)
    scale = z_scale_for(extent)
    order, codes = zsort(xy, scale)
    xy = np.ascontiguousarray(xy[order])
    return xy[:, 0].copy(), xy[:, 1].copy(), codes, np.arange(n, dtype=np.int64), scale


def digest(verts: np.ndarray, offsets: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(verts).tobytes())
    h.update(np.ascontiguousarray(offsets).tobytes())
    return h.hexdigest()[:16]


def _time(fn, repeat: int):
    best = float("inf")
    out = None
    for _ in range(max(1, repeat)):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def available_backends() -> list[str]:
    names = ["python"]
    try:
        kernels.load("cython")
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def bench_backends(n: int = 20_000, seed=0, repeat: int = 3, extent: float = SPACE_EXTENT,
                   python_n: int | None = None) -> list[dict]:
    """LVD cell build per backend; the slow backend may run on a prefix of the generators."""
    xs, ys, codes, gens, scale = lvd_inputs(n, seed, extent)
    rows = []
    for name in available_backends():
        m = n if name == "cython" or python_n is None else min(n, python_n)
        sec, (v, off) = _time(
            lambda: build_cells_parallel(xs, ys, codes, gens[:m], 3, extent, scale, True, 1, name), repeat
        )
        rows.append({"backend": name, "cells": m, "seconds": sec, "cells_per_s": m / sec, "digest": digest(v, off)})
    return rows


def bench_workers(n: int = 100_000, workers=(1, 2, 4), seed=0, repeat: int = 3,
                  extent: float = SPACE_EXTENT, backend: str | None = None) -> list[dict]:
    xs, ys, codes, gens, scale = lvd_inputs(n, seed, extent)
    rows = []
    base = None
    for w in workers:
        sec, (v, off) = _time(
            lambda: build_cells_parallel(xs, ys, codes, gens, 3, extent, scale, True, w, backend), repeat
        )
        base = sec if base is None else base
        rows.append({"workers": w, "seconds": sec, "speedup": base / sec, "digest": digest(v, off)})
    return rows


def cpu_count() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1
