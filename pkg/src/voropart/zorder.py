"""Morton (Z-order) codes over a 32-bit-per-axis grid.

x occupies the even bit positions and y the odd ones.  Box scans over a
z-sorted array skip runs outside the box with BIGMIN.
"""

from __future__ import annotations

import math

import numpy as np

BITS = 32
QMAX = (1 << BITS) - 1
_MASK64 = (1 << 64) - 1
X_MASK = 0x5555555555555555
Y_MASK = 0xAAAAAAAAAAAAAAAA


def z_scale_for(extent: float) -> float:
    """Largest power-of-two grid scale that keeps ``extent`` inside 32 bits."""
    if extent <= 0:
        raise ValueError("extent must be positive")
    return 2.0 ** math.floor(math.log2(QMAX / extent))


def quantize(v: float, scale: float = 1.0) -> int:
    q = math.floor(v * scale)
    return min(max(q, 0), QMAX)


def _part1by1(v: int) -> int:
    v &= 0xFFFFFFFF
    v = (v | (v << 16)) & 0x0000FFFF0000FFFF
    v = (v | (v << 8)) & 0x00FF00FF00FF00FF
    v = (v | (v << 4)) & 0x0F0F0F0F0F0F0F0F
    v = (v | (v << 2)) & 0x3333333333333333
    v = (v | (v << 1)) & 0x5555555555555555
    return v


def _compact1by1(v: int) -> int:
    v &= 0x5555555555555555
    v = (v | (v >> 1)) & 0x3333333333333333
    v = (v | (v >> 2)) & 0x0F0F0F0F0F0F0F0F
    v = (v | (v >> 4)) & 0x00FF00FF00FF00FF
    v = (v | (v >> 8)) & 0x0000FFFF0000FFFF
    v = (v | (v >> 16)) & 0x00000000FFFFFFFF
    return v


def interleave(qx: int, qy: int) -> int:
    return _part1by1(qx) | (_part1by1(qy) << 1)


def z_encode(p, scale: float = 1.0, extent: float | None = None) -> int:
    """Z-value of a point; coordinates are floored onto the grid after scaling."""
    x, y = p
    if x < 0 or y < 0 or (extent is not None and (x > extent or y > extent)):
        raise ValueError(f"coordinate out of extent: {p}")
    qx, qy = math.floor(x * scale), math.floor(y * scale)
    if qx > QMAX or qy > QMAX:
        raise ValueError(f"coordinate out of extent: {p}")
    return interleave(qx, qy)


def z_decode(code: int) -> tuple[int, int]:
    return _compact1by1(code), _compact1by1(code >> 1)


def _np_part1by1(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.uint64) & np.uint64(0xFFFFFFFF)
    for shift, mask in (
        (16, 0x0000FFFF0000FFFF),
        (8, 0x00FF00FF00FF00FF),
        (4, 0x0F0F0F0F0F0F0F0F),
        (2, 0x3333333333333333),
        (1, 0x5555555555555555),
    ):
        v = (v | (v << np.uint64(shift))) & np.uint64(mask)
    return v


def quantize_array(xy: np.ndarray, scale: float) -> np.ndarray:
    q = np.floor(np.asarray(xy, dtype=np.float64) * scale)
    return np.clip(q, 0, QMAX).astype(np.uint64)


def z_encode_array(xy: np.ndarray, scale: float = 1.0) -> np.ndarray:
    q = quantize_array(xy, scale)
    return _np_part1by1(q[:, 0]) | (_np_part1by1(q[:, 1]) << np.uint64(1))


def z_neighbors(n: int, i: int, k: int = 3) -> list[int]:
    """Positions of the ``k`` predecessors and successors of ``i`` in a sorted run of ``n``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    lo, hi = max(0, i - k), min(n, i + k + 1)
    return [j for j in range(lo, hi) if j != i]


def _load_1000(z: int, bit: int) -> int:
    dim = X_MASK if bit % 2 == 0 else Y_MASK
    lower = dim & ((1 << bit) - 1)
    return (z & ~(lower | (1 << bit)) & _MASK64) | (1 << bit)


def _load_0111(z: int, bit: int) -> int:
    dim = X_MASK if bit % 2 == 0 else Y_MASK
    lower = dim & ((1 << bit) - 1)
    return (z & ~(1 << bit) & _MASK64) | lower


def bigmin(zval: int, zmin: int, zmax: int) -> int:
    """Smallest z-value inside the box ``[zmin, zmax]`` that is greater than ``zval``."""
    result = 0
    for bit in range(2 * BITS - 1, -1, -1):
        v = (zval >> bit) & 1
        lo = (zmin >> bit) & 1
        hi = (zmax >> bit) & 1
        if v == 0:
            if lo == 0 and hi == 1:
                result = _load_1000(zmin, bit)
                zmax = _load_0111(zmax, bit)
            elif lo == 1 and hi == 1:
                return zmin
        else:
            if lo == 0 and hi == 0:
                return result
            if lo == 0 and hi == 1:
                zmin = _load_1000(zmin, bit)
    return result


def litmax(zval: int, zmin: int, zmax: int) -> int:
    """Largest z-value inside the box ``[zmin, zmax]`` that is smaller than ``zval``."""
    result = 0
    for bit in range(2 * BITS - 1, -1, -1):
        v = (zval >> bit) & 1
        lo = (zmin >> bit) & 1
        hi = (zmax >> bit) & 1
        if v == 0:
            if lo == 0 and hi == 1:
                zmax = _load_0111(zmax, bit)
            elif lo == 1 and hi == 1:
                return result
        else:
            if lo == 0 and hi == 0:
                return zmax
            if lo == 0 and hi == 1:
                result = _load_0111(zmax, bit)
                zmin = _load_1000(zmin, bit)
    return result


def in_box(code: int, qx0: int, qy0: int, qx1: int, qy1: int) -> bool:
    x, y = z_decode(code)
    return qx0 <= x <= qx1 and qy0 <= y <= qy1


def z_box_scan(codes: np.ndarray, qx0: int, qy0: int, qx1: int, qy1: int) -> list[int]:
    """Positions of sorted ``codes`` that fall in the grid box, skipping gaps with BIGMIN."""
    zmin, zmax = interleave(qx0, qy0), interleave(qx1, qy1)
    n = len(codes)
    pos = int(np.searchsorted(codes, np.uint64(zmin), side="left"))
    found = []
    while pos < n:
        c = int(codes[pos])
        if c > zmax:
            break
        if in_box(c, qx0, qy0, qx1, qy1):
            found.append(pos)
            pos += 1
        else:
            nxt = bigmin(c, zmin, zmax)
            pos = int(np.searchsorted(codes, np.uint64(nxt), side="left"))
    return found


def z_region_scan(
    codes: np.ndarray, xy: np.ndarray, center, radius: float, scale: float = 1.0
) -> list[int]:
    """Positions of z-sorted points within ``radius`` of ``center`` (boundary inclusive)."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    cx, cy = center
    qx0 = quantize(max(cx - radius, 0.0), scale)
    qy0 = quantize(max(cy - radius, 0.0), scale)
    qx1 = quantize(cx + radius, scale)
    qy1 = quantize(cy + radius, scale)
    r2 = radius * radius
    out = []
    for pos in z_box_scan(codes, qx0, qy0, qx1, qy1):
        dx = xy[pos, 0] - cx
        dy = xy[pos, 1] - cy
        if dx * dx + dy * dy <= r2:
            out.append(pos)
    return out


def brute_region_scan(xy: np.ndarray, center, radius: float) -> list[int]:
    d2 = ((np.asarray(xy) - np.asarray(center, dtype=float)) ** 2).sum(axis=1)
    return [int(i) for i in np.nonzero(d2 <= radius * radius)[0]]
