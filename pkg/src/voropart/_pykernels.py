"""Pure-Python twin of ``_kernels.pyx``.

Same arithmetic in the same order, so results match the compiled module on
any platform without fused multiply-add contraction.  Used when the
extension is not built or when ``VOROPART_BACKEND=python``.
"""

from __future__ import annotations

import bisect
import math

import numpy as np

from .zorder import QMAX, bigmin, interleave, z_decode

MAX_VERTS = 512


class KernelError(RuntimeError):
    pass


def _clip(px, py, qx, qy, tol):
    c = 0.5 * (qx * qx + qy * qy)
    lim = tol * math.sqrt(qx * qx + qy * qy)
    n = len(px)
    s = [px[i] * qx + py[i] * qy - c for i in range(n)]
    out = False
    for v in s:
        if v > lim:
            out = True
            break
    if not out:
        return None
    ox, oy = [], []
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        s0, s1 = s[i], s[j]
        in0 = s0 <= lim
        in1 = s1 <= lim
        if in0:
            _push(ox, oy, px[i], py[i], tol)
        if in0 != in1:
            t = s0 / (s0 - s1) if s0 != s1 else 0.0
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            _push(ox, oy, px[i] + t * (px[j] - px[i]), py[i] + t * (py[j] - py[i]), tol)
    if len(ox) > MAX_VERTS:
        raise KernelError("cell vertex capacity exceeded")
    while len(ox) > 1 and abs(ox[0] - ox[-1]) <= tol and abs(oy[0] - oy[-1]) <= tol:
        ox.pop()
        oy.pop()
    if len(ox) < 3:
        raise KernelError("generator excluded")
    return ox, oy


def _push(ox, oy, x, y, tol):
    if ox and abs(x - ox[-1]) <= tol and abs(y - oy[-1]) <= tol:
        return
    ox.append(x)
    oy.append(y)


def _qbox(px, py, ox, oy, extent, scale):
    x0 = y0 = math.inf
    x1 = y1 = -math.inf
    for i in range(len(px)):
        r = math.sqrt(px[i] * px[i] + py[i] * py[i])
        vx = ox + px[i]
        vy = oy + py[i]
        x0 = min(x0, vx - r)
        y0 = min(y0, vy - r)
        x1 = max(x1, vx + r)
        y1 = max(y1, vy + r)
    x0, y0 = max(x0, 0.0), max(y0, 0.0)
    x1, y1 = min(x1, extent), min(y1, extent)
    return _q(x0, scale), _q(y0, scale), _q(x1, scale), _q(y1, scale)


def _q(v, scale):
    q = math.floor(v * scale)
    return 0 if q < 0 else (QMAX if q > QMAX else q)


def _scan(px, py, ox, oy, gi, codes, xs, ys, extent, scale, tol, b):
    """Clip by every point whose grid cell lies in box ``b``; ``b`` shrinks with the IR box."""
    n = len(codes)
    bx0, by0, bx1, by1 = b
    zmin, zmax = interleave(bx0, by0), interleave(bx1, by1)
    pos = bisect.bisect_left(codes, zmin)
    while pos < n:
        c = codes[pos]
        if c > zmax:
            break
        if c < zmin:
            pos = bisect.bisect_left(codes, zmin, pos + 1)
            continue
        cx, cy = z_decode(c)
        if bx0 <= cx <= bx1 and by0 <= cy <= by1:
            if pos != gi:
                qx = xs[pos] - ox
                qy = ys[pos] - oy
                if qx != 0.0 or qy != 0.0:
                    res = _clip(px, py, qx, qy, tol)
                    if res is not None:
                        px, py = res
                        nx0, ny0, nx1, ny1 = _qbox(px, py, ox, oy, extent, scale)
                        bx0, by0 = max(bx0, nx0), max(by0, ny0)
                        bx1, by1 = min(bx1, nx1), min(by1, ny1)
                        zmin, zmax = interleave(bx0, by0), interleave(bx1, by1)
            pos += 1
        else:
            nxt = bigmin(c, zmin, zmax)
            pos = bisect.bisect_left(codes, nxt, pos + 1)
    return px, py


def _refine(px, py, ox, oy, gi, codes, xs, ys, extent, scale, tol, h):
    """Scan a window of half-size ``h`` around the generator, doubling it until the IR box fits."""
    while True:
        w = (_q(max(ox - h, 0.0), scale), _q(max(oy - h, 0.0), scale),
             _q(min(ox + h, extent), scale), _q(min(oy + h, extent), scale))
        ib = _qbox(px, py, ox, oy, extent, scale)
        b = (max(w[0], ib[0]), max(w[1], ib[1]), min(w[2], ib[2]), min(w[3], ib[3]))
        if b[0] <= b[2] and b[1] <= b[3]:
            px, py = _scan(px, py, ox, oy, gi, codes, xs, ys, extent, scale, tol, b)
        ib = _qbox(px, py, ox, oy, extent, scale)
        if w[0] <= ib[0] and w[1] <= ib[1] and ib[2] <= w[2] and ib[3] <= w[3]:
            return px, py
        h = 2.0 * h


def _finish(cells, n_gens):
    offsets = np.zeros(n_gens + 1, dtype=np.int64)
    total = 0
    for i, (vx, vy) in enumerate(cells):
        total += len(vx)
        offsets[i + 1] = total
    verts = np.empty((total, 2), dtype=np.float64)
    at = 0
    for vx, vy in cells:
        m = len(vx)
        verts[at : at + m, 0] = vx
        verts[at : at + m, 1] = vy
        at += m
    return verts, offsets


def build_cells(xs, ys, codes, gens, k, extent, eps, scale, refine_cells=True):
    """Cells for generators at positions ``gens`` of the z-sorted arrays."""
    xs_l = np.asarray(xs, dtype=np.float64).tolist()
    ys_l = np.asarray(ys, dtype=np.float64).tolist()
    codes_l = [int(c) for c in np.asarray(codes, dtype=np.uint64)]
    n = len(xs_l)
    cells = []
    for gi in np.asarray(gens, dtype=np.int64).tolist():
        ox, oy = xs_l[gi], ys_l[gi]
        px = [-ox, extent - ox, extent - ox, -ox]
        py = [-oy, -oy, extent - oy, extent - oy]
        h = extent
        for j in range(max(0, gi - k), min(n, gi + k + 1)):
            if j == gi:
                continue
            qx = xs_l[j] - ox
            qy = ys_l[j] - oy
            if qx == 0.0 and qy == 0.0:
                continue
            d = 2.0 * math.sqrt(qx * qx + qy * qy)
            if d < h:
                h = d
            res = _clip(px, py, qx, qy, eps)
            if res is not None:
                px, py = res
        if refine_cells:
            px, py = _refine(px, py, ox, oy, gi, codes_l, xs_l, ys_l, extent, scale, eps, h)
        cells.append(([ox + v for v in px], [oy + v for v in py]))
    return _finish(cells, len(cells))


def clip_cells(verts, offsets, gx, gy, px, py, poffsets, eps):
    """Clip cell ``i`` by the bisectors against points ``poffsets[i]:poffsets[i+1]``."""
    verts = np.asarray(verts, dtype=np.float64)
    cells = []
    for i in range(len(offsets) - 1):
        ox, oy = float(gx[i]), float(gy[i])
        a, b = int(offsets[i]), int(offsets[i + 1])
        vx = [float(v) - ox for v in verts[a:b, 0]]
        vy = [float(v) - oy for v in verts[a:b, 1]]
        for j in range(int(poffsets[i]), int(poffsets[i + 1])):
            qx = float(px[j]) - ox
            qy = float(py[j]) - oy
            if qx == 0.0 and qy == 0.0:
                continue
            res = _clip(vx, vy, qx, qy, eps)
            if res is not None:
                vx, vy = res
        cells.append(([ox + v for v in vx], [oy + v for v in vy]))
    return _finish(cells, len(cells))


def _cuts(px, py, qx, qy, tol):
    c = 0.5 * (qx * qx + qy * qy)
    lim = tol * math.sqrt(qx * qx + qy * qy)
    for i in range(len(px)):
        if px[i] * qx + py[i] * qy - c > lim:
            return True
    return False


def ir_query(codes, xs, ys, scale, extent, verts, offsets, gx, gy, eps):
    """For each cell, positions of points that would cut it (inside its influence region)."""
    codes_l = [int(c) for c in np.asarray(codes, dtype=np.uint64)]
    xs_l = np.asarray(xs, dtype=np.float64).tolist()
    ys_l = np.asarray(ys, dtype=np.float64).tolist()
    verts = np.asarray(verts, dtype=np.float64)
    found: list[int] = []
    out_off = [0]
    n = len(codes_l)
    for i in range(len(offsets) - 1):
        ox, oy = float(gx[i]), float(gy[i])
        a, b = int(offsets[i]), int(offsets[i + 1])
        vx = [float(v) - ox for v in verts[a:b, 0]]
        vy = [float(v) - oy for v in verts[a:b, 1]]
        bx0, by0, bx1, by1 = _qbox(vx, vy, ox, oy, extent, scale)
        zmin, zmax = interleave(bx0, by0), interleave(bx1, by1)
        pos = bisect.bisect_left(codes_l, zmin)
        while pos < n:
            c = codes_l[pos]
            if c > zmax:
                break
            cx, cy = z_decode(c)
            if bx0 <= cx <= bx1 and by0 <= cy <= by1:
                qx = xs_l[pos] - ox
                qy = ys_l[pos] - oy
                if (qx != 0.0 or qy != 0.0) and _cuts(vx, vy, qx, qy, eps):
                    found.append(pos)
                pos += 1
            else:
                pos = bisect.bisect_left(codes_l, bigmin(c, zmin, zmax), pos + 1)
        out_off.append(len(found))
    return np.asarray(found, dtype=np.int64), np.asarray(out_off, dtype=np.int64)


def _circle_scan(codes, xs, ys, scale, cx, cy, r, collect):
    n = len(codes)
    bx0, by0 = _q(max(cx - r, 0.0), scale), _q(max(cy - r, 0.0), scale)
    bx1, by1 = _q(cx + r, scale), _q(cy + r, scale)
    zmin, zmax = interleave(bx0, by0), interleave(bx1, by1)
    r2 = r * r
    pos = int(np.searchsorted(codes, np.uint64(zmin), side="left"))
    hits = []
    count = 0
    while pos < n:
        c = int(codes[pos])
        if c > zmax:
            break
        zx, zy = z_decode(c)
        if bx0 <= zx <= bx1 and by0 <= zy <= by1:
            dx = float(xs[pos]) - cx
            dy = float(ys[pos]) - cy
            if dx * dx + dy * dy <= r2:
                count += 1
                if collect:
                    hits.append(pos)
            pos += 1
        else:
            pos = int(np.searchsorted(codes, np.uint64(bigmin(c, zmin, zmax)), side="left"))
    return hits, count


def circle_query(codes, xs, ys, scale, cx, cy, r):
    hits, _ = _circle_scan(codes, xs, ys, scale, float(cx), float(cy), float(r), True)
    return np.asarray(hits, dtype=np.int64)


def circle_count(codes, xs, ys, scale, cx, cy, r):
    _, count = _circle_scan(codes, xs, ys, scale, float(cx), float(cy), float(r), False)
    return count


def circle_count_many(codes, xs, ys, scale, cxs, cys, r):
    return np.asarray(
        [circle_count(codes, xs, ys, scale, cx, cy, r) for cx, cy in zip(cxs, cys)],
        dtype=np.int64,
    )


def pair_flatness(a, d, rows, cols, chunk=4):
    a = np.asarray(a, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    delta = np.empty((len(rows), len(cols)))
    peak = np.empty((len(rows), len(cols)))
    ac, dc = a[cols], d[cols]
    for s in range(0, len(rows), chunk):
        r = rows[s:s + chunk]
        # cumsum is sequential, matching the compiled loop bit for bit
        delta[s:s + chunk] = np.cumsum(np.abs(d[r][:, None, :] + dc[None, :, :]), axis=2)[:, :, -1]
        peak[s:s + chunk] = (a[r][:, None, :] + ac[None, :, :]).max(axis=2)
    return delta, peak
