# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: cell construction, influence-region probes, circle scans.

Mirrors ``_pykernels`` operation for operation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, fabs
from libc.stdlib cimport malloc, realloc, free
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef enum:
    MAXV = 512
cdef uint64_t QMAX = 0xFFFFFFFFULL
cdef uint64_t XM = 0x5555555555555555ULL
cdef uint64_t YM = 0xAAAAAAAAAAAAAAAAULL

MAX_VERTS = MAXV


class KernelError(RuntimeError):
    pass


cdef struct Poly:
    int n
    double x[MAXV]
    double y[MAXV]


cdef struct Buf:
    double *v
    int64_t n
    int64_t cap


cdef struct IBuf:
    int64_t *v
    int64_t n
    int64_t cap


cdef inline uint64_t part1by1(uint64_t v) noexcept nogil:
    v &= 0xFFFFFFFFULL
    v = (v | (v << 16)) & 0x0000FFFF0000FFFFULL
    v = (v | (v << 8)) & 0x00FF00FF00FF00FFULL
    v = (v | (v << 4)) & 0x0F0F0F0F0F0F0F0FULL
    v = (v | (v << 2)) & 0x3333333333333333ULL
    v = (v | (v << 1)) & 0x5555555555555555ULL
    return v


cdef inline uint64_t compact1by1(uint64_t v) noexcept nogil:
    v &= 0x5555555555555555ULL
    v = (v | (v >> 1)) & 0x3333333333333333ULL
    v = (v | (v >> 2)) & 0x0F0F0F0F0F0F0F0FULL
    v = (v | (v >> 4)) & 0x00FF00FF00FF00FFULL
    v = (v | (v >> 8)) & 0x0000FFFF0000FFFFULL
    v = (v | (v >> 16)) & 0x00000000FFFFFFFFULL
    return v


cdef inline uint64_t interleave(uint64_t qx, uint64_t qy) noexcept nogil:
    return part1by1(qx) | (part1by1(qy) << 1)


cdef inline uint64_t load1000(uint64_t z, int bit) noexcept nogil:
    cdef uint64_t one = (<uint64_t>1) << bit
    cdef uint64_t dim = XM if bit % 2 == 0 else YM
    cdef uint64_t lower = dim & (one - 1)
    return (z & ~(lower | one)) | one


cdef inline uint64_t load0111(uint64_t z, int bit) noexcept nogil:
    cdef uint64_t one = (<uint64_t>1) << bit
    cdef uint64_t dim = XM if bit % 2 == 0 else YM
    cdef uint64_t lower = dim & (one - 1)
    return (z & ~one) | lower


cdef uint64_t bigmin(uint64_t zval, uint64_t zmin, uint64_t zmax) noexcept nogil:
    cdef uint64_t result = 0
    cdef int bit
    cdef uint64_t v, lo, hi
    for bit in range(63, -1, -1):
        v = (zval >> bit) & 1
        lo = (zmin >> bit) & 1
        hi = (zmax >> bit) & 1
        if v == 0:
            if lo == 0 and hi == 1:
                result = load1000(zmin, bit)
                zmax = load0111(zmax, bit)
            elif lo == 1 and hi == 1:
                return zmin
        else:
            if lo == 0 and hi == 0:
                return result
            if lo == 0 and hi == 1:
                zmin = load1000(zmin, bit)
    return result


cdef inline int64_t lower_bound(const uint64_t[::1] codes, uint64_t key, int64_t lo) noexcept nogil:
    cdef int64_t hi = codes.shape[0]
    cdef int64_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if codes[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline uint64_t quant(double v, double scale) noexcept nogil:
    cdef double q = floor(v * scale)
    if q < 0:
        return 0
    if q > <double>QMAX:
        return QMAX
    return <uint64_t>q


cdef inline void push(Poly *p, double x, double y, double tol) noexcept nogil:
    if p.n > 0 and fabs(x - p.x[p.n - 1]) <= tol and fabs(y - p.y[p.n - 1]) <= tol:
        return
    if p.n < MAXV:
        p.x[p.n] = x
        p.y[p.n] = y
    p.n += 1


# 0: unchanged, 1: clipped, -1: excluded, -2: over capacity
cdef int clip(Poly *p, Poly *tmp, double qx, double qy, double tol) noexcept nogil:
    cdef double c = 0.5 * (qx * qx + qy * qy)
    cdef double lim = tol * sqrt(qx * qx + qy * qy)
    cdef double s[MAXV]
    cdef int n = p.n
    cdef int i, j
    cdef bint out = False, in0, in1
    cdef double s0, s1, t
    for i in range(n):
        s[i] = p.x[i] * qx + p.y[i] * qy - c
        if s[i] > lim:
            out = True
    if not out:
        return 0
    tmp.n = 0
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        s0 = s[i]
        s1 = s[j]
        in0 = s0 <= lim
        in1 = s1 <= lim
        if in0:
            push(tmp, p.x[i], p.y[i], tol)
        if in0 != in1:
            t = s0 / (s0 - s1) if s0 != s1 else 0.0
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            push(tmp, p.x[i] + t * (p.x[j] - p.x[i]), p.y[i] + t * (p.y[j] - p.y[i]), tol)
    if tmp.n > MAXV:
        return -2
    while tmp.n > 1 and fabs(tmp.x[0] - tmp.x[tmp.n - 1]) <= tol and fabs(tmp.y[0] - tmp.y[tmp.n - 1]) <= tol:
        tmp.n -= 1
    if tmp.n < 3:
        return -1
    p.n = tmp.n
    for i in range(tmp.n):
        p.x[i] = tmp.x[i]
        p.y[i] = tmp.y[i]
    return 1


cdef inline bint cuts(Poly *p, double qx, double qy, double tol) noexcept nogil:
    cdef double c = 0.5 * (qx * qx + qy * qy)
    cdef double lim = tol * sqrt(qx * qx + qy * qy)
    cdef int i
    for i in range(p.n):
        if p.x[i] * qx + p.y[i] * qy - c > lim:
            return True
    return False


cdef void qbox(Poly *p, double ox, double oy, double extent, double scale, uint64_t *b) noexcept nogil:
    cdef double x0 = 1e308, y0 = 1e308, x1 = -1e308, y1 = -1e308
    cdef double r, vx, vy
    cdef int i
    for i in range(p.n):
        r = sqrt(p.x[i] * p.x[i] + p.y[i] * p.y[i])
        vx = ox + p.x[i]
        vy = oy + p.y[i]
        if vx - r < x0:
            x0 = vx - r
        if vy - r < y0:
            y0 = vy - r
        if vx + r > x1:
            x1 = vx + r
        if vy + r > y1:
            y1 = vy + r
    if x0 < 0.0:
        x0 = 0.0
    if y0 < 0.0:
        y0 = 0.0
    if x1 > extent:
        x1 = extent
    if y1 > extent:
        y1 = extent
    b[0] = quant(x0, scale)
    b[1] = quant(y0, scale)
    b[2] = quant(x1, scale)
    b[3] = quant(y1, scale)


cdef int scan(Poly *p, Poly *tmp, double ox, double oy, int64_t gi,
              const uint64_t[::1] codes, const double[::1] xs, const double[::1] ys,
              double extent, double scale, double tol, uint64_t *b) noexcept nogil:
    cdef int64_t n = codes.shape[0]
    cdef uint64_t nb[4]
    cdef uint64_t zmin, zmax, c, cx, cy
    cdef int64_t pos
    cdef double qx, qy
    cdef int rc
    zmin = interleave(b[0], b[1])
    zmax = interleave(b[2], b[3])
    pos = lower_bound(codes, zmin, 0)
    while pos < n:
        c = codes[pos]
        if c > zmax:
            break
        if c < zmin:
            pos = lower_bound(codes, zmin, pos + 1)
            continue
        cx = compact1by1(c)
        cy = compact1by1(c >> 1)
        if b[0] <= cx <= b[2] and b[1] <= cy <= b[3]:
            if pos != gi:
                qx = xs[pos] - ox
                qy = ys[pos] - oy
                if qx != 0.0 or qy != 0.0:
                    rc = clip(p, tmp, qx, qy, tol)
                    if rc < 0:
                        return rc
                    if rc == 1:
                        qbox(p, ox, oy, extent, scale, nb)
                        if nb[0] > b[0]:
                            b[0] = nb[0]
                        if nb[1] > b[1]:
                            b[1] = nb[1]
                        if nb[2] < b[2]:
                            b[2] = nb[2]
                        if nb[3] < b[3]:
                            b[3] = nb[3]
                        zmin = interleave(b[0], b[1])
                        zmax = interleave(b[2], b[3])
            pos += 1
        else:
            pos = lower_bound(codes, bigmin(c, zmin, zmax), pos + 1)
    return 0


cdef int refine(Poly *p, Poly *tmp, double ox, double oy, int64_t gi,
                const uint64_t[::1] codes, const double[::1] xs, const double[::1] ys,
                double extent, double scale, double tol, double h) noexcept nogil:
    cdef uint64_t w[4]
    cdef uint64_t ib[4]
    cdef uint64_t b[4]
    cdef int rc
    while True:
        w[0] = quant(ox - h if ox - h > 0.0 else 0.0, scale)
        w[1] = quant(oy - h if oy - h > 0.0 else 0.0, scale)
        w[2] = quant(ox + h if ox + h < extent else extent, scale)
        w[3] = quant(oy + h if oy + h < extent else extent, scale)
        qbox(p, ox, oy, extent, scale, ib)
        b[0] = w[0] if w[0] > ib[0] else ib[0]
        b[1] = w[1] if w[1] > ib[1] else ib[1]
        b[2] = w[2] if w[2] < ib[2] else ib[2]
        b[3] = w[3] if w[3] < ib[3] else ib[3]
        if b[0] <= b[2] and b[1] <= b[3]:
            rc = scan(p, tmp, ox, oy, gi, codes, xs, ys, extent, scale, tol, b)
            if rc < 0:
                return rc
        qbox(p, ox, oy, extent, scale, ib)
        if w[0] <= ib[0] and w[1] <= ib[1] and ib[2] <= w[2] and ib[3] <= w[3]:
            return 0
        h = 2.0 * h


cdef int buf_put(Buf *buf, Poly *p, double ox, double oy) noexcept nogil:
    cdef int64_t need = buf.n + 2 * p.n
    cdef int64_t cap
    cdef double *nv
    cdef int i
    if need > buf.cap:
        cap = buf.cap * 2 if buf.cap > 0 else 1024
        while cap < need:
            cap *= 2
        nv = <double *>realloc(buf.v, cap * sizeof(double))
        if nv == NULL:
            return -3
        buf.v = nv
        buf.cap = cap
    for i in range(p.n):
        buf.v[buf.n] = ox + p.x[i]
        buf.v[buf.n + 1] = oy + p.y[i]
        buf.n += 2
    return 0


cdef int ibuf_put(IBuf *buf, int64_t x) noexcept nogil:
    cdef int64_t cap
    cdef int64_t *nv
    if buf.n + 1 > buf.cap:
        cap = buf.cap * 2 if buf.cap > 0 else 1024
        nv = <int64_t *>realloc(buf.v, cap * sizeof(int64_t))
        if nv == NULL:
            return -3
        buf.v = nv
        buf.cap = cap
    buf.v[buf.n] = x
    buf.n += 1
    return 0


cdef _raise(int rc):
    if rc == -1:
        raise KernelError("generator excluded")
    if rc == -2:
        raise KernelError("cell vertex capacity exceeded")
    raise MemoryError()


cdef _take(Buf *buf, cnp.ndarray offsets):
    cdef int64_t m = buf.n // 2
    verts = np.empty((m, 2), dtype=np.float64)
    cdef double[:, ::1] vv = verts
    cdef int64_t i
    for i in range(m):
        vv[i, 0] = buf.v[2 * i]
        vv[i, 1] = buf.v[2 * i + 1]
    return verts, offsets


def build_cells(xs, ys, codes, gens, int k, double extent, double eps, double scale, bint refine_cells=True):
    cdef const double[::1] X = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] Y = np.ascontiguousarray(ys, dtype=np.float64)
    cdef const uint64_t[::1] C = np.ascontiguousarray(codes, dtype=np.uint64)
    cdef const int64_t[::1] G = np.ascontiguousarray(gens, dtype=np.int64)
    cdef int64_t ng = G.shape[0], n = X.shape[0]
    offsets = np.zeros(ng + 1, dtype=np.int64)
    cdef int64_t[::1] off = offsets
    cdef Poly *p = <Poly *>malloc(sizeof(Poly))
    cdef Poly *tmp = <Poly *>malloc(sizeof(Poly))
    cdef Buf buf
    cdef int64_t g, gi, j, lo, hi
    cdef double ox, oy, qx, qy, h, d
    cdef int rc = 0
    buf.v = NULL
    buf.n = 0
    buf.cap = 0
    if p == NULL or tmp == NULL:
        free(p)
        free(tmp)
        raise MemoryError()
    try:
        with nogil:
            for g in range(ng):
                gi = G[g]
                ox = X[gi]
                oy = Y[gi]
                p.n = 4
                p.x[0] = -ox
                p.x[1] = extent - ox
                p.x[2] = extent - ox
                p.x[3] = -ox
                p.y[0] = -oy
                p.y[1] = -oy
                p.y[2] = extent - oy
                p.y[3] = extent - oy
                lo = gi - k if gi - k > 0 else 0
                hi = gi + k + 1 if gi + k + 1 < n else n
                h = extent
                for j in range(lo, hi):
                    if j == gi:
                        continue
                    qx = X[j] - ox
                    qy = Y[j] - oy
                    if qx == 0.0 and qy == 0.0:
                        continue
                    d = 2.0 * sqrt(qx * qx + qy * qy)
                    if d < h:
                        h = d
                    rc = clip(p, tmp, qx, qy, eps)
                    if rc < 0:
                        break
                if rc < 0:
                    break
                if refine_cells:
                    rc = refine(p, tmp, ox, oy, gi, C, X, Y, extent, scale, eps, h)
                    if rc < 0:
                        break
                rc = buf_put(&buf, p, ox, oy)
                if rc < 0:
                    break
                off[g + 1] = buf.n // 2
        if rc < 0:
            _raise(rc)
        return _take(&buf, offsets)
    finally:
        free(p)
        free(tmp)
        free(buf.v)


def clip_cells(verts, offsets, gx, gy, px, py, poffsets, double eps):
    cdef const double[:, ::1] V = np.ascontiguousarray(verts, dtype=np.float64).reshape(-1, 2)
    cdef const int64_t[::1] O = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[::1] GX = np.ascontiguousarray(gx, dtype=np.float64)
    cdef const double[::1] GY = np.ascontiguousarray(gy, dtype=np.float64)
    cdef const double[::1] PX = np.ascontiguousarray(px, dtype=np.float64)
    cdef const double[::1] PY = np.ascontiguousarray(py, dtype=np.float64)
    cdef const int64_t[::1] PO = np.ascontiguousarray(poffsets, dtype=np.int64)
    cdef int64_t nc = O.shape[0] - 1
    out_off = np.zeros(nc + 1, dtype=np.int64)
    cdef int64_t[::1] off = out_off
    cdef Poly *p = <Poly *>malloc(sizeof(Poly))
    cdef Poly *tmp = <Poly *>malloc(sizeof(Poly))
    cdef Buf buf
    cdef int64_t i, j, a
    cdef double ox, oy, qx, qy
    cdef int rc = 0
    buf.v = NULL
    buf.n = 0
    buf.cap = 0
    if p == NULL or tmp == NULL:
        free(p)
        free(tmp)
        raise MemoryError()
    try:
        with nogil:
            for i in range(nc):
                ox = GX[i]
                oy = GY[i]
                if O[i + 1] - O[i] > MAXV:
                    rc = -2
                    break
                p.n = <int>(O[i + 1] - O[i])
                for a in range(O[i], O[i + 1]):
                    p.x[a - O[i]] = V[a, 0] - ox
                    p.y[a - O[i]] = V[a, 1] - oy
                for j in range(PO[i], PO[i + 1]):
                    qx = PX[j] - ox
                    qy = PY[j] - oy
                    if qx == 0.0 and qy == 0.0:
                        continue
                    rc = clip(p, tmp, qx, qy, eps)
                    if rc < 0:
                        break
                if rc < 0:
                    break
                rc = buf_put(&buf, p, ox, oy)
                if rc < 0:
                    break
                off[i + 1] = buf.n // 2
        if rc < 0:
            _raise(rc)
        return _take(&buf, out_off)
    finally:
        free(p)
        free(tmp)
        free(buf.v)


def ir_query(codes, xs, ys, double scale, double extent, verts, offsets, gx, gy, double eps):
    cdef const uint64_t[::1] C = np.ascontiguousarray(codes, dtype=np.uint64)
    cdef const double[::1] X = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] Y = np.ascontiguousarray(ys, dtype=np.float64)
    cdef const double[:, ::1] V = np.ascontiguousarray(verts, dtype=np.float64).reshape(-1, 2)
    cdef const int64_t[::1] O = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[::1] GX = np.ascontiguousarray(gx, dtype=np.float64)
    cdef const double[::1] GY = np.ascontiguousarray(gy, dtype=np.float64)
    cdef int64_t nc = O.shape[0] - 1, n = C.shape[0]
    out_off = np.zeros(nc + 1, dtype=np.int64)
    cdef int64_t[::1] off = out_off
    cdef Poly *p = <Poly *>malloc(sizeof(Poly))
    cdef IBuf buf
    cdef uint64_t b[4]
    cdef uint64_t zmin, zmax, c, cx, cy
    cdef int64_t i, a, pos
    cdef double ox, oy, qx, qy
    cdef int rc = 0
    buf.v = NULL
    buf.n = 0
    buf.cap = 0
    if p == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(nc):
                ox = GX[i]
                oy = GY[i]
                if O[i + 1] - O[i] > MAXV:
                    rc = -2
                    break
                p.n = <int>(O[i + 1] - O[i])
                for a in range(O[i], O[i + 1]):
                    p.x[a - O[i]] = V[a, 0] - ox
                    p.y[a - O[i]] = V[a, 1] - oy
                qbox(p, ox, oy, extent, scale, b)
                zmin = interleave(b[0], b[1])
                zmax = interleave(b[2], b[3])
                pos = lower_bound(C, zmin, 0)
                while pos < n:
                    c = C[pos]
                    if c > zmax:
                        break
                    cx = compact1by1(c)
                    cy = compact1by1(c >> 1)
                    if b[0] <= cx <= b[2] and b[1] <= cy <= b[3]:
                        qx = X[pos] - ox
                        qy = Y[pos] - oy
                        if (qx != 0.0 or qy != 0.0) and cuts(p, qx, qy, eps):
                            rc = ibuf_put(&buf, pos)
                            if rc < 0:
                                break
                        pos += 1
                    else:
                        pos = lower_bound(C, bigmin(c, zmin, zmax), pos + 1)
                if rc < 0:
                    break
                off[i + 1] = buf.n
        if rc < 0:
            _raise(rc)
        found = np.empty(buf.n, dtype=np.int64)
        if buf.n:
            found[:] = <int64_t[:buf.n]>buf.v
        return found, out_off
    finally:
        free(p)
        free(buf.v)


cdef int64_t circle_scan(const uint64_t[::1] C, const double[::1] X, const double[::1] Y,
                         double scale, double cx, double cy, double r, IBuf *buf) noexcept nogil:
    cdef int64_t n = C.shape[0]
    cdef uint64_t bx0 = quant(cx - r if cx - r > 0.0 else 0.0, scale)
    cdef uint64_t by0 = quant(cy - r if cy - r > 0.0 else 0.0, scale)
    cdef uint64_t bx1 = quant(cx + r, scale)
    cdef uint64_t by1 = quant(cy + r, scale)
    cdef uint64_t zmin = interleave(bx0, by0), zmax = interleave(bx1, by1)
    cdef uint64_t c, zx, zy
    cdef double r2 = r * r, dx, dy
    cdef int64_t pos = lower_bound(C, zmin, 0)
    cdef int64_t count = 0
    while pos < n:
        c = C[pos]
        if c > zmax:
            break
        zx = compact1by1(c)
        zy = compact1by1(c >> 1)
        if bx0 <= zx <= bx1 and by0 <= zy <= by1:
            dx = X[pos] - cx
            dy = Y[pos] - cy
            if dx * dx + dy * dy <= r2:
                count += 1
                if buf != NULL:
                    if ibuf_put(buf, pos) < 0:
                        return -1
            pos += 1
        else:
            pos = lower_bound(C, bigmin(c, zmin, zmax), pos + 1)
    return count


def circle_query(codes, xs, ys, double scale, double cx, double cy, double r):
    cdef const uint64_t[::1] C = np.ascontiguousarray(codes, dtype=np.uint64)
    cdef const double[::1] X = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] Y = np.ascontiguousarray(ys, dtype=np.float64)
    cdef IBuf buf
    cdef int64_t rc
    buf.v = NULL
    buf.n = 0
    buf.cap = 0
    try:
        with nogil:
            rc = circle_scan(C, X, Y, scale, cx, cy, r, &buf)
        if rc < 0:
            raise MemoryError()
        out = np.empty(buf.n, dtype=np.int64)
        if buf.n:
            out[:] = <int64_t[:buf.n]>buf.v
        return out
    finally:
        free(buf.v)


def circle_count(codes, xs, ys, double scale, double cx, double cy, double r):
    cdef const uint64_t[::1] C = np.ascontiguousarray(codes, dtype=np.uint64)
    cdef const double[::1] X = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] Y = np.ascontiguousarray(ys, dtype=np.float64)
    cdef int64_t rc
    with nogil:
        rc = circle_scan(C, X, Y, scale, cx, cy, r, NULL)
    return int(rc)


def circle_count_many(codes, xs, ys, double scale, cxs, cys, double r):
    """Counts for many centres with one radius; used by kNN radius growth."""
    cdef const uint64_t[::1] C = np.ascontiguousarray(codes, dtype=np.uint64)
    cdef const double[::1] X = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] Y = np.ascontiguousarray(ys, dtype=np.float64)
    cdef const double[::1] CX = np.ascontiguousarray(cxs, dtype=np.float64)
    cdef const double[::1] CY = np.ascontiguousarray(cys, dtype=np.float64)
    cdef int64_t m = CX.shape[0], i
    out = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] o = out
    with nogil:
        for i in range(m):
            o[i] = circle_scan(C, X, Y, scale, CX[i], CY[i], r, NULL)
    return out


def pair_flatness(a, d, rows, cols):
    """delta (sequential sum of |d_r + d_c|) and peak of a_r + a_c for every (row, col)."""
    cdef const double[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] D = np.ascontiguousarray(d, dtype=np.float64)
    cdef const int64_t[::1] R = np.ascontiguousarray(rows, dtype=np.int64)
    cdef const int64_t[::1] Cc = np.ascontiguousarray(cols, dtype=np.int64)
    cdef Py_ssize_t nr = R.shape[0], nc = Cc.shape[0], b = A.shape[1], bd = D.shape[1]
    delta = np.empty((nr, nc), dtype=np.float64)
    peak = np.empty((nr, nc), dtype=np.float64)
    cdef double[:, ::1] DL = delta
    cdef double[:, ::1] PK = peak
    cdef Py_ssize_t x, y, t
    cdef int64_t r, c
    cdef double s, m, v
    with nogil:
        for x in range(nr):
            r = R[x]
            for y in range(nc):
                c = Cc[y]
                s = 0.0
                for t in range(bd):
                    s = s + fabs(D[r, t] + D[c, t])
                m = A[r, 0] + A[c, 0]
                for t in range(1, b):
                    v = A[r, t] + A[c, t]
                    if v > m:
                        m = v
                DL[x, y] = s
                PK[x, y] = m
    return delta, peak
