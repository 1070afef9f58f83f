import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import Delaunay

from voropart.zorder import (
    QMAX,
    bigmin,
    brute_region_scan,
    interleave,
    litmax,
    z_decode,
    z_encode,
    z_encode_array,
    z_neighbors,
    z_region_scan,
    z_scale_for,
)


def test_encode_examples():
    assert z_encode((0, 0)) == 0
    assert z_encode((1, 0)) == 1
    assert z_encode((0, 1)) == 2
    assert z_encode((2, 3)) == 14


def test_encode_out_of_extent():
    with pytest.raises(ValueError):
        z_encode((-1, 0))
    with pytest.raises(ValueError):
        z_encode((5, 11), extent=10)
    with pytest.raises(ValueError):
        z_encode((QMAX + 1, 0))


@given(st.integers(0, QMAX), st.integers(0, QMAX))
def test_roundtrip(x, y):
    assert z_decode(interleave(x, y)) == (x, y)


@given(st.integers(0, QMAX - 1), st.integers(0, QMAX))
def test_monotone_per_axis(x, y):
    assert interleave(x + 1, y) > interleave(x, y)
    assert interleave(y, x + 1) > interleave(y, x)


def test_array_matches_scalar():
    rng = np.random.default_rng(3)
    xy = rng.uniform(0, 1e6, (200, 2))
    s = z_scale_for(1e6)
    arr = z_encode_array(xy, s)
    assert [int(c) for c in arr] == [z_encode(p, s) for p in xy]


def test_neighbors():
    assert z_neighbors(10, 0, 3) == [1, 2, 3]
    assert set(z_neighbors(10, 5, 3)) == {2, 3, 4, 6, 7, 8}
    assert z_neighbors(10, 9, 3) == [6, 7, 8]
    with pytest.raises(ValueError):
        z_neighbors(10, 0, 0)


def _box_brute(zmin, zmax, pred):
    x0, y0 = z_decode(zmin)
    x1, y1 = z_decode(zmax)
    cands = [interleave(x, y) for x in range(x0, x1 + 1) for y in range(y0, y1 + 1)]
    cands = [c for c in cands if pred(c)]
    return cands


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 15), st.integers(0, 15), st.integers(0, 15), st.integers(0, 15), st.integers(0, 255))
def test_bigmin_litmax_bruteforce(a, b, c, d, z):
    x0, x1 = sorted((a, b))
    y0, y1 = sorted((c, d))
    zmin, zmax = interleave(x0, y0), interleave(x1, y1)
    if zmin < z < zmax:
        above = _box_brute(zmin, zmax, lambda v: v > z)
        below = _box_brute(zmin, zmax, lambda v: v < z)
        assert bigmin(z, zmin, zmax) == min(above)
        assert litmax(z, zmin, zmax) == max(below)


def _sorted_points(n, seed, extent=1000.0):
    xy = np.random.default_rng(seed).uniform(0, extent, (n, 2))
    s = z_scale_for(extent)
    codes = z_encode_array(xy, s)
    o = np.argsort(codes, kind="stable")
    return codes[o], xy[o], s


def test_region_scan_examples():
    codes, xy, s = _sorted_points(100, 0)
    assert z_region_scan(codes, xy, xy[17], 0.0, s) == [17]
    assert z_region_scan(codes, xy, (500, 500), 2000.0, s) == list(range(100))
    with pytest.raises(ValueError):
        z_region_scan(codes, xy, (1, 1), -1.0, s)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 1000), st.floats(0, 1000), st.floats(0, 400))
def test_region_scan_equals_bruteforce(seed, cx, cy, r):
    codes, xy, s = _sorted_points(100, seed)
    assert z_region_scan(codes, xy, (cx, cy), r, s) == brute_region_scan(xy, (cx, cy), r)


def test_locality_sanity():
    # an interior object shares at least one true neighbor with its 6 z-neighbors
    codes, xy, _ = _sorted_points(5000, 1, 1e6)
    ip, ind = Delaunay(xy).vertex_neighbor_vertices
    n, hit, tot = len(xy), 0, 0
    for i in range(n):
        if min(*xy[i], *(1e6 - xy[i])) < 5e4:
            continue
        tot += 1
        hit += bool(set(ind[ip[i]:ip[i + 1]]) & set(z_neighbors(n, i, 3)))
    assert hit / tot >= 0.70
