import numpy as np
import pytest

from voropart import kernels
from voropart.bench import available_backends, bench_backends, bench_workers, digest, lvd_inputs
from voropart.local_index import build_cells_parallel

pytestmark = pytest.mark.skipif("cython" not in available_backends(), reason="compiled core not built")

cy = kernels.load("cython") if "cython" in available_backends() else None
py = kernels.load("python")


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.load("fortran")


@pytest.mark.parametrize("refine", [True, False])
def test_build_cells_parity(refine):
    xs, ys, codes, gens, scale = lvd_inputs(600, 1, 1e6)
    a = cy.build_cells(xs, ys, codes, gens, 3, 1e6, 1e-3, scale, refine)
    b = py.build_cells(xs, ys, codes, gens, 3, 1e6, 1e-3, scale, refine)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_queries_parity():
    xs, ys, codes, gens, scale = lvd_inputs(2000, 2, 1e6)
    rng = np.random.default_rng(0)
    for _ in range(30):
        cx, cy_, r = *rng.uniform(0, 1e6, 2), rng.uniform(0, 1e5)
        assert np.array_equal(cy.circle_query(codes, xs, ys, scale, cx, cy_, r),
                              py.circle_query(codes, xs, ys, scale, cx, cy_, r))
        assert cy.circle_count(codes, xs, ys, scale, cx, cy_, r) == py.circle_count(codes, xs, ys, scale, cx, cy_, r)
    cxs, cys = rng.uniform(0, 1e6, (2, 40))
    assert np.array_equal(cy.circle_count_many(codes, xs, ys, scale, cxs, cys, 5e4),
                          py.circle_count_many(codes, xs, ys, scale, cxs, cys, 5e4))


def test_ir_and_clip_parity():
    xs, ys, codes, gens, scale = lvd_inputs(1500, 3, 1e6)
    half = gens[: len(gens) // 2]
    v, off = cy.build_cells(xs, ys, codes, half, 3, 1e6, 1e-3, scale, True)
    gx, gy = xs[half], ys[half]
    a = cy.ir_query(codes, xs, ys, scale, 1e6, v, off, gx, gy, 1e-3)
    b = py.ir_query(codes, xs, ys, scale, 1e6, v, off, gx, gy, 1e-3)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    found, foff = a
    px, py_ = xs[found], ys[found]
    c = cy.clip_cells(v, off, gx, gy, px, py_, foff, 1e-3)
    d = py.clip_cells(v, off, gx, gy, px, py_, foff, 1e-3)
    assert np.array_equal(c[0], d[0]) and np.array_equal(c[1], d[1])


def test_pair_flatness_parity():
    rng = np.random.default_rng(4)
    a = rng.uniform(0, 10, (60, 48))
    d = np.diff(a, axis=1)
    rows, cols = np.arange(0, 60, 2), np.arange(60)
    x = cy.pair_flatness(a, d, rows, cols)
    y = py.pair_flatness(a, d, rows, cols)
    assert np.array_equal(x[0], y[0]) and np.array_equal(x[1], y[1])
    i, j = 4, 7
    assert x[0][2, j] == pytest.approx(np.abs(d[i] + d[j]).sum())
    assert x[1][2, j] == pytest.approx((a[i] + a[j]).max())


def test_parallel_build_is_deterministic():
    xs, ys, codes, gens, scale = lvd_inputs(3000, 5, 1e6)
    one = build_cells_parallel(xs, ys, codes, gens, 3, 1e6, scale, True, 1, "cython")
    four = build_cells_parallel(xs, ys, codes, gens, 3, 1e6, scale, True, 4, "cython")
    assert digest(*one) == digest(*four)


def test_bench_rows():
    rows = bench_backends(1000, repeat=1, python_n=200)
    assert {r["backend"] for r in rows} == {"cython", "python"}
    w = bench_workers(2000, (1, 2), repeat=1)
    assert len({r["digest"] for r in w}) == 1
