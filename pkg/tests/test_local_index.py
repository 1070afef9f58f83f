import numpy as np
import pytest

from conftest import assert_matches_bruteforce
from voropart.cluster_sim import Config, run_construction
from voropart.geometry import CellStatus, VoronoiCell, Point, box_cell, brute_force_voronoi, polygon_area, rings_match
from voropart.local_index import (
    LocalPoints,
    build_approx_cell,
    build_hierarchy,
    build_lvd,
    classify_cell,
    hierarchy_range,
    refine_cell,
)
from voropart.partitioner import PartitionPlan, PivotSet, nearest_pivot, pivot_adjacency
from voropart.zorder import z_encode_array, z_scale_for


def zsorted(xy, extent):
    return xy[np.argsort(z_encode_array(xy, z_scale_for(extent)), kind="stable")]


def test_approx_single_object():
    c = build_approx_cell((3, 4), [[3, 4]], 3, 10)
    assert rings_match(c.vertices, box_cell((3, 4), 10).vertices, 0)
    assert c.status == CellStatus.APPROXIMATE


def test_approx_with_all_neighbors_is_exact():
    xy = zsorted(np.random.default_rng(0).uniform(0, 100, (12, 2)), 100)
    ref = brute_force_voronoi(xy, 100)
    for i, o in enumerate(xy):
        c = build_approx_cell(o, xy, 20, 100)
        assert rings_match(c.vertices, ref[i].vertices, 1e-7)


def test_approx_over_covers():
    xy = zsorted(np.random.default_rng(1).uniform(0, 100, (50, 2)), 100)
    ref = brute_force_voronoi(xy, 100)
    for i, o in enumerate(xy):
        c = build_approx_cell(o, xy, 3, 100)
        assert polygon_area(c.vertices) >= ref[i].area * (1 - 1e-12)


def test_refine_fixed_point():
    o = (5.0, 5.0)
    cell = VoronoiCell(Point(*o), np.array([[4, 4], [6, 4], [6, 6], [4, 6.0]]))
    out = refine_cell(o, cell, [o, (9, 9), (1, 9)], 10)
    assert rings_match(out.vertices, cell.vertices, 0)
    assert out.status == CellStatus.LOCALLY_REFINED


def test_refine_excludes_vertex():
    o = (5.0, 5.0)
    out = refine_cell(o, box_cell(o, 10), [o, (9.5, 9.5)], 10)
    assert not any(np.allclose(v, (10, 10)) for v in out.vertices)
    assert polygon_area(out.vertices) < 100


def test_refine_500_matches_bruteforce():
    xy = np.random.default_rng(2).uniform(0, 1000, (500, 2))
    local = LocalPoints.from_arrays(np.arange(500), xy, np.ones(500, bool), 1000)
    lvd = build_lvd(0, local, 3, 1000)
    assert_matches_bruteforce(lvd.cells, xy, 1000)
    ref = brute_force_voronoi(xy, 1000)
    for i in (0, 77, 311):
        c = refine_cell(xy[i], build_approx_cell(xy[i], zsorted(xy, 1000), 3, 1000), xy, 1000)
        assert rings_match(c.vertices, ref[i].vertices, 1e-6)


def _two_part_plan(lam):
    ps = PivotSet(np.array([[25.5, 50.0], [75.5, 50.0]]))
    return PartitionPlan(ps, pivot_adjacency(ps, 100), lam, 100)


def test_classify_interior_and_border():
    plan = _two_part_plan(0)
    o = (10.0, 50.0)
    cell = VoronoiCell(Point(*o), np.array([[8, 48], [12, 48], [12, 52], [8, 52.0]]))
    assert classify_cell(o, cell, 0, plan) == CellStatus.ACCURATE
    assert classify_cell(o, cell, 0, plan, "coarse") == CellStatus.ACCURATE
    lattice = np.array([[x, y] for x in range(2, 100, 4) for y in range(2, 100, 4)], dtype=float)
    o = (50.0, 50.0)
    own = lattice[lattice[:, 0] < 50.5]
    cell = refine_cell(o, box_cell(o, 100), own, 100)
    assert classify_cell(o, cell, 0, plan) == CellStatus.INACCURATE
    # with a 10-wide replicated strip the local cell is already exact
    plan = _two_part_plan(10.0)
    rep = lattice[(lattice[:, 0] > 50.5) & (lattice[:, 0] <= 60.5)]
    cell = refine_cell(o, box_cell(o, 100), np.vstack([own, rep]), 100)
    assert rings_match(cell.vertices, np.array([[48, 48], [52, 48], [52, 52], [48, 52.0]]), 1e-9)
    assert classify_cell(o, cell, 0, plan) == CellStatus.ACCURATE


def test_fix_eight_objects_two_partitions():
    xy = np.array([[10, 20], [30, 60], [45, 35], [20, 80], [55, 40], [70, 70], [90, 20], [80, 90.0]])
    place = (xy[:, 0] > 50).astype(int)
    cfg = Config(seed=0, s_per_node=4, refine_iters=0, extent=100, initial_placement="given")
    idx, rep = run_construction(xy, 2, cfg, placement=place)
    assert rep.inaccurate_after_fix == 0
    assert rep.inaccurate_before_fix >= 1
    assert_matches_bruteforce(idx.all_cells(), xy, 100)


@pytest.mark.parametrize("lam", [0.0, "auto"])
def test_fix_2000_four_partitions(lam):
    xy = np.random.default_rng(3).uniform(0, 1e6, (2000, 2))
    idx, rep = run_construction(xy, 4, Config(seed=1, s_per_node=200, lam=lam, extent=1e6))
    assert rep.inaccurate_after_fix == 0
    assert_matches_bruteforce(idx.all_cells(), xy, 1e6)
    if lam == 0.0:
        assert rep.replicas == 0


def test_zero_inaccurate_zero_messages():
    xy = np.random.default_rng(0).uniform(0, 100, (50, 2))
    idx, rep = run_construction(xy, 1, Config(extent=100))
    assert rep.inaccurate_before_fix == 0
    assert rep.messages["fix"] == 0


def test_lvd_dump():
    xy = np.array([[1.0, 1.0], [3.0, 3.0]])
    lvd = build_lvd(0, LocalPoints.from_arrays([7, 9], xy, [True, True], 4), 3, 4)
    lines = lvd.dump().splitlines()
    assert len(lines) == 2
    gid, status, ring = lines[0].split(" ", 2)
    assert int(gid) in (7, 9) and status == "locally-refined"
    assert len(ring.split(";")) >= 3


def test_hierarchy_shapes():
    pts = np.random.default_rng(0).uniform(0, 1, (10, 2))
    h = build_hierarchy(pts, 16, seed=0)
    assert h.n_levels == 2 and len(h.points[1]) == 1
    pts = np.random.default_rng(0).uniform(0, 1, (256, 2))
    h = build_hierarchy(pts, 16, seed=0)
    assert h.n_levels == 3
    assert [len(p) for p in h.points] == [256, 16, 1]
    with pytest.raises(ValueError):
        build_hierarchy(pts, 1)


def test_hierarchy_nearest_parent_and_range():
    pts = np.random.default_rng(4).uniform(0, 1000, (3000, 2))
    h = build_hierarchy(pts, 8, seed=2)
    for lv in range(len(h.parent)):
        assert np.array_equal(h.parent[lv], nearest_pivot(h.points[lv], h.points[lv + 1]))
    a = build_hierarchy(pts, 8, seed=2)
    assert all(np.array_equal(x, y) for x, y in zip(a.points, h.points))
    rng = np.random.default_rng(5)
    for _ in range(20):
        q, r = rng.uniform(0, 1000, 2), rng.uniform(0, 150)
        ref = np.nonzero(((pts - q) ** 2).sum(1) <= r * r)[0]
        assert np.array_equal(hierarchy_range(h, q, r), ref)
