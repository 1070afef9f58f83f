import math

import numpy as np
import pytest

from voropart.cluster_sim import Config, run_construction
from voropart.partitioner import PartitionPlan, PivotSet, nearest_pivot, pivot_adjacency
from voropart.query import (
    SELECTIVITY,
    QueryEngine,
    RangeQuery,
    brute_knn,
    brute_range,
    estimate_knn_distance,
    estimate_knn_radius,
    find_intersecting_partitions,
    parse_queries,
    selectivity_radius,
)
from voropart.workload_gen import gen_hotspots, gen_uniform

E = 1e6


@pytest.fixture(scope="module")
def engine_xy():
    xy = gen_uniform(10_000, E, 7)
    idx, _ = run_construction(xy, 6, Config(seed=3, s_per_node=300, extent=E))
    return QueryEngine(idx), xy


def _fig_plan():
    ps = PivotSet(np.array([[50.0, 50.0], [50.0, 90.0], [90.0, 50.0]]))
    return PartitionPlan(ps, pivot_adjacency(ps, 100), 0.0, 100)


def test_partition_search_small_radius():
    plan = _fig_plan()
    assert find_intersecting_partitions((50, 50), 5, plan, [30, 30, 30]) == [0]


def test_partition_search_both_prunings():
    plan = _fig_plan()
    # P1's hyperplane is 20 away; P2's is 10 away but its objects lie within 5 of the pivot
    assert find_intersecting_partitions((60, 50), 12, plan, [30, 30, 5]) == [0]
    assert find_intersecting_partitions((60, 50), 12, plan, [30, 30, 25]) == [0, 2]


def test_range_query_validation():
    with pytest.raises(ValueError):
        RangeQuery((0, 0), 0)
    rq = RangeQuery.from_selectivity((1, 1), "small", E)
    assert math.pi * rq.r**2 == pytest.approx(SELECTIVITY["small"] * E * E)


def test_no_false_negatives(engine_xy):
    eng, xy = engine_xy
    part = nearest_pivot(xy, eng.plan.pivots)
    rng = np.random.default_rng(0)
    for _ in range(500):
        q, r = rng.uniform(0, E, 2), rng.uniform(1, 0.1 * E)
        got = set(find_intersecting_partitions(q, r, eng.plan, eng.furthest))
        need = set(part[brute_range(xy, q, r)].tolist())
        assert need <= got


def test_range_trivial(engine_xy):
    eng, xy = engine_xy
    assert len(eng.range_query((E / 2, E / 2), 2 * E).ids) == len(xy)
    res = eng.range_query(xy[123], 1e-9)
    assert res.ids.tolist() == [123]


@pytest.mark.parametrize("preset", sorted(SELECTIVITY))
def test_range_equals_bruteforce(engine_xy, preset):
    eng, xy = engine_xy
    r = selectivity_radius(SELECTIVITY[preset], E)
    rng = np.random.default_rng(1)
    for _ in range(300):
        q = rng.uniform(0, E, 2)
        res = eng.range_query(q, r, int(rng.integers(6)))
        assert np.array_equal(res.ids, brute_range(xy, q, r))
        assert res.messages <= 1 + len(res.partitions)


def test_local_range_matches_flat_scan(engine_xy):
    eng, xy = engine_xy
    rng = np.random.default_rng(2)
    part = nearest_pivot(xy, eng.plan.pivots)
    for _ in range(100):
        p = int(rng.integers(eng.plan.n_partitions))
        q, r = rng.uniform(0, E, 2), rng.uniform(0, 2e5)
        mine = np.nonzero(part == p)[0]
        ref = mine[brute_range(xy[mine], q, r)]
        assert np.array_equal(np.sort(eng.local_range(p, q, r)), ref)
    p = 0
    assert len(eng.local_range(p, (0, 0), 3 * E)) == int((part == p).sum())


def test_estimator():
    assert estimate_knn_distance(100, 100, E) == pytest.approx(E / math.sqrt(math.pi))
    eds = [estimate_knn_distance(k, 1000, E) for k in range(1, 50)]
    assert all(b > a for a, b in zip(eds, eds[1:]))
    assert estimate_knn_distance(1, 10**6, E) == pytest.approx(E / math.sqrt(math.pi) * 5e-7, rel=1e-5)
    ed, r0 = estimate_knn_radius(8, 1000, E)
    assert r0 == pytest.approx(ed / 8) and r0 > 0
    with pytest.raises(ValueError):
        estimate_knn_distance(5, 4, E)


def test_knn_trivial(engine_xy):
    eng, xy = engine_xy
    res = eng.knn_query(xy[42], 1)
    assert res.ids.tolist() == [42] and res.rounds == 1
    with pytest.raises(ValueError):
        eng.knn_query((0, 0), 0)


def test_knn_all():
    xy = gen_uniform(300, 1000, 1)
    idx, _ = run_construction(xy, 3, Config(seed=0, s_per_node=50, extent=1000))
    eng = QueryEngine(idx)
    res = eng.knn_query((500, 500), 300)
    assert np.array_equal(res.ids, brute_knn(xy, (500, 500), 300))


@pytest.mark.parametrize("k", [1, 2, 4, 8, 16, 32])
def test_knn_equals_bruteforce(engine_xy, k):
    eng, xy = engine_xy
    rng = np.random.default_rng(k)
    for _ in range(80):
        q = rng.uniform(0, E, 2)
        assert np.array_equal(eng.knn_query(q, k).ids, brute_knn(xy, q, k))


def test_knn_on_skewed_data():
    xy, _ = gen_hotspots(5000, seed=4, extent=E)
    idx, _ = run_construction(xy, 5, Config(seed=1, s_per_node=300, extent=E))
    eng = QueryEngine(idx)
    rng = np.random.default_rng(9)
    for _ in range(50):
        q = rng.uniform(0, E, 2)
        assert np.array_equal(eng.knn_query(q, 8).ids, brute_knn(xy, q, 8))


def test_parse_queries():
    qs = parse_queries("type,q_x,q_y,param\nrange,1,2,small\nrange,1,2,50\nknn,3,4,8\n", E)
    assert qs[0] == ("range", (1.0, 2.0), selectivity_radius(0.0001, E))
    assert qs[1][2] == 50.0 and qs[2] == ("knn", (3.0, 4.0), 8)
    with pytest.raises(ValueError):
        parse_queries("circle,1,2,3\n", E)
    with pytest.raises(ValueError):
        parse_queries("range,1,2\n", E)
