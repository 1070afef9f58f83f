import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voropart.partitioner import (
    PartitionPlan,
    PivotSet,
    auto_lambda,
    elect_pivots,
    make_plan,
    map_object,
    map_object_replicated,
    nearest_pivot,
    pairwise_sum,
    pivot_adjacency,
    replicate,
    select_candidates,
    trial_objectives,
)


def test_select_candidates():
    objs = np.random.default_rng(0).uniform(0, 10, (20, 2))
    full = select_candidates(objs, 20, 1)
    assert sorted(map(tuple, full)) == sorted(map(tuple, objs))
    a = select_candidates(objs, 5, 7)
    b = select_candidates(objs, 5, 7)
    assert np.array_equal(a, b)
    assert len({tuple(p) for p in a}) == 5
    with pytest.raises(ValueError):
        select_candidates(objs, 21, 0)


def test_pairwise_sum_matches_loop():
    pts = np.random.default_rng(2).uniform(0, 1, (40, 2))
    ref = sum(math.dist(p, q) for p, q in itertools.combinations(pts, 2))
    assert pairwise_sum(pts) == pytest.approx(ref, rel=1e-12)


def test_elect_whole_set():
    c = np.array([[0, 0], [1, 0], [0, 1.0]])
    ps = elect_pivots(c, 3)
    assert sorted(map(tuple, ps.points)) == sorted(map(tuple, c))


def test_elect_corners():
    c = np.array([[0, 0], [10, 0], [0, 10], [10, 10], [5, 5.0]])
    ps = elect_pivots(c, 4, trials=200, seed=3)
    assert sorted(map(tuple, ps.points)) == [(0, 0), (0, 10), (10, 0), (10, 10)]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_elect_is_best_of_own_trials(seed):
    c = np.random.default_rng(seed).uniform(0, 100, (60, 2))
    ps = elect_pivots(c, 5, trials=12, seed=seed)
    objs = trial_objectives(c, 5, 12, seed)
    assert ps.objective == pytest.approx(objs.max())
    assert pairwise_sum(ps.points) == pytest.approx(objs.max())


def test_elect_errors_and_determinism():
    c = np.random.default_rng(0).uniform(0, 1, (10, 2))
    with pytest.raises(ValueError):
        elect_pivots(c, 11)
    with pytest.raises(ValueError):
        elect_pivots(c, 3, trials=0)
    a, b = elect_pivots(c, 3, seed=9), elect_pivots(c, 3, seed=9)
    assert a.points.tobytes() == b.points.tobytes()


def test_map_object():
    ps = PivotSet(np.array([[0, 0], [2, 0], [4, 0], [9, 9.0]]))
    assert map_object((9, 9), ps) == 3
    assert map_object((1, 0), ps) == 0
    assert map_object((3, 5), ps) == 1


def test_map_object_bruteforce():
    rng = np.random.default_rng(4)
    piv = rng.uniform(0, 1, (9, 2))
    ps = PivotSet(piv)
    objs = rng.uniform(0, 1, (1000, 2))
    ref = [min(range(9), key=lambda j: (math.dist(o, piv[j]), j)) for o in objs]
    assert [map_object(o, ps) for o in objs] == ref
    assert nearest_pivot(objs, piv).tolist() == ref


def _grid_plan(lam):
    pts = np.array([[x, y] for y in (1, 3, 5) for x in (1, 3, 5)], dtype=float)
    ps = PivotSet(pts)
    return ps, pivot_adjacency(ps, 6.0), lam


def test_adjacency():
    ps = PivotSet(np.array([[1, 1], [3, 3.0]]))
    assert pivot_adjacency(ps, 4) == [[1], [0]]
    ps = PivotSet(np.array([[1, 1], [3, 1], [2, 3.0]]))
    assert [sorted(a) for a in pivot_adjacency(ps, 4)] == [[1, 2], [0, 2], [0, 1]]
    ps, adj, _ = _grid_plan(0)
    assert sorted(adj[4]) == [1, 3, 5, 7]
    assert sorted(adj[0]) == [1, 3]


def test_replicated_mapping():
    ps, adj, _ = _grid_plan(0)
    assert map_object_replicated((3.1, 3.2), ps, adj, 0.0) == {4}
    assert map_object_replicated((3.9, 3.0), ps, adj, 0.2) == {4, 5}
    assert map_object_replicated((3.95, 3.95), ps, adj, 0.5) >= {4, 5, 7}
    with pytest.raises(ValueError):
        map_object_replicated((3, 3), ps, adj, -1)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000))
def test_replica_invariants(seed):
    rng = np.random.default_rng(seed)
    ps = PivotSet(rng.uniform(0, 100, (6, 2)))
    adj = pivot_adjacency(ps, 100)
    xy = rng.uniform(0, 100, (300, 2))
    prev = 0
    for lam in (0.0, 1.0, 5.0, 20.0):
        plan = PartitionPlan(ps, adj, lam, 100)
        o, p = replicate(xy, plan)
        assert len(o) >= prev
        prev = len(o)
        prim = nearest_pivot(xy, ps.points)
        for oi, pj in zip(o, p):
            assert pj in adj[prim[oi]]
            a, b = ps.points[prim[oi]], ps.points[pj]
            n = b - a
            d = abs(np.dot(xy[oi] - (a + b) / 2, n)) / np.linalg.norm(n)
            assert d <= lam + 1e-9
        if lam == 0:
            assert len(o) == 0


def test_auto_lambda_fraction():
    rng = np.random.default_rng(0)
    ps = PivotSet(rng.uniform(0, 1000, (8, 2)))
    plan = PartitionPlan(ps, pivot_adjacency(ps, 1000), 0, 1000)
    xy = rng.uniform(0, 1000, (20000, 2))
    plan.lam = auto_lambda(xy, plan, 0.05)
    o, _ = replicate(xy, plan)
    assert len(np.unique(o)) / len(xy) == pytest.approx(0.05, abs=0.002)
    assert auto_lambda(xy, plan, 0.0) == 0.0


def test_plan_determinism_and_balance():
    rng = np.random.default_rng(5)
    xy = rng.uniform(0, 1e6, (64_000, 2))
    nodes = np.array_split(xy, 8)
    a, _ = make_plan(nodes, 8, 250 * 8, seed=11)
    b, _ = make_plan(nodes, 8, 250 * 8, seed=11)
    assert a.to_json() == b.to_json()
    sizes = np.bincount(nearest_pivot(xy, a.pivots), minlength=8)
    assert sizes.sum() == len(xy)
    assert sizes.std() / sizes.mean() <= 0.15


def test_plan_json_roundtrip():
    ps, adj, _ = _grid_plan(0)
    plan = PartitionPlan(ps, adj, 0.25, 6.0, {"seed": 3})
    back = PartitionPlan.from_json(plan.to_json())
    assert back.to_json() == plan.to_json()
