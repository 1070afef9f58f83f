import numpy as np

from voropart.geometry import brute_force_voronoi, rings_match


def assert_matches_bruteforce(cells: dict, xy, extent, tol=None):
    """Every generator's cell equals the brute-force global cell."""
    tol = 1e-7 * extent if tol is None else tol
    ref = brute_force_voronoi(np.asarray(xy), extent)
    assert sorted(cells) == list(range(len(xy)))
    bad = [g for g, c in cells.items() if not rings_match(c.vertices, ref[g].vertices, tol)]
    assert not bad, f"{len(bad)} cells differ, first {bad[:5]}"
