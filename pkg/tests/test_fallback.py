import os
import subprocess
import sys

SCRIPT = """
import numpy as np
from voropart import kernels
from voropart.cluster_sim import Config, run_construction
from voropart.geometry import brute_force_voronoi, rings_match
assert kernels.BACKEND == "python", kernels.BACKEND
xy = np.random.default_rng(1).uniform(0, 1000, (300, 2))
idx, rep = run_construction(xy, 3, Config(seed=0, s_per_node=60, extent=1000))
cells = idx.all_cells()
ref = brute_force_voronoi(xy, 1000)
assert all(rings_match(cells[i].vertices, ref[i].vertices, 1e-6) for i in range(300))
print("ok")
"""


def test_python_backend_selected_and_exact():
    env = {**os.environ, "VOROPART_BACKEND": "python"}
    r = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, timeout=300)
    assert r.returncode == 0, r.stderr
    assert r.stdout.strip() == "ok"
