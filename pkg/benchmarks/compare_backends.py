"""Compiled vs pure-Python LVD kernels, then worker scaling.

    python benchmarks/compare_backends.py [n] [python_n]
"""

import sys

from voropart.bench import bench_backends, bench_workers, cpu_count


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 50_000
    py_n = int(sys.argv[2]) if len(sys.argv) > 2 else 5_000
    rows = bench_backends(n, python_n=py_n)
    for r in rows:
        print(f"{r['backend']:>7}  {r['cells']:>7} cells  {r['seconds']:8.3f}s  {r['cells_per_s']:>10.0f} cells/s  {r['digest']}")
    if len(rows) == 2:
        print(f"compiled/python throughput: {rows[0]['cells_per_s'] / rows[1]['cells_per_s']:.1f}x")
    print(f"cpus: {cpu_count()}")
    for r in bench_workers(n, (1, 2, 4)):
        print(f"workers {r['workers']}: {r['seconds']:.3f}s  speedup {r['speedup']:.2f}  {r['digest']}")


if __name__ == "__main__":
    main()
