"""Command-line front end: gen, build, query, ceps, iceps, oracle, bench."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, bench, kernels
from .ceps import Tiers, ceps, cost_report
from .ceps.clustering import TabuParams
from .ceps.cost import baseline_gp, baseline_gp_aas, baseline_gp_r, cost_csv, grid_patterns, grid_size
from .ceps.kdtree import PRKdTree
from .ceps.maintenance import Iceps, cosine_unit, insert_stream, update_stream
from .cluster_sim import Config, run_construction
from .geometry import SPACE_EXTENT, brute_force_voronoi, rings_match
from .query import SELECTIVITY, QueryEngine, brute_knn, brute_range, parse_queries, run_batch, selectivity_radius, throughput
from .workload_gen import (
    HotspotSpec,
    gen_cosine_patterns,
    gen_hotspots,
    gen_uniform,
    gen_zipf_workload,
    population_weights,
    read_objects,
    read_patterns,
    write_objects,
)

OUT_ENV = "VOROPART_OUT"


class UsageError(Exception):
    pass


def log(msg: str) -> None:
    print(msg, file=sys.stderr)


class Sink:
    """Writes named outputs to the output directory, or to stdout with --stdout."""

    def __init__(self, args):
        self.stdout = args.stdout
        self.dir = Path(args.out or os.environ.get(OUT_ENV) or "voropart-out")
        self.timing = {}

    def write(self, name: str, text: str) -> None:
        if self.stdout:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")
            return
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / name).write_text(text)
        log(f"wrote {self.dir / name}")

    def close(self, header: dict) -> None:
        # wall-clock numbers live apart from the reproducible outputs
        if self.timing and not self.stdout:
            self.dir.mkdir(parents=True, exist_ok=True)
            (self.dir / "timing.json").write_text(json.dumps({**header, **self.timing}, indent=1, sort_keys=True) + "\n")


def header(args, command: str) -> dict:
    return {"tool": "voropart", "version": __version__, "command": command, "seed": args.seed}


def csv_text(hdr: dict, cols, rows) -> str:
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in hdr.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    w.writerows(rows)
    return buf.getvalue()


def json_text(hdr: dict, body: dict) -> str:
    return json.dumps({"header": hdr, **body}, indent=1, sort_keys=True) + "\n"


def _lam(v: str):
    if v == "auto":
        return "auto"
    try:
        return float(v)
    except ValueError:
        raise argparse.ArgumentTypeError("lambda must be a number or 'auto'") from None


def _floats(v: str) -> list[float]:
    try:
        return [float(x) for x in v.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {v!r}") from None


def _ints(v: str) -> list[int]:
    try:
        return [int(x) for x in v.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {v!r}") from None


def load_objects(path) -> tuple[np.ndarray, np.ndarray]:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file: {p}")
    return read_objects(p)


def config_from(args) -> Config:
    return Config(
        seed=args.seed,
        s_per_node=args.sample,
        lam=args.lam,
        k=args.k,
        fanout=args.fanout,
        workers=args.workers,
        extent=args.extent,
    )


# commands


def cmd_gen(args, sink: Sink, hdr: dict) -> int:
    if args.kind in ("uniform", "hotspots"):
        if args.kind == "uniform":
            xy = gen_uniform(args.n, args.extent, args.seed)
        else:
            w = population_weights(args.hotspots, args.seed) if args.sizes == "population" else None
            xy, _ = gen_hotspots(args.n, HotspotSpec(args.hotspots, w, args.sigma), args.seed, args.extent)
        if args.stdout:
            buf = io.StringIO()
            buf.write("id,x,y\n")
            for i, (x, y) in enumerate(xy):
                buf.write(f"{i},{x!r},{y!r}\n")
            sink.write("objects.csv", buf.getvalue())
        else:
            path = sink.dir / (args.output or f"{args.kind}.bin")
            sink.dir.mkdir(parents=True, exist_ok=True)
            write_objects(path, xy)
            log(f"wrote {path}")
        return 0
    if args.kind == "cosine":
        pats = gen_cosine_patterns(args.partitions, args.buckets, args.amplitude, args.phases, args.seed)
    else:
        pats = gen_zipf_workload(args.partitions, args.buckets, args.sf, args.total, args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["partition_id", "bucket_index", "count"])
    for i, row in enumerate(pats):
        for t, c in enumerate(row):
            w.writerow([i, t, repr(float(c))])
    sink.write(args.output or f"{args.kind}_patterns.csv", buf.getvalue())
    return 0


def _build(args, sink: Sink):
    _, xy = load_objects(args.objects)
    t0 = time.perf_counter()
    index, rep = run_construction(xy, args.nodes, config_from(args))
    sink.timing["construction_seconds"] = time.perf_counter() - t0
    sink.timing["phase_seconds"] = rep.times
    return xy, index, rep


def cmd_build(args, sink: Sink, hdr: dict) -> int:
    _, _, rep = _build(args, sink)
    hdr = {**hdr, "nodes": args.nodes, "objects": rep.n_objects}
    sink.write("report.json", json_text(hdr, {"report": rep.summary(timing=False)}))
    text = rep.to_csv(timing=False)
    sink.write("report.csv", "# " + " ".join(f"{k}={v}" for k, v in hdr.items()) + "\n" + text)
    return 0


def _make_queries(args, xy):
    if args.queries:
        p = Path(args.queries)
        if not p.exists():
            raise UsageError(f"no such file: {p}")
        return parse_queries(p.read_text(), args.extent)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0x51]))
    out = []
    if args.count:
        r = selectivity_radius(SELECTIVITY[args.selectivity], args.extent)
        for q in rng.uniform(0, args.extent, (args.count, 2)):
            out.append(("range", (float(q[0]), float(q[1])), r))
    if args.knn_count:
        for q in rng.uniform(0, args.extent, (args.knn_count, 2)):
            out.append(("knn", (float(q[0]), float(q[1])), args.knn_k))
    return out


def cmd_query(args, sink: Sink, hdr: dict) -> int:
    xy, index, _ = _build(args, sink)
    eng = QueryEngine(index)
    queries = _make_queries(args, xy)
    res = run_batch(eng, queries, args.seed)
    rows = []
    for i, ((kind, q, param), r) in enumerate(zip(queries, res)):
        ids = np.sort(r.ids)
        rows.append([i, kind, repr(q[0]), repr(q[1]), param if kind == "knn" else repr(param), len(ids),
                     r.messages, len(r.partitions), r.rounds, " ".join(map(str, ids.tolist()))])
    sink.write("results.csv", csv_text({**hdr, "selectivity": args.selectivity},
                                       ["query", "type", "q_x", "q_y", "param", "results", "messages", "partitions",
                                        "rounds", "ids"], rows))
    if args.measure > 0:
        qps = throughput(eng, queries, args.warmup, args.measure, args.seed)
        sink.timing["throughput_qps"] = qps
        log(f"throughput {qps:.1f} queries/s")
    return 0


def _leaf_patterns(tree: PRKdTree, workload: str, buckets: int, extent: float, seed: int, sf: float):
    leaves = tree.leaves()
    counts = np.array([tree.count(k) for k in leaves], dtype=float)
    if workload == "cosine":
        unit = cosine_unit(buckets, extent)
        return leaves, np.array([c * unit(tree.box(k)) for c, k in zip(counts, leaves)])
    if workload == "flat":
        return leaves, counts[:, None] * np.ones((1, buckets))
    # zipf over time, shape drawn per leaf, volume proportional to the leaf's objects
    z = gen_zipf_workload(len(leaves), buckets, sf, int(counts.sum() * buckets), seed)
    shape = z / np.maximum(z.sum(axis=1, keepdims=True), 1.0)
    return leaves, counts[:, None] * buckets * shape


def _tiers(args, peak: float) -> Tiers:
    top = args.theta_max if args.theta_max else peak
    return Tiers.ladder(top / 2 ** (args.tiers - 1), args.cost0, args.tiers)


def cmd_ceps(args, sink: Sink, hdr: dict) -> int:
    _, xy = load_objects(args.objects)
    tree = PRKdTree.build(xy, args.max_objects, args.extent)
    if args.patterns:
        p = Path(args.patterns)
        if not p.exists():
            raise UsageError(f"no such file: {p}")
        leaves = tree.leaves()
        pats = read_patterns(p)
        if len(pats) != len(leaves):
            raise UsageError(f"{p} has {len(pats)} partitions, the dataset has {len(leaves)}")
    else:
        leaves, pats = _leaf_patterns(tree, args.workload, args.buckets, args.extent, args.seed, args.sf)
    part = np.empty(len(xy), dtype=np.int64)
    for i, k in enumerate(leaves):
        part[tree.members(k)] = i
    g = grid_size(len(xy), args.grid_capacity)
    _, cell_pats, _ = grid_patterns(xy, part, pats, g, args.extent)
    tiers = _tiers(args, float(max(cell_pats.max(), pats.max())))
    prm = TabuParams(args.tabu_size, args.eta, args.stop_s, args.sample_moves, seed=args.seed)
    t0 = time.perf_counter()
    res = ceps(pats, tiers, True, prm)
    sink.timing["ceps_seconds"] = time.perf_counter() - t0
    gp = baseline_gp(xy, part, pats, tiers, args.grid_capacity, extent=args.extent, hours=args.hours)
    gr = baseline_gp_r(xy, part, pats, tiers, args.grid_capacity, extent=args.extent, hours=args.hours, seed=args.seed)
    ga = baseline_gp_aas(xy, part, pats, tiers, args.grid_capacity, extent=args.extent, hours=args.hours)
    rows = [
        ("CEPS+", len(res.clustering.members), cost_report(res.clustering, tiers, args.hours)),
        ("CEPS-", len(res.ahr.clustering.members), cost_report(res.ahr.clustering, tiers, args.hours)),
        ("GP", gp.servers, gp.cost),
        ("GP-R", gr.servers, gr.cost),
        ("GP-AAS", ga.servers, ga.cost),
    ]
    hdr = {**hdr, "partitions": len(leaves), "workload": args.workload}
    doc = json.loads(res.clustering.to_json())
    for c in doc["clusters"]:
        c["members"] = [int(leaves[m]) for m in c["members"]]
    doc["fitness_ahr"] = res.ahr.clustering.fitness()
    doc["tabu_iterations"] = res.tabu.iterations if res.tabu else 0
    sink.write("clustering.json", json_text(hdr, doc))
    sink.write("cost.csv", "# " + " ".join(f"{k}={v}" for k, v in hdr.items()) + "\n" + cost_csv(rows))
    return 0


def cmd_iceps(args, sink: Sink, hdr: dict) -> int:
    _, xy = load_objects(args.objects)
    cosine = cosine_unit(args.buckets, args.extent)
    leaves = PRKdTree.build(xy, args.max_objects, args.extent)
    peak = max(leaves.count(k) * cosine(leaves.box(k)).max() for k in leaves.leaves())
    tiers = _tiers(args, peak * args.headroom)
    prm = TabuParams(args.tabu_size, args.eta, args.stop_s, args.sample_moves, seed=args.seed)
    base = Iceps.build(xy, args.max_objects, tiers, cosine, args.extent, args.num_groups, params=prm)
    import copy

    rows = []
    for sf in args.sf_list:
        full = insert_stream(base.tree, int(round(max(args.ratios) * len(xy))), sf, seed=args.seed + 1)
        for ratio in args.ratios:
            reqs = full[: int(round(ratio * len(xy)))]
            for mode in args.modes:
                m = copy.deepcopy(base)
                batch = reqs if mode == "insert" else update_stream(base.tree, reqs, seed=args.seed + 2)
                r = m.apply(batch)
                rows.append([mode, sf, ratio, r.requests, r.transferred, r.total, f"{r.ratio:.6f}", r.events,
                             r.new_servers, r.servers])
    sink.write("transfer.csv", csv_text({**hdr, "partitions": len(base.tree.leaves())},
                                        ["mode", "sf", "ratio", "requests", "transferred", "objects",
                                         "transfer_ratio", "events", "new_servers", "servers"], rows))
    return 0


def cmd_oracle(args, sink: Sink, hdr: dict) -> int:
    xy = gen_uniform(args.points, args.extent, args.seed)
    index, rep = run_construction(xy, args.nodes, config_from(args))
    cells = index.all_cells()
    bf = brute_force_voronoi(xy, args.extent)
    tol = 1e-9 * args.extent
    bad_cells = [i for i in range(len(xy)) if i not in cells or not rings_match(cells[i].vertices, bf[i].vertices, tol)]
    eng = QueryEngine(index)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0x0A]))
    bad_q = 0
    r = selectivity_radius(SELECTIVITY[args.selectivity], args.extent)
    for q in rng.uniform(0, args.extent, (args.queries, 2)):
        got = np.sort(eng.range_query(q, r, 0).ids)
        bad_q += not np.array_equal(got, np.sort(brute_range(xy, q, r)))
        got = eng.knn_query(q, args.knn_k, 0).ids
        bad_q += not np.array_equal(np.sort(got), np.sort(brute_knn(xy, q, args.knn_k)))
    ok = not bad_cells and not bad_q
    body = {"cells": len(xy), "mismatched_cells": bad_cells[:50], "n_mismatched_cells": len(bad_cells),
            "queries": 2 * args.queries, "mismatched_queries": int(bad_q), "ok": ok,
            "ir_requests": rep.ir_requests}
    sink.write("oracle.json", json_text({**hdr, "nodes": args.nodes, "points": args.points}, body))
    log("oracle: " + ("match" if ok else f"MISMATCH cells={len(bad_cells)} queries={bad_q}"))
    return 0 if ok else 1


def cmd_bench(args, sink: Sink, hdr: dict) -> int:
    rows = bench.bench_backends(args.n, args.seed, args.repeat, args.extent, args.python_n)
    wr = bench.bench_workers(args.n, args.workers_list, args.seed, args.repeat, args.extent)
    hdr = {**hdr, "cpus": bench.cpu_count(), "default_backend": kernels.BACKEND}
    text = csv_text(hdr, ["backend", "cells", "seconds", "cells_per_s", "digest"],
                    [[r["backend"], r["cells"], f"{r['seconds']:.6f}", f"{r['cells_per_s']:.1f}", r["digest"]] for r in rows])
    text += "\n" + csv_text(hdr, ["workers", "seconds", "speedup", "digest"],
                            [[r["workers"], f"{r['seconds']:.6f}", f"{r['speedup']:.3f}", r["digest"]] for r in wr])
    sink.write("bench.csv", text)
    for r in rows:
        log(f"{r['backend']:>7}: {r['cells_per_s']:.0f} cells/s")
    for r in wr:
        log(f"workers={r['workers']}: {r['seconds']:.3f}s speedup {r['speedup']:.2f}")
    return 0


# parser


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="root seed for every random choice")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./voropart-out)")
    p.add_argument("--stdout", action="store_true", help="print machine-readable output to stdout only")
    p.add_argument("--workers", type=int, default=bench.cpu_count())
    p.add_argument("--extent", type=float, default=SPACE_EXTENT)


def _index_opts(p):
    p.add_argument("--objects", required=True, help="object file (.bin or .csv)")
    p.add_argument("--nodes", type=int, default=8)
    p.add_argument("--sample", type=int, default=1000, help="pivot candidates per node")
    p.add_argument("--lam", type=_lam, default=0.0, help="replication distance or 'auto'")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--fanout", type=int, default=32)


def _ceps_opts(p):
    p.add_argument("--objects", required=True)
    p.add_argument("--max-objects", type=int, default=5000)
    p.add_argument("--buckets", type=int, default=288)
    p.add_argument("--tiers", type=int, default=5)
    p.add_argument("--theta-max", type=float, default=0.0, help="largest server capacity (0: fit the data)")
    p.add_argument("--cost0", type=float, default=1.0, help="hourly rate of the smallest tier")
    p.add_argument("--tabu-size", type=int, default=50)
    p.add_argument("--eta", type=float, default=10.0)
    p.add_argument("--stop-s", type=int, default=100)
    p.add_argument("--sample-moves", type=int, default=64)
    p.add_argument("--num-groups", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="voropart", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate objects or access patterns")
    _common(p)
    p.add_argument("kind", choices=["uniform", "hotspots", "cosine", "zipf"])
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--hotspots", type=int, default=10)
    p.add_argument("--sigma", type=float, default=0.02)
    p.add_argument("--sizes", choices=["equal", "population"], default="equal")
    p.add_argument("--partitions", type=int, default=1000)
    p.add_argument("--buckets", type=int, default=288)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--phases", choices=["random", "antiphase", "zero"], default="random")
    p.add_argument("--sf", type=float, default=1.0)
    p.add_argument("--total", type=int, default=1_000_000)
    p.add_argument("--output", help="file name inside the output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("build", help="distributed index construction")
    _common(p)
    _index_opts(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="range and kNN query batches")
    _common(p)
    _index_opts(p)
    p.add_argument("--queries", help="CSV of type,q_x,q_y,param")
    p.add_argument("--selectivity", choices=sorted(SELECTIVITY), default="small")
    p.add_argument("--count", type=int, default=100, help="generated range queries")
    p.add_argument("--knn-count", type=int, default=0, help="generated kNN queries")
    p.add_argument("--knn-k", type=int, default=8)
    p.add_argument("--warmup", type=float, default=0.0, help="throughput warm-up seconds")
    p.add_argument("--measure", type=float, default=0.0, help="throughput window seconds (0: skip)")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("ceps", help="cost-efficient grouping of small partitions")
    _common(p)
    _ceps_opts(p)
    p.add_argument("--workload", choices=["cosine", "zipf", "flat"], default="cosine")
    p.add_argument("--patterns", help="CSV partition_id,bucket_index,count (one row set per kd-tree leaf)")
    p.add_argument("--sf", type=float, default=1.0)
    p.add_argument("--grid-capacity", type=int, default=100_000)
    p.add_argument("--hours", type=float, default=24.0)
    p.set_defaults(func=cmd_ceps)

    p = sub.add_parser("iceps", help="replay insert/update streams against a plan")
    _common(p)
    _ceps_opts(p)
    p.add_argument("--ratios", type=_floats, default=[0.01, 0.05, 0.10])
    p.add_argument("--sf-list", type=_floats, default=[0.0, 1.0])
    p.add_argument("--modes", type=lambda v: v.split(","), default=["insert", "update"])
    p.add_argument("--headroom", type=float, default=4.0, help="largest tier as a multiple of the hottest leaf")
    p.set_defaults(func=cmd_iceps)

    p = sub.add_parser("oracle", help="compare against brute-force oracles")
    _common(p)
    p.add_argument("--points", type=int, default=2000)
    p.add_argument("--nodes", type=int, default=4)
    p.add_argument("--sample", type=int, default=200)
    p.add_argument("--lam", type=_lam, default=0.0)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--fanout", type=int, default=32)
    p.add_argument("--queries", type=int, default=50)
    p.add_argument("--selectivity", choices=sorted(SELECTIVITY), default="large")
    p.add_argument("--knn-k", type=int, default=8)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="compiled vs pure-Python kernels and worker scaling")
    _common(p)
    p.add_argument("--n", type=int, default=50_000)
    p.add_argument("--python-n", type=int, default=5_000, help="cells timed on the slow backend")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--workers-list", type=_ints, default=[1, 2, 4])
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "modes", None):
        bad = [m for m in args.modes if m not in ("insert", "update")]
        if bad:
            ap.error(f"unknown mode(s): {', '.join(bad)}")
    sink = Sink(args)
    hdr = header(args, args.command)
    try:
        rc = args.func(args, sink, hdr)
    except UsageError as e:
        ap.exit(2, f"voropart: error: {e}\n")
    except (ValueError, KeyError) as e:
        log(f"voropart: error: {e}")
        return 1
    sink.close(hdr)
    return rc


if __name__ == "__main__":
    sys.exit(main())
