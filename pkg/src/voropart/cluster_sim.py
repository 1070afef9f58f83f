"""In-process shared-nothing cluster: nodes, message accounting, construction cycle."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .geometry import REL_EPS, SPACE_EXTENT
from .local_index import (
    INACCURATE,
    LocalPoints,
    LocalVoronoiDiagram,
    VoronoiHierarchy,
    apply_fix,
    build_hierarchy,
    build_lvd,
    classify_cells,
    exposure,
    ir_points,
)
from .partitioner import PartitionPlan, make_plan, nearest_pivot, replicate

PHASES = ("candidate_exchange", "election", "shuffle", "lvd_build", "fix", "hierarchy")


@dataclass
class MessageModel:
    header: int = 24
    point: int = 16
    # routing-table entry: pivot location + node address
    pivot_entry: int = 8 + 32

    def payload(self, n_points: int) -> int:
        return self.header + self.point * n_points


@dataclass
class Config:
    seed: int = 0
    s_per_node: int = 1000
    trials: int | None = None
    refine_iters: int = 40
    lam: float | str = 0.0
    lam_fraction: float = 0.05
    k: int = 3
    fanout: int = 32
    repartition: bool = True
    fix_cells: bool = True
    classify_mode: str = "tight"
    workers: int = 1
    extent: float = SPACE_EXTENT
    build_hierarchy: bool = True
    initial_placement: str = "random"  # or "given"


@dataclass
class SimNode:
    node_id: int
    partition: int
    ids: np.ndarray
    xy: np.ndarray
    pivots: np.ndarray | None = None
    local: LocalPoints | None = None
    lvd: LocalVoronoiDiagram | None = None
    hierarchy: VoronoiHierarchy | None = None
    furthest: float = -np.inf
    sent: int = 0
    received: int = 0
    bytes_sent: int = 0
    bytes_received: int = 0

    @property
    def routing_table_bytes(self) -> int:
        return 0 if self.pivots is None else len(self.pivots) * MessageModel().pivot_entry


class Network:
    """Counts messages; nothing is actually sent."""

    def __init__(self, nodes: list[SimNode], model: MessageModel | None = None):
        self.nodes = nodes
        self.model = model or MessageModel()
        self.messages = 0
        self.bytes = 0

    def send(self, src: int, dst: int, n_points: int = 0, nbytes: int | None = None) -> None:
        if src == dst:
            return
        b = self.model.payload(n_points) if nbytes is None else nbytes
        self.nodes[src].sent += 1
        self.nodes[src].bytes_sent += b
        self.nodes[dst].received += 1
        self.nodes[dst].bytes_received += b
        self.messages += 1
        self.bytes += b


@dataclass
class ConstructionReport:
    n_objects: int
    n_nodes: int
    seed: int
    lam: float
    times: dict = field(default_factory=dict)
    messages: dict = field(default_factory=dict)
    bytes: dict = field(default_factory=dict)
    shuffled_objects: int = 0
    replicas: int = 0
    inaccurate_before_fix: int = 0
    inaccurate_after_fix: int = 0
    ir_requests: int = 0
    partition_sizes: list = field(default_factory=list)

    @property
    def total_messages(self) -> int:
        return int(sum(self.messages.values()))

    @property
    def total_bytes(self) -> int:
        return int(sum(self.bytes.values()))

    def summary(self, timing: bool = True) -> dict:
        d = asdict(self)
        d["total_messages"] = self.total_messages
        d["total_bytes"] = self.total_bytes
        sizes = np.asarray(self.partition_sizes, dtype=float)
        d["size_cv"] = float(sizes.std() / sizes.mean()) if len(sizes) and sizes.mean() > 0 else 0.0
        # analytic decomposition: beta |O| shuffled plus alpha |O| for everything else
        n = max(self.n_objects, 1)
        d["beta"] = self.shuffled_objects / n
        d["alpha"] = (self.total_messages - self.messages.get("shuffle", 0)) / n
        if not timing:
            d.pop("times")
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.summary(timing), sort_keys=True, indent=1)

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["phase", "messages", "bytes"] + (["seconds"] if timing else [])
        w.writerow(cols)
        for ph in PHASES:
            row = [ph, self.messages.get(ph, 0), self.bytes.get(ph, 0)]
            if timing:
                row.append(f"{self.times.get(ph, 0.0):.6f}")
            w.writerow(row)
        return buf.getvalue()


@dataclass
class DistributedIndex:
    plan: PartitionPlan
    nodes: list[SimNode]
    extent: float = SPACE_EXTENT

    @property
    def n_objects(self) -> int:
        return int(sum(len(n.ids) for n in self.nodes))

    def owner(self, partition: int) -> int:
        return partition % len(self.nodes)

    def all_cells(self) -> dict:
        out = {}
        for n in self.nodes:
            if n.lvd is not None:
                out.update(n.lvd.cells)
        return out


def route(q, index: DistributedIndex, node: int) -> tuple[int, int]:
    """Owner of q's partition and the number of forwarding messages (0 or 1)."""
    part = int(nearest_pivot(np.asarray(q, dtype=np.float64).reshape(1, 2), index.plan.pivots)[0])
    dst = index.owner(part)
    return dst, int(dst != node)


def _placement(n: int, n_nodes: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x9E37]))
    return rng.integers(0, n_nodes, size=n)


def run_construction(
    objects,
    n_nodes: int,
    config: Config | None = None,
    plan: PartitionPlan | None = None,
    placement: np.ndarray | None = None,
) -> tuple[DistributedIndex, ConstructionReport]:
    """One throwaway construction cycle.

    ``plan`` is reused when ``config.repartition`` is false; otherwise pivots
    are elected afresh.  ``placement`` gives each object's current node
    (random when omitted).
    """
    cfg = config or Config()
    xy = np.asarray(objects, dtype=np.float64).reshape(-1, 2)
    n = len(xy)
    if n == 0:
        raise ValueError("empty dataset")
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    ids = np.arange(n, dtype=np.int64)
    if placement is None:
        placement = _placement(n, n_nodes, cfg.seed)
    placement = np.asarray(placement, dtype=np.int64)
    model = MessageModel()
    nodes = [SimNode(i, i, ids[placement == i], xy[placement == i]) for i in range(n_nodes)]
    net = Network(nodes, model)
    rep = ConstructionReport(n, n_nodes, cfg.seed, 0.0)
    times: dict[str, float] = {}

    def phase_msgs(name, before_m, before_b):
        rep.messages[name] = net.messages - before_m
        rep.bytes[name] = net.bytes - before_b

    # candidate exchange + election
    t0 = time.perf_counter()
    m0, b0 = net.messages, net.bytes
    reuse = plan is not None and not cfg.repartition
    if not reuse:
        if n_nodes > 1:
            s_sizes = [min(cfg.s_per_node, len(nd.ids)) for nd in nodes]
            for a in range(n_nodes):
                for b in range(n_nodes):
                    net.send(a, b, s_sizes[a])
    phase_msgs("candidate_exchange", m0, b0)
    times["candidate_exchange"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if not reuse:
        if n_nodes == 1:
            # a single partition: the pivot is any object
            plan, _ = make_plan([nodes[0].xy], 1, min(cfg.s_per_node, n), cfg.seed, cfg.trials, 0, 0.0, cfg.extent)
        else:
            plan, _ = make_plan(
                [nd.xy for nd in nodes], n_nodes, cfg.s_per_node, cfg.seed, cfg.trials,
                cfg.refine_iters, cfg.lam, cfg.extent, cfg.lam_fraction,
            )
    rep.messages["election"] = 0
    rep.bytes["election"] = 0
    times["election"] = time.perf_counter() - t0
    for nd in nodes:
        nd.pivots = plan.pivots.copy()
    rep.lam = plan.lam

    # shuffle: objects to their partition's node, replicas to neighbours
    t0 = time.perf_counter()
    m0, b0 = net.messages, net.bytes
    primary = nearest_pivot(xy, plan.pivots)
    dest = np.array([p % n_nodes for p in primary], dtype=np.int64) if n else primary
    moved = dest != placement
    rep.shuffled_objects = int(moved.sum())
    rep_obj, rep_part = replicate(xy, plan, primary)
    rep.replicas = int(len(rep_obj))
    pair_counts: dict[tuple[int, int], int] = {}
    for s, d in zip(placement[moved].tolist(), dest[moved].tolist()):
        pair_counts[(s, d)] = pair_counts.get((s, d), 0) + 1
    for s, part in zip(placement[rep_obj].tolist(), rep_part.tolist()):
        key = (s, part % n_nodes)
        pair_counts[key] = pair_counts.get(key, 0) + 1
    for (s, d), c in sorted(pair_counts.items()):
        net.send(s, d, c)
    phase_msgs("shuffle", m0, b0)
    for p in range(plan.n_partitions):
        nd = nodes[p % n_nodes]
        mine = primary == p
        extra = rep_obj[rep_part == p]
        nd.ids = np.concatenate([ids[mine], ids[extra]])
        nd.xy = np.concatenate([xy[mine], xy[extra]])
        mask = np.concatenate([np.ones(int(mine.sum()), bool), np.zeros(len(extra), bool)])
        nd.local = LocalPoints.from_arrays(nd.ids, nd.xy, mask, cfg.extent)
        pv = plan.pivots[p]
        nd.furthest = float(np.hypot(*(xy[mine] - pv).T).max()) if mine.any() else -np.inf
    rep.partition_sizes = [int((primary == p).sum()) for p in range(plan.n_partitions)]
    times["shuffle"] = time.perf_counter() - t0

    # local diagrams
    t0 = time.perf_counter()
    for p in range(plan.n_partitions):
        nd = nodes[p % n_nodes]
        nd.lvd = build_lvd(p, nd.local, cfg.k, cfg.extent, True, cfg.workers)
        if plan.n_partitions > 1:
            nd.lvd.stats["exposure"] = classify_cells(nd.lvd, plan, cfg.classify_mode)
        else:
            nd.lvd.status[:] = 2
    rep.messages["lvd_build"] = 0
    rep.bytes["lvd_build"] = 0
    times["lvd_build"] = time.perf_counter() - t0
    rep.inaccurate_before_fix = int(sum((nd.lvd.status == INACCURATE).sum() for nd in nodes))

    t0 = time.perf_counter()
    m0, b0 = net.messages, net.bytes
    if cfg.fix_cells and plan.n_partitions > 1:
        rep.ir_requests = fix_inaccurate(nodes, plan, net, cfg.extent, cfg.classify_mode)
    phase_msgs("fix", m0, b0)
    times["fix"] = time.perf_counter() - t0
    rep.inaccurate_after_fix = int(sum((nd.lvd.status == INACCURATE).sum() for nd in nodes))

    t0 = time.perf_counter()
    if cfg.build_hierarchy:
        for p in range(plan.n_partitions):
            nd = nodes[p % n_nodes]
            prim = nd.local.primary
            nd.hierarchy = build_hierarchy(nd.local.xy[prim], cfg.fanout, [cfg.seed, p])
    rep.messages["hierarchy"] = 0
    rep.bytes["hierarchy"] = 0
    times["hierarchy"] = time.perf_counter() - t0
    rep.times = times
    for nd in nodes:
        nd.lvd.stats.pop("exposure", None)
    return DistributedIndex(plan, nodes, cfg.extent), rep


def _sub_lvd(lvd: LocalVoronoiDiagram, pos: np.ndarray) -> LocalVoronoiDiagram:
    rings = [lvd.ring(int(c)) for c in pos]
    off = np.concatenate([[0], np.cumsum([len(r) for r in rings])]).astype(np.int64)
    verts = np.concatenate(rings) if rings else np.empty((0, 2))
    return LocalVoronoiDiagram(
        lvd.partition, lvd.ids[pos], lvd.gx[pos], lvd.gy[pos], verts, off, lvd.status[pos].copy(), lvd.extent
    )


def fix_inaccurate(nodes: list[SimNode], plan: PartitionPlan, net: Network, extent: float,
                   mode: str = "tight", max_rounds: int = 64) -> int:
    """Breadth-first exchange rounds until no cell can see an unasked partition.

    A cell first asks the exposed partitions adjacent to its own, then those
    adjacent to partitions it already asked.  After each round the cells are
    clipped and re-tested; the influence region only shrinks, so points
    fetched earlier still cover it.  Requests are batched per (source,
    target) pair and round.  Returns the number of logical IR requests.
    """
    n_nodes = len(nodes)
    adj = plan.adjacency_matrix()
    ir_requests = 0
    state = {}  # partition -> (cell positions, exposure, asked)
    for p in range(plan.n_partitions):
        lvd = nodes[p % n_nodes].lvd
        exp = lvd.stats.get("exposure")
        if exp is None:
            continue
        pos = np.nonzero(lvd.status == INACCURATE)[0]
        if len(pos):
            state[p] = (pos, exp[pos], np.zeros((len(pos), plan.n_partitions), dtype=bool))
    for _ in range(max_rounds):
        if not state:
            break
        by_pair: dict[tuple[int, int], np.ndarray] = {}
        picks = {}
        for p, (pos, exp, asked) in state.items():
            frontier = adj[p][None, :] | (asked.astype(np.int64) @ adj.astype(np.int64) > 0)
            want = exp & ~asked
            pick = want & frontier
            stuck = ~pick.any(axis=1) & want.any(axis=1)
            pick[stuck] = want[stuck]
            picks[p] = pick
            for t in range(plan.n_partitions):
                rows = np.nonzero(pick[:, t])[0]
                if len(rows):
                    by_pair[(p, t)] = rows
                    ir_requests += len(rows)
        gathered: dict[int, dict[int, list]] = {}
        for (p, t), rows in sorted(by_pair.items()):
            src, dst = nodes[p % n_nodes], nodes[t % n_nodes]
            lvd = src.lvd
            cells = state[p][0][rows]
            rings = [lvd.ring(int(c)) for c in cells]
            off = np.concatenate([[0], np.cumsum([len(r) for r in rings])]).astype(np.int64)
            net.send(src.node_id, dst.node_id, int(off[-1]) + len(cells))
            found, foff = ir_points(dst.local, np.concatenate(rings), off, lvd.gx[cells], lvd.gy[cells], extent)
            net.send(dst.node_id, src.node_id, len(found))
            pts = dst.local.xy[found]
            per_cell = gathered.setdefault(p, {})
            for j, r in enumerate(rows.tolist()):
                per_cell.setdefault(r, []).append(pts[foff[j] : foff[j + 1]])
        nxt = {}
        for p, (pos, exp, asked) in state.items():
            lvd = nodes[p % n_nodes].lvd
            asked = asked | picks[p]
            per_cell = gathered.get(p, {})
            rows = np.array(sorted(per_cell), dtype=np.int64)
            if len(rows):
                chunks = [np.concatenate(per_cell[r]) for r in rows.tolist()]
                poff = np.concatenate([[0], np.cumsum([len(c) for c in chunks])]).astype(np.int64)
                allp = np.concatenate(chunks)
                apply_fix(lvd, pos[rows], allp[:, 0], allp[:, 1], poff)
            exp = exposure(_sub_lvd(lvd, pos), plan, mode)
            left = (exp & ~asked).any(axis=1)
            lvd.status[pos[left]] = INACCURATE
            if left.any():
                nxt[p] = (pos[left], exp[left], asked[left])
        state = nxt
    return ir_requests


def exact_areas(xy, k: int = 3, extent: float = SPACE_EXTENT, workers: int = 1) -> np.ndarray:
    """Areas of the global Voronoi cells, indexed like ``xy``."""
    xy = np.asarray(xy, dtype=np.float64)
    local = LocalPoints.from_arrays(np.arange(len(xy)), xy, np.ones(len(xy), bool), extent)
    lvd = build_lvd(0, local, k, extent, True, workers)
    out = np.empty(len(xy))
    out[lvd.ids] = lvd.areas()
    return out


def true_inaccuracy(xy, assignment, n_parts: int, k: int = 3, extent: float = SPACE_EXTENT,
                    exact: np.ndarray | None = None) -> float:
    """Fraction of objects whose cell built from their own partition alone is wrong.

    A local cell can only be too big, so comparing areas with the global
    diagram is enough.
    """
    xy = np.asarray(xy, dtype=np.float64)
    if exact is None:
        exact = exact_areas(xy, k, extent)
    wrong = 0
    for p in range(n_parts):
        idx = np.nonzero(assignment == p)[0]
        if len(idx) == 0:
            continue
        local = LocalPoints.from_arrays(idx, xy[idx], np.ones(len(idx), bool), extent)
        lvd = build_lvd(p, local, k, extent)
        a = lvd.areas()
        ex = exact[lvd.ids]
        wrong += int((a > ex * (1 + 1e-9) + (REL_EPS * extent) ** 2).sum())
    return wrong / len(xy)


def random_assignment(n: int, n_nodes: int, seed: int) -> np.ndarray:
    return _placement(n, n_nodes, seed)


def node_loads(xy, plan: PartitionPlan, n_nodes: int) -> np.ndarray:
    part = nearest_pivot(xy, plan.pivots)
    return np.bincount(part % n_nodes, minlength=n_nodes)


def backend_name() -> str:
    return kernels.BACKEND
