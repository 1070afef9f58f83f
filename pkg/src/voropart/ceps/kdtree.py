"""PR kd-tree over the data space; its leaves are the small partitions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import SPACE_EXTENT

MAX_DEPTH = 60


@dataclass
class Node:
    box: tuple  # (x0, y0, x1, y1)
    depth: int
    parent: int | None
    children: tuple | None = None
    ids: set = field(default_factory=set)

    @property
    def leaf(self) -> bool:
        return self.children is None


@dataclass(frozen=True)
class Event:
    kind: str  # "add" | "remove" | "update"
    leaf: int


class PRKdTree:
    """Alternating-axis midpoint splits of the extent box.

    A leaf splits once it holds more than ``max_objects`` objects and two sibling
    leaves merge once together they hold at most ``max_objects // 2``.
    """

    def __init__(self, max_objects: int, extent: float = SPACE_EXTENT):
        if max_objects < 1:
            raise ValueError("max_objects must be >= 1")
        self.max_objects = int(max_objects)
        self.extent = float(extent)
        self.nodes: dict[int, Node] = {0: Node((0.0, 0.0, self.extent, self.extent), 0, None)}
        self.pos: dict[int, tuple] = {}
        self.leaf_of: dict[int, int] = {}
        self._next = 1

    @classmethod
    def build(cls, xy, max_objects: int, extent: float = SPACE_EXTENT, ids=None) -> "PRKdTree":
        t = cls(max_objects, extent)
        xy = np.asarray(xy, dtype=float)
        ids = np.arange(len(xy)) if ids is None else np.asarray(ids)
        root = t.nodes[0]
        for i, (x, y) in zip(ids.tolist(), xy.tolist()):
            t.pos[i] = (x, y)
            t.leaf_of[i] = 0
            root.ids.add(i)
        t._split_down(0, [])
        return t

    # structure

    def leaves(self) -> list[int]:
        return sorted(k for k, n in self.nodes.items() if n.leaf)

    def members(self, leaf: int) -> np.ndarray:
        return np.array(sorted(self.nodes[leaf].ids), dtype=np.int64)

    def count(self, leaf: int) -> int:
        return len(self.nodes[leaf].ids)

    def box(self, leaf: int) -> tuple:
        return self.nodes[leaf].box

    def __len__(self) -> int:
        return len(self.pos)

    def _locate(self, x: float, y: float) -> int:
        k = 0
        while not self.nodes[k].leaf:
            n = self.nodes[k]
            lo, hi = n.children
            x0, y0, x1, y1 = n.box
            if n.depth % 2 == 0:
                k = lo if x < (x0 + x1) / 2 else hi
            else:
                k = lo if y < (y0 + y1) / 2 else hi
        return k

    def _split_down(self, k: int, events: list) -> None:
        first = k
        stack = [k]
        while stack:
            k = stack.pop()
            n = self.nodes[k]
            if len(n.ids) <= self.max_objects or n.depth >= MAX_DEPTH:
                continue
            x0, y0, x1, y1 = n.box
            if n.depth % 2 == 0:
                m = (x0 + x1) / 2
                boxes = ((x0, y0, m, y1), (m, y0, x1, y1))
                side = [self.pos[i][0] >= m for i in n.ids]
            else:
                m = (y0 + y1) / 2
                boxes = ((x0, y0, x1, m), (x0, m, x1, y1))
                side = [self.pos[i][1] >= m for i in n.ids]
            lo, hi = self._next, self._next + 1
            self._next += 2
            self.nodes[lo] = Node(boxes[0], n.depth + 1, k)
            self.nodes[hi] = Node(boxes[1], n.depth + 1, k)
            for i, s in zip(list(n.ids), side):
                tgt = hi if s else lo
                self.nodes[tgt].ids.add(i)
                self.leaf_of[i] = tgt
            n.ids = set()
            n.children = (lo, hi)
            if events is not None and k == first:
                events.append(Event("remove", k))
            stack.extend((hi, lo))
            for c in (lo, hi):
                # a child that will split again is never reported
                if len(self.nodes[c].ids) <= self.max_objects or self.nodes[c].depth >= MAX_DEPTH:
                    if events is not None:
                        events.append(Event("add", c))

    # requests

    def insert(self, oid: int, x: float, y: float) -> list[Event]:
        if oid in self.pos:
            raise KeyError(f"object {oid} already present")
        if not (0 <= x <= self.extent and 0 <= y <= self.extent):
            raise ValueError("location outside the space")
        k = self._locate(x, y)
        self.pos[oid] = (x, y)
        self.leaf_of[oid] = k
        self.nodes[k].ids.add(oid)
        events: list[Event] = []
        if len(self.nodes[k].ids) > self.max_objects and self.nodes[k].depth < MAX_DEPTH:
            self._split_down(k, events)
        else:
            events.append(Event("update", k))
        return events

    def delete(self, oid: int) -> list[Event]:
        if oid not in self.pos:
            raise KeyError(f"unknown object {oid}")
        k = self.leaf_of.pop(oid)
        del self.pos[oid]
        self.nodes[k].ids.discard(oid)
        events = [Event("update", k)]
        while True:
            parent = self.nodes[k].parent
            if parent is None:
                break
            lo, hi = self.nodes[parent].children
            a, b = self.nodes[lo], self.nodes[hi]
            if not (a.leaf and b.leaf) or len(a.ids) + len(b.ids) > self.max_objects // 2:
                break
            p = self.nodes[parent]
            p.ids = a.ids | b.ids
            p.children = None
            for i in p.ids:
                self.leaf_of[i] = parent
            del self.nodes[lo], self.nodes[hi]
            events += [Event("remove", lo), Event("remove", hi), Event("add", parent)]
            k = parent
        return events


def build_small_partitions(objects, max_objects: int, extent: float | None = None):
    """Leaves of a PR kd-tree as ``[(object index array, (x0, y0, x1, y1)), ...]``."""
    xy = np.asarray(objects, dtype=float)
    if extent is None:
        extent = max(SPACE_EXTENT, float(xy.max()) if len(xy) else 0.0)
    t = PRKdTree.build(xy, max_objects, extent)
    return [(t.members(k), t.box(k)) for k in t.leaves()]


@dataclass
class Request:
    op: str  # "insert" | "delete" | "update"
    oid: int
    x: float = 0.0
    y: float = 0.0


def apply_data_requests(tree: PRKdTree, requests) -> list[Event]:
    """Apply requests in order; an update is a delete followed by an insert."""
    events: list[Event] = []
    for r in requests:
        if r.op == "insert":
            events += tree.insert(r.oid, r.x, r.y)
        elif r.op == "delete":
            events += tree.delete(r.oid)
        elif r.op == "update":
            events += tree.delete(r.oid)
            events += tree.insert(r.oid, r.x, r.y)
        else:
            raise ValueError(f"unknown request {r.op!r}")
    return events
