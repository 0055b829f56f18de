"""Line and full b-ary tree networks with uniform or structured capacities.

Networks are immutable after construction and safe to share across workers.
Node numbering: lines are 0..N left to right; trees are level-order with the
root at 0, so the children of node v are b*v+1 .. b*v+b and the unique
incoming edge of node v has id v-1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from .errors import NoPathError, ValidationError

LINE = "line"
TREE = "tree"

UNIFORM = "uniform"
EXPLICIT = "explicit"
EXP_DECAY = "exp_decay"


@dataclass(frozen=True)
class Edge:
    id: int
    tail: int
    head: int
    capacity: float


@dataclass(frozen=True)
class Path:
    edge_ids: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.edge_ids)


class Network:
    """A directed network of known kind (line or tree)."""

    def __init__(
        self,
        kind: str,
        node_count: int,
        edges: list[Edge],
        profile: str,
        profile_param: float | None = None,
        depth: int = 0,
        branching: int = 0,
    ):
        self.kind = kind
        self.node_count = node_count
        self.edges = tuple(edges)
        self.profile = profile
        self.profile_param = profile_param
        self.depth = depth
        self.branching = branching
        self.capacities = tuple(e.capacity for e in edges)
        for e in edges:
            if e.capacity <= 0:
                raise ValidationError(f"edge {e.id} has nonpositive capacity {e.capacity}")
            if not (0 <= e.tail < node_count and 0 <= e.head < node_count):
                raise ValidationError(f"edge {e.id} references nodes outside 0..{node_count - 1}")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def node_depth(self, node: int) -> int:
        """Depth of a tree node (root = 0)."""
        if self.kind != TREE:
            raise ValidationError("node_depth is only defined for tree networks")
        d = 0
        while node != 0:
            node = (node - 1) // self.branching
            d += 1
        return d

    def tree_parent(self, node: int) -> int:
        if node == 0:
            raise ValidationError("root has no parent")
        return (node - 1) // self.branching

    def first_leaf(self) -> int:
        """Smallest node id at the deepest level of a tree."""
        b, d = self.branching, self.depth
        return (b**d - 1) // (b - 1)

    def leaf_count(self) -> int:
        return self.branching**self.depth

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "node_count": self.node_count,
            "profile": self.profile,
            "profile_param": self.profile_param,
            "depth": self.depth,
            "branching": self.branching,
            "edges": [[e.tail, e.head, e.capacity] for e in self.edges],
        }
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str) -> "Network":
        doc = json.loads(text)
        edges = [
            Edge(i, tail, head, cap) for i, (tail, head, cap) in enumerate(doc["edges"])
        ]
        return Network(
            doc["kind"],
            doc["node_count"],
            edges,
            doc["profile"],
            doc.get("profile_param"),
            doc.get("depth", 0),
            doc.get("branching", 0),
        )


def build_line(node_count: int, capacity: float | Sequence[float]) -> Network:
    """Directed line of node_count nodes; edge i runs node i -> i+1.

    A scalar capacity applies uniformly; a sequence gives explicit per-edge
    capacities and must have node_count - 1 entries.
    """
    if node_count < 2:
        raise ValidationError(f"line needs at least 2 nodes, got {node_count}")
    n_edges = node_count - 1
    if isinstance(capacity, (int, float)):
        if capacity <= 0:
            raise ValidationError(f"capacity must be positive, got {capacity}")
        caps = [float(capacity)] * n_edges
        profile, param = UNIFORM, float(capacity)
    else:
        caps = [float(c) for c in capacity]
        if len(caps) != n_edges:
            raise ValidationError(
                f"explicit capacity list has {len(caps)} entries, expected {n_edges}"
            )
        if any(c <= 0 for c in caps):
            raise ValidationError("all capacities must be positive")
        profile, param = EXPLICIT, None
    edges = [Edge(i, i, i + 1, caps[i]) for i in range(n_edges)]
    return Network(LINE, node_count, edges, profile, param)


def build_tree(
    depth: int, branching: int, capacity: float, profile: str = UNIFORM
) -> Network:
    """Full b-ary tree, edges directed root -> leaves.

    Levels count from 1 at the root's outgoing edges. Under EXP_DECAY a
    level-i edge carries capacity / branching**(i-1), so the top level holds
    the stated capacity.
    """
    if depth < 1:
        raise ValidationError(f"tree depth must be >= 1, got {depth}")
    if branching < 2:
        raise ValidationError(f"branching must be >= 2, got {branching}")
    if capacity <= 0:
        raise ValidationError(f"capacity must be positive, got {capacity}")
    if profile not in (UNIFORM, EXP_DECAY):
        raise ValidationError(f"unknown tree capacity profile {profile!r}")
    b = branching
    node_count = (b ** (depth + 1) - 1) // (b - 1)
    edges = []
    for child in range(1, node_count):
        parent = (child - 1) // b
        level = _depth_of(child, b)
        if profile == UNIFORM:
            cap = float(capacity)
        else:
            cap = float(capacity) / b ** (level - 1)
        edges.append(Edge(child - 1, parent, child, cap))
    return Network(TREE, node_count, edges, profile, float(capacity), depth, b)


def _depth_of(node: int, branching: int) -> int:
    d = 0
    while node != 0:
        node = (node - 1) // branching
        d += 1
    return d


def path_between(net: Network, s: int, t: int) -> Path:
    """The unique directed path from s to t; NoPathError if none exists."""
    if not (0 <= s < net.node_count and 0 <= t < net.node_count):
        raise ValidationError(f"nodes ({s}, {t}) out of range for {net.node_count} nodes")
    if s == t:
        raise NoPathError(f"no directed path from {s} to itself (paths have length >= 1)")
    if net.kind == LINE:
        if s > t:
            raise NoPathError(f"line edges run left to right; no path {s} -> {t}")
        return Path(tuple(range(s, t)))
    # tree: t must be a descendant of s; climb from t and collect edges
    rev: list[int] = []
    node = t
    while node != s:
        if node == 0:
            raise NoPathError(f"node {t} is not a descendant of {s}")
        rev.append(node - 1)
        node = net.tree_parent(node)
    return Path(tuple(reversed(rev)))


def capacity_ratio_beta(net: Network) -> float:
    """Largest over smallest edge capacity."""
    if not net.edges:
        raise ValidationError("network has no edges")
    return max(net.capacities) / min(net.capacities)
