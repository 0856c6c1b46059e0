"""Graph representation, loaders, generators and the 2-hop influence set."""

from __future__ import annotations

import logging
import math
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import InstanceError, ParseError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Graph:
    """Immutable undirected, unweighted graph keyed by integer node ids.

    Build instances with :func:`from_edges` rather than the constructor; it
    enforces symmetry and drops self-loops.
    """

    nodes: tuple[int, ...]
    adjacency: Mapping[int, frozenset[int]]
    undirected: bool = True
    self_loops_dropped: int = field(default=0, compare=False)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return sum(len(v) for v in self.adjacency.values()) // 2

    def edges(self) -> list[tuple[int, int]]:
        return sorted((u, v) for u in self.nodes for v in self.adjacency[u] if u < v)

    def neighbors(self, v: int) -> frozenset[int]:
        return self.adjacency[v]

    def __contains__(self, v: object) -> bool:
        return v in self.adjacency


def from_edges(edges: Iterable[tuple[int, int]], nodes: Iterable[int] = ()) -> Graph:
    """Build a Graph from an edge iterable plus optional isolated nodes."""
    adj: dict[int, set[int]] = {}
    loops = 0
    for v in nodes:
        if v < 0:
            raise InstanceError(f"negative node id {v}")
        adj.setdefault(v, set())
    for u, v in edges:
        if u < 0 or v < 0:
            raise InstanceError(f"negative node id in edge ({u}, {v})")
        adj.setdefault(u, set())
        adj.setdefault(v, set())
        if u == v:
            loops += 1
            continue
        adj[u].add(v)
        adj[v].add(u)
    if not adj:
        raise InstanceError("graph has no nodes")
    order = tuple(sorted(adj))
    return Graph(
        nodes=order,
        adjacency={v: frozenset(adj[v]) for v in order},
        self_loops_dropped=loops,
    )


def load_edge_list(text: str) -> Graph:
    """Parse a whitespace-separated ``u v`` edge list.

    Lines starting with ``#`` and blank lines are skipped. Duplicate edges
    are merged and self-loops dropped (the dropped count is logged and kept
    on the returned graph).
    """
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ParseError(f"expected two node ids, got {line!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer node id in {line!r}", lineno) from None
        edges.append((u, v))
    if not edges:
        raise InstanceError("edge list contains no edges")
    g = from_edges(edges)
    if g.self_loops_dropped:
        log.warning("dropped %d self-loop(s) while loading edge list", g.self_loops_dropped)
    return g


def dump_edge_list(g: Graph) -> str:
    lines = [f"{u} {v}" for u, v in g.edges()]
    isolated = [v for v in g.nodes if not g.adjacency[v]]
    # Isolated nodes cannot be expressed in a plain edge list; record them as comments.
    lines += [f"# isolated {v}" for v in isolated]
    return "\n".join(lines) + "\n"


def degree_centrality(g: Graph) -> dict[int, int]:
    """Unnormalised degree of every node."""
    return {v: len(g.adjacency[v]) for v in g.nodes}


def two_hop_influence(g: Graph, seeds: Iterable[int]) -> set[int]:
    """Nodes within hop distance 2 of any seed, seeds included."""
    seeds = set(seeds)
    for s in seeds:
        if s not in g.adjacency:
            raise InstanceError(f"seed {s} is not a node of the graph")
    reached = set(seeds)
    for s in seeds:
        for u in g.adjacency[s]:
            reached.add(u)
            reached.update(g.adjacency[u])
    return reached


@dataclass(frozen=True)
class Partition:
    """Assignment of every node to one community index (dense, from 0)."""

    community_of: Mapping[int, int]
    community_sizes: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.community_sizes)

    def members(self) -> list[set[int]]:
        groups: list[set[int]] = [set() for _ in self.community_sizes]
        for v, c in self.community_of.items():
            groups[c].add(v)
        return groups


def _dense_partition(labels: Mapping[int, int], order: Iterable[int]) -> Partition:
    # Renumber by first appearance in ascending node order.
    remap: dict[int, int] = {}
    community_of = {}
    for v in order:
        lab = labels[v]
        if lab not in remap:
            remap[lab] = len(remap)
        community_of[v] = remap[lab]
    sizes = Counter(community_of.values())
    return Partition(community_of, tuple(sizes[i] for i in range(len(remap))))


def single_community(g: Graph) -> Partition:
    return Partition({v: 0 for v in g.nodes}, (g.node_count,))


def detect_communities(g: Graph, seed: int = 0, max_sweeps: int = 100) -> Partition:
    """Synchronous label propagation.

    Every node starts with a distinct label drawn from a seeded permutation.
    Each sweep, all nodes simultaneously adopt the most frequent label among
    themselves and their neighbours; ties go to the lowest label. Stops at a
    fixed point or after ``max_sweeps``.
    """
    rng = random.Random(seed)
    perm = list(range(g.node_count))
    rng.shuffle(perm)
    labels = {v: perm[i] for i, v in enumerate(g.nodes)}
    for _ in range(max_sweeps):
        new = {}
        for v in g.nodes:
            counts = Counter(labels[u] for u in g.adjacency[v])
            counts[labels[v]] += 1
            top = max(counts.values())
            new[v] = min(lab for lab, c in counts.items() if c == top)
        if new == labels:
            break
        labels = new
    return _dense_partition(labels, g.nodes)


def load_partition(text: str, g: Graph) -> Partition:
    """Parse ``node community`` lines; every graph node must appear exactly once."""
    labels: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ParseError(f"expected 'node community', got {line!r}", lineno)
        try:
            v, c = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"non-integer token in {line!r}", lineno) from None
        if v not in g.adjacency:
            raise InstanceError(f"node {v} is not in the graph")
        if v in labels:
            raise InstanceError(f"node {v} assigned more than once")
        labels[v] = c
    for v in g.nodes:
        if v not in labels:
            raise InstanceError(f"node {v} unassigned")
    return _dense_partition(labels, sorted(labels, key=lambda v: (labels[v], v)))


# Synthetic generators. Node ids are contiguous from 0.

def path_graph(n: int) -> Graph:
    if n < 1:
        raise InstanceError("path needs at least one node")
    return from_edges([(i, i + 1) for i in range(n - 1)], nodes=range(n))


def star_graph(leaves: int, center: int | None = None) -> Graph:
    if leaves < 1:
        raise InstanceError("star needs at least one leaf")
    center = leaves if center is None else center
    ids = [i for i in range(leaves + 1) if i != center][:leaves]
    return from_edges([(center, v) for v in ids])


def complete_graph(n: int, offset: int = 0) -> Graph:
    nodes = range(offset, offset + n)
    return from_edges([(u, v) for u in nodes for v in nodes if u < v], nodes=nodes)


def two_cliques(a: int, b: int) -> Graph:
    """Two disjoint cliques of sizes ``a`` and ``b``."""
    if a < 1 or b < 1:
        raise InstanceError("clique sizes must be positive")
    left = [(u, v) for u in range(a) for v in range(a) if u < v]
    right = [(u, v) for u in range(a, a + b) for v in range(a, a + b) if u < v]
    return from_edges(left + right, nodes=range(a + b))


def barbell_graph(m: int, bridge: int) -> Graph:
    """Two ``m``-cliques joined through a path of ``bridge`` extra nodes.

    Ids: first clique ``0..m-1``, bridge ``m..m+bridge-1``, second clique after.
    """
    if m < 2 or bridge < 0:
        raise InstanceError("barbell needs m >= 2 and bridge >= 0")
    edges = [(u, v) for u in range(m) for v in range(m) if u < v]
    off = m + bridge
    edges += [(u, v) for u in range(off, off + m) for v in range(off, off + m) if u < v]
    chain = [m - 1] + list(range(m, m + bridge)) + [off]
    edges += list(zip(chain, chain[1:]))
    return from_edges(edges, nodes=range(2 * m + bridge))


def random_graph(n: int, p: float, seed: int = 0) -> Graph:
    """Erdos-Renyi G(n, p) with a seeded stream."""
    if n < 1 or not 0.0 <= p <= 1.0:
        raise InstanceError("random graph needs n >= 1 and 0 <= p <= 1")
    rng = random.Random(seed)
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return from_edges(edges, nodes=range(n))


GENERATORS = {
    "path": path_graph,
    "star": star_graph,
    "complete": complete_graph,
    "two_cliques": two_cliques,
    "barbell": barbell_graph,
    "random": random_graph,
}


def generate(kind: str, **params) -> Graph:
    try:
        fn = GENERATORS[kind]
    except KeyError:
        raise InstanceError(f"unknown graph kind {kind!r}; choose from {sorted(GENERATORS)}") from None
    try:
        return fn(**params)
    except TypeError as exc:
        raise InstanceError(f"bad parameters for {kind}: {exc}") from None


def candidate_count(node_count: int, fraction: float) -> int:
    return math.ceil(fraction * node_count - 1e-12)
