import itertools
import random

import networkx as nx
import pytest

from graphevo.graph import (
    complete_graph,
    from_edges,
    path_graph,
    random_graph,
    star_graph,
    two_cliques,
)


def to_nx(g):
    h = nx.Graph()
    h.add_nodes_from(g.nodes)
    h.add_edges_from(g.edges())
    return h


def oracle_two_hop(g, seeds):
    """All-pairs BFS through networkx, independent of the package's BFS."""
    dist = dict(nx.all_pairs_shortest_path_length(to_nx(g)))
    return {v for v in g.nodes if any(dist[s].get(v, 99) <= 2 for s in seeds)}


def oracle_fitness(g, part, seeds):
    reached = oracle_two_hop(g, seeds)
    total = 0.0
    for c in range(part.k):
        members = {v for v in g.nodes if part.community_of[v] == c}
        total += len(members) / g.node_count * len(reached & members)
    return total


def small_corpus():
    """At least ten graphs of at most 15 nodes, mixed families."""
    gs = [
        path_graph(5),
        path_graph(12),
        star_graph(6),
        star_graph(14),
        complete_graph(4),
        complete_graph(7),
        two_cliques(3, 3),
        two_cliques(5, 4),
        random_graph(10, 0.3, seed=1),
        random_graph(15, 0.2, seed=2),
        random_graph(13, 0.15, seed=3),
        from_edges([(0, 1), (1, 2), (5, 6)], nodes=[9]),
    ]
    return gs


def seed_sets(nodes, max_size=3):
    for r in range(0, max_size + 1):
        yield from itertools.combinations(nodes, r)


@pytest.fixture
def rng():
    return random.Random(1234)
