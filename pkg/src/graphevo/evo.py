"""Solutions, fitness, and the deterministic classical operators.

A solution is a tuple of distinct node ids; a population is a list of
solutions. Every randomised function takes ``seed``, which may be an int or
an existing :class:`random.Random` (so callers can thread one stream through
several operations).
"""

from __future__ import annotations

import hashlib
import logging
import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .errors import InstanceError
from .graph import Graph, Partition, candidate_count, degree_centrality, two_hop_influence

log = logging.getLogger(__name__)

Solution = tuple[int, ...]
Population = list[Solution]
Seed = Union[int, random.Random, None]


def as_rng(seed: Seed) -> random.Random:
    if isinstance(seed, random.Random):
        return seed
    return random.Random(seed)


def derive_seed(master: int, *names) -> int:
    """Stable 64-bit sub-seed for a named stream; independent of call order."""
    key = repr((master,) + tuple(names)).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


@dataclass(frozen=True)
class CandidateSet:
    ids: frozenset[int]
    requested_fraction: float = 1.0

    def __len__(self) -> int:
        return len(self.ids)

    def sorted(self) -> list[int]:
        return sorted(self.ids)


def fitness(g: Graph, part: Partition, s: Iterable[int]) -> float:
    """Community-weighted 2-hop influence: sum_i |C_i|/|V| * |I(S) & C_i|."""
    reached = two_hop_influence(g, s)
    hits = [0] * part.k
    for v in reached:
        hits[part.community_of[v]] += 1
    total = g.node_count
    return sum(size * h for size, h in zip(part.community_sizes, hits)) / total


def rank_and_filter_candidates(g: Graph, fraction: float) -> CandidateSet:
    """Top ceil(fraction * |V|) nodes by degree, ties to the lower id."""
    if not 0.0 < fraction <= 1.0:
        raise InstanceError(f"candidate fraction must be in (0, 1], got {fraction}")
    deg = degree_centrality(g)
    ranked = sorted(g.nodes, key=lambda v: (-deg[v], v))
    return CandidateSet(frozenset(ranked[: candidate_count(g.node_count, fraction)]), fraction)


def random_init(cands: CandidateSet, n: int, k: int, seed: Seed = None) -> Population:
    if len(cands) < n:
        raise InstanceError(f"need at least {n} candidates, have {len(cands)}")
    rng = as_rng(seed)
    pool = cands.sorted()
    return [tuple(rng.sample(pool, n)) for _ in range(k)]


# Selection. The *_indices functions return chosen positions; the select_*
# wrappers materialise the population.

def roulette_indices(fit: Sequence[float], k: int, seed: Seed = None) -> list[int]:
    rng = as_rng(seed)
    if any(f < 0 for f in fit):
        raise InstanceError("roulette selection needs non-negative fitness")
    if sum(fit) <= 0:
        log.info("roulette: all-zero fitness, falling back to uniform draws")
        return [rng.randrange(len(fit)) for _ in range(k)]
    return rng.choices(range(len(fit)), weights=fit, k=k)


def tournament_indices(fit: Sequence[float], k: int, tsize: int, seed: Seed = None) -> list[int]:
    if not 1 <= tsize <= len(fit):
        raise InstanceError(f"tournament size {tsize} outside [1, {len(fit)}]")
    rng = as_rng(seed)
    picks = []
    for _ in range(k):
        members = rng.sample(range(len(fit)), tsize)
        # max fitness, then lowest index
        picks.append(min(members, key=lambda i: (-fit[i], i)))
    return picks


def random_indices(size: int, k: int, seed: Seed = None) -> list[int]:
    rng = as_rng(seed)
    return [rng.randrange(size) for _ in range(k)]


def select_roulette(pop: Population, fit: Sequence[float], seed: Seed = None) -> Population:
    return [pop[i] for i in roulette_indices(fit, len(pop), seed)]


def select_tournament(pop: Population, fit: Sequence[float], tsize: int, seed: Seed = None) -> Population:
    return [pop[i] for i in tournament_indices(fit, len(pop), tsize, seed)]


def select_random(pop: Population, fit: Sequence[float] = (), seed: Seed = None) -> Population:
    return [pop[i] for i in random_indices(len(pop), len(pop), seed)]


def select_none(pop: Population, fit: Sequence[float] = (), seed: Seed = None) -> Population:
    return list(pop)


def _dedup_child(child: list[int], fallback: Sequence[Sequence[int]], rng: random.Random) -> list[int]:
    """Replace repeated entries with unused ids from the fallback pools, in order."""
    seen: set[int] = set()
    dup_pos = []
    for i, v in enumerate(child):
        if v in seen:
            dup_pos.append(i)
        seen.add(v)
    for pos in dup_pos:
        for pool in fallback:
            free = sorted(set(pool) - set(child))
            if free:
                child[pos] = rng.choice(free)
                break
    return child


def classical_crossover(
    a: Solution, b: Solution, seed: Seed = None, candidates: CandidateSet | None = None,
    mask: Sequence[bool] | None = None,
) -> tuple[Solution, Solution]:
    """Random subset exchange with duplicate repair.

    Each position is swapped with probability 0.5 (or per ``mask``). Repeated
    ids in a child are replaced by unused ids from the parents first, then
    from the candidates. Parents of unequal length (flawed solutions that
    were accepted upstream) exchange over the common prefix and keep their
    own tails.
    """
    rng = as_rng(seed)
    common = min(len(a), len(b))
    if mask is None:
        mask = [rng.random() < 0.5 for _ in range(common)]
    c1 = [y if m else x for x, y, m in zip(a, b, mask)] + list(a[common:])
    c2 = [x if m else y for x, y, m in zip(a, b, mask)] + list(b[common:])
    pools: list[Sequence[int]] = [sorted(set(a) | set(b))]
    if candidates is not None:
        pools.append(candidates.sorted())
    return tuple(_dedup_child(c1, pools, rng)), tuple(_dedup_child(c2, pools, rng))


def classical_mutation(s: Solution, cands: CandidateSet, rate: float, seed: Seed = None) -> Solution:
    """Replace each position with probability ``rate`` by an unused candidate."""
    if not 0.0 <= rate <= 1.0:
        raise InstanceError(f"mutation rate must be in [0, 1], got {rate}")
    rng = as_rng(seed)
    out = list(s)
    pool = cands.sorted()
    for i in range(len(out)):
        if rng.random() >= rate:
            continue
        free = [c for c in pool if c not in out]
        if not free:
            log.info("mutation: no unused candidate for position %d, left unchanged", i)
            continue
        out[i] = rng.choice(free)
    return tuple(out)


def greedy_by_degree(g: Graph, n: int) -> Solution:
    """Reference baseline: the n highest-degree nodes."""
    deg = degree_centrality(g)
    return tuple(sorted(g.nodes, key=lambda v: (-deg[v], v))[:n])


def low_fitness_indices(fit: Sequence[float], fraction: float = 0.1) -> set[int]:
    """Indices strictly below the bottom-``fraction`` cut of the fitness ranking.

    With ``m = floor(fraction * k)``, the cut is the (m+1)-th smallest value;
    ties at the cut are not flagged, so a flat population has no low members.
    """
    k = len(fit)
    m = math.floor(fraction * k + 1e-12)
    if m == 0:
        return set()
    cut = sorted(fit)[m]
    return {i for i, f in enumerate(fit) if f < cut}
