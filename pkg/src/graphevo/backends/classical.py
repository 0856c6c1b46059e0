"""Backend adapter over the deterministic classical operators."""

from __future__ import annotations

import random
from collections import Counter

from ..errors import ContractError
from ..evo import (
    CandidateSet,
    classical_crossover,
    classical_mutation,
    derive_seed,
    low_fitness_indices,
    random_indices,
    random_init,
    roulette_indices,
    tournament_indices,
)
from ..graph import candidate_count
from ..validation import Phase, RawOutput, Thresholds, serialize
from .base import OperatorBackend, OperatorRequest, pair_seed, pairing_order, solution_seed

SELECTION_STRATEGIES = ("tournament", "roulette", "random")


class ClassicalBackend(OperatorBackend):
    """Deterministic baseline operators behind the backend interface.

    Selection draws only from solutions outside the low-fitness band and caps
    each id's multiplicity, so its replies respect the same selection rules
    the checks enforce. With the default gene rate, mutation always changes
    at least one element when an unused candidate exists, and crossover of
    two parents that differ in at least two elements each always changes
    the children's element sets (with one differing element per side, any
    exchange only swaps the two sets, which the checks flag as E11).
    """

    name = "classical"
    supports_repair = False

    def __init__(self, selection: str = "tournament", tournament_size: int = 3,
                 gene_rate: float | None = None, thresholds: Thresholds | None = None, seed: int = 0):
        if selection not in SELECTION_STRATEGIES:
            raise ContractError(f"unknown selection strategy {selection!r}")
        self.selection = selection
        self.tournament_size = tournament_size
        self.gene_rate = gene_rate
        self.thresholds = thresholds or Thresholds()
        self._fallback = random.Random(seed)
        self.model = f"{selection}"

    def _seed(self, req: OperatorRequest) -> int:
        base = req.seed if req.seed is not None else self._fallback.getrandbits(64)
        return base if req.attempt == 0 else derive_seed(base, "attempt", req.attempt)

    def call(self, req: OperatorRequest) -> RawOutput:
        value = self.compute(req)
        return RawOutput(serialize(value), req.phase, req.level, self.prompt_for(req))

    def repair_reply(self, prompt):
        raise ContractError("classical operators never need repair")

    # -- structured results (also used by the faulty backend)

    def compute(self, req: OperatorRequest):
        seed = self._seed(req)
        p = req.phase
        if p is Phase.CANDIDATE_SELECTION:
            ranked = sorted(req.ids_with_metric, key=lambda im: (-im[1], im[0]))
            return [i for i, _ in ranked[: candidate_count(len(ranked), req.fraction)]]
        if p is Phase.INITIALIZATION:
            return [list(s) for s in random_init(CandidateSet(req.candidates), req.n, req.k, seed)]
        if p is Phase.SELECTION:
            return self._select(req.fitness, req.k, random.Random(seed))
        cands = CandidateSet(req.candidates) if req.candidates is not None else None
        if p is Phase.CROSSOVER_P:
            out = [list(s) for s in req.population]
            for i, (x, y) in enumerate(pairing_order(len(out), seed)):
                c1, c2 = self._cross(req.population[x], req.population[y], cands, random.Random(pair_seed(seed, i)))
                out[x], out[y] = c1, c2
            return out
        if p is Phase.CROSSOVER_S:
            a, b = req.population
            return self._cross(a, b, cands, random.Random(seed))
        if p is Phase.MUTATION_P:
            return [self._mutate(s, cands, random.Random(solution_seed(seed, i))) for i, s in enumerate(req.population)]
        if p is Phase.MUTATION_S:
            return self._mutate(req.population[0], cands, random.Random(seed))
        raise ContractError(f"unsupported phase {p}")

    def _cross(self, a, b, cands, rng: random.Random) -> list[list[int]]:
        c1, c2 = (list(c) for c in classical_crossover(tuple(a), tuple(b), rng, cands))
        sa, sb = set(a), set(b)
        if sa != sb and {frozenset(c1), frozenset(c2)} == {frozenset(sa), frozenset(sb)}:
            # The random mask was a no-op on the sets; trade one non-shared element.
            only_a = [j for j, v in enumerate(a) if v not in sb]
            only_b = [j for j, v in enumerate(b) if v not in sa]
            if only_a and only_b:
                c1, c2 = list(a), list(b)
                i, j = rng.choice(only_a), rng.choice(only_b)
                c1[i], c2[j] = c2[j], c1[i]
        return [c1, c2]

    def _mutate(self, s, cands: CandidateSet, rng: random.Random) -> list[int]:
        rate = self.gene_rate if self.gene_rate is not None else 1.0 / max(1, len(s))
        out = list(classical_mutation(tuple(s), cands, rate, rng))
        if self.gene_rate is None and set(out) == set(s):
            free = [c for c in cands.sorted() if c not in out]
            if free:
                out[rng.randrange(len(out))] = rng.choice(free)
        return out

    def _draw(self, fit, pool, rng) -> int:
        sub = [fit[i] for i in pool]
        if self.selection == "tournament":
            j = tournament_indices(sub, 1, min(self.tournament_size, len(sub)), rng)[0]
        elif self.selection == "roulette":
            j = roulette_indices(sub, 1, rng)[0]
        else:
            j = random_indices(len(sub), 1, rng)[0]
        return pool[j]

    def _select(self, fit, k: int, rng: random.Random) -> list[int]:
        low = low_fitness_indices(fit, self.thresholds.low_fitness_fraction)
        pool = [i for i in range(len(fit)) if i not in low] or list(range(len(fit)))
        bound = self.thresholds.multiplicity_bound(k)
        capped = len(pool) * bound >= k
        counts: Counter = Counter()
        picks = []
        for _ in range(k):
            pick = self._draw(fit, pool, rng)
            if capped and counts[pick] >= bound:
                open_ = [i for i in pool if counts[i] < bound]
                pick = self._draw(fit, open_, rng)
            counts[pick] += 1
            picks.append(pick)
        return picks
