"""Operator-backend abstraction.

Backends turn an :class:`OperatorRequest` into a :class:`RawOutput`. They
never validate; checking and repair happen in :mod:`graphevo.repair`.
"""

from __future__ import annotations

import random
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from ..errors import ContractError
from ..evo import CandidateSet, Solution, derive_seed
from ..graph import candidate_count
from ..validation import Level, Phase, RawOutput
from . import prompts
from .prompts import Prompt, RepairPrompt


@dataclass(frozen=True)
class OperatorRequest:
    """One operator invocation, complete enough to be re-issued verbatim.

    ``population`` is the operator input: the whole population, the two
    parents of a crossover pair, or a single solution for mutation.
    """

    phase: Phase
    n: int = 0
    k: int = 0
    population: tuple[Solution, ...] = ()
    candidates: Optional[frozenset[int]] = None
    ids_with_metric: tuple[tuple[int, float], ...] = ()
    fraction: float = 1.0
    id_fitness: tuple[tuple[int, float], ...] = ()
    generation: int = 0
    seed: Optional[int] = None
    attempt: int = 0
    index: int = 0

    @property
    def level(self) -> Level:
        return self.phase.level

    @property
    def call_kind(self) -> str:
        return "initial" if self.attempt == 0 else "regeneration"

    def retry(self) -> "OperatorRequest":
        return replace(self, attempt=self.attempt + 1)

    @property
    def fitness(self) -> list[float]:
        return [f for _, f in self.id_fitness]

    @property
    def requested_count(self) -> int:
        return candidate_count(len(self.ids_with_metric), self.fraction)


def build_prompt(req: OperatorRequest) -> Prompt:
    p = req.phase
    if p is Phase.CANDIDATE_SELECTION:
        return prompts.candidate_prompt(req.ids_with_metric, req.fraction, req.requested_count)
    if p is Phase.INITIALIZATION:
        return prompts.init_prompt(req.candidates, req.n, req.k)
    if p is Phase.SELECTION:
        return prompts.selection_prompt(req.id_fitness, req.k)
    if p is Phase.CROSSOVER_P:
        return prompts.crossover_population_prompt(req.population, req.n)
    if p is Phase.CROSSOVER_S:
        a, b = req.population
        return prompts.crossover_pair_prompt(a, b, req.n)
    if p is Phase.MUTATION_P:
        return prompts.mutation_population_prompt(req.population, req.candidates, req.n)
    if p is Phase.MUTATION_S:
        return prompts.mutation_individual_prompt(req.population[0], req.candidates, req.n)
    raise ContractError(f"no prompt for phase {p}")


# Shared pairing and seeding rules. Population-level classical crossover and
# the engine's individual-level loop use the same ones, so both modes see
# identical draws for identical seeds.

def pairing_order(size: int, seed: int) -> list[tuple[int, int]]:
    order = list(range(size))
    random.Random(derive_seed(seed, "pairing")).shuffle(order)
    return [(order[i], order[i + 1]) for i in range(0, size - 1, 2)]


def pair_seed(seed: int, i: int) -> int:
    return derive_seed(seed, "pair", i)


def solution_seed(seed: int, i: int) -> int:
    return derive_seed(seed, "solution", i)


class OperatorBackend(ABC):
    """Call surface for initialization, selection, crossover, mutation and repair."""

    name = "abstract"
    model = ""
    supports_repair = True

    @abstractmethod
    def call(self, request: OperatorRequest) -> RawOutput:
        """Produce the raw reply for one operator request."""

    @abstractmethod
    def repair_reply(self, prompt: RepairPrompt) -> RawOutput:
        """Answer a targeted repair prompt."""

    def prompt_for(self, request: OperatorRequest) -> Prompt:
        return build_prompt(request)

    # Convenience wrappers matching the operator surface.

    def candidate_select(self, ids_with_metric: Sequence[tuple[int, float]], fraction: float, **kw) -> RawOutput:
        return self.call(OperatorRequest(Phase.CANDIDATE_SELECTION, ids_with_metric=tuple(ids_with_metric), fraction=fraction, **kw))

    def init_sample(self, cands: CandidateSet, n: int, k: int, **kw) -> RawOutput:
        return self.call(OperatorRequest(Phase.INITIALIZATION, n=n, k=k, candidates=frozenset(cands.ids), **kw))

    def select(self, id_fitness: Sequence[tuple[int, float]], k: int, **kw) -> RawOutput:
        if k < 1:
            raise ContractError("selection size must be >= 1")
        return self.call(OperatorRequest(Phase.SELECTION, k=k, id_fitness=tuple(id_fitness), **kw))

    def crossover_population(self, pop: Sequence[Solution], n: int | None = None, **kw) -> RawOutput:
        pop = tuple(tuple(s) for s in pop)
        n = n if n is not None else len(pop[0])
        return self.call(OperatorRequest(Phase.CROSSOVER_P, n=n, k=len(pop), population=pop, **kw))

    def crossover_pair(self, a: Solution, b: Solution, **kw) -> RawOutput:
        return self.call(OperatorRequest(Phase.CROSSOVER_S, n=len(a), k=2, population=(tuple(a), tuple(b)), **kw))

    def mutate_population(self, pop: Sequence[Solution], cands: CandidateSet, n: int | None = None, **kw) -> RawOutput:
        pop = tuple(tuple(s) for s in pop)
        n = n if n is not None else len(pop[0])
        return self.call(OperatorRequest(Phase.MUTATION_P, n=n, k=len(pop), population=pop, candidates=frozenset(cands.ids), **kw))

    def mutate_individual(self, s: Solution, cands: CandidateSet, **kw) -> RawOutput:
        return self.call(OperatorRequest(Phase.MUTATION_S, n=len(s), k=1, population=(tuple(s),), candidates=frozenset(cands.ids), **kw))

    def describe(self) -> dict:
        return {"backend": self.name, "model": self.model}
