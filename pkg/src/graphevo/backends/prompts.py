"""Operator and repair prompt templates.

A prompt is a sequence of segments: instruction segments (the template)
followed by payload segments (one per serialized solution or id/metric
pair). Token cost is summed per segment, so the population-level prompt
costs exactly the individual-level template, plus the administrative
suffix, plus the payload.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..cost import CostModel, TokenCounter, count_segments, count_tokens
from ..validation import DESCRIPTIONS, Level, Phase, serialize

SELECTION_PRINCIPLES = (
    "Rule 1: never pick a solution whose fitness is among the lowest in the list.",
    "Rule 2: a solution may be picked more than once, but do not pick any one solution so often that the population loses diversity.",
)


@dataclass(frozen=True)
class Prompt:
    phase: Phase
    level: Level
    template: tuple[str, ...]
    payload: tuple[str, ...]

    @property
    def segments(self) -> tuple[str, ...]:
        return self.template + self.payload

    @property
    def text(self) -> str:
        return "\n".join(self.segments)

    def tokens(self, counter: TokenCounter = count_tokens) -> int:
        return count_segments(self.segments, counter)

    def template_tokens(self, counter: TokenCounter = count_tokens) -> int:
        return count_segments(self.template, counter)


def _candidates_line(candidates) -> str:
    return "Candidate elements: " + serialize(sorted(candidates))


def crossover_template(n: int, k: int | None = None) -> tuple[str, ...]:
    """Individual-level crossover template; pass ``k`` for the population-level variant."""
    base = (
        "You are the crossover operator of an evolutionary optimizer over sets of graph elements.",
        f"Combine the parent solutions listed below into child solutions. Every child must contain exactly {n} distinct element IDs, taken from the parents.",
        "Answer with a Python list of lists of integers, one inner list per child, and nothing else.",
    )
    if k is None:
        return base
    return base + (
        f"The list below is a whole population: pair its solutions at random and keep applying crossover until {k} new solutions exist, then return all {k} together.",
    )


def mutation_template(n: int, candidates, k: int | None = None) -> tuple[str, ...]:
    base = (
        "You are the mutation operator of an evolutionary optimizer over sets of graph elements.",
        f"Mutate the solution below by replacing one or more of its elements with other candidate elements. The result must contain exactly {n} distinct element IDs, all taken from the candidates.",
        _candidates_line(candidates),
        "Answer with the mutated solution as a Python list of integers and nothing else.",
    )
    if k is None:
        return base
    return base + (
        f"The input below is a whole population: mutate every solution and answer with all {k} mutated solutions as one Python list of lists.",
    )


def candidate_template(fraction: float, count: int, metric: str = "degree") -> tuple[str, ...]:
    return (
        f"Each line below is (element ID, {metric}).",
        f"Rank the elements by {metric} from highest to lowest and return the top {fraction:.0%} of them ({count} element IDs).",
        "Answer with a Python list of integers and nothing else.",
    )


def init_template(candidates, n: int, k: int) -> tuple[str, ...]:
    return (
        "You are initializing the population of an evolutionary optimizer.",
        _candidates_line(candidates),
        f"Create {k} solutions. Each solution is a list of {n} distinct element IDs sampled at random from the candidates.",
        "Answer with a Python list of lists of integers and nothing else.",
    )


def selection_template(k: int) -> tuple[str, ...]:
    return (
        "You are the selection operator of an evolutionary optimizer.",
        "Each line below is (solution ID, fitness); higher fitness is better.",
        f"Choose {k} solution IDs to form the next parent population.",
        *SELECTION_PRINCIPLES,
        f"Answer with a Python list of exactly {k} integer solution IDs and nothing else.",
    )


def _fmt_fitness(f: float) -> str:
    return format(f, ".6g")


def candidate_prompt(ids_with_metric: Sequence[tuple[int, float]], fraction: float, count: int) -> Prompt:
    payload = tuple(f"({i}, {_fmt_fitness(m)})" for i, m in ids_with_metric)
    return Prompt(Phase.CANDIDATE_SELECTION, Level.CANDIDATE_LIST, candidate_template(fraction, count), payload)


def init_prompt(candidates, n: int, k: int) -> Prompt:
    return Prompt(Phase.INITIALIZATION, Level.POPULATION, init_template(candidates, n, k), ())


def selection_prompt(id_fitness: Sequence[tuple[int, float]], k: int) -> Prompt:
    payload = tuple(f"({i}, {_fmt_fitness(f)})" for i, f in id_fitness)
    return Prompt(Phase.SELECTION, Level.ID_LIST, selection_template(k), payload)


def crossover_population_prompt(pop, n: int) -> Prompt:
    return Prompt(Phase.CROSSOVER_P, Level.POPULATION, crossover_template(n, len(pop)), tuple(serialize(s) for s in pop))


def crossover_pair_prompt(a, b, n: int) -> Prompt:
    return Prompt(Phase.CROSSOVER_S, Level.PAIR, crossover_template(n), (serialize(a), serialize(b)))


def mutation_population_prompt(pop, candidates, n: int) -> Prompt:
    return Prompt(Phase.MUTATION_P, Level.POPULATION, mutation_template(n, candidates, len(pop)), tuple(serialize(s) for s in pop))


def mutation_individual_prompt(s, candidates, n: int) -> Prompt:
    return Prompt(Phase.MUTATION_S, Level.INDIVIDUAL, mutation_template(n, candidates), (serialize(s),))


# Repair prompts: one template per moderate code.

REQUIRED_SHAPE = {
    Level.POPULATION: "a Python list of lists of integers, one inner list per solution",
    Level.PAIR: "a Python list holding exactly two integer lists",
    Level.INDIVIDUAL: "a Python list of integers",
    Level.ID_LIST: "a Python list of integer solution IDs",
    Level.CANDIDATE_LIST: "a Python list of integer element IDs",
}

CONSTRAINTS = {
    10: "Every solution must contain exactly {n} elements.",
    11: "The operation must change the input; return a result that differs from it.",
    12: "The output must contain exactly {k} entries.",
    13: "No solution may contain the same element twice.",
    14: "Every element must be one of the candidate elements.",
    15: "Do not select solutions whose fitness is among the lowest.",
}


@dataclass(frozen=True)
class RepairPrompt:
    template_id: str
    error_code: int
    rendered_text: str
    previous_output: str
    phase: Phase
    level: Level
    segments: tuple[str, ...] = ()

    def tokens(self, counter: TokenCounter = count_tokens) -> int:
        return count_segments(self.segments, counter)


def render_repair(code: int, detail: str, previous_output: str, phase: Phase, level: Level,
                  n: int = 0, k: int = 0, candidates=None) -> RepairPrompt:
    constraint = CONSTRAINTS.get(code, DESCRIPTIONS[code]).format(n=n, k=k)
    segments = [
        f"Your previous answer has error E{code}: {DESCRIPTIONS[code]} ({detail}).",
        f"Constraint: {constraint}",
        f"Required shape: {REQUIRED_SHAPE[Level(level)]}.",
    ]
    if code == 14 and candidates is not None:
        segments.append(_candidates_line(candidates))
    segments += ["Previous answer:", previous_output, "Answer with the corrected output only."]
    return RepairPrompt(
        template_id=f"repair-E{code}",
        error_code=code,
        rendered_text="\n".join(segments),
        previous_output=previous_output,
        phase=Phase(phase),
        level=Level(level),
        segments=tuple(segments),
    )


def template_cost_model(n: int, candidates, n_p: int, v_solution: int = 0,
                        counter: TokenCounter = count_tokens) -> CostModel:
    """Cost-model inputs measured from the shipped templates."""
    cs = count_segments(crossover_template(n), counter)
    ms = count_segments(mutation_template(n, candidates), counter)
    return CostModel(
        v_prompt_crossover_s=cs,
        v_prompt_mutation_s=ms,
        delta_c=count_segments(crossover_template(n, n_p), counter) - cs,
        delta_m=count_segments(mutation_template(n, candidates, n_p), counter) - ms,
        v_solution=v_solution,
        n_p=n_p,
    )
