"""Token counting, per-run token ledgers, and the population-vs-individual cost model."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .errors import ComparisonError, ContractError, InstanceError

TokenCounter = Callable[[str], int]

CALL_KINDS = ("initial", "repair", "regeneration")


def count_tokens(text: str) -> int:
    """Default heuristic: ceil(utf-8 byte length / 4)."""
    return math.ceil(len(text.encode("utf-8")) / 4)


def count_segments(segments: Iterable[str], counter: TokenCounter = count_tokens) -> int:
    """A prompt costs the sum of its segments' counts (keeps the cost model additive)."""
    return sum(counter(s) for s in segments)


@dataclass(frozen=True)
class LedgerEntry:
    generation: int
    phase: str
    call_kind: str
    prompt_tokens: int
    reply_tokens: int

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.reply_tokens


@dataclass
class TokenLedger:
    """Append-only record of every backend call's token usage.

    ``meta`` carries a fingerprint of the run so two ledgers can be checked
    for comparability before computing measured savings. Owned by a single
    run; concurrent callers must funnel appends through one writer.
    """

    entries: list[LedgerEntry] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def record(self, generation: int, phase, call_kind: str, prompt_tokens: int, reply_tokens: int) -> LedgerEntry:
        if call_kind not in CALL_KINDS:
            raise ContractError(f"unknown call kind {call_kind!r}")
        phase = getattr(phase, "value", phase)
        entry = LedgerEntry(generation, phase, call_kind, prompt_tokens, reply_tokens)
        self.entries.append(entry)
        return entry

    def totals(self) -> dict[tuple[str, str], dict[str, int]]:
        out: dict[tuple[str, str], dict[str, int]] = defaultdict(lambda: {"calls": 0, "prompt_tokens": 0, "reply_tokens": 0})
        for e in self.entries:
            t = out[(e.phase, e.call_kind)]
            t["calls"] += 1
            t["prompt_tokens"] += e.prompt_tokens
            t["reply_tokens"] += e.reply_tokens
        return dict(out)

    def total_tokens(self, call_kind: Optional[str] = None) -> int:
        return sum(e.total for e in self.entries if call_kind is None or e.call_kind == call_kind)

    def calls(self, phase=None, call_kind: Optional[str] = None, generation: Optional[int] = None) -> int:
        phase = getattr(phase, "value", phase)
        return sum(
            1 for e in self.entries
            if (phase is None or e.phase == phase)
            and (call_kind is None or e.call_kind == call_kind)
            and (generation is None or e.generation == generation)
        )

    def prompt_tokens_by_generation(self, phase, call_kind: str = "initial") -> dict[int, int]:
        phase = getattr(phase, "value", phase)
        out: dict[int, int] = defaultdict(int)
        for e in self.entries:
            if e.phase == phase and e.call_kind == call_kind:
                out[e.generation] += e.prompt_tokens
        return dict(out)

    def summary(self) -> dict:
        by_kind = {kind: self.total_tokens(kind) for kind in CALL_KINDS}
        return {
            "initial": by_kind["initial"],
            "repair": by_kind["repair"],
            "regeneration": by_kind["regeneration"],
            "total": self.total_tokens(),
            "calls": len(self.entries),
            "by_phase": {
                f"{p}/{k}": v for (p, k), v in sorted(self.totals().items())
            },
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["generation", "phase", "call_kind", "prompt_tokens", "reply_tokens"])
        for e in self.entries:
            w.writerow([e.generation, e.phase, e.call_kind, e.prompt_tokens, e.reply_tokens])
        return buf.getvalue()


@dataclass(frozen=True)
class CostModel:
    """Inputs of the closed-form saving predictions (all token counts)."""

    v_prompt_crossover_s: int
    v_prompt_mutation_s: int
    delta_c: int
    delta_m: int
    v_solution: int
    n_p: int

    def __post_init__(self):
        for name in ("v_prompt_crossover_s", "v_prompt_mutation_s", "delta_c", "delta_m", "v_solution", "n_p"):
            if getattr(self, name) < 0:
                raise InstanceError(f"{name} must be non-negative")


def predicted_saving_crossover(m: CostModel) -> tuple[int, int]:
    """(exact, approximate) per-generation crossover saving of population level.

    exact = (N_p/2 - 1) * V(T_C^S) - delta_C; approx = (N_p - 2)/2 * V(T_C^S).
    """
    if m.n_p < 2 or m.n_p % 2:
        raise InstanceError(f"crossover pairing needs an even population size >= 2, got {m.n_p}")
    half = m.n_p // 2
    exact = (half - 1) * m.v_prompt_crossover_s - m.delta_c
    approx = (m.n_p - 2) * m.v_prompt_crossover_s // 2
    return exact, approx


def predicted_saving_mutation(m: CostModel) -> tuple[int, int]:
    """(exact, approximate): N_p * V(T_M^S) - delta_M and (N_p - 1) * V(T_M^S)."""
    if m.n_p < 1:
        raise InstanceError("mutation saving needs N_p >= 1")
    return m.n_p * m.v_prompt_mutation_s - m.delta_m, (m.n_p - 1) * m.v_prompt_mutation_s


def derived_saving_mutation(m: CostModel) -> int:
    """The difference of the two per-generation mutation cost expressions.

    (V(T_M^S) + V(S)) * N_p - (V(T_M^S) + delta_M + N_p * V(S))
    = (N_p - 1) * V(T_M^S) - delta_M. This is what a ledger measures; the
    closed form returned by :func:`predicted_saving_mutation` is larger by
    exactly one template, V(T_M^S).
    """
    if m.n_p < 1:
        raise InstanceError("mutation saving needs N_p >= 1")
    return (m.n_p - 1) * m.v_prompt_mutation_s - m.delta_m


def predicted_cost(m: CostModel) -> dict[str, int]:
    """Per-generation prompt cost of each mode under the model's V(S)."""
    v_pop = m.n_p * m.v_solution
    return {
        "crossover_population": m.v_prompt_crossover_s + m.delta_c + v_pop,
        "crossover_individual": (m.v_prompt_crossover_s + 2 * m.v_solution) * m.n_p // 2,
        "mutation_population": m.v_prompt_mutation_s + m.delta_m + v_pop,
        "mutation_individual": (m.v_prompt_mutation_s + m.v_solution) * m.n_p,
    }


def measured_saving(ledger_individual: TokenLedger, ledger_population: TokenLedger, phase: str) -> dict[int, int]:
    """Per generation: individual-mode initial prompt tokens minus population-mode ones.

    ``phase`` is ``"crossover"`` or ``"mutation"``. Both ledgers must come
    from fault-free runs that differ only in mode.
    """
    if phase not in ("crossover", "mutation"):
        raise ContractError(f"phase must be 'crossover' or 'mutation', got {phase!r}")
    fi = ledger_individual.meta.get("fingerprint")
    fp = ledger_population.meta.get("fingerprint")
    if fi is None or fi != fp:
        raise ComparisonError("ledgers come from runs with different configurations")
    if ledger_individual.meta.get("mode") != "individual_level" or ledger_population.meta.get("mode") != "population_level":
        raise ComparisonError("expected one individual-level and one population-level ledger")
    ind_phase, pop_phase = ("CrossoverS", "CrossoverP") if phase == "crossover" else ("MutationS", "MutationP")
    ind = ledger_individual.prompt_tokens_by_generation(ind_phase)
    pop = ledger_population.prompt_tokens_by_generation(pop_phase)
    if set(ind) != set(pop):
        raise ComparisonError("ledgers cover different generations")
    return {g: ind[g] - pop[g] for g in sorted(ind)}
