"""Error taxonomy E1-E15, per-phase checklists, and output parsing.

Every backend reply is parsed into a :class:`ParsedOutput` and then run
through the checklist for its phase. Codes are plain ints 1..15; findings
render them as ``"E7"`` and so on.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

from .errors import ContractError


class Phase(str, Enum):
    CANDIDATE_SELECTION = "CandidateSelection"
    INITIALIZATION = "Initialization"
    SELECTION = "Selection"
    CROSSOVER_P = "CrossoverP"
    CROSSOVER_S = "CrossoverS"
    MUTATION_P = "MutationP"
    MUTATION_S = "MutationS"

    @property
    def level(self) -> "Level":
        return PHASE_LEVEL[self]


class Level(str, Enum):
    POPULATION = "population"
    INDIVIDUAL = "individual"
    PAIR = "pair"
    ID_LIST = "id-list"
    CANDIDATE_LIST = "candidate-list"

    @property
    def nested(self) -> bool:
        return self in (Level.POPULATION, Level.PAIR)


PHASE_LEVEL = {
    Phase.CANDIDATE_SELECTION: Level.CANDIDATE_LIST,
    Phase.INITIALIZATION: Level.POPULATION,
    Phase.SELECTION: Level.ID_LIST,
    Phase.CROSSOVER_P: Level.POPULATION,
    Phase.CROSSOVER_S: Level.PAIR,
    Phase.MUTATION_P: Level.POPULATION,
    Phase.MUTATION_S: Level.INDIVIDUAL,
}


class Severity(str, Enum):
    FORMAT = "format"
    CRITICAL = "critical"
    MODERATE = "moderate"


def severity(code: int) -> Severity:
    if 1 <= code <= 2:
        return Severity.FORMAT
    if 3 <= code <= 9:
        return Severity.CRITICAL
    if 10 <= code <= 15:
        return Severity.MODERATE
    raise ContractError(f"unknown error code {code}")


def code_name(code: int) -> str:
    return f"E{code}"


def parse_code(name: str | int) -> int:
    if isinstance(name, int):
        return name
    m = re.fullmatch(r"[Ee]?(\d+)", name.strip())
    if not m:
        raise ValueError(f"not an error code: {name!r}")
    return int(m.group(1))


DESCRIPTIONS = {
    1: "output is not in the required format",
    2: "output contains non-integer elements",
    3: "selected candidates deviate from the true top-ranked elements",
    4: "too few candidates returned",
    5: "population size far below the requirement",
    6: "one solution selected too many times",
    7: "a solution consists of one repeated element",
    8: "number of distinct elements collapsed",
    9: "number of distinct solutions collapsed",
    10: "some solutions have the wrong size",
    11: "output is unchanged from the input",
    12: "population size does not match the requirement",
    13: "a solution contains duplicated elements",
    14: "a solution contains elements outside the candidate set",
    15: "low-fitness solutions were selected",
}


# Rows of the phase checklist table, in check order.
CHECKLISTS: dict[Phase, tuple[int, ...]] = {
    Phase.CANDIDATE_SELECTION: (1, 2, 3, 4),
    Phase.INITIALIZATION: (1, 2, 7, 10, 12, 13, 14),
    Phase.SELECTION: (1, 2, 6, 12, 15),
    Phase.CROSSOVER_P: (1, 2, 5, 7, 8, 9, 10, 11, 12, 13),
    Phase.CROSSOVER_S: (1, 2, 7, 8, 10, 11, 13),
    Phase.MUTATION_P: (1, 2, 5, 7, 8, 9, 10, 11, 12, 13, 14),
    Phase.MUTATION_S: (1, 2, 7, 8, 10, 11, 13, 14),
}


def checklist_for(phase: Phase) -> list[int]:
    return list(CHECKLISTS[Phase(phase)])


@dataclass(frozen=True)
class ErrorFinding:
    code: int
    detail: str
    offending_indices: tuple[int, ...] = ()

    @property
    def severity(self) -> Severity:
        return severity(self.code)

    @property
    def name(self) -> str:
        return code_name(self.code)

    @property
    def hard(self) -> bool:
        """Format and critical findings are never repaired in place."""
        return self.severity is not Severity.MODERATE

    def __str__(self) -> str:
        return f"{self.name} ({self.severity.value}): {self.detail}"


@dataclass(frozen=True)
class RawOutput:
    text: str
    phase: Phase
    level: Level
    prompt: object = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ParsedOutput:
    """Integer payload of a reply.

    ``value`` is a flat list for candidate lists, selection ids and single
    solutions, and a list of lists for populations and crossover pairs.
    """

    level: Level
    value: tuple
    notes: tuple[str, ...] = ()

    @property
    def solutions(self) -> list[tuple[int, ...]]:
        if self.level.nested:
            return [tuple(s) for s in self.value]
        if self.level is Level.INDIVIDUAL:
            return [tuple(self.value)]
        raise ContractError(f"{self.level.value} output has no solutions")

    @property
    def ids(self) -> list[int]:
        if self.level.nested or self.level is Level.INDIVIDUAL:
            raise ContractError(f"{self.level.value} output is not an id list")
        return list(self.value)


@dataclass(frozen=True)
class Thresholds:
    """Cut-offs for the 'significant' deviations. Defaults are documented in the README."""

    candidate_recall: float = 0.5      # E3: recall vs true top list below this
    candidate_count: float = 0.5       # E4: returned below this share of requested
    population_size: float = 0.5       # E5 below this share of k, else E12
    multiplicity_floor: int = 3        # E6: bound = max(floor, ceil(fraction * k))
    multiplicity_fraction: float = 0.2
    distinct_elements: float = 0.5     # E8: output distinct / input distinct below this
    distinct_solutions: float = 0.5    # E9: same at solution granularity
    low_fitness_fraction: float = 0.1  # E15: bottom share of the fitness ranking

    def multiplicity_bound(self, k: int) -> int:
        return max(self.multiplicity_floor, math.ceil(self.multiplicity_fraction * k - 1e-12))


@dataclass(frozen=True)
class CheckContext:
    """Everything the checks need to judge one reply.

    ``input_population`` holds the operator input: the whole population for
    population-level phases, the two parents for a crossover pair, and a
    one-element list for single-solution mutation.
    """

    phase: Phase
    n: int = 0
    k: int = 0
    candidates: Optional[frozenset[int]] = None
    true_top: Optional[frozenset[int]] = None
    requested_count: int = 0
    input_population: Optional[Sequence[tuple[int, ...]]] = None
    fitness: Optional[Sequence[float]] = None
    thresholds: Thresholds = Thresholds()


# ---------------------------------------------------------------- parsing

_INT = re.compile(r"[+-]?\d+")


class _Malformed(Exception):
    pass


def _scan(text: str, i: int):
    """Parse a bracketed list starting at text[i] == '['. Returns (tree, end)."""
    assert text[i] == "["
    i += 1
    items: list = []
    expect_item = True
    n = len(text)
    while True:
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            raise _Malformed("unterminated list")
        ch = text[i]
        if ch == "]":
            if items and expect_item:
                raise _Malformed("trailing comma")
            return items, i + 1
        if not expect_item:
            if ch != ",":
                raise _Malformed(f"expected ',' at offset {i}")
            i += 1
            expect_item = True
            continue
        if ch == "[":
            sub, i = _scan(text, i)
            items.append(sub)
        elif ch == ",":
            raise _Malformed("empty list item")
        else:
            j = i
            while j < n and text[j] not in "[],":
                j += 1
            token = text[i:j].strip()
            if not token:
                raise _Malformed("empty list item")
            items.append(token)
            i = j
        expect_item = False


def _shape_ok(tree: list, nested: bool) -> bool:
    if not nested:
        return all(isinstance(x, str) for x in tree)
    return all(isinstance(x, list) and all(isinstance(y, str) for y in x) for x in tree)


def _convert(tree: list, nested: bool):
    bad = []
    if nested:
        out = []
        for i, sub in enumerate(tree):
            row = []
            for tok in sub:
                if _INT.fullmatch(tok):
                    row.append(int(tok))
                else:
                    bad.append(i)
                    row.append(tok)
            out.append(tuple(row))
    else:
        out = []
        for i, tok in enumerate(tree):
            if _INT.fullmatch(tok):
                out.append(int(tok))
            else:
                bad.append(i)
                out.append(tok)
    return tuple(out), sorted(set(bad))


def _try_structure(text: str, start: int, nested: bool):
    try:
        tree, end = _scan(text, start)
    except _Malformed:
        return None
    if not _shape_ok(tree, nested):
        return None
    return tree, end


def parse(raw: RawOutput, mode: str = "strict") -> ParsedOutput | ErrorFinding:
    """Parse a reply into integers, or return an E1/E2 finding.

    ``strict`` requires the whole text (modulo surrounding whitespace) to be
    one bracketed structure of the level's shape. ``lenient`` takes the first
    well-formed structure of the right shape and records the ignored prose in
    ``notes``.
    """
    if mode not in ("strict", "lenient"):
        raise ContractError(f"unknown parse mode {mode!r}")
    level = Level(raw.level)
    nested = level.nested
    text = raw.text
    stripped = text.strip()
    notes: tuple[str, ...] = ()
    tree = None
    if mode == "strict":
        if stripped.startswith("["):
            got = _try_structure(stripped, 0, nested)
            if got and not stripped[got[1]:].strip():
                tree = got[0]
    else:
        for start in (i for i, ch in enumerate(text) if ch == "["):
            got = _try_structure(text, start, nested)
            if got:
                tree, end = got
                before, after = text[:start].strip(), text[end:].strip()
                if before or after:
                    notes = (f"ignored surrounding text ({len(before)} chars before, {len(after)} after)",)
                break
    if tree is None:
        want = "a list of integer lists" if nested else "a list of integers"
        return ErrorFinding(1, f"reply is not {want}")
    value, bad = _convert(tree, nested)
    if bad:
        where = "solutions" if nested else "positions"
        return ErrorFinding(2, f"non-integer entries at {where} {bad}", tuple(bad))
    return ParsedOutput(level, value, notes)


def serialize(value) -> str:
    """Canonical text form: ``[1, 2]`` or ``[[1, 2], [3, 4]]``."""
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(serialize(v) for v in value) + "]"
    return str(value)


# ---------------------------------------------------------------- checks

def _need(cond: bool, what: str):
    if not cond:
        raise ContractError(what)


def _check_e1(p: ParsedOutput, ctx: CheckContext):
    # Shape constraints beyond syntax belong to the format check.
    if p.level is Level.PAIR and len(p.value) != 2:
        return ErrorFinding(1, f"crossover pair reply has {len(p.value)} children, expected 2")
    if p.level is Level.ID_LIST and ctx.phase is Phase.SELECTION:
        size = len(ctx.fitness) if ctx.fitness is not None else ctx.k
        bad = [i for i, v in enumerate(p.value) if not 0 <= v < size]
        if bad:
            return ErrorFinding(1, f"solution ids out of range [0, {size}) at positions {bad}", tuple(bad))
    return None


def _check_e2(p: ParsedOutput, ctx: CheckContext):
    flat = [v for s in p.value for v in s] if p.level.nested else list(p.value)
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in flat):
        return ErrorFinding(2, "non-integer entries present")
    return None


def _check_e3(p: ParsedOutput, ctx: CheckContext):
    _need(ctx.true_top is not None, "E3 needs the true top list")
    if not ctx.true_top:
        return None
    recall = len(set(p.ids) & ctx.true_top) / len(ctx.true_top)
    cut = ctx.thresholds.candidate_recall
    if recall < cut:
        return ErrorFinding(3, f"recall {recall:.3f} against the true top list is below {cut}")
    return None


def _check_e4(p: ParsedOutput, ctx: CheckContext):
    got = len(set(p.ids))
    need = ctx.thresholds.candidate_count * ctx.requested_count
    if got < need:
        return ErrorFinding(4, f"{got} candidates returned, below {need:g} ({ctx.requested_count} requested)")
    return None


def _size_of(p: ParsedOutput) -> int:
    return len(p.value)


def _check_e5(p: ParsedOutput, ctx: CheckContext):
    size = _size_of(p)
    need = ctx.thresholds.population_size * ctx.k
    if size < need:
        return ErrorFinding(5, f"population has {size} solutions, below {need:g} (k={ctx.k})")
    return None


def _check_e6(p: ParsedOutput, ctx: CheckContext):
    bound = ctx.thresholds.multiplicity_bound(ctx.k)
    counts = Counter(p.ids)
    over = sorted(i for i, c in counts.items() if c > bound)
    if over:
        worst = max(counts[i] for i in over)
        return ErrorFinding(6, f"solution id(s) {over} selected up to {worst} times, bound {bound}", tuple(over))
    return None


def _check_e7(p: ParsedOutput, ctx: CheckContext):
    bad = [i for i, s in enumerate(p.solutions) if len(s) >= 2 and len(set(s)) == 1]
    if bad:
        return ErrorFinding(7, f"solutions {bad} repeat a single element", tuple(bad))
    return None


def _distinct_elements(sols) -> int:
    return len({v for s in sols for v in s})


def _check_e8(p: ParsedOutput, ctx: CheckContext):
    _need(ctx.input_population is not None, "E8 needs the input population")
    before = _distinct_elements(ctx.input_population)
    after = _distinct_elements(p.solutions)
    cut = ctx.thresholds.distinct_elements
    if after < cut * before:
        return ErrorFinding(8, f"distinct elements fell from {before} to {after} (below {cut} of input)")
    return None


def _check_e9(p: ParsedOutput, ctx: CheckContext):
    _need(ctx.input_population is not None, "E9 needs the input population")
    sols = p.solutions
    # Undersized outputs are E5's concern.
    if len(sols) < ctx.thresholds.population_size * ctx.k:
        return None
    before = len({frozenset(s) for s in ctx.input_population})
    after = len({frozenset(s) for s in sols})
    cut = ctx.thresholds.distinct_solutions
    if after < cut * before:
        return ErrorFinding(9, f"distinct solutions fell from {before} to {after} (below {cut} of input)")
    return None


def _check_e10(p: ParsedOutput, ctx: CheckContext):
    bad = [i for i, s in enumerate(p.solutions) if len(s) != ctx.n]
    if bad:
        sizes = sorted({len(p.solutions[i]) for i in bad})
        return ErrorFinding(10, f"solutions {bad} have sizes {sizes}, required {ctx.n}", tuple(bad))
    return None


def _check_e11(p: ParsedOutput, ctx: CheckContext):
    _need(ctx.input_population is not None, "E11 needs the operator input")
    before = Counter(frozenset(s) for s in ctx.input_population)
    after = Counter(frozenset(s) for s in p.solutions)
    if before == after:
        return ErrorFinding(11, "output equals the input (as element sets)")
    return None


def _check_e12(p: ParsedOutput, ctx: CheckContext):
    size = _size_of(p)
    if size == ctx.k:
        return None
    # When E5 is on the checklist it owns the severely undersized case.
    if 5 in CHECKLISTS[ctx.phase] and size < ctx.thresholds.population_size * ctx.k:
        return None
    return ErrorFinding(12, f"size {size}, required {ctx.k}")


def _check_e13(p: ParsedOutput, ctx: CheckContext):
    bad = [i for i, s in enumerate(p.solutions) if len(set(s)) < len(s) and not (len(s) >= 2 and len(set(s)) == 1)]
    if bad:
        return ErrorFinding(13, f"solutions {bad} contain duplicated elements", tuple(bad))
    return None


def _check_e14(p: ParsedOutput, ctx: CheckContext):
    _need(ctx.candidates is not None, "E14 needs the candidate set")
    bad = [i for i, s in enumerate(p.solutions) if any(v not in ctx.candidates for v in s)]
    if bad:
        outside = sorted({v for i in bad for v in p.solutions[i] if v not in ctx.candidates})
        return ErrorFinding(14, f"solutions {bad} use non-candidate elements {outside[:10]}", tuple(bad))
    return None


def _check_e15(p: ParsedOutput, ctx: CheckContext):
    from .evo import low_fitness_indices

    _need(ctx.fitness is not None, "E15 needs the fitness record")
    low = low_fitness_indices(ctx.fitness, ctx.thresholds.low_fitness_fraction)
    picked = sorted(low & set(p.ids))
    if picked:
        return ErrorFinding(15, f"selected low-fitness solutions {picked} (bottom {ctx.thresholds.low_fitness_fraction:.0%})", tuple(picked))
    return None


_SHAPES = {
    1: None, 2: None,
    3: {Level.CANDIDATE_LIST}, 4: {Level.CANDIDATE_LIST},
    5: {Level.POPULATION}, 6: {Level.ID_LIST},
    7: {Level.POPULATION, Level.PAIR, Level.INDIVIDUAL},
    8: {Level.POPULATION, Level.PAIR, Level.INDIVIDUAL},
    9: {Level.POPULATION},
    10: {Level.POPULATION, Level.PAIR, Level.INDIVIDUAL},
    11: {Level.POPULATION, Level.PAIR, Level.INDIVIDUAL},
    12: {Level.POPULATION, Level.ID_LIST},
    13: {Level.POPULATION, Level.PAIR, Level.INDIVIDUAL},
    14: {Level.POPULATION, Level.PAIR, Level.INDIVIDUAL},
    15: {Level.ID_LIST},
}

CHECKS: dict[int, Callable[[ParsedOutput, CheckContext], Optional[ErrorFinding]]] = {
    1: _check_e1, 2: _check_e2, 3: _check_e3, 4: _check_e4, 5: _check_e5,
    6: _check_e6, 7: _check_e7, 8: _check_e8, 9: _check_e9, 10: _check_e10,
    11: _check_e11, 12: _check_e12, 13: _check_e13, 14: _check_e14, 15: _check_e15,
}


def check(parsed: ParsedOutput, code: int, ctx: CheckContext) -> Optional[ErrorFinding]:
    """Run one check; None means the output passed."""
    shapes = _SHAPES[code]
    if shapes is not None and parsed.level not in shapes:
        raise ContractError(f"E{code} does not apply to {parsed.level.value} outputs")
    return CHECKS[code](parsed, ctx)


def run_checks(parsed: ParsedOutput, phase: Phase, ctx: CheckContext, log: list | None = None) -> list[ErrorFinding]:
    """All findings for the phase checklist, in checklist order.

    A format finding stops the run since nothing else is checkable.
    ``log`` (if given) receives every code actually checked.
    """
    findings = []
    for code in CHECKLISTS[Phase(phase)]:
        if log is not None:
            log.append(code)
        f = check(parsed, code, ctx)
        if f is None:
            continue
        findings.append(f)
        if f.severity is Severity.FORMAT:
            break
    return findings


def evaluate(raw: RawOutput, ctx: CheckContext, mode: str = "strict", log: list | None = None):
    """Parse and check a reply. Returns ``(parsed_or_None, findings)``."""
    parsed = parse(raw, mode)
    if isinstance(parsed, ErrorFinding):
        if log is not None:
            log.extend([1] if parsed.code == 1 else [1, 2])
        return None, [parsed]
    return parsed, run_checks(parsed, ctx.phase, ctx, log)
