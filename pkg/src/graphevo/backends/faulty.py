"""Scripted fault injector.

Wraps the classical adapter and corrupts its correct replies so that each
injected corruption targets one error code. Replies are remembered so a
repair request can undo exactly the corruption it names.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

from ..errors import ConfigError
from ..evo import low_fitness_indices
from ..validation import CHECKLISTS, Level, Phase, RawOutput, Thresholds, parse_code, serialize
from .base import OperatorBackend, OperatorRequest
from .classical import ClassicalBackend
from .prompts import RepairPrompt


@dataclass(frozen=True)
class FaultScript:
    """Per-phase injection probabilities plus repair/regeneration compliance."""

    probabilities: Mapping[Phase, Mapping[int, float]] = field(default_factory=dict)
    repair_compliance: float = 1.0
    regeneration_compliance: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for p in (self.repair_compliance, self.regeneration_compliance):
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"compliance probability {p} outside [0, 1]")
        try:
            probs = {Phase(ph): {int(c): float(p) for c, p in codes.items()} for ph, codes in self.probabilities.items()}
        except ValueError as exc:
            raise ConfigError(f"bad fault script entry: {exc}") from None
        object.__setattr__(self, "probabilities", probs)
        for phase, codes in self.probabilities.items():
            for code, p in codes.items():
                if not 0.0 <= p <= 1.0:
                    raise ConfigError(f"probability {p} for {phase}/E{code} outside [0, 1]")

    @classmethod
    def uniform(cls, codes: Iterable[int], p: float, phases: Iterable[Phase] = tuple(Phase), **kw) -> "FaultScript":
        """Inject each code at rate ``p`` in every phase whose checklist has it."""
        codes = set(codes)
        probs = {Phase(ph): {c: p for c in CHECKLISTS[Phase(ph)] if c in codes} for ph in phases}
        return cls({ph: c for ph, c in probs.items() if c}, **kw)

    @classmethod
    def from_dict(cls, d: Mapping) -> "FaultScript":
        d = dict(d)
        probs = {}
        for key in list(d):
            if key in ("repair_compliance", "regeneration_compliance", "seed"):
                continue
            try:
                phase = Phase(key)
            except ValueError:
                raise ConfigError(f"unknown phase {key!r} in fault script") from None
            probs[phase] = {parse_code(c): float(p) for c, p in d.pop(key).items()}
        return cls(probs, **d)

    @classmethod
    def load(cls, path) -> "FaultScript":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        d: dict = {ph.value: {f"E{c}": p for c, p in sorted(codes.items())} for ph, codes in self.probabilities.items()}
        d.update(repair_compliance=self.repair_compliance, regeneration_compliance=self.regeneration_compliance, seed=self.seed)
        return d


@dataclass
class _Record:
    clean: object
    request: OperatorRequest
    corruptions: list[tuple[int, int]]


def _copy(value):
    return [list(v) if isinstance(v, (list, tuple)) else v for v in value]


class FaultyBackend(OperatorBackend):
    name = "faulty"
    supports_repair = True

    def __init__(self, script: FaultScript, inner: Optional[ClassicalBackend] = None,
                 universe: Iterable[int] = (), thresholds: Thresholds | None = None):
        self.script = script
        self.thresholds = thresholds or Thresholds()
        self.inner = inner or ClassicalBackend(thresholds=self.thresholds, seed=script.seed)
        self.universe = sorted(set(universe))
        self.model = f"fault-script(seed={script.seed})"
        self._rng = random.Random(script.seed)
        self._records: dict[str, _Record] = {}

    # -- backend surface

    def call(self, req: OperatorRequest) -> RawOutput:
        clean = self.inner.compute(req)
        probs = self.script.probabilities.get(req.phase, {})
        corruptions = []
        inject = True
        if req.attempt > 0:
            inject = self._rng.random() >= self.script.regeneration_compliance
        for code in sorted(probs):
            u = self._rng.random()
            if inject and u < probs[code]:
                corruptions.append((code, self._rng.getrandbits(32)))
        return self._emit(_Record(clean, req, corruptions))

    def repair_reply(self, prompt: RepairPrompt) -> RawOutput:
        rec = self._records.get(prompt.previous_output)
        complied = self._rng.random() < self.script.repair_compliance
        if rec is None or not complied:
            return RawOutput(prompt.previous_output, prompt.phase, prompt.level, prompt)
        codes = [c for c, _ in rec.corruptions]
        if prompt.error_code in codes:
            remaining = [c for c in rec.corruptions if c[0] != prompt.error_code]
        else:
            remaining = []
        clean = rec.clean
        if prompt.error_code == 11 and self._unchanged(clean, rec.request):
            # The operator itself could not change these inputs (identical
            # parents, say); a compliant repair still changes one element.
            clean = self._force_change(clean, rec.request)
        return self._emit(_Record(clean, rec.request, remaining), prompt)

    def _unchanged(self, value, req) -> bool:
        sols = [value] if req.level is Level.INDIVIDUAL else value
        if not req.population or not sols or not all(isinstance(s, list) for s in sols):
            return False
        return Counter(frozenset(s) for s in sols) == Counter(frozenset(s) for s in req.population)

    def _force_change(self, value, req):
        value = _copy(value)
        target = value if req.level is Level.INDIVIDUAL else value[0]
        pool = sorted(req.candidates) if req.candidates else self.universe
        free = [v for v in pool if v not in target]
        if target and free:
            target[-1] = free[0]
        return value

    # -- rendering

    def _emit(self, rec: _Record, prompt=None) -> RawOutput:
        text = self._render(rec)
        self._records[text] = rec
        req = rec.request
        return RawOutput(text, req.phase, req.level, prompt if prompt is not None else self.prompt_for(req))

    def _render(self, rec: _Record) -> str:
        req = rec.request
        # E11 replaces the structure wholesale, so it goes first; E1 wraps text, so last.
        order = sorted(rec.corruptions, key=lambda c: (c[0] != 11, c[0] == 1, c[0]))
        value = _copy(rec.clean)
        wrap = False
        for code, sub in order:
            if code == 1:
                wrap = True
                continue
            value = CORRUPTORS[code](self, value, req, random.Random(sub))
        text = serialize(value)
        if wrap:
            text = f"Here is the result of the {req.phase.value} operation: {text}"
        return text

    # -- corruptions, one per code

    def _solutions(self, value, req):
        return value if req.level in (Level.POPULATION, Level.PAIR) else None

    def _pick(self, value, rng) -> int:
        return rng.randrange(len(value)) if value else 0

    def _e2(self, value, req, rng):
        if not value:
            return [0.5]
        if isinstance(value[0], list):
            if value[0]:
                value[0][0] = value[0][0] + 0.5
            else:
                value[0].append(0.5)
        else:
            value[0] = value[0] + 0.5
        return value

    def _e3(self, value, req, rng):
        ranked = sorted(req.ids_with_metric, key=lambda im: (im[1], im[0]))
        return [i for i, _ in ranked[: len(value)]]

    def _e4(self, value, req, rng):
        keep = max(0, math.ceil(self.thresholds.candidate_count * len(value) - 1e-12) - 1)
        return value[:keep]

    def _e5(self, value, req, rng):
        keep = max(0, math.ceil(self.thresholds.population_size * req.k - 1e-12) - 1)
        return value[:keep]

    def _e6(self, value, req, rng):
        fit = req.fitness
        best = min(range(len(fit)), key=lambda i: (-fit[i], i))
        over = self.thresholds.multiplicity_bound(req.k) + 1
        value = list(value)
        while len(value) < over:
            value.append(best)
        value[:over] = [best] * over
        return value

    def _apply_one(self, value, req, rng, fn):
        if req.level is Level.INDIVIDUAL:
            return fn(list(value), rng)
        if not value:
            return value
        j = self._pick(value, rng)
        value[j] = fn(list(value[j]), rng)
        return value

    def _e7(self, value, req, rng):
        return self._apply_one(value, req, rng, lambda s, r: [s[0]] * max(2, len(s)) if s else [0, 0])

    def _e8(self, value, req, rng):
        sols = value if req.level is not Level.INDIVIDUAL else [value]
        before = {v for s in req.population for v in s}
        size = max(1, math.ceil(self.thresholds.distinct_elements * len(before) - 1e-12) - 1)
        pool = sorted({v for s in sols for v in s})[:size]
        if len(pool) >= req.n:
            out = [rng.sample(pool, req.n) for _ in sols]
        else:
            out = [list(pool) for _ in sols]
        return out if req.level is not Level.INDIVIDUAL else out[0]

    def _e9(self, value, req, rng):
        before = len({frozenset(s) for s in req.population})
        keep = max(1, math.ceil(self.thresholds.distinct_solutions * before - 1e-12) - 1)
        distinct = []
        for s in value:
            if frozenset(s) not in {frozenset(d) for d in distinct}:
                distinct.append(s)
            if len(distinct) == keep:
                break
        return [list(distinct[i % len(distinct)]) for i in range(len(value))] if distinct else value

    def _e10(self, value, req, rng):
        def shrink(s, r):
            if len(s) > 1:
                return s[:-1]
            extra = next(c for c in sorted(req.candidates or {0, 1}) if c not in s)
            return s + [extra]
        return self._apply_one(value, req, rng, shrink)

    def _e11(self, value, req, rng):
        src = [list(s) for s in req.population]
        return src[0] if req.level is Level.INDIVIDUAL else src

    def _e12(self, value, req, rng):
        return value[:-1] if len(value) > 1 else value + value

    def _e13(self, value, req, rng):
        def dup(s, r):
            if len(s) >= 3:
                s[1] = s[0]
                return s
            return s + [s[0]] if s else s
        return self._apply_one(value, req, rng, dup)

    def _e14(self, value, req, rng):
        cands = req.candidates or frozenset()

        def outsider(s, r):
            options = [v for v in self.universe if v not in cands and v not in s]
            out = r.choice(options) if options else max(list(cands) + list(s) + [0]) + 1
            if s:
                s[r.randrange(len(s))] = out
            return s
        return self._apply_one(value, req, rng, outsider)

    def _e15(self, value, req, rng):
        low = sorted(low_fitness_indices(req.fitness, self.thresholds.low_fitness_fraction))
        if low and value:
            value = list(value)
            value[self._pick(value, rng)] = low[0]
        return value


CORRUPTORS = {
    2: FaultyBackend._e2, 3: FaultyBackend._e3, 4: FaultyBackend._e4, 5: FaultyBackend._e5,
    6: FaultyBackend._e6, 7: FaultyBackend._e7, 8: FaultyBackend._e8, 9: FaultyBackend._e9,
    10: FaultyBackend._e10, 11: FaultyBackend._e11, 12: FaultyBackend._e12, 13: FaultyBackend._e13,
    14: FaultyBackend._e14, 15: FaultyBackend._e15,
}
