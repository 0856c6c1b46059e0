"""Golden fixtures: raw replies with the error codes they must classify to.

A fixture is a JSON object::

    {"name": "...", "phase": "MutationP", "raw_text": "[[1, 2], [3, 4]]",
     "context": {"n": 2, "k": 2, "candidates": [1, 2, 3, 4],
                 "input_population": [[1, 2], [3, 4]]},
     "expected_codes": ["E11"], "parse_mode": "strict"}

``expected_codes`` is the full finding list in checklist order. A file may
hold one fixture or a list of them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import GraphEvoError
from .validation import CheckContext, Phase, RawOutput, Thresholds, checklist_for, evaluate, parse_code

CONTEXT_KEYS = {"n", "k", "candidates", "true_top", "requested_count", "input_population", "fitness", "thresholds"}


@dataclass
class Fixture:
    name: str
    phase: Phase
    raw_text: str
    context: CheckContext
    expected: list[int]
    parse_mode: str = "strict"


@dataclass
class FixtureResult:
    name: str
    expected: list[int] = field(default_factory=list)
    actual: list[int] = field(default_factory=list)
    checked: list[int] = field(default_factory=list)
    error: Optional[str] = None
    phase: Optional[Phase] = None

    @property
    def passed(self) -> bool:
        return self.error is None and self.expected == self.actual


class FixtureError(GraphEvoError):
    """A fixture file is malformed (as opposed to misclassified)."""


def _context(phase: Phase, d: dict) -> CheckContext:
    unknown = sorted(set(d) - CONTEXT_KEYS)
    if unknown:
        raise FixtureError(f"unknown context key {unknown[0]!r}")
    kw = dict(d)
    for key in ("candidates", "true_top"):
        if kw.get(key) is not None:
            kw[key] = frozenset(kw[key])
    if kw.get("input_population") is not None:
        kw["input_population"] = [tuple(s) for s in kw["input_population"]]
    if "thresholds" in kw:
        kw["thresholds"] = Thresholds(**kw["thresholds"])
    return CheckContext(phase, **kw)


def parse_fixture(d: dict, default_name: str = "") -> Fixture:
    try:
        phase = Phase(d["phase"])
        expected = [parse_code(c) for c in d["expected_codes"]]
        raw = d["raw_text"]
        if not isinstance(raw, str):
            raise FixtureError("raw_text must be a string")
        return Fixture(d.get("name", default_name), phase, raw, _context(phase, d.get("context", {})),
                       expected, d.get("parse_mode", "strict"))
    except FixtureError:
        raise
    except KeyError as exc:
        raise FixtureError(f"missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError, GraphEvoError) as exc:
        raise FixtureError(str(exc)) from None


def classify(fx: Fixture) -> FixtureResult:
    checked: list[int] = []
    _, findings = evaluate(RawOutput(fx.raw_text, fx.phase, fx.phase.level), fx.context, fx.parse_mode, checked)
    return FixtureResult(fx.name, fx.expected, [f.code for f in findings], checked, phase=fx.phase)


def load_dir(path) -> list[tuple[str, object]]:
    """(name, Fixture | FixtureError) pairs for every ``*.json`` under ``path``, sorted."""
    out: list[tuple[str, object]] = []
    for f in sorted(Path(path).rglob("*.json")):
        try:
            data = json.loads(f.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            out.append((f.stem, FixtureError(f"{f.name}: {exc}")))
            continue
        items = data if isinstance(data, list) else [data]
        for i, d in enumerate(items):
            name = f.stem if len(items) == 1 else f"{f.stem}[{i}]"
            try:
                fx = parse_fixture(d, name) if isinstance(d, dict) else None
                out.append((fx.name, fx) if fx else (name, FixtureError("fixture must be an object")))
            except FixtureError as exc:
                out.append((name, exc))
    return out


def run_corpus(path) -> list[FixtureResult]:
    results = []
    for name, item in load_dir(path):
        if isinstance(item, FixtureError):
            results.append(FixtureResult(name, error=str(item)))
        else:
            results.append(classify(item))
    return results


def shipped_corpus() -> Path:
    return Path(str(resources.files("graphevo") / "data" / "golden"))


def checklist_matches(result: FixtureResult, fx: Fixture) -> bool:
    """True when a fully checked reply visited exactly the phase checklist."""
    return result.checked == checklist_for(fx.phase)
