"""Check-and-repair state machine and outcome classification.

Format and critical findings are never repaired in place: the operator
request is re-issued (regeneration), and if the regenerated reply still has
such a finding the output is rejected and the caller rolls back. Moderate
findings get a bounded number of targeted repair attempts and then pass
through.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .backends.base import OperatorBackend, OperatorRequest
from .backends.prompts import render_repair
from .cost import TokenCounter, TokenLedger, count_segments, count_tokens
from .errors import ContractError
from .validation import CHECKLISTS, CheckContext, ErrorFinding, ParsedOutput, Phase, RawOutput, evaluate

log = logging.getLogger(__name__)


class Outcome(str, Enum):
    APPROVED = "Q_app"
    REPAIRED = "Q_rep"
    ACCEPTABLE = "Q_acc"
    REJECTED = "Q_rej"


OUTCOMES = tuple(o.value for o in Outcome)


@dataclass(frozen=True)
class RepairBudget:
    repairs_per_finding: int = 1
    regenerations: int = 1
    # "restart": recheck the whole checklist after every repair.
    # "forward": continue with the checks after the repaired one.
    policy: str = "restart"

    def __post_init__(self):
        if self.repairs_per_finding < 0 or self.regenerations < 0:
            raise ContractError("repair budgets must be non-negative")
        if self.policy not in ("restart", "forward"):
            raise ContractError(f"unknown repair policy {self.policy!r}")

    def max_calls(self, phase: Phase) -> int:
        """Upper bound on backend calls for one phase output, initial call included."""
        return len(CHECKLISTS[phase]) * (1 + self.repairs_per_finding) + self.regenerations


@dataclass
class AuditLog:
    """Append-only audit trail, exported as JSON lines."""

    run_id: str = ""
    records: list[dict] = field(default_factory=list)

    def add(self, generation, phase, attempt, action, error_code=None, outcome=None, **extra):
        rec = {
            "run_id": self.run_id,
            "generation": generation,
            "phase": getattr(phase, "value", phase),
            "attempt": attempt,
            "error_code": error_code,
            "action": action,
            "outcome": outcome,
        }
        rec.update(extra)
        self.records.append(rec)
        return rec

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


class Recorder:
    """Meters backend calls into a ledger and an audit log."""

    def __init__(self, ledger: Optional[TokenLedger] = None, audit: Optional[AuditLog] = None,
                 counter: TokenCounter = count_tokens):
        self.ledger = ledger if ledger is not None else TokenLedger()
        self.audit = audit if audit is not None else AuditLog()
        self.counter = counter
        self.generation = 0

    def _tokens(self, prompt) -> int:
        if prompt is None:
            return 0
        segments = getattr(prompt, "segments", None)
        if segments:
            return count_segments(segments, self.counter)
        return self.counter(getattr(prompt, "rendered_text", "") or getattr(prompt, "text", ""))

    def meter(self, raw: RawOutput, phase: Phase, kind: str) -> RawOutput:
        self.ledger.record(self.generation, phase, kind, self._tokens(raw.prompt), self.counter(raw.text))
        return raw

    def call(self, backend: OperatorBackend, request: OperatorRequest) -> RawOutput:
        raw = backend.call(request)
        self.meter(raw, request.phase, request.call_kind)
        self.audit.add(self.generation, request.phase, request.attempt,
                       "call" if request.attempt == 0 else "regenerate", index=request.index)
        return raw

    def event(self, phase, attempt, action, error_code=None, outcome=None, **extra):
        self.audit.add(self.generation, phase, attempt, action, error_code, outcome, **extra)


@dataclass
class OutcomeRecord:
    phase: Phase
    outcome: Outcome
    findings: list[ErrorFinding] = field(default_factory=list)
    remaining: list[ErrorFinding] = field(default_factory=list)
    repair_attempts: int = 0
    regenerations: int = 0
    backend_calls: int = 1
    rolled_back: bool = False

    def to_dict(self) -> dict:
        return {
            "phase": self.phase.value,
            "outcome": self.outcome.value,
            "findings": [f.name for f in self.findings],
            "remaining": [f.name for f in self.remaining],
            "repair_attempts": self.repair_attempts,
            "regenerations": self.regenerations,
            "backend_calls": self.backend_calls,
            "rolled_back": self.rolled_back,
        }


def classify(history: list[ErrorFinding], remaining: list[ErrorFinding], rejected: bool) -> Outcome:
    """Map a finished trace to its outcome class."""
    if rejected:
        return Outcome.REJECTED
    if remaining:
        if any(f.hard for f in remaining):
            raise ContractError("accepted output cannot carry format/critical findings")
        return Outcome.ACCEPTABLE
    return Outcome.REPAIRED if history else Outcome.APPROVED


def repair(output: RawOutput, finding: ErrorFinding, backend: OperatorBackend, ctx: CheckContext) -> RawOutput:
    """Ask the backend to fix one moderate finding; the reply must be rechecked."""
    if finding.hard:
        raise ContractError(f"{finding.name} is {finding.severity.value}; regenerate instead of repairing")
    prompt = render_repair(finding.code, finding.detail, output.text, output.phase, output.level,
                           n=ctx.n, k=ctx.k, candidates=ctx.candidates)
    return backend.repair_reply(prompt)


def regenerate(request: OperatorRequest, backend: OperatorBackend,
               recorder: Optional[Recorder] = None) -> tuple[OperatorRequest, RawOutput]:
    """Re-issue the original operator request (not a repair prompt)."""
    retry = request.retry()
    raw = recorder.call(backend, retry) if recorder is not None else backend.call(retry)
    return retry, raw


def check_and_repair(
    output: RawOutput,
    request: OperatorRequest,
    ctx: CheckContext,
    backend: OperatorBackend,
    budget: RepairBudget = RepairBudget(),
    recorder: Optional[Recorder] = None,
    parse_mode: str = "strict",
) -> tuple[Optional[ParsedOutput], OutcomeRecord]:
    """Validate ``output`` and drive repairs/regenerations until it settles.

    Returns ``(parsed, record)``; ``parsed`` is None when the output was
    rejected and the caller must keep the pre-phase state.
    """
    recorder = recorder or Recorder()
    phase = ctx.phase
    order = {c: i for i, c in enumerate(CHECKLISTS[phase])}
    attempts: dict[int, int] = {}
    history: list[ErrorFinding] = []
    record = OutcomeRecord(phase, Outcome.APPROVED)
    cursor = 0
    current = output

    while True:
        parsed, findings = evaluate(current, ctx, parse_mode)
        for f in findings:
            recorder.event(phase, request.attempt, "finding", f.name, index=request.index)
        history.extend(findings)
        hard = [f for f in findings if f.hard]
        if hard:
            if record.regenerations < budget.regenerations:
                record.regenerations += 1
                record.backend_calls += 1
                request, current = regenerate(request, backend, recorder)
                cursor = 0
                continue
            record.outcome = Outcome.REJECTED
            record.rolled_back = True
            record.findings, record.remaining = history, hard
            recorder.event(phase, request.attempt, "reject", hard[0].name, Outcome.REJECTED.value, index=request.index)
            return None, record

        actionable = [
            f for f in findings
            if attempts.get(f.code, 0) < budget.repairs_per_finding
            and (budget.policy == "restart" or order[f.code] >= cursor)
        ]
        if actionable and not backend.supports_repair:
            for f in actionable:
                recorder.event(phase, request.attempt, "repair_skipped", f.name, index=request.index)
            actionable = []
        if not actionable:
            record.outcome = classify(history, findings, False)
            record.findings, record.remaining = history, findings
            recorder.event(phase, request.attempt, "accept", None, record.outcome.value, index=request.index)
            return parsed, record

        target = actionable[0]
        attempts[target.code] = attempts.get(target.code, 0) + 1
        record.repair_attempts += 1
        record.backend_calls += 1
        recorder.event(phase, request.attempt, "repair", target.name, index=request.index)
        current = recorder.meter(repair(current, target, backend, ctx), phase, "repair")
        cursor = order[target.code] + 1
