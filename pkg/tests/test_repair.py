import pytest

from graphevo.backends import OperatorBackend, OperatorRequest
from graphevo.errors import ContractError
from graphevo.repair import (
    AuditLog,
    Outcome,
    Recorder,
    RepairBudget,
    check_and_repair,
    classify,
    repair,
)
from graphevo.validation import CHECKLISTS, CheckContext, ErrorFinding, Phase, RawOutput

CANDS = frozenset(range(1, 11))
PARENT = (1, 2, 3)


class Scripted(OperatorBackend):
    """Replays fixed texts: ``calls`` for operator requests, ``repairs`` for repair prompts."""

    name = "scripted"

    def __init__(self, calls=(), repairs=(), supports_repair=True):
        self.calls, self.repairs = list(calls), list(repairs)
        self.supports_repair = supports_repair
        self.requests, self.repair_prompts = [], []

    def call(self, request):
        self.requests.append(request)
        return RawOutput(self.calls.pop(0), request.phase, request.level, self.prompt_for(request))

    def repair_reply(self, prompt):
        self.repair_prompts.append(prompt)
        return RawOutput(self.repairs.pop(0), prompt.phase, prompt.level, prompt)


def mutation_case(first, calls=(), repairs=(), budget=RepairBudget(), **kw):
    req = OperatorRequest(Phase.MUTATION_S, n=3, k=1, population=(PARENT,), candidates=CANDS, seed=1)
    ctx = CheckContext(Phase.MUTATION_S, n=3, k=1, candidates=CANDS, input_population=[PARENT])
    be = Scripted(calls, repairs, **kw)
    rec = Recorder()
    out = RawOutput(first, Phase.MUTATION_S, req.level, be.prompt_for(req))
    parsed, record = check_and_repair(out, req, ctx, be, budget, rec)
    return parsed, record, be, rec


def test_clean_output_is_approved():
    parsed, record, be, _ = mutation_case("[1, 2, 4]")
    assert record.outcome is Outcome.APPROVED and parsed.solutions == [(1, 2, 4)]
    assert be.requests == [] and be.repair_prompts == []
    assert record.backend_calls == 1


def test_e10_repaired_when_backend_complies():
    parsed, record, be, _ = mutation_case("[1, 2, 4, 5]", repairs=["[1, 2, 4]"])
    assert record.outcome is Outcome.REPAIRED
    assert parsed.solutions == [(1, 2, 4)]
    assert [f.code for f in record.findings] == [10]
    assert be.repair_prompts[0].error_code == 10
    assert "[1, 2, 4, 5]" in be.repair_prompts[0].rendered_text


def test_e13_ignored_repair_becomes_acceptable():
    parsed, record, be, _ = mutation_case("[1, 4, 4]", repairs=["[1, 4, 4]"])
    assert record.outcome is Outcome.ACCEPTABLE
    assert parsed.solutions == [(1, 4, 4)]
    assert [f.code for f in record.remaining] == [13]
    assert record.repair_attempts == 1


def test_format_error_cannot_be_repaired():
    finding = ErrorFinding(1, "not a list")
    out = RawOutput("hello", Phase.MUTATION_S, Phase.MUTATION_S.level)
    with pytest.raises(ContractError):
        repair(out, finding, Scripted(), CheckContext(Phase.MUTATION_S, n=3))


def test_format_error_regenerated_then_repaired_outcome():
    parsed, record, be, _ = mutation_case("I mutated it: 1, 2, 4", calls=["[1, 2, 4]"])
    assert record.outcome is Outcome.REPAIRED
    assert parsed.solutions == [(1, 2, 4)]
    assert record.regenerations == 1 and be.repair_prompts == []
    assert be.requests[0].attempt == 1


def test_critical_twice_is_rejected():
    parsed, record, be, _ = mutation_case("[1, 1, 1]", calls=["[2, 2, 2]"])
    assert parsed is None
    assert record.outcome is Outcome.REJECTED and record.rolled_back
    assert [f.code for f in record.remaining] == [7, 8]


def test_e5_always_faulty_crossover_rejected():
    pop = tuple((i, i + 1) for i in range(1, 21, 2))
    req = OperatorRequest(Phase.CROSSOVER_P, n=2, k=10, population=pop, seed=0)
    ctx = CheckContext(Phase.CROSSOVER_P, n=2, k=10, input_population=list(pop))
    short = "[[1, 2], [3, 4]]"
    be = Scripted(calls=[short])
    parsed, record = check_and_repair(RawOutput(short, req.phase, req.level), req, ctx, be)
    assert parsed is None and record.outcome is Outcome.REJECTED
    assert 5 in [f.code for f in record.remaining]


def test_regeneration_reissues_original_request():
    _, _, be, _ = mutation_case("[1, 1, 1]", calls=["[1, 2, 4]"])
    (retry,) = be.requests
    assert retry.phase is Phase.MUTATION_S and retry.population == (PARENT,)
    assert not be.repair_prompts


def test_repair_reply_rechecked_and_new_hard_error_regenerates():
    # A "repair" that breaks the format triggers a regeneration.
    parsed, record, be, _ = mutation_case("[1, 2, 4, 5]", repairs=["sorry"], calls=["[1, 2, 5]"])
    assert record.outcome is Outcome.REPAIRED and parsed.solutions == [(1, 2, 5)]
    assert record.repair_attempts == 1 and record.regenerations == 1


def test_unrepairable_backend_passes_moderate_through():
    parsed, record, be, rec = mutation_case("[1, 4, 4]", supports_repair=False)
    assert record.outcome is Outcome.ACCEPTABLE and be.repair_prompts == []
    assert any(r["action"] == "repair_skipped" for r in rec.audit.records)


def test_call_bound_respected():
    budget = RepairBudget(repairs_per_finding=2, regenerations=1)
    # Keeps re-introducing moderate errors in turn.
    replies = ["[1, 2, 3]", "[1, 2, 2]", "[1, 2, 3]", "[1, 2, 2]", "[1, 2, 3]"] * 4
    _, record, be, _ = mutation_case("[1, 2, 3]", repairs=replies, budget=budget)
    assert record.backend_calls <= budget.max_calls(Phase.MUTATION_S)
    assert record.outcome is Outcome.ACCEPTABLE


def test_forward_policy_does_not_revisit_earlier_checks():
    # Repairing E13 reintroduces E10, which comes earlier in the checklist.
    fwd = RepairBudget(policy="forward")
    _, record, be, _ = mutation_case("[1, 4, 4]", repairs=["[1, 4, 5, 6]"], budget=fwd)
    assert record.outcome is Outcome.ACCEPTABLE
    assert [p.error_code for p in be.repair_prompts] == [13]
    assert [f.code for f in record.remaining] == [10]

    _, record, be, _ = mutation_case("[1, 4, 4]", repairs=["[1, 4, 5, 6]", "[1, 4, 5]"])
    assert record.outcome is Outcome.REPAIRED
    assert [p.error_code for p in be.repair_prompts] == [13, 10]


def test_audit_actions():
    _, _, _, rec = mutation_case("[1, 4, 4]", repairs=["[1, 4, 5]"])
    actions = [r["action"] for r in rec.audit.records]
    assert actions == ["finding", "repair", "accept"]
    assert rec.audit.records[1]["error_code"] == "E13"
    assert rec.audit.records[-1]["outcome"] == "Q_rep"
    _, _, _, rec = mutation_case("[1, 1, 1]", calls=["[1, 1, 1]"])
    acts = [r["action"] for r in rec.audit.records]
    assert acts == ["finding", "finding", "regenerate", "finding", "finding", "reject"]
    assert all(r["action"] != "repair" or r["error_code"] in {f"E{c}" for c in range(10, 16)}
               for r in rec.audit.records)


def test_ledger_records_repair_and_regeneration_kinds():
    _, _, _, rec = mutation_case("[1, 1, 1]", calls=["[1, 4, 4]"], repairs=["[1, 4, 5]"])
    kinds = [e.call_kind for e in rec.ledger.entries]
    assert kinds == ["regeneration", "repair"]


def test_classify():
    e13, e7 = ErrorFinding(13, ""), ErrorFinding(7, "")
    assert classify([], [], False) is Outcome.APPROVED
    assert classify([e13], [], False) is Outcome.REPAIRED
    assert classify([e13], [e13], False) is Outcome.ACCEPTABLE
    assert classify([e7], [e7], True) is Outcome.REJECTED
    with pytest.raises(ContractError):
        classify([e7], [e7], False)


def test_budget_validation_and_bound():
    with pytest.raises(ContractError):
        RepairBudget(policy="sideways")
    with pytest.raises(ContractError):
        RepairBudget(repairs_per_finding=-1)
    b = RepairBudget()
    for phase in Phase:
        assert b.max_calls(phase) == 2 * len(CHECKLISTS[phase]) + 1


def test_audit_jsonl_round_trip():
    import json
    log = AuditLog("r1")
    log.add(0, Phase.SELECTION, 0, "call")
    (line,) = log.to_jsonl().splitlines()
    assert json.loads(line)["phase"] == "Selection" and json.loads(line)["run_id"] == "r1"
