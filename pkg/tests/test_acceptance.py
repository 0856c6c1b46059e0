"""Acceptance criteria 1-9. Each test prints one PASS/FAIL line with its timing."""

import itertools
import json
import logging
import math
import os
import random
import threading
import time

import networkx as nx
import pytest

from conftest import small_corpus, to_nx
from graphevo.backends import ChatBackend, ChatEndpointConfig, ClassicalBackend, FaultScript, FaultyBackend
from graphevo.backends.prompts import template_cost_model
from graphevo.backends.stub import ReplayStub, Rule
from graphevo.corpus import load_dir, run_corpus, shipped_corpus
from graphevo.cost import derived_saving_mutation, measured_saving, predicted_saving_crossover, predicted_saving_mutation
from graphevo.engine import RunConfig, evaluate_population, run
from graphevo.errors import TransportError
from graphevo.evo import rank_and_filter_candidates
from graphevo.graph import barbell_graph, degree_centrality, detect_communities, random_graph
from graphevo.repair import RepairBudget
from graphevo.validation import CheckContext, Phase, RawOutput, evaluate, serialize

# Required checks per phase, written out independently of the package table.
TABLE = {
    "CandidateSelection": [1, 2, 3, 4],
    "Initialization": [1, 2, 7, 10, 12, 13, 14],
    "Selection": [1, 2, 6, 12, 15],
    "CrossoverP": [1, 2, 5, 7, 8, 9, 10, 11, 12, 13],
    "CrossoverS": [1, 2, 7, 8, 10, 11, 13],
    "MutationP": [1, 2, 5, 7, 8, 9, 10, 11, 12, 13, 14],
    "MutationS": [1, 2, 7, 8, 10, 11, 13, 14],
}
MODERATE = range(10, 16)
CRITICAL = range(3, 10)


@pytest.fixture
def report(capsys):
    """Yields a callable that prints the criterion's verdict line outside capture."""
    start = time.perf_counter()

    def emit(number, ok, detail):
        took = time.perf_counter() - start
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({took:.2f}s) {detail}")
        return ok

    return emit


def test_criterion_1_fitness_oracle(report):
    graphs = small_corpus()
    checked, worst = 0, 0.0
    for g in graphs:
        part = detect_communities(g, seed=0)
        dist = dict(nx.all_pairs_shortest_path_length(to_nx(g)))
        weight = {v: part.community_sizes[part.community_of[v]] / g.node_count for v in g.nodes}
        sets = [s for r in (1, 2, 3) for s in itertools.combinations(g.nodes, r)]
        got = evaluate_population(g, part, sets).values
        for s, value in zip(sets, got):
            reached = {v for v in g.nodes if any(dist[x].get(v, math.inf) <= 2 for x in s)}
            expect = sum(weight[v] for v in reached)
            worst = max(worst, abs(value - expect))
            checked += 1
    ok = len(graphs) >= 10 and all(g.node_count <= 15 for g in graphs) and worst <= 1e-9
    report(1, ok, f"{len(graphs)} graphs, {checked} seed sets, max |diff| {worst:.1e}")
    assert ok


def test_criterion_2_candidates(report):
    mismatches = 0
    classical = ClassicalBackend()
    for seed in range(100):
        rng = random.Random(seed)
        n = rng.randint(5, 500)
        g = random_graph(n, rng.uniform(0.005, 0.1), seed=seed)
        h = to_nx(g)
        ranked = sorted(h.nodes, key=lambda v: (-h.degree(v), v))
        expect = set(ranked[: math.ceil(0.5 * n)])
        local = rank_and_filter_candidates(g, 0.5).ids
        deg = degree_centrality(g)
        reply = classical.candidate_select([(v, deg[v]) for v in g.nodes], 0.5)
        from_backend = set(json.loads(reply.text))
        mismatches += (set(local) != expect) + (from_backend != expect)
    report(2, mismatches == 0, f"100 random graphs, {mismatches} mismatches")
    assert mismatches == 0


def test_criterion_3_golden_corpus(report):
    path = shipped_corpus()
    results = run_corpus(path)
    fixtures = {name: fx for name, fx in load_dir(path)}
    coverage = {c: 0 for c in range(1, 16)}
    for r in results:
        for c in r.expected:
            coverage[c] += 1
    agree = sum(r.passed for r in results)
    # the instrumented log of a reply that reaches the end equals the row
    full_logs = {}
    bad_logs = []
    for r in results:
        row = TABLE[r.phase.value]
        if r.checked != row[: len(r.checked)]:
            bad_logs.append(r.name)
        if r.checked == row:
            full_logs[r.phase.value] = True
    ok = (len(results) >= 30 and agree == len(results) and min(coverage.values()) >= 2
          and not bad_logs and set(full_logs) == set(TABLE) and len(fixtures) == len(results))
    report(3, ok, f"{agree}/{len(results)} fixtures agree, min per-code coverage {min(coverage.values())}, "
                  f"full check logs for {len(full_logs)}/7 phases")
    assert ok


class Spy:
    """Wraps a backend and records every operator request it receives."""

    def __init__(self, inner):
        self.inner = inner
        self.requests = []

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def call(self, request):
        self.requests.append(request)
        return self.inner.call(request)

    def repair_reply(self, prompt):
        return self.inner.repair_reply(prompt)


def faulty_run(mode, codes, rate, observer=None, generations=30, **compliance):
    cfg = RunConfig(graph={"kind": "barbell", "m": 30, "bridge": 5}, backend="faulty", mode=mode,
                    k=30, n=4, generations=generations, seed=5)
    g = barbell_graph(30, 5)
    script = FaultScript.uniform(codes, rate, seed=5, **compliance)
    backend = Spy(FaultyBackend(script, inner=ClassicalBackend(seed=5), universe=g.nodes))
    return run(cfg, backend=backend, graph=g, observer=observer), backend


def test_criterion_4_repair_state_machine(report):
    events = []
    budget = RepairBudget()
    details, ok = [], True

    # (a) moderate-only faults, fully compliant repairs
    for mode in ("population_level", "individual_level"):
        rep, _ = faulty_run(mode, MODERATE, 1.0, events.append, repair_compliance=1.0)
        injected = {p: c for p, c in rep.outcomes.items() if set(TABLE[p]) & set(MODERATE)}
        rep_rate = sum(c["Q_rep"] for c in injected.values()) / sum(sum(c.values()) for c in injected.values())
        rejected = sum(c["Q_rej"] for c in rep.outcomes.values())
        ok &= rep.complete and rep_rate == 1.0 and rejected == 0
        details.append(f"(a) {mode}: Q_rep {rep_rate:.0%} Q_rej {rejected}")

    # (b) critical faults, regeneration never complies
    for mode in ("population_level", "individual_level"):
        seen = []
        rep, spy = faulty_run(mode, CRITICAL, 1.0, seen.append, regeneration_compliance=0.0)
        events.extend(seen)
        total = sum(sum(c.values()) for c in rep.outcomes.values())
        rej = sum(c["Q_rej"] for c in rep.outcomes.values())
        kept = all(e.after == e.before for e in seen if e.record.outcome.value == "Q_rej")
        # input to each population-level operator is byte-identical to the previous one
        firsts = [r for r in spy.requests if r.attempt == 0 and r.phase in (Phase.CROSSOVER_P, Phase.MUTATION_P)]
        chain = all(serialize(a.population) == serialize(b.population) for a, b in zip(firsts, firsts[1:]))
        ok &= rep.complete and rej == total and kept and chain
        details.append(f"(b) {mode}: Q_rej {rej}/{total}, rollbacks {rep.rollbacks}, pre-phase kept {kept and chain}")

    # (c) call bound, also under mixed partial faults
    seen = []
    for seed_mode in ("population_level", "individual_level"):
        faulty_run(seed_mode, range(1, 16), 0.3, seen.append, generations=10,
                   repair_compliance=0.5, regeneration_compliance=0.5)
    events.extend(seen)
    over = [e for e in events if e.record.backend_calls > budget.max_calls(e.phase)]
    ok &= not over
    details.append(f"(c) {len(events)} phase outputs, {len(over)} over the call bound")
    report(4, ok, "; ".join(details))
    assert ok


def paired_runs(k, generations=3):
    base = dict(graph={"kind": "barbell", "m": 30, "bridge": 5}, k=k, n=4, generations=generations, seed=k)
    pop = run(RunConfig(mode="population_level", **base))
    ind = run(RunConfig(mode="individual_level", **base))
    cands = rank_and_filter_candidates(barbell_graph(30, 5), 0.5).ids
    return pop, ind, template_cost_model(4, cands, k)


def test_criterion_5_cost_model(report):
    """Measured savings against the literal closed forms; the mutation form is off by one template."""
    rows, ok = [], True
    last = (-math.inf, -math.inf)
    for k in (10, 20, 30):
        pop, ind, model = paired_runs(k)
        mc = set(measured_saving(ind.ledger, pop.ledger, "crossover").values())
        mm = set(measured_saving(ind.ledger, pop.ledger, "mutation").values())
        pc, _ = predicted_saving_crossover(model)
        pm, _ = predicted_saving_mutation(model)
        c_ok = mc == {pc}
        m_ok = mm == {pm}
        inc = min(mc) > last[0] and min(mm) > last[1]
        last = (max(mc), max(mm))
        ok &= c_ok and m_ok and inc
        rows.append(f"k={k} crossover {sorted(mc)} vs {pc} {'ok' if c_ok else 'MISMATCH'}, "
                    f"mutation {sorted(mm)} vs {pm} {'ok' if m_ok else 'MISMATCH'}")
    report(5, ok, "; ".join(rows))
    assert ok


def test_criterion_5_supplement_derived_mutation_form(report):
    """The accounting the literal mutation form should reduce to: (N_p - 1) * V(T_M^S) - delta_M."""
    ok, rows = True, []
    prev = -math.inf
    for k in (10, 20, 30):
        pop, ind, model = paired_runs(k)
        mm = set(measured_saving(ind.ledger, pop.ledger, "mutation").values())
        want = derived_saving_mutation(model)
        ok &= mm == {want} and want > prev
        prev = want
        rows.append(f"k={k} {sorted(mm)} vs {want}")
    report("5 (derived mutation form)", ok, "; ".join(rows))
    assert ok


def test_criterion_6_call_count(report):
    base = dict(graph={"kind": "barbell", "m": 30, "bridge": 5}, k=30, n=4, generations=5, seed=2)
    pop = run(RunConfig(mode="population_level", **base)).ledger
    ind = run(RunConfig(mode="individual_level", **base)).ledger
    got = []
    for gen in range(5):
        got.append((pop.calls("CrossoverP", generation=gen), pop.calls("MutationP", generation=gen),
                    ind.calls("CrossoverS", generation=gen), ind.calls("MutationS", generation=gen)))
    ok = set(got) == {(1, 1, 15, 30)}
    report(6, ok, f"per generation (CrossoverP, MutationP, CrossoverS, MutationS) = {sorted(set(got))}")
    assert ok


def test_criterion_7_optimization_sanity(report):
    rows, ok = [], True
    for seed in range(10):
        cfg = RunConfig(graph={"kind": "barbell", "m": 30, "bridge": 5}, k=30, n=4, generations=30,
                        elitism=True, seed=seed)
        rep = run(cfg)
        bsf = [r["best_so_far"] for r in rep.curve]
        final = rep.curve[-1]["best"]
        good = final >= rep.greedy_fitness - 1e-12 and all(a <= b for a, b in zip(bsf, bsf[1:]))
        ok &= good
        rows.append(f"{final:.3f}")
    report(7, ok, f"final best over 10 seeds [{', '.join(rows)}] vs greedy {rep.greedy_fitness:.3f}")
    assert ok


def test_criterion_8_determinism(report, tmp_path):
    variants = {
        "classical": dict(backend="classical"),
        "faulty": dict(backend="faulty", fault_script={**FaultScript.uniform(range(1, 16), 0.3, seed=1).to_dict(),
                                                      "repair_compliance": 0.5, "regeneration_compliance": 0.5}),
    }
    same = {}
    for name, extra in variants.items():
        for mode in ("population_level", "individual_level"):
            cfg = dict(graph={"kind": "barbell", "m": 10, "bridge": 2}, k=10, n=3, generations=8, seed=4, mode=mode, **extra)
            a = run(RunConfig(**cfg))
            b = run(RunConfig(**cfg))
            json_same = a.to_json(drop_volatile=True) == b.to_json(drop_volatile=True)
            # with a fixed run id every written file is byte-identical
            fa = run(RunConfig(run_id="fixed", **cfg)).write(tmp_path / f"{name}-{mode}-a")
            fb = run(RunConfig(run_id="fixed", **cfg)).write(tmp_path / f"{name}-{mode}-b")
            files_same = all(fa[key].read_bytes() == fb[key].read_bytes() for key in fa)
            same[f"{name}/{mode}"] = json_same and files_same
    ok = all(same.values())
    report(8, ok, ", ".join(f"{k} {'identical' if v else 'DIFFERENT'}" for k, v in same.items()))
    assert ok


def test_criterion_9_chat_contract(report, monkeypatch, caplog):
    secret = "sk-acceptance-secret"
    monkeypatch.setenv("GRAPHEVO_API_KEY", secret)
    stub = ReplayStub([Rule(content="[1, 2, 5]", delay=1.0, times=1), Rule(content="[1, 2, 5]")])
    server = stub.serve()
    threading.Thread(target=server.serve_forever, daemon=True).start()
    host, port = server.server_address[:2]
    caplog.set_level(logging.DEBUG)
    try:
        cfg = ChatEndpointConfig(base_url=f"http://{host}:{port}/v1", model="stub-model", timeout=0.3,
                                 max_retries=2, backoff=0)
        backend = ChatBackend(cfg)
        from graphevo.evo import CandidateSet
        raw = backend.mutate_individual((1, 2, 3), CandidateSet(frozenset(range(1, 10))))
        # then an error reply that echoes the credential
        stub.rules.insert(0, Rule(status=500, content=f"bad token {secret}", times=3))
        try:
            backend.complete("x")
            err = ""
        except TransportError as exc:
            err = str(exc)
    finally:
        server.shutdown()
        server.server_close()
    body = stub.requests[0]["body"]
    shape = (set(body) == {"model", "temperature", "messages"} and body["model"] == "stub-model"
             and body["messages"] == [{"role": "user", "content": raw.prompt.text}])
    temp = body["temperature"] == 0.8
    retried = raw.text == "[1, 2, 5]" and len([r for r in stub.requests[:2] if r["body"] == body]) == 2
    auth = stub.requests[0]["headers"].get("Authorization") == f"Bearer {secret}"
    redacted = bool(err) and secret not in caplog.text and secret not in err
    ok = shape and temp and retried and auth and redacted
    report(9, ok, f"shape {shape}, temperature 0.8 {temp}, retry after timeout {retried}, "
                  f"credential sent {auth}, redacted in logs {redacted}")
    assert ok


@pytest.mark.skipif(not os.environ.get("GRAPHEVO_LIVE_URL"), reason="live smoke test; set GRAPHEVO_LIVE_URL to run")
def test_live_smoke_one_generation():
    cfg = RunConfig(graph={"kind": "barbell", "m": 10, "bridge": 2}, backend="chat", k=6, n=3, generations=1,
                    chat={"base_url": os.environ["GRAPHEVO_LIVE_URL"],
                          "model": os.environ.get("GRAPHEVO_LIVE_MODEL", "gpt-4o")})
    rep = run(cfg)
    assert rep.complete and len(rep.curve) == 2
