"""The optimization loop, for both population-level and individual-level operation.

One generation is fitness, selection, crossover, mutation. Every backend
reply goes through :func:`graphevo.repair.check_and_repair`; a rejected
reply leaves the pre-phase population in place.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import random
import statistics
import tempfile
import uuid
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence

from .backends import (
    ChatBackend,
    ChatEndpointConfig,
    ClassicalBackend,
    FaultScript,
    FaultyBackend,
    OperatorBackend,
    OperatorRequest,
    pair_seed,
    pairing_order,
    solution_seed,
)
from .backends.classical import SELECTION_STRATEGIES
from .cost import TokenLedger
from .errors import ConfigError, ContractError, TransportError
from .evo import (
    CandidateSet,
    Population,
    Solution,
    derive_seed,
    fitness,
    greedy_by_degree,
    random_init,
    rank_and_filter_candidates,
)
from .graph import (
    Graph,
    Partition,
    candidate_count,
    degree_centrality,
    detect_communities,
    generate,
    load_edge_list,
    load_partition,
    single_community,
)
from .repair import OUTCOMES, AuditLog, Outcome, OutcomeRecord, Recorder, RepairBudget, check_and_repair
from .validation import CheckContext, Level, Phase, Thresholds

log = logging.getLogger(__name__)

MODES = ("population_level", "individual_level")
BACKENDS = ("classical", "faulty", "chat")

# Report fields that legitimately differ between otherwise identical runs.
VOLATILE_FIELDS = ("run_id",)


def _build(cls, value, where: str):
    if isinstance(value, cls):
        return value
    if value is None:
        return cls()
    if not isinstance(value, Mapping):
        raise ConfigError(f"{where}: expected an object, got {type(value).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(value) - names)
    if unknown:
        raise ConfigError(f"unknown key {where}.{unknown[0]}")
    try:
        return cls(**value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except ContractError as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass
class RunConfig:
    """Everything a run depends on. ``graph`` is an edge-list path or a generator spec.

    A generator spec is ``{"kind": "barbell", "m": 30, "bridge": 5}``;
    ``partition`` is ``"detect"``, ``"single"`` or a partition file path.
    """

    graph: Any = None
    partition: str = "detect"
    backend: str = "classical"
    mode: str = "population_level"
    k: int = 30
    n: int = 4
    generations: int = 30
    candidate_fraction: float = 0.5
    crossover_rate: float = 1.0
    mutation_rate: float = 1.0
    gene_rate: Optional[float] = None
    selection: str = "tournament"
    tournament_size: int = 3
    elitism: bool = True
    seed: int = 0
    community_seed: int = 0
    thresholds: Thresholds = field(default_factory=Thresholds)
    repair: RepairBudget = field(default_factory=RepairBudget)
    parse_mode: str = "strict"
    candidate_cap: int = 1000
    fault_script: Optional[dict] = None
    chat: ChatEndpointConfig = field(default_factory=ChatEndpointConfig)
    max_transport_failures: int = 3
    run_id: Optional[str] = None

    def __post_init__(self):
        self.thresholds = _build(Thresholds, self.thresholds, "thresholds")
        self.repair = _build(RepairBudget, self.repair, "repair")
        self.chat = _build(ChatEndpointConfig, self.chat, "chat")
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.selection not in SELECTION_STRATEGIES:
            raise ConfigError(f"selection must be one of {SELECTION_STRATEGIES}, got {self.selection!r}")
        if self.parse_mode not in ("strict", "lenient"):
            raise ConfigError(f"parse_mode must be strict or lenient, got {self.parse_mode!r}")
        if self.k < 2 or self.k % 2:
            raise ConfigError(f"k must be even and >= 2, got {self.k}")
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.generations < 1:
            raise ConfigError(f"generations must be >= 1, got {self.generations}")
        if not 0.0 < self.candidate_fraction <= 1.0:
            raise ConfigError(f"candidate_fraction must be in (0, 1], got {self.candidate_fraction}")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.gene_rate is not None and not 0.0 <= self.gene_rate <= 1.0:
            raise ConfigError("gene_rate must be in [0, 1]")
        if self.tournament_size < 1:
            raise ConfigError("tournament_size must be >= 1")
        if self.max_transport_failures < 0:
            raise ConfigError("max_transport_failures must be >= 0")

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown key {unknown[0]}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        d = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            d[f.name] = dataclasses.asdict(v) if dataclasses.is_dataclass(v) else v
        return d

    def fingerprint(self) -> str:
        """Hash of the config without mode and run id, for ledger comparability."""
        d = self.to_dict()
        d.pop("mode")
        d.pop("run_id")
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]


def set_override(d: dict, dotted: str, value) -> None:
    """Apply ``a.b=value`` to a nested config dict; unknown keys raise ConfigError."""
    parts = dotted.split(".")
    top = {f.name: f for f in dataclasses.fields(RunConfig)}
    if parts[0] not in top:
        raise ConfigError(f"unknown key {dotted}")
    nested = {
        "thresholds": Thresholds,
        "repair": RepairBudget,
        "chat": ChatEndpointConfig,
    }
    if len(parts) > 1 and parts[0] in nested:
        allowed = {f.name for f in dataclasses.fields(nested[parts[0]])}
        if parts[1] not in allowed:
            raise ConfigError(f"unknown key {dotted}")
    elif len(parts) > 1 and parts[0] not in ("graph", "fault_script"):
        raise ConfigError(f"key {parts[0]} has no sub-keys (got {dotted})")
    cur = d
    for p in parts[:-1]:
        nxt = cur.get(p)
        if dataclasses.is_dataclass(nxt):
            nxt = dataclasses.asdict(nxt)
        if not isinstance(nxt, dict):
            nxt = {}
        cur[p] = nxt
        cur = nxt
    cur[parts[-1]] = value


# ---------------------------------------------------------------- inputs

def load_graph(source) -> Graph:
    if isinstance(source, Graph):
        return source
    if source is None:
        raise ConfigError("no graph configured")
    if isinstance(source, Mapping):
        params = dict(source)
        kind = params.pop("kind", None)
        if kind is None:
            raise ConfigError("graph spec needs a 'kind'")
        try:
            return generate(kind, **params)
        except TypeError as exc:
            raise ConfigError(f"graph {kind}: {exc}") from None
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read graph file {path}: {exc.strerror or exc}") from None
    return load_edge_list(text)


def load_partition_source(source, g: Graph, seed: int = 0) -> Partition:
    if isinstance(source, Partition):
        return source
    if source in (None, "detect"):
        return detect_communities(g, seed=seed)
    if source == "single":
        return single_community(g)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read partition file {path}: {exc.strerror or exc}") from None
    return load_partition(text, g)


def make_backend(config: RunConfig, g: Graph) -> OperatorBackend:
    classical = ClassicalBackend(config.selection, config.tournament_size, config.gene_rate,
                                 config.thresholds, seed=derive_seed(config.seed, "backend"))
    if config.backend == "classical":
        return classical
    if config.backend == "faulty":
        script = config.fault_script or {}
        if isinstance(script, str):
            script = FaultScript.load(script)
        elif not isinstance(script, FaultScript):
            script = FaultScript.from_dict(script)
        return FaultyBackend(script, inner=classical, universe=g.nodes, thresholds=config.thresholds)
    return ChatBackend(config.chat)


# ---------------------------------------------------------------- helpers

def apply_selection_ids(pop: Sequence[Solution], ids: Sequence[int]) -> Population:
    """Materialise selected indices in order; duplicates become copies."""
    bad = [i for i in ids if not 0 <= i < len(pop)]
    if bad:
        raise ContractError(f"selection id {bad[0]} out of range for population of {len(pop)}")
    return [tuple(pop[i]) for i in ids]


def _usable(g: Graph, s: Sequence[int]) -> list[int]:
    # Accepted-with-flaws solutions may hold repeats or foreign ids.
    out, seen = [], set()
    for v in s:
        if v in g and v not in seen:
            seen.add(v)
            out.append(v)
    return out


@dataclass
class FitnessRecord:
    values: list[float]

    @property
    def best(self) -> float:
        return max(self.values)

    @property
    def mean(self) -> float:
        return sum(self.values) / len(self.values)

    def best_index(self) -> int:
        return max(range(len(self.values)), key=lambda i: (self.values[i], -i))


def evaluate_population(g: Graph, part: Partition, pop: Sequence[Solution], cache: dict | None = None) -> FitnessRecord:
    """Index-aligned fitness values. Ids outside the graph and repeats are ignored."""
    cache = {} if cache is None else cache
    values = []
    for s in pop:
        key = frozenset(_usable(g, s))
        if key not in cache:
            cache[key] = fitness(g, part, key)
        values.append(cache[key])
    return FitnessRecord(values)


@dataclass
class PhaseEvent:
    """Passed to the run observer after every checked backend reply."""

    generation: int
    phase: Phase
    index: int
    before: tuple
    after: tuple
    record: OutcomeRecord


@dataclass
class RunReport:
    run_id: str
    config: dict
    backend: dict
    curve: list[dict]
    outcomes: dict[str, dict[str, int]]
    error_counts: dict[str, dict[str, int]]
    ledger_summary: dict
    best_solution: list[int]
    best_fitness: float
    rollbacks: int
    normalizations: int
    greedy_fitness: Optional[float]
    complete: bool = True
    abort_reason: Optional[str] = None
    ledger: TokenLedger = field(default_factory=TokenLedger, repr=False)
    audit: AuditLog = field(default_factory=AuditLog, repr=False)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "complete": self.complete,
            "abort_reason": self.abort_reason,
            "config": self.config,
            "backend": self.backend,
            "best_solution": self.best_solution,
            "best_fitness": self.best_fitness,
            "greedy_fitness": self.greedy_fitness,
            "rollbacks": self.rollbacks,
            "normalizations": self.normalizations,
            "curve": self.curve,
            "outcomes": self.outcomes,
            "error_counts": self.error_counts,
            "ledger": self.ledger_summary,
        }

    def to_json(self, drop_volatile: bool = False) -> str:
        d = self.to_dict()
        if drop_volatile:
            for k in VOLATILE_FIELDS:
                d.pop(k, None)
            d["config"] = {k: v for k, v in d["config"].items() if k not in VOLATILE_FIELDS}
        return json.dumps(d, indent=2, sort_keys=True)

    def fitness_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["generation", "best", "mean"])
        for row in self.curve:
            w.writerow([row["generation"], repr(row["best"]), repr(row["mean"])])
        return buf.getvalue()

    def outcomes_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phase", *OUTCOMES])
        for phase in Phase:
            counts = self.outcomes.get(phase.value)
            if counts is None:
                continue
            w.writerow([phase.value, *(counts.get(o, 0) for o in OUTCOMES)])
        return buf.getvalue()

    def write(self, outdir) -> dict[str, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        files = {
            "report.json": self.to_json() + "\n",
            "fitness.csv": self.fitness_csv(),
            "outcomes.csv": self.outcomes_csv(),
            "audit.jsonl": self.audit.to_jsonl(),
            "ledger.csv": self.ledger.to_csv(),
        }
        paths = {}
        for name, text in files.items():
            paths[name] = atomic_write(outdir / name, text)
        return paths


def atomic_write(path, text: str) -> Path:
    """Write through a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


class _Abort(Exception):
    pass


# ---------------------------------------------------------------- the loop

class _Run:
    def __init__(self, config: RunConfig, g: Graph, part: Partition, backend: OperatorBackend,
                 observer: Optional[Callable[[PhaseEvent], None]]):
        self.cfg = config
        self.g = g
        self.part = part
        self.backend = backend
        self.observer = observer
        self.run_id = config.run_id or uuid.uuid4().hex
        ledger = TokenLedger(meta={"fingerprint": config.fingerprint(), "mode": config.mode, "run_id": self.run_id})
        self.rec = Recorder(ledger, AuditLog(self.run_id))
        self.outcomes: dict[str, Counter] = {}
        self.errors: dict[str, Counter] = {}
        self.rollbacks = 0
        self.normalizations = 0
        self.transport_failures = 0
        self.cache: dict = {}
        self.best: tuple[float, Solution] = (-math.inf, ())

    # one checked backend call
    def phase(self, request: OperatorRequest, ctx: CheckContext, before) -> tuple[Optional[object], OutcomeRecord]:
        try:
            raw = self.rec.call(self.backend, request)
            parsed, record = check_and_repair(raw, request, ctx, self.backend, self.cfg.repair, self.rec, self.cfg.parse_mode)
            self.transport_failures = 0
        except TransportError as exc:
            self.transport_failures += 1
            self.rec.event(request.phase, request.attempt, "transport_error", None, Outcome.REJECTED.value,
                           index=request.index, detail=str(exc))
            parsed, record = None, OutcomeRecord(request.phase, Outcome.REJECTED, rolled_back=True)
            if self.transport_failures > self.cfg.max_transport_failures:
                self._tally(record)
                raise _Abort(f"backend transport failed {self.transport_failures} times in a row: {exc}") from None
        self._tally(record)
        if record.outcome is Outcome.REJECTED:
            self.rollbacks += 1
            self.rec.event(request.phase, request.attempt, "rollback", None, Outcome.REJECTED.value, index=request.index)
        if self.observer is not None:
            if parsed is None:
                after = before
            elif parsed.level.nested or parsed.level is Level.INDIVIDUAL:
                after = tuple(tuple(s) for s in parsed.solutions)
            else:
                after = tuple(parsed.ids)
            self.observer(PhaseEvent(self.rec.generation, request.phase, request.index, before, after, record))
        return parsed, record

    def _tally(self, record: OutcomeRecord) -> None:
        key = record.phase.value
        self.outcomes.setdefault(key, Counter())[record.outcome.value] += 1
        errs = self.errors.setdefault(key, Counter())
        for f in record.findings:
            errs[f.name] += 1

    def normalize(self, pop: Population, phase: Phase, seed: int) -> Optional[Population]:
        k = self.cfg.k
        if not pop:
            return None
        if len(pop) == k:
            return pop
        rng = random.Random(seed)
        self.normalizations += 1
        if len(pop) > k:
            out = pop[:k]
            action = "truncate"
        else:
            out = pop + [rng.choice(pop) for _ in range(k - len(pop))]
            action = "pad"
        self.rec.event(phase, 0, "normalize", None, None, detail=f"{action} {len(pop)} -> {k}")
        return out

    def evaluate(self, pop: Population) -> FitnessRecord:
        fit = evaluate_population(self.g, self.part, pop, self.cache)
        i = fit.best_index()
        if fit.values[i] > self.best[0]:
            self.best = (fit.values[i], tuple(pop[i]))
        return fit

    def candidates(self) -> CandidateSet:
        cfg, g = self.cfg, self.g
        local = rank_and_filter_candidates(g, cfg.candidate_fraction)
        if g.node_count > cfg.candidate_cap:
            self.rec.event(Phase.CANDIDATE_SELECTION, 0, "local", None, None,
                           detail=f"|V|={g.node_count} above cap {cfg.candidate_cap}")
            return local
        deg = degree_centrality(g)
        req = OperatorRequest(Phase.CANDIDATE_SELECTION, ids_with_metric=tuple((v, deg[v]) for v in g.nodes),
                              fraction=cfg.candidate_fraction, seed=derive_seed(cfg.seed, "candidates"))
        ctx = CheckContext(Phase.CANDIDATE_SELECTION, true_top=local.ids,
                           requested_count=candidate_count(g.node_count, cfg.candidate_fraction),
                           thresholds=cfg.thresholds)
        parsed, _ = self.phase(req, ctx, tuple(sorted(local.ids)))
        if parsed is not None:
            ids = frozenset(parsed.ids) & frozenset(g.nodes)
            if len(ids) >= cfg.n:
                return CandidateSet(ids, cfg.candidate_fraction)
        self.rec.event(Phase.CANDIDATE_SELECTION, 0, "fallback", None, None, detail="local candidate ranking")
        return local

    def initialize(self, cands: CandidateSet) -> Population:
        cfg = self.cfg
        if len(cands) < cfg.n:
            raise ConfigError(f"n={cfg.n} exceeds the {len(cands)} available candidates")
        req = OperatorRequest(Phase.INITIALIZATION, n=cfg.n, k=cfg.k, candidates=cands.ids,
                              seed=derive_seed(cfg.seed, "init"))
        ctx = CheckContext(Phase.INITIALIZATION, n=cfg.n, k=cfg.k, candidates=cands.ids, thresholds=cfg.thresholds)
        parsed, _ = self.phase(req, ctx, ())
        pop = None
        if parsed is not None:
            pop = self.normalize([tuple(s) for s in parsed.solutions], Phase.INITIALIZATION,
                                 derive_seed(cfg.seed, "normalize", "init"))
        if pop is None:
            self.rec.event(Phase.INITIALIZATION, 0, "fallback", None, None, detail="local random sampling")
            pop = random_init(cands, cfg.n, cfg.k, derive_seed(cfg.seed, "init", "fallback"))
        return pop

    def select(self, pop: Population, fit: FitnessRecord, gen: int) -> Population:
        cfg = self.cfg
        id_fit = tuple(enumerate(fit.values))
        req = OperatorRequest(Phase.SELECTION, k=cfg.k, id_fitness=id_fit, generation=gen,
                              seed=derive_seed(cfg.seed, "selection", gen))
        ctx = CheckContext(Phase.SELECTION, n=cfg.n, k=cfg.k, fitness=fit.values, thresholds=cfg.thresholds)
        parsed, _ = self.phase(req, ctx, tuple(range(len(pop))))
        if parsed is None:
            return pop
        chosen = apply_selection_ids(pop, parsed.ids)
        return self.normalize(chosen, Phase.SELECTION, derive_seed(cfg.seed, "normalize", "selection", gen)) or pop

    def crossover(self, pop: Population, cands: CandidateSet, gen: int) -> Population:
        cfg = self.cfg
        seed = derive_seed(cfg.seed, "crossover", gen)
        before = tuple(pop)
        if cfg.mode == "population_level":
            req = OperatorRequest(Phase.CROSSOVER_P, n=cfg.n, k=cfg.k, population=before, candidates=cands.ids,
                                  generation=gen, seed=seed)
            ctx = CheckContext(Phase.CROSSOVER_P, n=cfg.n, k=cfg.k, candidates=cands.ids,
                               input_population=before, thresholds=cfg.thresholds)
            parsed, _ = self.phase(req, ctx, before)
            if parsed is None:
                return pop
            out = self.normalize([tuple(s) for s in parsed.solutions], Phase.CROSSOVER_P,
                                 derive_seed(cfg.seed, "normalize", "crossover", gen))
            return out or pop
        out = list(pop)
        gate = random.Random(derive_seed(seed, "rate"))
        for i, (x, y) in enumerate(pairing_order(len(pop), seed)):
            if cfg.crossover_rate < 1.0 and gate.random() >= cfg.crossover_rate:
                continue
            parents = (tuple(pop[x]), tuple(pop[y]))
            req = OperatorRequest(Phase.CROSSOVER_S, n=cfg.n, k=2, population=parents, candidates=cands.ids,
                                  generation=gen, seed=pair_seed(seed, i), index=i)
            ctx = CheckContext(Phase.CROSSOVER_S, n=cfg.n, k=2, candidates=cands.ids,
                               input_population=parents, thresholds=cfg.thresholds)
            parsed, _ = self.phase(req, ctx, parents)
            if parsed is not None:
                c1, c2 = parsed.solutions
                out[x], out[y] = tuple(c1), tuple(c2)
        return out

    def mutate(self, pop: Population, cands: CandidateSet, gen: int) -> Population:
        cfg = self.cfg
        seed = derive_seed(cfg.seed, "mutation", gen)
        before = tuple(pop)
        if cfg.mode == "population_level":
            req = OperatorRequest(Phase.MUTATION_P, n=cfg.n, k=cfg.k, population=before, candidates=cands.ids,
                                  generation=gen, seed=seed)
            ctx = CheckContext(Phase.MUTATION_P, n=cfg.n, k=cfg.k, candidates=cands.ids,
                               input_population=before, thresholds=cfg.thresholds)
            parsed, _ = self.phase(req, ctx, before)
            if parsed is None:
                return pop
            out = self.normalize([tuple(s) for s in parsed.solutions], Phase.MUTATION_P,
                                 derive_seed(cfg.seed, "normalize", "mutation", gen))
            return out or pop
        out = list(pop)
        gate = random.Random(derive_seed(seed, "rate"))
        for i, s in enumerate(pop):
            if cfg.mutation_rate < 1.0 and gate.random() >= cfg.mutation_rate:
                continue
            single = (tuple(s),)
            req = OperatorRequest(Phase.MUTATION_S, n=cfg.n, k=1, population=single, candidates=cands.ids,
                                  generation=gen, seed=solution_seed(seed, i), index=i)
            ctx = CheckContext(Phase.MUTATION_S, n=cfg.n, k=1, candidates=cands.ids,
                               input_population=single, thresholds=cfg.thresholds)
            parsed, _ = self.phase(req, ctx, single)
            if parsed is not None:
                out[i] = tuple(parsed.solutions[0])
        return out

    def elitism(self, pop: Population, elite: Solution, elite_fit: float, gen: int) -> Population:
        fit = evaluate_population(self.g, self.part, pop, self.cache)
        if fit.best >= elite_fit:
            return pop
        worst = min(range(len(pop)), key=lambda i: (fit.values[i], -i))
        out = list(pop)
        out[worst] = elite
        self.rec.event("Elitism", 0, "elitism", None, None, detail=f"slot {worst}")
        return out

    def execute(self) -> RunReport:
        cfg = self.cfg
        curve: list[dict] = []
        complete, reason = True, None
        best_so_far = -math.inf
        try:
            self.rec.generation = 0
            cands = self.candidates()
            pop = self.initialize(cands)
            for gen in range(cfg.generations + 1):
                self.rec.generation = gen
                fit = self.evaluate(pop)
                self.rec.event("Fitness", 0, "evaluate", None, None)
                best_so_far = max(best_so_far, fit.best)
                curve.append({"generation": gen, "best": fit.best, "mean": fit.mean, "best_so_far": best_so_far})
                if gen == cfg.generations:
                    break
                elite_i = fit.best_index()
                elite, elite_fit = tuple(pop[elite_i]), fit.values[elite_i]
                pop = self.select(pop, fit, gen)
                pop = self.crossover(pop, cands, gen)
                pop = self.mutate(pop, cands, gen)
                if cfg.elitism:
                    pop = self.elitism(pop, elite, elite_fit, gen)
                if len(pop) != cfg.k:
                    raise ContractError(f"population size {len(pop)} != {cfg.k} after generation {gen}")
        except _Abort as exc:
            complete, reason = False, str(exc)
            log.error("run %s aborted: %s", self.run_id, reason)
            self.rec.event("Run", 0, "abort", None, None, detail=reason)
        return self.report(curve, complete, reason)

    def report(self, curve, complete, reason) -> RunReport:
        cfg = self.cfg
        outcomes = {p: {o: c.get(o, 0) for o in OUTCOMES} for p, c in self.outcomes.items()}
        errors = {p: dict(sorted(c.items(), key=lambda kv: int(kv[0][1:]))) for p, c in self.errors.items()}
        greedy = fitness(self.g, self.part, greedy_by_degree(self.g, min(cfg.n, self.g.node_count)))
        echo = cfg.to_dict()
        echo["run_id"] = self.run_id
        if not isinstance(echo.get("graph"), (str, dict, type(None))):
            echo["graph"] = f"<{type(cfg.graph).__name__}>"
        if not isinstance(echo.get("partition"), (str, type(None))):
            echo["partition"] = f"<{type(cfg.partition).__name__}>"
        best_fit, best_sol = self.best
        return RunReport(
            run_id=self.run_id,
            config=echo,
            backend=self.backend.describe(),
            curve=curve,
            outcomes=outcomes,
            error_counts=errors,
            ledger_summary=self.rec.ledger.summary(),
            best_solution=list(best_sol),
            best_fitness=best_fit if best_sol else 0.0,
            rollbacks=self.rollbacks,
            normalizations=self.normalizations,
            greedy_fitness=greedy,
            complete=complete,
            abort_reason=reason,
            ledger=self.rec.ledger,
            audit=self.rec.audit,
        )


def run(config: RunConfig, backend: Optional[OperatorBackend] = None, graph: Optional[Graph] = None,
        partition: Optional[Partition] = None, observer: Optional[Callable[[PhaseEvent], None]] = None) -> RunReport:
    """Execute one run. Explicit ``graph``/``partition``/``backend`` override the config sources."""
    g = graph if graph is not None else load_graph(config.graph)
    part = partition if partition is not None else load_partition_source(config.partition, g, config.community_seed)
    backend = backend if backend is not None else make_backend(config, g)
    return _Run(config, g, part, backend, observer).execute()


def aggregate(reports: Sequence[RunReport]) -> list[dict]:
    """Per-generation mean and sample standard deviation of best and mean fitness."""
    if not reports:
        return []
    length = min(len(r.curve) for r in reports)
    rows = []
    for gen in range(length):
        best = [r.curve[gen]["best"] for r in reports]
        mean = [r.curve[gen]["mean"] for r in reports]
        rows.append({
            "generation": gen,
            "runs": len(reports),
            "best_mean": statistics.fmean(best),
            "best_std": statistics.stdev(best) if len(best) > 1 else 0.0,
            "mean_mean": statistics.fmean(mean),
            "mean_std": statistics.stdev(mean) if len(mean) > 1 else 0.0,
        })
    return rows


def aggregate_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    cols = ["generation", "runs", "best_mean", "best_std", "mean_mean", "mean_std"]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()
