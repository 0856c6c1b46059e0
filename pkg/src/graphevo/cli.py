"""Command-line entry point: ``graphevo run | gen-graph | check-corpus``.

Exit codes: 0 success, 1 aborted run or corpus mismatch, 2 bad config or IO.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import corpus, engine
from .errors import ConfigError, GraphEvoError, InstanceError, ParseError
from .graph import GENERATORS, dump_edge_list, generate

log = logging.getLogger("graphevo")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _value(text: str):
    """Override values are JSON when they parse as JSON, plain strings otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _split_pair(item: str, what: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"{what} {item!r} is not key=value")
    key, _, value = item.partition("=")
    key = key.strip()
    if not key:
        raise ConfigError(f"{what} {item!r} has an empty key")
    return key, value


def load_config(path: Optional[str], overrides: Sequence[str] = ()) -> engine.RunConfig:
    data: dict = {}
    base: Optional[Path] = None
    if path:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror or exc}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{p}: top level must be an object")
        base = p.parent
    for item in overrides:
        key, value = _split_pair(item, "override")
        engine.set_override(data, key, _value(value))
    # Relative file paths in a config file are relative to that file.
    if base is not None:
        for key in ("graph", "partition", "fault_script"):
            v = data.get(key)
            if isinstance(v, str) and v not in ("detect", "single") and not Path(v).is_absolute():
                data[key] = str(base / v)
    return engine.RunConfig.from_dict(data)


def _one_run(cfg: engine.RunConfig) -> engine.RunReport:
    return engine.run(cfg)


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.set or [])
    if args.repeat < 1:
        raise ConfigError("--repeat must be >= 1")
    # Fail fast on unreadable inputs before any work starts.
    g = engine.load_graph(cfg.graph)
    engine.load_partition_source(cfg.partition, g, cfg.community_seed)
    out = Path(args.out)
    configs = []
    for i in range(args.repeat):
        d = cfg.to_dict()
        d["seed"] = cfg.seed + i
        if cfg.run_id and args.repeat > 1:
            d["run_id"] = f"{cfg.run_id}-{i:03d}"
        configs.append(engine.RunConfig.from_dict(d))
    if args.workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            reports = list(pool.map(_one_run, configs))
    else:
        reports = [_one_run(c) for c in configs]
    status = EXIT_OK
    for i, rep in enumerate(reports):
        target = out if args.repeat == 1 else out / f"run-{i:03d}"
        rep.write(target)
        state = "complete" if rep.complete else f"ABORTED ({rep.abort_reason})"
        print(f"run {rep.run_id} seed={configs[i].seed}: best={rep.best_fitness:.6g} "
              f"rollbacks={rep.rollbacks} {state} -> {target}")
        if not rep.complete:
            status = EXIT_FAIL
    if args.repeat > 1:
        out.mkdir(parents=True, exist_ok=True)
        engine.atomic_write(out / "aggregate.csv", engine.aggregate_csv(engine.aggregate(reports)))
        print(f"aggregate over {len(reports)} runs -> {out / 'aggregate.csv'}")
    return status


def cmd_gen_graph(args) -> int:
    params = {}
    for item in args.params:
        key, value = _split_pair(item, "parameter")
        params[key] = _value(value)
    if args.seed is not None:
        if args.kind != "random":
            raise ConfigError(f"--seed only applies to random graphs, not {args.kind}")
        params["seed"] = args.seed
    g = generate(args.kind, **params)
    text = dump_edge_list(g)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        path = Path(args.out)
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True)
        engine.atomic_write(path, text)
        print(f"{args.kind}: {g.node_count} nodes, {g.edge_count} edges -> {path}", file=sys.stderr)
    return EXIT_OK


def cmd_check_corpus(args) -> int:
    path = Path(args.dir) if args.dir else corpus.shipped_corpus()
    if not path.is_dir():
        raise ConfigError(f"corpus directory {path} does not exist")
    results = corpus.run_corpus(path)
    if not results:
        print(f"no fixtures found in {path}")
        return EXIT_FAIL
    width = max(len(r.name) for r in results)
    failures = 0
    for r in results:
        if r.error is not None:
            mark, detail = "ERROR", f"fixture error: {r.error}"
        else:
            mark = "pass" if r.passed else "FAIL"
            detail = f"expected {_codes(r.expected)} got {_codes(r.actual)}"
        failures += not r.passed
        print(f"{r.name:<{width}}  {mark:<5}  {detail}")
    print(f"{len(results) - failures}/{len(results)} fixtures pass")
    return EXIT_OK if failures == 0 else EXIT_FAIL


def _codes(codes) -> str:
    return "[" + ",".join(f"E{c}" for c in codes) + "]"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphevo", description="evolutionary seed selection with checked operator backends")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment or a seeded sweep")
    r.add_argument("--config", help="JSON config file")
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted-key override, applied after the file")
    r.add_argument("--repeat", type=int, default=1, help="number of runs, seeds seed..seed+repeat-1")
    r.add_argument("--workers", type=int, default=1, help="parallel worker processes for --repeat")
    r.add_argument("--out", default="out", help="output directory")
    r.set_defaults(func=cmd_run)

    gg = sub.add_parser("gen-graph", help="write a synthetic edge list")
    gg.add_argument("kind", choices=sorted(GENERATORS))
    gg.add_argument("params", nargs="*", metavar="KEY=VALUE", help="generator parameters, e.g. m=30 bridge=5")
    gg.add_argument("--seed", type=int, help="seed for random graphs")
    gg.add_argument("--out", help="output file (default stdout)")
    gg.set_defaults(func=cmd_gen_graph)

    cc = sub.add_parser("check-corpus", help="classify a golden fixture directory")
    cc.add_argument("dir", nargs="?", help="fixture directory (default: the shipped corpus)")
    cc.set_defaults(func=cmd_check_corpus)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParseError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GraphEvoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
