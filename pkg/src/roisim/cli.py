"""Command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(unreadable or malformed input, bad index file), 3 answers differ from
brute force under ``bench --check``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import storage
from .bench import run_bench
from .datagen import QUERY_SIDES, SynthParams, gen_queries, gen_synthetic, write_corpus, write_queries
from .filter import METHODS, ConfigError, Engine, EngineConfig, build_index
from .granularity import CostModel, calibrate, select_granularity
from .gridtree import DEFAULT_HEIGHT
from .index import DEFAULT_BUCKETS
from .model import DataError, Query, load_corpus, parse_query_line, read_jsonl

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MISMATCH = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _engine_flags(p: argparse.ArgumentParser, multi: bool = False) -> None:
    help_m = "comma-separated methods" if multi else "search method"
    p.add_argument("--method", default="hierarchical", help=f"{help_m}: {', '.join(METHODS)}")
    p.add_argument("--granularity", type=int, default=64, help="grid cells per axis (grid, hybrid)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--buckets", type=int, default=DEFAULT_BUCKETS, help="hybrid hash buckets")
    g.add_argument("--injective", action="store_true", help="one bucket per (token, grid) pair")
    p.add_argument("--mt", type=int, default=16, help="grids per token (hierarchical)")
    p.add_argument("--height", type=int, default=DEFAULT_HEIGHT, help="grid tree height (hierarchical)")


def _query_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--index", help="prebuilt index file; must match the corpus and method")
    p.add_argument("--tau-r", type=float, default=None, help="override every query's tau_R")
    p.add_argument("--tau-t", type=float, default=None, help="override every query's tau_T")


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="roisim", description="Spatio-textual similarity search over region objects.")
    ap.add_argument("--config", help="JSON file whose keys mirror the long flags; flags win")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="write a synthetic corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab", type=int, default=5000)
    p.add_argument("--mean-tokens", type=float, default=12.5)
    p.add_argument("--min-side", type=float, default=0.1)
    p.add_argument("--max-side", type=float, default=10.0)
    p.add_argument("--zipf", type=float, default=1.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen-queries", help="write a query workload anchored on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--mode", choices=sorted(QUERY_SIDES), default="small")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau-r", type=float, default=0.4)
    p.add_argument("--tau-t", type=float, default=0.4)
    p.add_argument("--out", required=True)

    p = sub.add_parser("build", help="build and save an index")
    p.add_argument("--corpus", required=True)
    _engine_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("query", help="answer queries, one JSON line per match")
    _query_flags(p)
    _engine_flags(p)
    p.add_argument("--out", help="write answers here instead of stdout")

    p = sub.add_parser("bench", help="per-query timing and size CSV")
    _query_flags(p)
    _engine_flags(p, multi=True)
    p.add_argument("--check", action="store_true", help="compare every answer set with brute force")
    p.add_argument("--serial", action="store_true", help="run queries on one thread")
    p.add_argument("--out", help="CSV path (default stdout)")

    p = sub.add_parser("tune-granularity", aliases=["tune"], help="pick the grid level by cost model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--benefit-floor", type=float, default=1.0)
    p.add_argument("--pi1", type=float, default=1.0)
    p.add_argument("--pi2", type=float, default=10.0)
    p.add_argument("--calibrate", action="store_true", help="fit pi1 and pi2 from measured timings")
    p.add_argument("--max-level", type=int, default=DEFAULT_HEIGHT)
    p.add_argument("--out", help="CSV path (default stdout)")
    return ap


def _subparser(ap: argparse.ArgumentParser, cmd: str) -> argparse.ArgumentParser | None:
    return ap._subparsers._group_actions[0].choices.get(cmd)


def parse_args(argv) -> argparse.Namespace:
    ap = make_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    sp = _subparser(ap, rest[0]) if rest else None
    if known.config and sp is not None:
        try:
            cfg = json.loads(Path(known.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            ap.error(f"cannot read config {known.config}: {exc}")
        if not isinstance(cfg, dict):
            ap.error("config file must hold a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = sorted(set(cfg) - {a.dest for a in sp._actions})
        if unknown:
            ap.error(f"unknown config keys for {rest[0]}: {', '.join(unknown)}")
        # config values become defaults, so explicit flags still win
        for a in sp._actions:
            if a.dest in cfg:
                a.required = False
        sp.set_defaults(**cfg)
    return ap.parse_args(argv)


def _report(path, errors) -> None:
    for lineno, exc in errors:
        print(f"{path}:{lineno}: {exc}", file=sys.stderr)


def _config(args, method: str) -> EngineConfig:
    cfg = EngineConfig(
        method=method,
        granularity=args.granularity,
        buckets=None if args.injective else args.buckets,
        mt=args.mt,
        height=args.height,
    )
    cfg.validate()
    return cfg


def _load_corpus(path):
    try:
        corpus, errors = load_corpus(path)
    except OSError as exc:
        raise DataError(f"cannot read corpus {path}: {exc.strerror}") from None
    _report(path, errors)
    return corpus, bool(errors)


def _load_queries(path, corpus, tau_r=None, tau_t=None) -> tuple[list[tuple[int, Query]], bool]:
    out, bad = [], False
    try:
        for lineno, rec in read_jsonl(path, parse_query_line):
            if isinstance(rec, DataError):
                _report(path, [(lineno, rec)])
                bad = True
                continue
            try:
                q = corpus.query(
                    rec["region"],
                    rec["tokens"],
                    rec["tau_r"] if tau_r is None else tau_r,
                    rec["tau_t"] if tau_t is None else tau_t,
                )
            except DataError as exc:
                _report(path, [(lineno, exc)])
                bad = True
                continue
            qid = rec["id"] if isinstance(rec["id"], int) else lineno
            out.append((qid, q))
    except OSError as exc:
        raise DataError(f"cannot read queries {path}: {exc.strerror}") from None
    return out, bad


def _engine(args, corpus, method: str) -> Engine:
    cfg = _config(args, method)
    if not args.index:
        return Engine(corpus, cfg)
    try:
        index = storage.load(args.index)
    except OSError as exc:
        raise DataError(f"cannot read index {args.index}: {exc.strerror}") from None
    except storage.IndexFormatError as exc:
        raise DataError(f"{args.index}: {exc}") from None
    if index.fingerprint != storage.corpus_fingerprint(corpus):
        raise ConfigError(f"index {args.index} was built from a different corpus")
    return Engine(corpus, cfg, index)


def _open_out(path):
    return open(path, "w", encoding="utf-8", newline="") if path else sys.stdout


def cmd_gen(args) -> int:
    params = SynthParams(
        min_side=args.min_side,
        max_side=args.max_side,
        vocab=args.vocab,
        zipf_s=args.zipf,
        mean_tokens=args.mean_tokens,
    )
    try:
        records = gen_synthetic(args.n, params, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    write_corpus(records, args.out)
    return EXIT_OK


def cmd_gen_queries(args) -> int:
    corpus, bad = _load_corpus(args.corpus)
    records = [(o.id, o.region, sorted(corpus.table.token(t) for t in o.tokens)) for o in corpus.objects]
    try:
        qs = gen_queries(records, args.count, args.mode, args.seed, args.tau_r, args.tau_t)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    write_queries(qs, args.out)
    return EXIT_DATA if bad else EXIT_OK


def cmd_build(args) -> int:
    corpus, bad = _load_corpus(args.corpus)
    cfg = _config(args, args.method)
    index = build_index(corpus, cfg)
    if index is None:
        raise ConfigError(f"method {args.method!r} has no index to build")
    storage.save(index, args.out)
    return EXIT_DATA if bad else EXIT_OK


def cmd_query(args) -> int:
    corpus, bad = _load_corpus(args.corpus)
    queries, qbad = _load_queries(args.queries, corpus, args.tau_r, args.tau_t)
    engine = _engine(args, corpus, args.method)
    fh = _open_out(args.out)
    try:
        for qid, q in queries:
            answers, _ = engine.search(q)
            for m in answers:
                fh.write(json.dumps({"query": qid, "id": m.id, "sim_r": m.sim_r, "sim_t": m.sim_t}) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_DATA if bad or qbad else EXIT_OK


def cmd_bench(args) -> int:
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    if not methods:
        raise ConfigError("no method given")
    if args.index and len(methods) > 1:
        raise ConfigError("--index can serve only one method")
    corpus, bad = _load_corpus(args.corpus)
    queries, qbad = _load_queries(args.queries, corpus, args.tau_r, args.tau_t)
    engines = [_engine(args, corpus, m) for m in methods]
    report = run_bench(engines, queries, check=args.check, serial=args.serial)
    fh = _open_out(args.out)
    try:
        fh.write(report.to_csv())
    finally:
        if fh is not sys.stdout:
            fh.close()
    if args.check and report.mismatches:
        print(f"{report.mismatches} queries disagree with brute force", file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_DATA if bad or qbad else EXIT_OK


def cmd_tune(args) -> int:
    corpus, bad = _load_corpus(args.corpus)
    queries, qbad = _load_queries(args.queries, corpus)
    workload = [q for _, q in queries]
    if not workload or not corpus.objects:
        raise DataError("tuning needs a non-empty corpus and workload")
    try:
        model = calibrate(workload, corpus) if args.calibrate else CostModel(args.pi1, args.pi2)
        result = select_granularity(workload, corpus, model, args.benefit_floor, args.max_level)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    fh = _open_out(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("level", "filter_term", "verify_term", "total", "benefit"))
        for level, f, v, total, benefit in result.rows():
            w.writerow((level, f"{f:.6g}", f"{v:.6g}", f"{total:.6g}", "" if benefit is None else f"{benefit:.6g}"))
    finally:
        if fh is not sys.stdout:
            fh.close()
    print(f"level {result.level} (granularity {result.granularity})", file=sys.stderr)
    return EXIT_DATA if bad or qbad else EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "gen-queries": cmd_gen_queries,
    "build": cmd_build,
    "query": cmd_query,
    "bench": cmd_bench,
    "tune-granularity": cmd_tune,
    "tune": cmd_tune,
}


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except ConfigError as exc:
        print(f"roisim: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"roisim: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"roisim: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
