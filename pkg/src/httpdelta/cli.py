"""Command-line entry point: probe, fuzz, validate, replay, repl."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from .analysis import (
    discrepancy_matrix,
    group_results,
    origin_handle,
    probe_quirks,
)
from .fuzzer import (
    ConfigError,
    FuzzConfig,
    load_results,
    run_fuzz,
    validate_results,
)
from .personalities import (
    Personality,
    builtin_registry,
    interpret,
    registry_by_name,
    registry_from_config,
)
from .repl import Session, escape_bytes, run_repl

__all__ = ["main"]


def _load_registry(path: Optional[str]) -> list[Personality]:
    if path is None:
        return builtin_registry()
    with open(path, "r", encoding="utf-8") as fh:
        return registry_from_config(json.load(fh))


def _cmd_probe(args) -> int:
    registry = _load_registry(args.personalities)
    targets = args.targets or [p.name for p in registry]
    by_name = registry_by_name(registry)
    records = {}
    for name in targets:
        if name not in by_name:
            print("unknown personality %r" % name, file=sys.stderr)
            return 2
        rec = probe_quirks(origin_handle(by_name[name]))
        records[name] = sorted(rec.allowances)
    text = json.dumps(records, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_fuzz(args) -> int:
    try:
        cfg = FuzzConfig.from_file(args.config)
        if args.output:
            cfg = FuzzConfig.from_dict(
                {**json.load(open(args.config)), "output_path": args.output})
        registry = _load_registry(args.personalities)
        results = run_fuzz(cfg, registry)
    except (ConfigError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    groups = group_results(results)
    print("%d durable results in %d groups" % (len(results), len(groups)))
    for i, g in enumerate(groups):
        m = g[0].matrix
        print("#%d size=%d bits=%d matrix=%s witness=%s"
              % (i + 1, len(g), m.set_bit_count(), m.row_major(),
                 g[0].witness))
        print("   input: \"%s\"" % escape_bytes(g[0].input.data[:120]))
    return 0


def _cmd_validate(args) -> int:
    try:
        registry = _load_registry(args.personalities)
        issues = validate_results(args.results, registry,
                                  args.transducers or None)
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    if issues:
        for issue in issues:
            print("line %d: %s" % (issue.line, issue.message))
        print("%d issue(s)" % len(issues))
        return 1
    print("all persisted results are meaningful and durable")
    return 0


def _cmd_replay(args) -> int:
    try:
        registry = registry_by_name(_load_registry(args.personalities))
        results = load_results(args.results)
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    if not (1 <= args.index <= len(results)):
        print("result index out of range (1..%d)" % len(results),
              file=sys.stderr)
        return 2
    r = results[args.index - 1]
    names = r.matrix.origins
    quirks = {n: probe_quirks(origin_handle(registry[n])) for n in names}
    reports = {n: interpret(registry[n], r.input) for n in names}
    print("input: \"%s\"" % escape_bytes(r.input.data))
    for n in names:
        rep = reports[n]
        print("== %s ==" % n)
        for i, e in enumerate(rep.entries):
            print("  [%d] %s %s %s body-len=%d"
                  % (i, escape_bytes(e.method), escape_bytes(e.uri),
                     escape_bytes(e.version), len(e.body)))
        if rep.rejection:
            print("  rejection status=%d offset=%d"
                  % (rep.rejection.status, rep.rejection.offset))
        if rep.termination != "clean":
            print("  termination=%s" % rep.termination)
    matrix = discrepancy_matrix(reports, quirks, names)
    print("matrix: %s (persisted: %s)"
          % (matrix.row_major(), r.matrix.row_major()))
    return 0


def _cmd_repl(args) -> int:
    session = Session(registry=registry_by_name(
        _load_registry(args.personalities)))
    if args.load:
        from .repl import eval_command
        session, out = eval_command(session, "load %s" % args.load)
        print(out)
    return run_repl(session)


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="httpdelta",
        description="Differential testing workbench for HTTP/1.1 parsing")
    parser.add_argument("--personalities", metavar="PATH",
                        help="personality registry config (JSON)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probe", help="write quirks records")
    p.add_argument("targets", nargs="*", help="personality names")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("fuzz", help="run the fuzzing loop")
    p.add_argument("--config", required=True, help="FuzzConfig JSON path")
    p.add_argument("--output", help="override result output path")
    p.set_defaults(func=_cmd_fuzz)

    p = sub.add_parser("validate", help="re-check persisted results")
    p.add_argument("results", help="results JSONL path")
    p.add_argument("--transducers", nargs="*",
                   help="transducer names for the durability re-check")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("replay", help="re-send a persisted input")
    p.add_argument("results", help="results JSONL path")
    p.add_argument("index", type=int, help="1-based result index")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("repl", help="interactive session")
    p.add_argument("--load", help="results JSONL to load at startup")
    p.set_defaults(func=_cmd_repl)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
