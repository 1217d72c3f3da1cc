"""The generation-based fuzzing loop.

Children are produced from a parent queue via the three mutation
classes, evaluated against every configured origin (reports plus
per-target coverage signatures), gated through meaningfulness and then
durability, and persisted as JSONL.  Inputs that cause any meaningful
discrepancy are never enqueued as parents; non-discrepancy inputs are
enqueued only when their signature tuple is novel.

With in-process personalities the whole loop is deterministic for a
given configuration.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .analysis import (
    DiscrepancyMatrix,
    FuzzResult,
    OriginHandle,
    QuirksRecord,
    TransducerHandle,
    discrepancy_matrix,
    is_durable,
    is_meaningful,
    probe_quirks,
    transducer_handle,
)
from .coverage import CoverageMap, DeltaState, UNTRACED_SIGNATURE, path_signature
from .mutation import DEFAULT_WEIGHTS, MutationRecord, Rng, mutate
from .personalities import (
    InterpretationReport,
    Personality,
    builtin_registry,
    interpret,
    registry_by_name,
)
from .wire import RequestStream

__all__ = [
    "FuzzConfig",
    "ConfigError",
    "CorpusEntry",
    "Evaluation",
    "DEFAULT_SEEDS",
    "default_seed_corpus",
    "resolve_targets",
    "select_parents",
    "run_fuzz",
    "run_fuzz_detailed",
    "FuzzRunDetail",
    "report_digest",
    "persist_results",
    "load_results",
    "PersistError",
    "validate_results",
]


class ConfigError(ValueError):
    pass


_CONFIG_KEYS = {
    "seed_corpus_path", "generations", "generation_size", "rng_seed",
    "mutation_weights", "origins", "transducers", "traced_targets",
    "read_timeout_ms", "output_path",
}


@dataclass(frozen=True)
class FuzzConfig:
    origins: tuple[str, ...]
    transducers: tuple[str, ...]
    generations: int = 10
    generation_size: int = 50
    rng_seed: int = 0
    mutation_weights: tuple[int, int, int] = DEFAULT_WEIGHTS
    seed_corpus_path: Optional[str] = None
    traced_targets: Optional[tuple[str, ...]] = None
    read_timeout_ms: int = 100
    output_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.generations < 1 or self.generation_size < 1:
            raise ConfigError("generations and generation_size must be >= 1")
        if len(self.origins) < 2:
            raise ConfigError("need at least two origins")
        if len(self.transducers) < 1:
            raise ConfigError("need at least one transducer")
        if len(self.mutation_weights) != 3 or min(self.mutation_weights) < 0 \
                or sum(self.mutation_weights) == 0:
            raise ConfigError("mutation_weights must be three non-negative "
                              "integers with a positive sum")

    @classmethod
    def from_dict(cls, doc: dict) -> "FuzzConfig":
        unknown = set(doc) - _CONFIG_KEYS
        if unknown:
            raise ConfigError("unknown config keys: %r" % sorted(unknown))
        if "origins" not in doc or "transducers" not in doc:
            raise ConfigError("config requires 'origins' and 'transducers'")
        kwargs = dict(doc)
        kwargs["origins"] = tuple(doc["origins"])
        kwargs["transducers"] = tuple(doc["transducers"])
        if "mutation_weights" in doc:
            kwargs["mutation_weights"] = tuple(doc["mutation_weights"])
        if "traced_targets" in doc:
            kwargs["traced_targets"] = tuple(doc["traced_targets"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path: str) -> "FuzzConfig":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        return cls.from_dict(doc)


DEFAULT_SEEDS: tuple[RequestStream, ...] = (
    RequestStream.of(b"GET / HTTP/1.1\r\nHost: a\r\n\r\n"),
    RequestStream.of(b"POST / HTTP/1.1\r\nHost: a\r\nContent-Length: 10\r\n\r\n"
                     b"helloworld"),
    RequestStream.of(b"POST / HTTP/1.1\r\nHost: a\r\n"
                     b"Transfer-Encoding: chunked\r\n\r\n"
                     b"5\r\nhello\r\n0\r\n\r\n"),
    RequestStream.of(b"GET /a HTTP/1.1\r\nHost: a\r\n\r\n"
                     b"GET /b HTTP/1.1\r\nHost: a\r\n\r\n"),
    RequestStream((b"GET /k1 HTTP/1.1\r\nHost: a\r\n\r\n",
                   b"GET /k2 HTTP/1.1\r\nHost: a\r\n\r\n")),
    RequestStream.of(b"HEAD / HTTP/1.1\r\nHost: a\r\n\r\n"),
)


def default_seed_corpus() -> list[RequestStream]:
    return list(DEFAULT_SEEDS)


def load_seed_corpus(path: str) -> list[RequestStream]:
    """Seed file: JSONL, each line an array of Base64 elements."""
    seeds = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            elements = tuple(base64.b64decode(e) for e in json.loads(line))
            seeds.append(RequestStream(elements))
    if not seeds:
        raise ConfigError("seed corpus at %s is empty" % path)
    return seeds


@dataclass
class CorpusEntry:
    ident: int
    stream: RequestStream
    # "seed" or (parent ident, mutation record)
    provenance: object


@dataclass
class Evaluation:
    entry: CorpusEntry
    signatures: tuple[int, ...]
    meaningful: bool


def resolve_targets(cfg: FuzzConfig,
                    personalities: Optional[list[Personality]] = None
                    ) -> tuple[list[Personality], list[TransducerHandle]]:
    registry = registry_by_name(personalities if personalities is not None
                                else builtin_registry())
    origins = []
    for name in cfg.origins:
        if name not in registry:
            raise ConfigError("unknown origin personality %r" % name)
        origins.append(registry[name])
    transducers = []
    for name in cfg.transducers:
        p = registry.get(name)
        if p is None or p.kind != "transducer":
            raise ConfigError("unknown transducer personality %r" % name)
        transducers.append(transducer_handle(p))
    return origins, transducers


def select_parents(evaluations: list[Evaluation],
                   state: DeltaState) -> list[CorpusEntry]:
    """Queue admission: novel signature tuple AND no discrepancy, in
    evaluation order.  Novelty is recorded for every evaluation, even
    discrepancy-causing ones, so their variants stop looking novel."""
    queue = []
    for ev in evaluations:
        novel = state.observe(ev.signatures)
        if novel and not ev.meaningful:
            queue.append(ev.entry)
    return queue


def _evaluate(stream: RequestStream, origins: list[Personality],
              traced: set[str], quirks: dict[str, QuirksRecord]
              ) -> tuple[dict[str, InterpretationReport], tuple[int, ...], bool]:
    reports: dict[str, InterpretationReport] = {}
    signatures: list[int] = []
    for p in origins:
        if p.name in traced:
            recorder = CoverageMap()  # cleared by construction
            reports[p.name] = interpret(p, stream, recorder=recorder)
            signatures.append(path_signature(recorder))
        else:
            reports[p.name] = interpret(p, stream)
            signatures.append(UNTRACED_SIGNATURE)
    return reports, tuple(signatures), is_meaningful(reports, quirks)


@dataclass
class FuzzRunDetail:
    """Full run record: results plus every evaluation (with provenance)
    and the final parent queue, for auditing queue hygiene."""

    results: list[FuzzResult]
    evaluations: list[Evaluation]
    queue: list[CorpusEntry]


def run_fuzz(cfg: FuzzConfig,
             personalities: Optional[list[Personality]] = None
             ) -> list[FuzzResult]:
    return run_fuzz_detailed(cfg, personalities).results


def run_fuzz_detailed(cfg: FuzzConfig,
                      personalities: Optional[list[Personality]] = None
                      ) -> FuzzRunDetail:
    origins, transducers = resolve_targets(cfg, personalities)
    origin_names = tuple(p.name for p in origins)
    origin_handles = [
        OriginHandle(p.name, (lambda pp: lambda s: interpret(pp, s))(p))
        for p in origins]
    quirks = {p.name: probe_quirks(h)
              for p, h in zip(origins, origin_handles)}
    traced = set(cfg.traced_targets if cfg.traced_targets is not None
                 else origin_names)

    seeds = (load_seed_corpus(cfg.seed_corpus_path)
             if cfg.seed_corpus_path else default_seed_corpus())
    rng = Rng(cfg.rng_seed)
    state = DeltaState(origin_names)
    results: list[FuzzResult] = []
    sink = _ResultSink(cfg.output_path)

    next_id = 0
    corpus: list[CorpusEntry] = []
    seed_entries = []
    for s in seeds:
        seed_entries.append(CorpusEntry(next_id, s, "seed"))
        next_id += 1

    def handle(entry: CorpusEntry) -> Evaluation:
        nonlocal results
        reports, signatures, meaningful = _evaluate(
            entry.stream, origins, traced, quirks)
        if meaningful:
            durable, witness = is_durable(entry.stream, transducers,
                                          origin_handles, quirks)
            if durable:
                matrix = discrepancy_matrix(reports, quirks, origin_names)
                result = FuzzResult(entry.stream, matrix, reports,
                                    witness, matrix.row_major())
                results.append(result)
                sink.write(result)
        return Evaluation(entry, signatures, meaningful)

    all_evaluations: list[Evaluation] = []
    seed_evals = [handle(e) for e in seed_entries]
    all_evaluations.extend(seed_evals)
    queue = select_parents(seed_evals, state)
    if not queue:
        # Degenerate seed set (all meaningful); keep fuzzing anyway.
        queue = seed_entries
    corpus.extend(queue)

    for _generation in range(cfg.generations):
        evaluations = []
        corpus_streams = [e.stream for e in corpus] or seeds
        for _ in range(cfg.generation_size):
            parent = queue[rng.randrange(len(queue))]
            child_stream, record = mutate(parent.stream, rng,
                                          cfg.mutation_weights,
                                          corpus_streams)
            entry = CorpusEntry(next_id, child_stream,
                                (parent.ident, record))
            next_id += 1
            evaluations.append(handle(entry))
        all_evaluations.extend(evaluations)
        admitted = select_parents(evaluations, state)
        queue.extend(admitted)
        corpus.extend(admitted)

    sink.close()
    return FuzzRunDetail(results, all_evaluations, queue)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

class PersistError(ValueError):
    pass


def report_digest(report: InterpretationReport) -> str:
    """Stable digest of a report's observable content."""
    h = hashlib.blake2b(digest_size=16)
    for e in report.entries:
        for part in (e.method, e.uri, e.version, e.body):
            h.update(b"%d:" % len(part) + part)
        for n, v in e.headers:
            h.update(b"%d:" % len(n) + n + b"%d:" % len(v) + v)
        h.update(b"|")
    if report.rejection is not None:
        h.update(b"rej:%d:%d" % (report.rejection.status,
                                 report.rejection.offset))
    h.update(report.termination.encode("ascii"))
    return h.hexdigest()


def _result_line(r: FuzzResult) -> str:
    doc = {
        "input": [base64.b64encode(e).decode("ascii")
                  for e in r.input.elements],
        "origins": list(r.matrix.origins),
        "matrix": r.matrix.row_major(),
        "witness": r.witness,
        "group_key": r.group_key,
        "reports": {name: report_digest(rep)
                    for name, rep in r.reports.items()},
    }
    return json.dumps(doc, sort_keys=True)


class _ResultSink:
    """Incremental JSONL writer; absent path means in-memory only."""

    def __init__(self, path: Optional[str]):
        self._fh = open(path, "w", encoding="utf-8") if path else None

    def write(self, r: FuzzResult) -> None:
        if self._fh is not None:
            self._fh.write(_result_line(r) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()


def persist_results(results: list[FuzzResult], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in results:
            fh.write(_result_line(r) + "\n")


@dataclass(frozen=True)
class PersistedResult:
    input: RequestStream
    matrix: DiscrepancyMatrix
    witness: str
    group_key: str
    report_digests: dict[str, str] = field(compare=False)


def load_results(path: str) -> list[PersistedResult]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                stream = RequestStream(tuple(
                    base64.b64decode(e) for e in doc["input"]))
                matrix = DiscrepancyMatrix.from_row_major(
                    tuple(doc["origins"]), doc["matrix"])
                out.append(PersistedResult(
                    stream, matrix, doc["witness"], doc["group_key"],
                    dict(doc["reports"])))
            except (ValueError, KeyError, TypeError) as exc:
                raise PersistError("malformed result at line %d: %s"
                                   % (lineno, exc)) from exc
    return out


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationIssue:
    line: int
    message: str


def validate_results(path: str,
                     personalities: Optional[list[Personality]] = None,
                     transducer_names: Optional[list[str]] = None
                     ) -> list[ValidationIssue]:
    """Re-evaluate every persisted result: it must still be meaningful,
    durable with some witness, and match its recorded matrix and
    report digests."""
    registry = registry_by_name(personalities if personalities is not None
                                else builtin_registry())
    issues: list[ValidationIssue] = []
    results = load_results(path)
    for lineno, r in enumerate(results, 1):
        try:
            origins = [registry[name] for name in r.matrix.origins]
        except KeyError as exc:
            issues.append(ValidationIssue(lineno, "unknown origin %s" % exc))
            continue
        handles = [OriginHandle(p.name,
                                (lambda pp: lambda s: interpret(pp, s))(p))
                   for p in origins]
        quirks = {h.name: probe_quirks(h) for h in handles}
        reports = {h.name: h.run(r.input) for h in handles}
        matrix = discrepancy_matrix(reports, quirks, r.matrix.origins)
        if matrix != r.matrix:
            issues.append(ValidationIssue(
                lineno, "matrix mismatch: recorded %s, recomputed %s"
                % (r.matrix.row_major(), matrix.row_major())))
        if not is_meaningful(reports, quirks):
            issues.append(ValidationIssue(lineno, "result is not meaningful"))
        t_names = (transducer_names if transducer_names is not None
                   else [p.name for p in registry.values()
                         if p.kind == "transducer"])
        transducers = [transducer_handle(registry[n]) for n in t_names
                       if n in registry]
        durable, _witness = is_durable(r.input, transducers, handles, quirks)
        if not durable:
            issues.append(ValidationIssue(lineno, "result is not durable"))
        for name, digest in r.report_digests.items():
            if name in reports and report_digest(reports[name]) != digest:
                issues.append(ValidationIssue(
                    lineno, "report digest mismatch for %s" % name))
    return issues
