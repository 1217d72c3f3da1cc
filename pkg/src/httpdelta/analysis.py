"""Discrepancy semantics: quirk-aware report agreement, the quirks
probe battery, meaningfulness/durability gates, discrepancy matrices,
and result grouping.

Agreement is deliberately conservative: two reports that parsed the
same requests differently can never be excused by an allowance.  Only
tail differences -- one side accepting requests the other refused --
are excusable, and only when the lenient side holds a recorded
allowance (or the rejecting side holds the 411 allowance).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .personalities import (
    InterpretationReport,
    Personality,
    ReportEntry,
    interpret,
    transduce,
)
from .wire import RequestStream

__all__ = [
    "ALLOWANCE_CATALOG",
    "QuirksRecord",
    "DiscrepancyMatrix",
    "FuzzResult",
    "OriginHandle",
    "TransducerHandle",
    "origin_handle",
    "transducer_handle",
    "implied_allowances",
    "probe_quirks",
    "reports_agree",
    "is_meaningful",
    "is_durable",
    "discrepancy_matrix",
    "group_results",
]


ALLOWANCE_CATALOG = frozenset({
    "accepts-http09",
    "rejects-empty-post-411",
    "accepts-lf-chunk-lines",
    "accepts-bare-cr-header-lines",
    "ignores-underscores-in-ints",
    "radix-infers-leading-zero",
    "accepts-0x-prefix",
    "treats-comma-chunked-distinct",
    "lax-chunk-terminator",
    "concatenates-nul-lf-values",
})

# Every allowance except the 411 one excuses extra acceptance; the 411
# one excuses extra rejection.
_ACCEPTANCE_ALLOWANCES = ALLOWANCE_CATALOG - {"rejects-empty-post-411"}

_ABNORMAL = ("loop-detected", "crash")


@dataclass(frozen=True)
class QuirksRecord:
    target: str
    allowances: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        unknown = self.allowances - ALLOWANCE_CATALOG
        if unknown:
            raise ValueError("unknown allowance codes: %r" % sorted(unknown))

    def to_json(self) -> str:
        return json.dumps({"target": self.target,
                           "allowances": sorted(self.allowances)})

    @classmethod
    def from_json(cls, text: str) -> "QuirksRecord":
        doc = json.loads(text)
        return cls(doc["target"], frozenset(doc["allowances"]))


# ---------------------------------------------------------------------------
# Target handles (in-process or network-backed)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OriginHandle:
    name: str
    run: Callable[[RequestStream], InterpretationReport]


@dataclass(frozen=True)
class TransducerHandle:
    name: str
    # Returns the forwarded stream, or None when the transducer rejects.
    run: Callable[[RequestStream], Optional[RequestStream]]


def origin_handle(p: Personality, recorder_factory=None) -> OriginHandle:
    def run(stream: RequestStream) -> InterpretationReport:
        return interpret(p, stream)
    return OriginHandle(p.name, run)


def transducer_handle(p: Personality) -> TransducerHandle:
    def run(stream: RequestStream) -> Optional[RequestStream]:
        return transduce(p, stream).forwarded
    return TransducerHandle(p.name, run)


# ---------------------------------------------------------------------------
# Implied allowances (constructor-side oracle for the probe)
# ---------------------------------------------------------------------------

def implied_allowances(p: Personality) -> frozenset[str]:
    """The allowance set a personality's quirk flags imply.

    This is the oracle the probe battery is checked against: probing a
    builtin fixture must recover exactly this set.
    """
    q = p.quirks
    out = set()
    if q.http09 == "accept":
        out.add("accepts-http09")
    if q.empty_body_post == "reject-411":
        out.add("rejects-empty-post-411")
    if q.chunk_line_terminator in ("lf-allowed", "accepts-bare-cr"):
        out.add("accepts-lf-chunk-lines")
    if q.header_line_terminator == "accepts-bare-cr":
        out.add("accepts-bare-cr-header-lines")
    if (q.content_length_mode.kind == "underscore-tolerant"
            or q.chunk_size_mode.kind == "underscore-tolerant"):
        out.add("ignores-underscores-in-ints")
    if q.content_length_mode.kind == "strtol-radix-infer":
        out.add("radix-infers-leading-zero")
    if (q.chunk_size_mode.kind == "strtol-radix-infer"
            or (q.chunk_size_mode.kind == "strtol-explicit-radix"
                and q.chunk_size_mode.radix == 16)):
        out.add("accepts-0x-prefix")
    if q.transfer_coding_list == "literal-match":
        out.add("treats-comma-chunked-distinct")
    if q.chunk_terminator_laxity == "crlf-plus-any-two-bytes":
        out.add("lax-chunk-terminator")
    if q.nul_or_lf_in_value == "concatenate-to-previous":
        out.add("concatenates-nul-lf-values")
    return frozenset(out)


# ---------------------------------------------------------------------------
# Probe battery
# ---------------------------------------------------------------------------

def _any_entry(report: InterpretationReport,
               pred: Callable[[ReportEntry], bool]) -> bool:
    return any(pred(e) for e in report.entries)


def _probe_http09(r: InterpretationReport) -> bool:
    return _any_entry(r, lambda e: e.version == b"")


def _probe_411(r: InterpretationReport) -> bool:
    return r.rejection is not None and r.rejection.status == 411


def _probe_lf_chunk(r: InterpretationReport) -> bool:
    return _any_entry(r, lambda e: e.body == b"Z")


def _probe_bare_cr_header(r: InterpretationReport) -> bool:
    return _any_entry(
        r, lambda e: any(n == b"X-Probe" for n, _ in e.headers))


def _probe_underscore_cl(r: InterpretationReport) -> bool:
    return _any_entry(r, lambda e: len(e.body) == 10)


def _probe_underscore_chunk(r: InterpretationReport) -> bool:
    return _any_entry(r, lambda e: e.body == b"AB")


def _probe_leading_zero(r: InterpretationReport) -> bool:
    return bool(r.entries) and len(r.entries[0].body) == 8


def _probe_0x(r: InterpretationReport) -> bool:
    return _any_entry(r, lambda e: e.body == b"AB")


def _probe_comma_chunked(r: InterpretationReport) -> bool:
    # Strict-list personalities decode the chunked body ("AB"); a
    # literal matcher sees no framing at all.
    return not _any_entry(r, lambda e: e.body == b"AB")


def _probe_lax_terminator(r: InterpretationReport) -> bool:
    return _any_entry(r, lambda e: e.uri == b"/probe9")


def _probe_nul_concat(r: InterpretationReport) -> bool:
    return _any_entry(
        r, lambda e: any(b"\x00" in v for _, v in e.headers))


# Each battery item: (allowance code, probe stream, classifier).  An
# allowance is granted when ANY of its probes classifies positive.
_BATTERY: list[tuple[str, bytes, Callable[[InterpretationReport], bool]]] = [
    ("accepts-http09",
     b"GET /\r\n\r\n",
     _probe_http09),
    ("rejects-empty-post-411",
     b"POST / HTTP/1.1\r\nHost: a\r\n\r\n",
     _probe_411),
    ("accepts-lf-chunk-lines",
     b"POST / HTTP/1.1\r\nTransfer-Encoding: chunked\r\n\r\n"
     b"1\nZ\r\n0\r\n\r\n",
     _probe_lf_chunk),
    ("accepts-bare-cr-header-lines",
     b"GET / HTTP/1.1\r\nHost: a\rX-Probe: 1\r\n\r\n",
     _probe_bare_cr_header),
    ("ignores-underscores-in-ints",
     b"GET / HTTP/1.1\r\nContent-Length: 1_0\r\n\r\nAAAAAAAAAA",
     _probe_underscore_cl),
    ("ignores-underscores-in-ints",
     b"POST / HTTP/1.1\r\nTransfer-Encoding: chunked\r\n\r\n"
     b"0_2\r\nAB\r\n0\r\n\r\n",
     _probe_underscore_chunk),
    ("radix-infers-leading-zero",
     b"GET / HTTP/1.1\r\nContent-Length: 010\r\n\r\nABCDEFGHIJ",
     _probe_leading_zero),
    ("accepts-0x-prefix",
     b"POST / HTTP/1.1\r\nTransfer-Encoding: chunked\r\n\r\n"
     b"0x2\r\nAB\r\n0\r\n\r\n",
     _probe_0x),
    ("treats-comma-chunked-distinct",
     b"POST / HTTP/1.1\r\nTransfer-Encoding: ,chunked\r\n\r\n"
     b"2\r\nAB\r\n0\r\n\r\n",
     _probe_comma_chunked),
    ("lax-chunk-terminator",
     b"POST / HTTP/1.1\r\nTransfer-Encoding: chunked\r\n\r\n"
     b"0\r\nx:GET /probe9 HTTP/1.1\r\n\r\n",
     _probe_lax_terminator),
    ("concatenates-nul-lf-values",
     b"GET / HTTP/1.1\r\nA: b\r\nC: d\x00e\r\n\r\n",
     _probe_nul_concat),
]


def probe_quirks(target: OriginHandle) -> QuirksRecord:
    """Run the diagnostic battery and record observed allowances."""
    allowances = set()
    for code, payload, classify in _BATTERY:
        if code in allowances:
            continue
        report = target.run(RequestStream.of(payload))
        if classify(report):
            allowances.add(code)
    return QuirksRecord(target.name, frozenset(allowances))


# ---------------------------------------------------------------------------
# Agreement
# ---------------------------------------------------------------------------

def _canonical(e: ReportEntry) -> tuple:
    return (e.method, e.uri, e.version,
            tuple((n.lower(), v) for n, v in e.headers), e.body)


def reports_agree(a: InterpretationReport, b: InterpretationReport,
                  qa: QuirksRecord, qb: QuirksRecord) -> bool:
    """Quirk-aware report comparison.

    Entry-vs-entry differences are never excusable.  Tail differences
    (one side accepted requests the other refused) are excused by a
    recorded allowance on the lenient side, or by the 411 allowance on
    the rejecting side.  Abnormal terminations (busy loop, crash) only
    agree with the same abnormal termination.
    """
    if a.termination in _ABNORMAL or b.termination in _ABNORMAL:
        if a.termination != b.termination:
            return False
    ea = [_canonical(e) for e in a.entries]
    eb = [_canonical(e) for e in b.entries]
    n = min(len(ea), len(eb))
    if ea[:n] != eb[:n]:
        return False
    if len(ea) == len(eb):
        # Identical acted-on requests; any remaining difference concerns
        # bytes neither side acted on (a rejection counts as agreeing
        # with a rejection regardless of status code).
        return True
    long_r, long_q = (a, qa) if len(ea) > len(eb) else (b, qb)
    short_r, short_q = (b, qb) if len(ea) > len(eb) else (a, qa)
    rej = short_r.rejection
    if (rej is not None and rej.status == 411
            and "rejects-empty-post-411" in short_q.allowances
            and long_r.entries[n].body == b""):
        return True
    if long_q.allowances & _ACCEPTANCE_ALLOWANCES:
        return True
    return False


def is_meaningful(reports: dict[str, InterpretationReport],
                  quirks: dict[str, QuirksRecord]) -> bool:
    """True iff some origin pair disagrees after allowance excusal."""
    names = list(reports)
    if len(names) < 2:
        raise ValueError("meaningfulness needs at least two origin reports")
    for i, x in enumerate(names):
        for y in names[i + 1:]:
            if not reports_agree(reports[x], reports[y],
                                 quirks[x], quirks[y]):
                return True
    return False


def is_durable(stream: RequestStream,
               transducers: Iterable[TransducerHandle],
               origins: Iterable[OriginHandle],
               quirks: dict[str, QuirksRecord]) -> tuple[bool, str | None]:
    """Whether the discrepancy survives at least one transducer.

    Returns (durable, witness-name); transducer rejections and
    failures count as non-witnesses.
    """
    origins = list(origins)
    for t in transducers:
        try:
            forwarded = t.run(stream)
        except Exception:
            continue
        if forwarded is None:
            continue
        reports = {o.name: o.run(forwarded) for o in origins}
        if is_meaningful(reports, quirks):
            return True, t.name
    return False, None


# ---------------------------------------------------------------------------
# Matrices and grouping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscrepancyMatrix:
    origins: tuple[str, ...]
    bits: tuple[tuple[bool, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.origins)
        if len(self.bits) != n or any(len(row) != n for row in self.bits):
            raise ValueError("matrix shape mismatch")
        for i in range(n):
            if self.bits[i][i]:
                raise ValueError("diagonal must be zero")
            for j in range(n):
                if self.bits[i][j] != self.bits[j][i]:
                    raise ValueError("matrix must be symmetric")

    @property
    def n(self) -> int:
        return len(self.origins)

    def set_bit_count(self) -> int:
        return sum(1 for row in self.bits for b in row if b)

    def row_major(self) -> str:
        return "".join("1" if b else "0" for row in self.bits for b in row)

    @classmethod
    def from_row_major(cls, origins: tuple[str, ...],
                       bits: str) -> "DiscrepancyMatrix":
        n = len(origins)
        if len(bits) != n * n or set(bits) - {"0", "1"}:
            raise ValueError("bad row-major bit string")
        rows = tuple(tuple(bits[i * n + j] == "1" for j in range(n))
                     for i in range(n))
        return cls(origins, rows)


def discrepancy_matrix(reports: dict[str, InterpretationReport],
                       quirks: dict[str, QuirksRecord],
                       order: tuple[str, ...] | None = None) -> DiscrepancyMatrix:
    names = tuple(order) if order is not None else tuple(reports)
    n = len(names)
    rows = [[False] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            disagree = not reports_agree(
                reports[names[i]], reports[names[j]],
                quirks[names[i]], quirks[names[j]])
            rows[i][j] = rows[j][i] = disagree
    return DiscrepancyMatrix(names, tuple(tuple(r) for r in rows))


@dataclass(frozen=True)
class FuzzResult:
    input: RequestStream
    matrix: DiscrepancyMatrix
    reports: dict[str, InterpretationReport] = field(compare=False, hash=False,
                                                     default_factory=dict)
    witness: str = ""
    group_key: str = ""

    def __post_init__(self) -> None:
        if self.matrix.set_bit_count() == 0:
            raise ValueError("a fuzz result must have a set matrix bit")
        if not self.witness:
            raise ValueError("a fuzz result must carry a durability witness")


def group_results(results: list[FuzzResult]) -> list[list[FuzzResult]]:
    """Partition by exact matrix equality; groups ordered by descending
    set-bit count, then first-seen order."""
    groups: dict[str, list[FuzzResult]] = {}
    first_seen: dict[str, int] = {}
    for idx, r in enumerate(results):
        key = r.matrix.row_major()
        if key not in groups:
            groups[key] = []
            first_seen[key] = idx
        groups[key].append(r)
    ordered = sorted(
        groups.items(),
        key=lambda kv: (-kv[1][0].matrix.set_bit_count(), first_seen[kv[0]]))
    return [members for _, members in ordered]
