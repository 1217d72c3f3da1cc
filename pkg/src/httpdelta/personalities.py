"""Parameterized origin/transducer interpreters ("personalities").

A personality is a bundle of quirk flags that selects one concrete
parsing behavior per axis of real-world divergence: framing-integer
semantics, line-terminator tolerance, chunk terminator laxity,
transfer-coding list handling, and so on.  The builtin registry ships
fixtures that reproduce documented server behaviors (octal
Content-Length inference, bare-CR chunk lines, lax chunked-body
terminators, NUL/LF header concatenation, unguarded negative
Content-Length busy loops) without running the servers themselves.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .wire import (
    CRLF,
    DIGITS,
    RFC_DECIMAL,
    RFC_HEX,
    STRTOL_INFER,
    TCHAR,
    IntMode,
    RequestStream,
    longest_prefix,
    parse_framing_integer,
    strtol_radix,
    underscore_tolerant,
)

__all__ = [
    "QuirkSet",
    "ORACLE_QUIRKS",
    "Personality",
    "ReportEntry",
    "Rejection",
    "InterpretationReport",
    "TransductionResult",
    "interpret",
    "transduce",
    "builtin_registry",
    "registry_from_config",
    "RegistryError",
]


# ---------------------------------------------------------------------------
# Quirk flags
# ---------------------------------------------------------------------------

HEADER_TERMINATORS = ("crlf-or-lf", "crlf-only", "accepts-bare-cr")
CHUNK_TERMINATORS = ("crlf-only", "lf-allowed", "accepts-bare-cr")
CHUNK_END_LAXITY = ("strict", "crlf-plus-any-two-bytes")
TE_LIST_MODES = ("rfc-ignore-empty-elements", "literal-match")
EMPTY_BODY_POST = ("accept", "reject-411")
HTTP09 = ("accept", "reject")
NEGATIVE_CL_GUARD = ("guarded", "rewind-unguarded")
NUL_LF_VALUE = ("reject", "concatenate-to-previous")

REWRITE_TOGGLES = frozenset({
    "normalize-leading-zero-cl",
    "strip-chunk-extensions",
    "strip-cr-before-semicolon",
    "forward-invalid-chunk-size",
    "forward-trailer-fields",
    "add-space-after-trailer-colon",
    "reject-bare-cr-in-ows",
})


@dataclass(frozen=True)
class QuirkSet:
    """One value per parsing-behavior axis.

    The defaults are the RFC-recipient oracle: strict framing integers,
    LF recognized as a line terminator with a preceding CR ignored (the
    RFCs permit recipients to do this), everything else rejected.
    """

    content_length_mode: IntMode = RFC_DECIMAL
    chunk_size_mode: IntMode = RFC_HEX
    header_line_terminator: str = "crlf-or-lf"
    chunk_line_terminator: str = "crlf-only"
    chunk_terminator_laxity: str = "strict"
    transfer_coding_list: str = "rfc-ignore-empty-elements"
    empty_body_post: str = "accept"
    http09: str = "reject"
    negative_cl_guard: str = "guarded"
    nul_or_lf_in_value: str = "reject"

    def __post_init__(self) -> None:
        checks = (
            (self.header_line_terminator, HEADER_TERMINATORS),
            (self.chunk_line_terminator, CHUNK_TERMINATORS),
            (self.chunk_terminator_laxity, CHUNK_END_LAXITY),
            (self.transfer_coding_list, TE_LIST_MODES),
            (self.empty_body_post, EMPTY_BODY_POST),
            (self.http09, HTTP09),
            (self.negative_cl_guard, NEGATIVE_CL_GUARD),
            (self.nul_or_lf_in_value, NUL_LF_VALUE),
        )
        for value, domain in checks:
            if value not in domain:
                raise ValueError("bad quirk value %r (expected one of %r)"
                                 % (value, domain))


ORACLE_QUIRKS = QuirkSet()


@dataclass(frozen=True)
class Personality:
    """A named origin or transducer behavior.

    ``rewrites`` apply to transducers only; ``passthrough`` marks the
    identity transducer (bytes forwarded untouched); ``unpipeline``
    makes a transducer emit one stream element per forwarded request.
    ``poison`` is an optional crash predicate: when it matches the raw
    input, interpretation terminates with a crash marker.
    """

    name: str
    kind: str  # "origin" | "transducer"
    quirks: QuirkSet = ORACLE_QUIRKS
    rewrites: frozenset[str] = frozenset()
    passthrough: bool = False
    unpipeline: bool = False
    poison: Optional[Callable[[bytes], bool]] = None
    notes: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("origin", "transducer"):
            raise ValueError("kind must be origin or transducer")
        unknown = self.rewrites - REWRITE_TOGGLES
        if unknown:
            raise ValueError("unknown rewrite toggles: %r" % sorted(unknown))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportEntry:
    method: bytes
    uri: bytes
    version: bytes
    headers: tuple[tuple[bytes, bytes], ...]
    body: bytes
    # Which framing produced the body; informational, excluded from
    # report comparison.
    framing: str = "none"


@dataclass(frozen=True)
class Rejection:
    status: int
    offset: int

    @property
    def status_class(self) -> int:
        return self.status // 100


@dataclass(frozen=True)
class InterpretationReport:
    entries: tuple[ReportEntry, ...] = ()
    rejection: Rejection | None = None
    termination: str = "clean"  # clean | timeout | loop-detected | crash
    decode_errors: tuple[str, ...] = ()


@dataclass(frozen=True)
class TransductionResult:
    forwarded: RequestStream | None
    rejected_offset: int | None = None

    @property
    def rejected(self) -> bool:
        return self.forwarded is None


# ---------------------------------------------------------------------------
# Coverage hook
# ---------------------------------------------------------------------------

# Stable instrumentation sites for the in-process edge recorder.
_S_START = 1
_S_REQUEST_LINE = 2
_S_HTTP09 = 3
_S_HEADER = 4
_S_HEADERS_DONE = 5
_S_FRAMING_NONE = 6
_S_FRAMING_CL = 7
_S_FRAMING_CHUNKED = 8
_S_CHUNK = 9
_S_CHUNK_TERMINAL = 10
_S_TRAILER = 11
_S_ENTRY = 12
_S_REJECT = 13
_S_INCOMPLETE = 14
_S_METHOD_TOKEN = 15
_S_CL_VALUE = 16


class _Trace:
    """Per-interpretation edge tracer; no-op when no recorder given."""

    __slots__ = ("recorder", "prev")

    def __init__(self, recorder):
        self.recorder = recorder
        self.prev = _S_START

    def hit(self, site: int, token: bytes = b"") -> None:
        if self.recorder is None:
            return
        if token:
            site = (site << 16) ^ (zlib.crc32(token) & 0xFFFF)
        self.recorder.record_edge(self.prev, site)
        self.prev = site


# ---------------------------------------------------------------------------
# Quirk-parameterized parsing
# ---------------------------------------------------------------------------

class _Reject(Exception):
    def __init__(self, offset: int, status: int = 400):
        self.offset = offset
        self.status = status


class _Incomplete(Exception):
    pass


def _read_line(data: bytes, pos: int, mode: str) -> tuple[bytes, int]:
    """Read one line under a terminator quirk; returns (content, new_pos)."""
    if mode == "crlf-or-lf":
        idx = data.find(b"\n", pos)
        if idx < 0:
            raise _Incomplete()
        content = data[pos:idx]
        if content.endswith(b"\r"):
            content = content[:-1]
        return content, idx + 1
    if mode == "crlf-only":
        idx = data.find(CRLF, pos)
        if idx < 0:
            raise _Incomplete()
        content = data[pos:idx]
        lf = content.find(b"\n")
        if lf >= 0:
            raise _Reject(pos + lf)
        return content, idx + 2
    if mode in ("lf-allowed", "accepts-bare-cr"):
        cr = data.find(b"\r", pos)
        lf = data.find(b"\n", pos)
        if mode == "lf-allowed" or cr < 0 or (0 <= lf < cr):
            if lf < 0:
                raise _Incomplete()
            content = data[pos:lf]
            if content.endswith(b"\r"):
                content = content[:-1]
            return content, lf + 1
        # accepts-bare-cr: a run of CRs ends the line; a directly
        # following LF is folded into the terminator.
        content = data[pos:cr]
        end = cr
        while end < len(data) and data[end] == 0x0D:
            end += 1
        if end < len(data) and data[end] == 0x0A:
            end += 1
        return content, end
    raise AssertionError(mode)


def _split_ows(value: bytes) -> bytes:
    return value.strip(b" \t")


@dataclass
class _ChunkView:
    line_content: bytes
    size_end: int  # offset in line_content where the extension begins
    value: int
    data: bytes

    @property
    def size_field(self) -> bytes:
        return self.line_content[:self.size_end]

    @property
    def extension(self) -> bytes:
        return self.line_content[self.size_end:]


@dataclass
class _RequestView:
    start: int
    end: int
    method: bytes = b""
    uri: bytes = b""
    version: bytes = b""
    headers: list[list[bytes]] = field(default_factory=list)
    framing: str = "none"
    cl_raw: bytes | None = None
    cl_value: int | None = None
    body: bytes = b""
    chunks: list[_ChunkView] = field(default_factory=list)
    trailer_lines: list[bytes] = field(default_factory=list)
    http09: bool = False

    def entry(self) -> ReportEntry:
        return ReportEntry(
            method=self.method, uri=self.uri, version=self.version,
            headers=tuple((n, v) for n, v in self.headers),
            body=self.body, framing=self.framing)


_FULL_MATCH_MODES = ("rfc-strict-decimal", "rfc-strict-hex", "underscore-tolerant")


def _size_alphabet(mode: IntMode) -> frozenset[int]:
    if mode.kind == "underscore-tolerant":
        return frozenset(b"0123456789abcdefABCDEF_")
    return frozenset(b"0123456789abcdefABCDEF")


def _parse_chunk_size(content: bytes, mode: IntMode, base: int) -> tuple[int, int]:
    """Interpret a chunk size line prefix; returns (value, size_end)."""
    if mode.kind in _FULL_MATCH_MODES:
        alphabet = _size_alphabet(mode)
        split = 0
        while split < len(content) and content[split] in alphabet:
            split += 1
        parsed = parse_framing_integer(content[:split], mode)
        if not parsed.valid:
            raise _Reject(base)
        return parsed.value or 0, split
    parsed = parse_framing_integer(content, mode)
    if not parsed.valid or (parsed.value or 0) < 0:
        raise _Reject(base)
    return parsed.value or 0, parsed.consumed


def _parse_chunked(data: bytes, pos: int, q: QuirkSet, view: _RequestView,
                   trace: _Trace) -> int:
    parts: list[bytes] = []
    while True:
        if len(view.chunks) > 256:
            raise _Reject(pos)
        base = pos
        content, pos = _read_line(data, pos, q.chunk_line_terminator)
        value, size_end = _parse_chunk_size(content, q.chunk_size_mode, base)
        trace.hit(_S_CHUNK)
        if value == 0:
            view.chunks.append(_ChunkView(content, size_end, 0, b""))
            trace.hit(_S_CHUNK_TERMINAL)
            if q.chunk_terminator_laxity == "crlf-plus-any-two-bytes":
                # Any two bytes are taken as the body terminator.
                if pos + 2 > len(data):
                    raise _Incomplete()
                pos += 2
            else:
                while True:
                    tbase = pos
                    tcontent, pos = _read_line(data, pos, q.header_line_terminator)
                    if tcontent == b"":
                        break
                    colon = tcontent.find(b":")
                    if colon <= 0 or any(c not in TCHAR for c in tcontent[:colon]):
                        raise _Reject(tbase)
                    view.trailer_lines.append(tcontent)
                    trace.hit(_S_TRAILER)
            view.body = b"".join(parts)
            return pos
        if pos + value > len(data):
            raise _Incomplete()
        chunk_data = data[pos:pos + value]
        pos += value
        # Per-chunk data terminator: CRLF, or a lone LF (recipients may
        # recognize LF line endings); bare-CR personalities also accept
        # their CR-run terminator here.
        if data[pos:pos + 2] == CRLF:
            pos += 2
        elif data[pos:pos + 1] == b"\n":
            pos += 1
        elif q.chunk_line_terminator == "accepts-bare-cr" and data[pos:pos + 1] == b"\r":
            while pos < len(data) and data[pos] == 0x0D:
                pos += 1
            if pos < len(data) and data[pos] == 0x0A:
                pos += 1
        elif pos >= len(data):
            raise _Incomplete()
        else:
            raise _Reject(pos)
        view.chunks.append(_ChunkView(content, size_end, value, chunk_data))
        parts.append(chunk_data)


def _effective_te(values: list[bytes], q: QuirkSet, base: int) -> bool:
    """Whether the Transfer-Encoding headers select chunked framing."""
    if q.transfer_coding_list == "literal-match":
        return len(values) == 1 and values[0] == b"chunked"
    elements = []
    for v in values:
        for item in v.split(b","):
            item = _split_ows(item)
            if item:
                elements.append(item.lower())
    if not elements:
        return False
    if elements == [b"chunked"]:
        return True
    raise _Reject(base, 501)


def _parse_one_request(data: bytes, pos: int, q: QuirkSet,
                       trace: _Trace) -> _RequestView:
    start = pos
    # Tolerate empty line(s) before the request line, as recipients may.
    content = b""
    while True:
        content, pos = _read_line(data, pos, q.header_line_terminator)
        if content != b"":
            break
        if pos >= len(data):
            raise _Incomplete()

    view = _RequestView(start=start, end=pos)
    parts = content.split(b" ")
    if (len(parts) == 2 and q.http09 == "accept"
            and parts[0] and all(c in TCHAR for c in parts[0]) and parts[1]):
        view.method, view.uri = parts
        view.version = b""
        view.http09 = True
        view.end = pos
        trace.hit(_S_HTTP09)
        return view
    if len(parts) != 3 or b"" in parts:
        raise _Reject(start)
    method, uri, version = parts
    if any(c not in TCHAR for c in method) or not version.startswith(b"HTTP/"):
        raise _Reject(start)
    view.method, view.uri, view.version = method, uri, version
    trace.hit(_S_REQUEST_LINE)
    trace.hit(_S_METHOD_TOKEN, method)

    cl_raws: list[bytes] = []
    te_raws: list[bytes] = []
    while True:
        base = pos
        content, pos = _read_line(data, pos, q.header_line_terminator)
        if content == b"":
            break
        if len(view.headers) >= 64:
            raise _Reject(base, 431)
        if (q.nul_or_lf_in_value == "concatenate-to-previous"
                and (b"\x00" in content or b"\n" in content)):
            # The whole offending line is folded into the previous
            # header's value; framing headers keep their original value
            # because it was interpreted before the fold.
            if not view.headers:
                raise _Reject(base)
            view.headers[-1][1] = view.headers[-1][1] + content
            continue
        colon = content.find(b":")
        if colon <= 0 or any(c not in TCHAR for c in content[:colon]):
            raise _Reject(base)
        name = content[:colon]
        value = _split_ows(content[colon + 1:])
        if b"\x00" in value or b"\n" in value:
            raise _Reject(base)
        if b"\r" in value and q.header_line_terminator == "crlf-or-lf":
            # The oracle refuses bare CR inside a field value; the
            # crlf-only personalities carry it through verbatim.
            raise _Reject(base)
        lowered = name.lower()
        if lowered == b"content-length":
            cl_raws.append(value)
        elif lowered == b"transfer-encoding":
            te_raws.append(value)
        view.headers.append([name, value])
        trace.hit(_S_HEADER, lowered)
    trace.hit(_S_HEADERS_DONE)

    headers_end = pos
    chunked = bool(te_raws) and _effective_te(te_raws, q, headers_end)
    if chunked and cl_raws:
        raise _Reject(headers_end)
    if chunked:
        view.framing = "chunked"
        trace.hit(_S_FRAMING_CHUNKED)
        pos = _parse_chunked(data, pos, q, view, trace)
    elif cl_raws:
        if len(set(cl_raws)) != 1:
            raise _Reject(headers_end)
        view.cl_raw = cl_raws[0]
        parsed = parse_framing_integer(view.cl_raw, q.content_length_mode)
        if not parsed.valid:
            raise _Reject(headers_end)
        value = parsed.value or 0
        trace.hit(_S_CL_VALUE, b"%d" % min(value, 64))
        if value < 0 and q.negative_cl_guard == "guarded":
            raise _Reject(headers_end)
        view.framing = "content-length"
        view.cl_value = value
        if value >= 0:
            if pos + value > len(data):
                raise _Incomplete()
            view.body = data[pos:pos + value]
            pos += value
        else:
            # Unguarded negative length: the buffer-discard arithmetic
            # skips the read head back before the message start, so the
            # same request is re-read forever.
            pos = start + value
        trace.hit(_S_FRAMING_CL)
    else:
        if view.method == b"POST" and q.empty_body_post == "reject-411":
            raise _Reject(headers_end, 411)
        trace.hit(_S_FRAMING_NONE)
    view.end = pos
    return view


def _parse_stream(p: Personality, stream: RequestStream, trace: _Trace,
                  collect: list[_RequestView]) -> InterpretationReport:
    data = stream.data
    if p.poison is not None and p.poison(data):
        return InterpretationReport(termination="crash")
    q = p.quirks
    entries: list[ReportEntry] = []
    pos = 0
    budget = 4 * len(data) + 16
    steps = 0
    while pos < len(data):
        steps += 1
        if steps > budget:
            return InterpretationReport(tuple(entries), termination="loop-detected")
        try:
            view = _parse_one_request(data, pos, q, trace)
        except _Incomplete:
            trace.hit(_S_INCOMPLETE)
            return InterpretationReport(tuple(entries), termination="timeout")
        except _Reject as r:
            trace.hit(_S_REJECT, b"%d" % r.status)
            return InterpretationReport(
                tuple(entries), rejection=Rejection(r.status, r.offset))
        if view.end <= pos:
            # The read position failed to advance: the interpreter would
            # re-read (part of) the same bytes forever.  The triggering
            # request produces no entry; the server never finishes it.
            return InterpretationReport(tuple(entries), termination="loop-detected")
        entries.append(view.entry())
        collect.append(view)
        trace.hit(_S_ENTRY)
        if view.http09:
            # HTTP/0.9 has no framing: respond and close the connection.
            break
        pos = view.end
    return InterpretationReport(tuple(entries))


def interpret(p: Personality, stream: RequestStream,
              recorder=None) -> InterpretationReport:
    """Deterministically interpret a request stream under p's quirks.

    Works for both kinds of personality: for a transducer this is its
    parse-side view of the stream, which the quirks probe relies on.
    """
    trace = _Trace(recorder)
    return _parse_stream(p, stream, trace, [])


# ---------------------------------------------------------------------------
# Transduction
# ---------------------------------------------------------------------------

def _rewrite_extension(ext: bytes, rewrites: frozenset[str], offset: int) -> bytes:
    semi = ext.find(b";")
    pre = ext[:semi] if semi >= 0 else ext
    if "reject-bare-cr-in-ows" in rewrites and b"\r" in pre:
        raise _Reject(offset + pre.find(b"\r"))
    if "strip-chunk-extensions" in rewrites:
        if semi < 0:
            return ext
        # Strip the extension and the optional whitespace before the
        # ';' -- but only SP/TAB, so CR bytes in that position survive.
        keep = ext[:semi].rstrip(b" \t") if semi > 0 else b""
        return keep
    if "strip-cr-before-semicolon" in rewrites and semi >= 0:
        return pre.replace(b"\r", b"") + ext[semi:]
    return ext


def _forward_request(view: _RequestView, rewrites: frozenset[str],
                     q: QuirkSet) -> bytes:
    out: list[bytes] = []
    if view.http09:
        return view.method + b" " + view.uri + CRLF
    out.append(view.method + b" " + view.uri + b" " + view.version + CRLF)
    for name, value in view.headers:
        if ("normalize-leading-zero-cl" in rewrites
                and name.lower() == b"content-length" and view.cl_value is not None
                and view.cl_value >= 0):
            value = b"%d" % view.cl_value
        out.append(name + b": " + value + CRLF)
    out.append(CRLF)
    if view.framing == "chunked":
        for chunk in view.chunks:
            ext = _rewrite_extension(chunk.extension, rewrites, view.start)
            if ("forward-invalid-chunk-size" in rewrites
                    or _is_canonical_size(chunk.size_field, chunk.value, q)):
                size_field = chunk.size_field
            else:
                size_field = b"%x" % chunk.value
            out.append(size_field + ext + CRLF)
            if chunk.value != 0:
                out.append(chunk.data + CRLF)
        if "forward-trailer-fields" in rewrites:
            for line in view.trailer_lines:
                if "add-space-after-trailer-colon" in rewrites:
                    colon = line.find(b":")
                    if colon >= 0 and line[colon + 1:colon + 2] != b" ":
                        line = line[:colon + 1] + b" " + line[colon + 1:]
                out.append(line + CRLF)
        out.append(CRLF)
    elif view.framing == "content-length":
        out.append(view.body)
    return b"".join(out)


def _is_canonical_size(size_field: bytes, value: int, q: QuirkSet) -> bool:
    parsed = parse_framing_integer(size_field, RFC_HEX)
    return parsed.valid and parsed.value == value


def transduce(p: Personality, stream: RequestStream) -> TransductionResult:
    """Parse under p's quirks, apply its rewrites, and re-emit the
    forwarded request stream (or reject at the first fatal byte)."""
    if p.kind != "transducer":
        raise ValueError("transduce requires a transducer personality")
    if p.passthrough:
        return TransductionResult(stream)
    trace = _Trace(None)
    views: list[_RequestView] = []
    report = _parse_stream(p, stream, trace, views)
    if report.rejection is not None:
        return TransductionResult(None, rejected_offset=report.rejection.offset)
    if report.termination in ("loop-detected", "crash"):
        return TransductionResult(None, rejected_offset=0)
    try:
        forwarded = [_forward_request(v, p.rewrites, p.quirks) for v in views]
    except _Reject as r:
        return TransductionResult(None, rejected_offset=r.offset)
    if not forwarded or not any(forwarded):
        return TransductionResult(None, rejected_offset=0)
    if p.unpipeline:
        return TransductionResult(RequestStream(tuple(forwarded)))
    return TransductionResult(RequestStream.of(b"".join(forwarded)))


# ---------------------------------------------------------------------------
# Builtin registry
# ---------------------------------------------------------------------------

def builtin_registry() -> list[Personality]:
    """Fixtures modeled on documented real-server behaviors."""
    origins = [
        Personality(
            "rfc-oracle", "origin",
            notes="RFC recipient baseline: strict integers, LF line endings "
                  "recognized, everything optional rejected."),
        Personality(
            "litespeed-like", "origin",
            QuirkSet(content_length_mode=STRTOL_INFER),
            notes="Content-Length via strtol radix inference: a leading 0 "
                  "selects octal."),
        Personality(
            "python-int-like", "origin",
            QuirkSet(content_length_mode=underscore_tolerant(10),
                     chunk_size_mode=underscore_tolerant(16)),
            notes="Framing integers via Python int(): digit-separating "
                  "underscores accepted."),
        Personality(
            "node-like", "origin",
            QuirkSet(chunk_line_terminator="accepts-bare-cr"),
            notes="Chunk lines may be terminated by bare CR."),
        Personality(
            "puma-like", "origin",
            QuirkSet(chunk_terminator_laxity="crlf-plus-any-two-bytes"),
            notes="Chunked bodies terminated by the final CRLF plus any "
                  "two bytes; trailer fields swallowed as those bytes."),
        Personality(
            "mongoose-like", "origin",
            QuirkSet(content_length_mode=STRTOL_INFER,
                     negative_cl_guard="rewind-unguarded",
                     transfer_coding_list="literal-match"),
            notes="Unvalidated negative Content-Length rewinds the read "
                  "head; ',chunked' treated as distinct from 'chunked'."),
        Personality(
            "stdlib-cr-like", "origin",
            QuirkSet(header_line_terminator="accepts-bare-cr"),
            notes="Bare CR accepted as a header line terminator, splitting "
                  "one wire line into several parsed headers."),
        Personality(
            "libevent-like", "origin",
            QuirkSet(chunk_size_mode=strtol_radix(16)),
            notes="Chunk sizes via strtol with explicit radix 16, which "
                  "silently accepts 0x prefixes."),
        Personality(
            "gunicorn-like", "origin",
            QuirkSet(content_length_mode=underscore_tolerant(10),
                     chunk_size_mode=underscore_tolerant(16),
                     transfer_coding_list="literal-match"),
            notes="Underscore-tolerant integers plus literal "
                  "Transfer-Encoding matching (',chunked' is not chunked)."),
        Personality(
            "oldstyle-like", "origin",
            QuirkSet(http09="accept", chunk_line_terminator="lf-allowed"),
            notes="Accepts HTTP/0.9 request lines and LF-only chunk lines."),
        Personality(
            "strict-411-like", "origin",
            QuirkSet(empty_body_post="reject-411"),
            notes="Rejects POST requests without framing headers with 411."),
    ]
    transducers = [
        Personality(
            "identity", "transducer", passthrough=True,
            notes="Forwards every byte untouched, element boundaries "
                  "included."),
        Personality(
            "unpipeliner", "transducer", unpipeline=True,
            rewrites=frozenset({"forward-trailer-fields"}),
            notes="Strict parse, one forwarded element per request "
                  "(un-pipelines concatenated requests)."),
        Personality(
            "ats-like", "transducer",
            QuirkSet(chunk_size_mode=longest_prefix(16)),
            rewrites=frozenset({"forward-invalid-chunk-size",
                                "forward-trailer-fields"}),
            notes="Invalid chunk sizes read as their longest valid prefix "
                  "but forwarded verbatim; trailer fields forwarded; "
                  "leading-zero Content-Length not normalized."),
        Personality(
            "haproxy-like", "transducer",
            rewrites=frozenset({"normalize-leading-zero-cl",
                                "forward-trailer-fields"}),
            notes="Normalizes leading zeros out of Content-Length values."),
        Personality(
            "relayd-like", "transducer",
            QuirkSet(header_line_terminator="crlf-only",
                     nul_or_lf_in_value="concatenate-to-previous"),
            rewrites=frozenset({"forward-trailer-fields"}),
            notes="Header values containing NUL or bare LF are folded into "
                  "the previous header's value after framing validation."),
        Personality(
            "google-mitigation-like", "transducer",
            QuirkSet(header_line_terminator="crlf-only"),
            rewrites=frozenset({"strip-chunk-extensions",
                                "forward-trailer-fields"}),
            notes="Strips chunk extensions and preceding SP/TAB, but CR "
                  "bytes directly after a chunk size survive; bare CR in "
                  "header values forwarded verbatim."),
        Personality(
            "akamai-mitigation-like", "transducer",
            rewrites=frozenset({"reject-bare-cr-in-ows",
                                "forward-trailer-fields"}),
            notes="Rejects CR in the whitespace before a chunk-extension "
                  "';' but not after it."),
    ]
    return origins + transducers


class RegistryError(ValueError):
    pass


_INT_MODE_FACTORIES = {
    "rfc-strict-decimal": lambda r: RFC_DECIMAL,
    "rfc-strict-hex": lambda r: RFC_HEX,
    "strtol-radix-infer": lambda r: STRTOL_INFER,
    "strtol-explicit-radix": strtol_radix,
    "underscore-tolerant": underscore_tolerant,
    "longest-valid-prefix": longest_prefix,
}


def _int_mode_from_config(spec) -> IntMode:
    if isinstance(spec, str):
        name, radix = spec, None
    elif isinstance(spec, dict):
        name, radix = spec.get("kind"), spec.get("radix")
    else:
        raise RegistryError("bad integer mode spec: %r" % (spec,))
    factory = _INT_MODE_FACTORIES.get(name)
    if factory is None:
        raise RegistryError("unknown integer mode %r" % name)
    try:
        return factory(radix)
    except (TypeError, ValueError) as exc:
        raise RegistryError(str(exc)) from exc


def registry_from_config(doc: dict) -> list[Personality]:
    """Build personalities from a configuration document.

    Shape: {"personalities": [{"name": ..., "kind": ...,
    "quirks": {flag: value, ...}, "rewrites": [...],
    "passthrough": bool, "unpipeline": bool}, ...]}.  Unknown keys are
    rejected so config typos fail loudly.
    """
    out = []
    entries = doc.get("personalities")
    if not isinstance(entries, list):
        raise RegistryError("config needs a 'personalities' list")
    for item in entries:
        allowed = {"name", "kind", "quirks", "rewrites", "passthrough",
                   "unpipeline", "notes"}
        unknown = set(item) - allowed
        if unknown:
            raise RegistryError("unknown personality keys: %r" % sorted(unknown))
        quirk_args = dict(item.get("quirks", {}))
        for key in ("content_length_mode", "chunk_size_mode"):
            if key in quirk_args:
                quirk_args[key] = _int_mode_from_config(quirk_args[key])
        try:
            quirks = QuirkSet(**quirk_args)
            personality = Personality(
                name=item["name"], kind=item["kind"], quirks=quirks,
                rewrites=frozenset(item.get("rewrites", ())),
                passthrough=bool(item.get("passthrough", False)),
                unpipeline=bool(item.get("unpipeline", False)),
                notes=item.get("notes", ""))
        except (KeyError, TypeError, ValueError) as exc:
            raise RegistryError(str(exc)) from exc
        out.append(personality)
    names = [p.name for p in out]
    if len(set(names)) != len(names):
        raise RegistryError("duplicate personality names")
    return out


def registry_by_name(personalities: list[Personality]) -> dict[str, Personality]:
    return {p.name: p for p in personalities}
