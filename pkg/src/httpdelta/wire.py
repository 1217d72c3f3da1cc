"""Byte-exact HTTP/1.1 message model and parsers.

Three parsers live here:

* ``parse_strict`` -- an RFC sender-grammar oracle.  It accepts only
  request streams that a conforming sender could have produced (CRLF
  line endings, decimal Content-Length, hex chunk sizes) and reports
  the byte offset of the first fatal violation otherwise.
* ``parse_lenient`` -- never rejects.  It decomposes arbitrary bytes
  into a request-shaped model while preserving every byte, so that
  ``serialize_all(parse_lenient(x)) == x``.  Structured mutations are
  applied to these models and re-serialized.
* ``parse_framing_integer`` -- the framing-integer interpreter,
  parameterized by the integer-parsing behaviors observed in real
  implementations (octal radix inference, digit-separating
  underscores, longest-valid-prefix truncation, ``0x`` prefixes).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

__all__ = [
    "MAX_STREAM_BYTES",
    "MAX_HEADERS",
    "MAX_CHUNKS",
    "MAX_SAFE_INT",
    "RequestStream",
    "IntMode",
    "RFC_DECIMAL",
    "RFC_HEX",
    "STRTOL_INFER",
    "strtol_radix",
    "underscore_tolerant",
    "longest_prefix",
    "IntParse",
    "parse_framing_integer",
    "HeaderLine",
    "ChunkModel",
    "RawBody",
    "ChunkedBody",
    "HttpRequestModel",
    "ParseOutcome",
    "parse_strict",
    "parse_lenient",
    "serialize",
    "serialize_all",
]

MAX_STREAM_BYTES = 64 * 1024
MAX_HEADERS = 64
MAX_CHUNKS = 256
# Values above this are treated as unparseable in every integer mode, so
# results are portable across implementations with 64-bit doubles.
MAX_SAFE_INT = 2**53 - 1

CRLF = b"\r\n"

TCHAR = frozenset(b"!#$%&'*+-.^_`|~0123456789"
                  b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz")
DIGITS = frozenset(b"0123456789")
HEXDIGITS = frozenset(b"0123456789abcdefABCDEF")
_DIGIT_CHARS = b"0123456789abcdefghijklmnopqrstuvwxyz"


# ---------------------------------------------------------------------------
# Request streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RequestStream:
    """An ordered sequence of byte-string elements.

    Each element is written to the connection in full, then responses
    are read until a timeout before the next element is written.  Empty
    elements are allowed (they model pure timing separators), but the
    stream itself is never empty.
    """

    elements: tuple[bytes, ...]

    def __post_init__(self) -> None:
        if not self.elements:
            raise ValueError("request stream must have at least one element")
        if self.total_bytes > MAX_STREAM_BYTES:
            raise ValueError("request stream exceeds %d bytes" % MAX_STREAM_BYTES)

    @property
    def total_bytes(self) -> int:
        return sum(len(e) for e in self.elements)

    @property
    def data(self) -> bytes:
        """All elements concatenated (what a server ultimately reads)."""
        return b"".join(self.elements)

    @classmethod
    def of(cls, *elements: bytes) -> "RequestStream":
        return cls(tuple(elements))


# ---------------------------------------------------------------------------
# Framing integers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntMode:
    """One integer-parsing behavior.

    ``kind`` selects the semantics; ``radix`` applies to the
    parameterized kinds only.
    """

    kind: str
    radix: int | None = None

    KINDS = (
        "rfc-strict-decimal",
        "rfc-strict-hex",
        "strtol-radix-infer",
        "strtol-explicit-radix",
        "underscore-tolerant",
        "longest-valid-prefix",
    )

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError("unknown integer mode %r" % self.kind)
        needs_radix = self.kind in (
            "strtol-explicit-radix", "underscore-tolerant", "longest-valid-prefix")
        if needs_radix and self.radix not in (8, 10, 16):
            raise ValueError("mode %s needs a radix of 8, 10 or 16" % self.kind)
        if not needs_radix and self.radix is not None:
            raise ValueError("mode %s takes no radix" % self.kind)


RFC_DECIMAL = IntMode("rfc-strict-decimal")
RFC_HEX = IntMode("rfc-strict-hex")
STRTOL_INFER = IntMode("strtol-radix-infer")


def strtol_radix(radix: int) -> IntMode:
    return IntMode("strtol-explicit-radix", radix)


def underscore_tolerant(radix: int) -> IntMode:
    return IntMode("underscore-tolerant", radix)


def longest_prefix(radix: int) -> IntMode:
    return IntMode("longest-valid-prefix", radix)


@dataclass(frozen=True)
class IntParse:
    """Result of interpreting a digit string: a value (or None for
    invalid) and the number of bytes the mode recognized."""

    value: int | None
    consumed: int

    @property
    def valid(self) -> bool:
        return self.value is not None


_INVALID = IntParse(None, 0)


def _digit_value(ch: int, radix: int) -> int | None:
    v = _DIGIT_CHARS.find(bytes((ch,)).lower())
    if v < 0 or v >= radix:
        return None
    return v


def _digit_run(data: bytes, start: int, radix: int) -> int:
    """Index one past the last consecutive radix-digit at/after start."""
    i = start
    while i < len(data) and _digit_value(data[i], radix) is not None:
        i += 1
    return i


def _bounded(value: int, consumed: int) -> IntParse:
    if abs(value) > MAX_SAFE_INT:
        return _INVALID
    return IntParse(value, consumed)


def parse_framing_integer(digits: bytes, mode: IntMode) -> IntParse:
    """Interpret ``digits`` under one framing-integer mode.

    The rfc-strict and underscore-tolerant modes require the whole
    string to be well formed; the strtol and longest-valid-prefix modes
    consume the longest recognizable prefix.
    """
    if not digits:
        return _INVALID

    kind = mode.kind
    if kind == "rfc-strict-decimal":
        if all(c in DIGITS for c in digits):
            return _bounded(int(digits, 10), len(digits))
        return _INVALID

    if kind == "rfc-strict-hex":
        if all(c in HEXDIGITS for c in digits):
            return _bounded(int(digits, 16), len(digits))
        return _INVALID

    if kind == "underscore-tolerant":
        # Python-int style: single underscores between digits only.
        radix = mode.radix or 10
        if digits[0:1] == b"_" or digits[-1:] == b"_" or b"__" in digits:
            return _INVALID
        stripped = digits.replace(b"_", b"")
        if not stripped or any(_digit_value(c, radix) is None for c in stripped):
            return _INVALID
        return _bounded(int(stripped, radix), len(digits))

    if kind == "longest-valid-prefix":
        radix = mode.radix or 16
        end = _digit_run(digits, 0, radix)
        if end == 0:
            return _INVALID
        return _bounded(int(digits[:end], radix), end)

    # strtol-family modes: optional sign, optional prefix, longest run.
    sign = 1
    i = 0
    if digits[i:i + 1] in (b"+", b"-"):
        sign = -1 if digits[i:i + 1] == b"-" else 1
        i += 1

    if kind == "strtol-radix-infer":
        has_hex_prefix = (digits[i:i + 2].lower() == b"0x"
                          and len(digits) > i + 2
                          and _digit_value(digits[i + 2], 16) is not None)
        if has_hex_prefix:
            end = _digit_run(digits, i + 2, 16)
            return _bounded(sign * int(digits[i + 2:end], 16), end)
        if digits[i:i + 1] == b"0":
            # Leading zero selects octal; a lone "0x" consumes just the 0.
            end = _digit_run(digits, i, 8)
            return _bounded(sign * int(digits[i:end], 8), end)
        end = _digit_run(digits, i, 10)
        if end == i:
            return _INVALID
        return _bounded(sign * int(digits[i:end], 10), end)

    if kind == "strtol-explicit-radix":
        radix = mode.radix or 10
        if radix == 16 and digits[i:i + 2].lower() == b"0x":
            if len(digits) > i + 2 and _digit_value(digits[i + 2], 16) is not None:
                end = _digit_run(digits, i + 2, 16)
                return _bounded(sign * int(digits[i + 2:end], 16), end)
            # "0x" with no digit after it: strtol consumes only the "0".
            return IntParse(0, i + 1)
        end = _digit_run(digits, i, radix)
        if end == i:
            return _INVALID
        return _bounded(sign * int(digits[i:end], radix), end)

    raise AssertionError("unreachable mode %r" % kind)


# ---------------------------------------------------------------------------
# Message model
# ---------------------------------------------------------------------------

@dataclass
class HeaderLine:
    """One header line, decomposed so the original bytes round-trip.

    ``sep`` holds the colon plus any whitespace that followed it; for a
    colonless line ``sep`` and ``value`` are empty and ``name`` carries
    the whole line.
    """

    name: bytes
    sep: bytes
    value: bytes
    term: bytes

    def raw(self) -> bytes:
        return self.name + self.sep + self.value + self.term


@dataclass
class ChunkModel:
    size_raw: bytes
    size_value: int | None
    extension_raw: bytes
    size_terminator: bytes
    data: bytes
    data_terminator: bytes

    def raw(self) -> bytes:
        return (self.size_raw + self.extension_raw + self.size_terminator
                + self.data + self.data_terminator)


@dataclass
class RawBody:
    data: bytes

    def raw(self) -> bytes:
        return self.data

    @property
    def decoded(self) -> bytes:
        return self.data


@dataclass
class ChunkedBody:
    chunks: list[ChunkModel] = field(default_factory=list)
    # Trailer section (and any unframeable residue) verbatim, including
    # the terminating blank line when one was present.
    trailer_raw: bytes = b""

    def raw(self) -> bytes:
        return b"".join(c.raw() for c in self.chunks) + self.trailer_raw

    @property
    def decoded(self) -> bytes:
        return b"".join(c.data for c in self.chunks)


@dataclass
class HttpRequestModel:
    """A request decomposed into byte-preserving components.

    The lenient parser shoves whatever it sees into this shape; the
    strict parser only ever builds strictly-valid instances.  In both
    cases ``serialize`` reproduces the source bytes exactly.
    """

    method: bytes = b""
    method_sep: bytes = b""
    uri: bytes = b""
    uri_sep: bytes = b""
    version: bytes = b""
    request_line_term: bytes = b""
    headers: list[HeaderLine] = field(default_factory=list)
    headers_term: bytes = b""
    body: RawBody | ChunkedBody = field(default_factory=lambda: RawBody(b""))

    @property
    def framing(self) -> str:
        """One of none / content-length / chunked / both, judged from
        the headers actually present."""
        has_cl = any(h.name.lower() == b"content-length" for h in self.headers)
        has_te = isinstance(self.body, ChunkedBody)
        if has_cl and has_te:
            return "both"
        if has_te:
            return "chunked"
        if has_cl:
            return "content-length"
        return "none"

    @property
    def body_bytes(self) -> bytes:
        return self.body.decoded

    def header_values(self, name: bytes) -> list[bytes]:
        lowered = name.lower()
        return [h.value for h in self.headers if h.name.lower() == lowered]

    @property
    def has_request_shape(self) -> bool:
        """True when the start line looks like ``METHOD SP URI``; grammar
        mutation rules that need structure check this first."""
        return (bool(self.method) and all(c in TCHAR for c in self.method)
                and self.method_sep != b"" and bool(self.uri))


def serialize(model: HttpRequestModel) -> bytes:
    """Emit the model byte-exactly, invalid constructs included."""
    out = [model.method, model.method_sep, model.uri, model.uri_sep,
           model.version, model.request_line_term]
    out.extend(h.raw() for h in model.headers)
    out.append(model.headers_term)
    out.append(model.body.raw())
    return b"".join(out)


def serialize_all(models: list[HttpRequestModel]) -> bytes:
    return b"".join(serialize(m) for m in models)


# ---------------------------------------------------------------------------
# Strict parser (RFC sender grammar)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParseOutcome:
    """Outcome of a strict parse.

    Exactly one of the three results applies:

    * ``complete``: the whole input was consumed as valid requests.
    * ``incomplete``: everything seen so far is valid, but the input
      ends mid-request; ``trailing_unconsumed`` holds the partial tail.
    * ``rejected``: a grammar violation at byte ``position`` with a
      stable ``reason`` code.
    """

    result: str  # "complete" | "rejected" | "incomplete"
    requests: tuple[HttpRequestModel, ...] = ()
    trailing_unconsumed: bytes = b""
    position: int = 0
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.result == "complete"


class _Reject(Exception):
    def __init__(self, pos: int, reason: str):
        self.pos = pos
        self.reason = reason


class _Incomplete(Exception):
    pass


class _Cursor:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def eof(self) -> bool:
        return self.pos >= len(self.data)

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise _Incomplete()
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def expect_crlf(self, reason: str) -> None:
        nxt = self.data[self.pos:self.pos + 2]
        if nxt == CRLF:
            self.pos += 2
            return
        if nxt in (b"\r", b"") and self.pos + 2 > len(self.data):
            raise _Incomplete()
        raise _Reject(self.pos, reason)

    def line_to_crlf(self, reason: str) -> bytes:
        idx = self.data.find(CRLF, self.pos)
        if idx < 0:
            raise _Incomplete()
        content = self.data[self.pos:idx]
        if b"\n" in content:
            raise _Reject(self.pos + content.find(b"\n"), reason)
        self.pos = idx + 2
        return content


def _strict_token(cur: _Cursor, content: bytes, base: int, what: str) -> None:
    if not content or any(c not in TCHAR for c in content):
        raise _Reject(base, "bad-" + what)


def _strict_header_block(cur: _Cursor, what: str) -> list[HeaderLine]:
    headers: list[HeaderLine] = []
    while True:
        if cur.data[cur.pos:cur.pos + 2] == CRLF:
            return headers
        if cur.eof() or (cur.data[cur.pos:] == b"\r"):
            raise _Incomplete()
        if len(headers) >= MAX_HEADERS:
            raise _Reject(cur.pos, "too-many-headers")
        base = cur.pos
        content = cur.line_to_crlf("bare-lf-in-" + what)
        colon = content.find(b":")
        if colon < 0:
            raise _Reject(base, "missing-colon-in-" + what)
        name = content[:colon]
        _strict_token(cur, name, base, what + "-name")
        rest = content[colon + 1:]
        ows = 0
        while ows < len(rest) and rest[ows] in (0x20, 0x09):
            ows += 1
        value = rest[ows:]
        sep = b":" + rest[:ows]
        # Field values: printable ASCII, SP, HTAB and obs-text only.
        for off, c in enumerate(value):
            if c in (0x00, 0x0D, 0x0A) or (c < 0x20 and c != 0x09) or c == 0x7F:
                raise _Reject(base + colon + 1 + ows + off, "bad-" + what + "-value")
        headers.append(HeaderLine(name, sep, value, CRLF))


def _strict_framing(headers: list[HeaderLine], base: int) -> tuple[str, int]:
    cl_values = [h.value for h in headers if h.name.lower() == b"content-length"]
    te_values = [h.value for h in headers if h.name.lower() == b"transfer-encoding"]
    if te_values:
        if cl_values:
            raise _Reject(base, "conflicting-framing")
        if len(te_values) != 1 or te_values[0].lower() != b"chunked":
            raise _Reject(base, "bad-transfer-encoding")
        return "chunked", 0
    if cl_values:
        if len(set(cl_values)) != 1:
            raise _Reject(base, "conflicting-content-length")
        parsed = parse_framing_integer(cl_values[0], RFC_DECIMAL)
        if not parsed.valid:
            raise _Reject(base, "bad-content-length")
        return "content-length", parsed.value or 0
    return "none", 0


def _strict_chunk_ext(ext: bytes, base: int) -> None:
    i = 0
    n = len(ext)

    def skip_bws(j: int) -> int:
        while j < n and ext[j] in (0x20, 0x09):
            j += 1
        return j

    while i < n:
        i = skip_bws(i)
        if i >= n:
            raise _Reject(base + i, "bad-chunk-extension")
        if ext[i] != 0x3B:  # ';'
            raise _Reject(base + i, "bad-chunk-extension")
        i = skip_bws(i + 1)
        start = i
        while i < n and ext[i] in TCHAR:
            i += 1
        if i == start:
            raise _Reject(base + i, "bad-chunk-extension")
        i = skip_bws(i)
        if i < n and ext[i] == 0x3D:  # '='
            i = skip_bws(i + 1)
            start = i
            while i < n and ext[i] in TCHAR:
                i += 1
            if i == start:
                raise _Reject(base + i, "bad-chunk-extension")
            i = skip_bws(i)


def _strict_chunked_body(cur: _Cursor) -> ChunkedBody:
    body = ChunkedBody()
    while True:
        if len(body.chunks) >= MAX_CHUNKS:
            raise _Reject(cur.pos, "too-many-chunks")
        base = cur.pos
        content = cur.line_to_crlf("bare-lf-in-chunk-size")
        split = 0
        while split < len(content) and content[split] in HEXDIGITS:
            split += 1
        size_raw, ext = content[:split], content[split:]
        parsed = parse_framing_integer(size_raw, RFC_HEX)
        if not parsed.valid:
            raise _Reject(base, "bad-chunk-size")
        _strict_chunk_ext(ext, base + split)
        if parsed.value == 0:
            trailer_start = cur.pos
            _strict_header_block(cur, "trailer")
            cur.expect_crlf("bad-trailer-terminator")
            body.chunks.append(ChunkModel(size_raw, 0, ext, CRLF, b"", b""))
            body.trailer_raw = cur.data[trailer_start:cur.pos]
            return body
        data = cur.take(parsed.value or 0)
        term_base = cur.pos
        nxt = cur.data[cur.pos:cur.pos + 2]
        if nxt == CRLF:
            cur.pos += 2
        elif len(nxt) < 2:
            raise _Incomplete()
        else:
            raise _Reject(term_base, "bad-chunk-data-terminator")
        body.chunks.append(ChunkModel(size_raw, parsed.value, ext, CRLF, data, CRLF))


def _strict_one_request(cur: _Cursor) -> HttpRequestModel:
    base = cur.pos
    content = cur.line_to_crlf("bare-lf-in-request-line")
    parts = content.split(b" ")
    if len(parts) != 3 or b"" in parts:
        raise _Reject(base, "bad-request-line")
    method, uri, version = parts
    _strict_token(cur, method, base, "method")
    for c in uri:
        if c <= 0x20 or c == 0x7F:
            raise _Reject(base, "bad-uri")
    if not (len(version) == 8 and version[:5] == b"HTTP/"
            and version[5] in DIGITS and version[6:7] == b"." and version[7] in DIGITS):
        raise _Reject(base, "bad-version")
    headers = _strict_header_block(cur, "header")
    framing_base = cur.pos
    cur.expect_crlf("bad-header-terminator")
    framing, length = _strict_framing(headers, framing_base)
    body: RawBody | ChunkedBody
    if framing == "chunked":
        body = _strict_chunked_body(cur)
    elif framing == "content-length":
        body = RawBody(cur.take(length))
    else:
        body = RawBody(b"")
    return HttpRequestModel(
        method=method, method_sep=b" ", uri=uri, uri_sep=b" ", version=version,
        request_line_term=CRLF, headers=headers, headers_term=CRLF, body=body)


def parse_strict(data: bytes) -> ParseOutcome:
    """Strict RFC-grammar parse of a full request stream."""
    if len(data) > MAX_STREAM_BYTES:
        raise ValueError("input exceeds %d bytes" % MAX_STREAM_BYTES)
    cur = _Cursor(data)
    requests: list[HttpRequestModel] = []
    while not cur.eof():
        start = cur.pos
        try:
            requests.append(_strict_one_request(cur))
        except _Incomplete:
            return ParseOutcome(
                "incomplete", tuple(requests),
                trailing_unconsumed=data[start:], position=start)
        except _Reject as r:
            return ParseOutcome(
                "rejected", tuple(requests), trailing_unconsumed=data[start:],
                position=r.pos, reason=r.reason)
    if not requests:
        return ParseOutcome("incomplete", (), trailing_unconsumed=b"")
    return ParseOutcome("complete", tuple(requests))


# ---------------------------------------------------------------------------
# Lenient parser
# ---------------------------------------------------------------------------

def _lenient_line(data: bytes, pos: int) -> tuple[bytes, bytes, int]:
    """(content, terminator, new_pos); terminator may be empty at EOF."""
    idx = data.find(b"\n", pos)
    if idx < 0:
        return data[pos:], b"", len(data)
    if idx > pos and data[idx - 1] == 0x0D:
        return data[pos:idx - 1], b"\r\n", idx + 1
    return data[pos:idx], b"\n", idx + 1


def _lenient_int(value: bytes) -> int:
    digits = value.strip(b" \t")
    end = 0
    while end < len(digits) and digits[end] in DIGITS:
        end += 1
    if end == 0:
        return 0
    return min(int(digits[:end]), MAX_SAFE_INT)


def _lenient_chunked(data: bytes, pos: int) -> tuple[ChunkedBody, int]:
    body = ChunkedBody()
    while pos < len(data) and len(body.chunks) < 1024:
        line_start = pos
        content, term, pos = _lenient_line(data, pos)
        split = 0
        while split < len(content) and content[split] in HEXDIGITS:
            split += 1
        size_raw, ext = content[:split], content[split:]
        if not size_raw or term == b"":
            # Unframeable residue: keep it verbatim and stop.
            body.trailer_raw += data[line_start:]
            return body, len(data)
        size = min(int(size_raw, 16), MAX_SAFE_INT)
        if size == 0:
            body.chunks.append(ChunkModel(size_raw, 0, ext, term, b"", b""))
            # Trailer section: raw lines through the first blank one.
            trailer_start = pos
            while pos < len(data):
                tcontent, tterm, pos = _lenient_line(data, pos)
                if tcontent == b"" or tterm == b"":
                    break
            body.trailer_raw = data[trailer_start:pos]
            return body, pos
        chunk_data = data[pos:pos + size]
        pos += len(chunk_data)
        if data[pos:pos + 2] == CRLF:
            dterm = CRLF
        elif data[pos:pos + 1] == b"\n":
            dterm = b"\n"
        else:
            dterm = b""
        pos += len(dterm)
        body.chunks.append(ChunkModel(size_raw, size, ext, term, chunk_data, dterm))
    if pos < len(data):
        body.trailer_raw += data[pos:]
        pos = len(data)
    return body, pos


def _lenient_one(data: bytes, pos: int) -> tuple[HttpRequestModel, int]:
    model = HttpRequestModel()
    content, term, pos = _lenient_line(data, pos)
    sp1 = content.find(b" ")
    if sp1 < 0:
        model.method = content
    else:
        model.method = content[:sp1]
        run = sp1
        while run < len(content) and content[run] == 0x20:
            run += 1
        model.method_sep = content[sp1:run]
        rest = content[run:]
        sp2 = rest.find(b" ")
        if sp2 < 0:
            model.uri = rest
        else:
            model.uri = rest[:sp2]
            run2 = sp2
            while run2 < len(rest) and rest[run2] == 0x20:
                run2 += 1
            model.uri_sep = rest[sp2:run2]
            model.version = rest[run2:]
    model.request_line_term = term
    if term == b"":
        return model, pos

    while pos < len(data):
        content, term, newpos = _lenient_line(data, pos)
        if content == b"":
            model.headers_term = term
            pos = newpos
            break
        colon = content.find(b":")
        if colon < 0:
            model.headers.append(HeaderLine(content, b"", b"", term))
        else:
            name = content[:colon]
            rest = content[colon + 1:]
            ows = 0
            while ows < len(rest) and rest[ows] in (0x20, 0x09):
                ows += 1
            model.headers.append(
                HeaderLine(name, b":" + rest[:ows], rest[ows:], term))
        pos = newpos
        if term == b"":
            return model, pos
    else:
        return model, pos

    te = [v for v in model.header_values(b"transfer-encoding")]
    cl = model.header_values(b"content-length")
    if any(b"chunked" in v.lower() for v in te):
        body, pos = _lenient_chunked(data, pos)
        model.body = body
    elif cl:
        n = _lenient_int(cl[0])
        model.body = RawBody(data[pos:pos + n])
        pos += len(model.body.data)
    return model, pos


def parse_lenient(data: bytes) -> list[HttpRequestModel]:
    """Decompose arbitrary bytes into request-shaped models without ever
    rejecting; ``serialize_all`` of the result reproduces ``data``."""
    if not data:
        return [HttpRequestModel()]
    models: list[HttpRequestModel] = []
    pos = 0
    while pos < len(data):
        model, pos = _lenient_one(data, pos)
        models.append(model)
    return models


def clone_model(model: HttpRequestModel) -> HttpRequestModel:
    """Deep-enough copy for mutation (headers and chunks are rebuilt)."""
    body: RawBody | ChunkedBody
    if isinstance(model.body, ChunkedBody):
        body = ChunkedBody([replace(c) for c in model.body.chunks],
                           model.body.trailer_raw)
    else:
        body = RawBody(model.body.data)
    return replace(model, headers=[replace(h) for h in model.headers], body=body)
