"""Shared test helpers: an independent RFC sender-grammar checker and
random request-stream generators.

The checker is deliberately implemented from the grammar itself (regex
plus a small driver) rather than by calling into httpdelta.wire, so it
can serve as an oracle for parse_strict.
"""

from __future__ import annotations

import random
import re

MAX_SAFE_INT = 2**53 - 1
MAX_HEADERS = 64
MAX_CHUNKS = 256

_TOK = rb"[!#$%&'*+\-.^_`|~0-9A-Za-z]+"
# Request line: token SP uri SP HTTP/D.D CRLF; uri bytes are anything
# above 0x20 except DEL.
_REQ_LINE = re.compile(
    rb"(" + _TOK + rb")\x20([\x21-\x7e\x80-\xff]+)\x20(HTTP/[0-9]\.[0-9])\r\n")
# Header line: token ":" value CRLF; the value (OWS included) may hold
# HTAB, printable ASCII and obs-text, but no CR/LF/NUL/DEL/controls.
_HDR_LINE = re.compile(
    rb"(" + _TOK + rb"):([\x09\x20-\x7e\x80-\xff]*)\r\n")
# Chunk size line: 1*HEXDIG, then *( BWS ";" BWS token [BWS "=" BWS token] ).
_CHUNK_LINE = re.compile(
    rb"([0-9a-fA-F]+)"
    rb"((?:[ \t]*;[ \t]*" + _TOK + rb"(?:[ \t]*=[ \t]*" + _TOK + rb")?[ \t]*)*)"
    rb"\r\n")
_DECIMAL = re.compile(rb"[0-9]+\Z")


class _Bad(Exception):
    pass


def _check_headers(data: bytes, pos: int) -> tuple[list[tuple[bytes, bytes]], int]:
    headers: list[tuple[bytes, bytes]] = []
    while True:
        if data[pos:pos + 2] == b"\r\n":
            return headers, pos + 2
        if len(headers) >= MAX_HEADERS:
            raise _Bad()
        m = _HDR_LINE.match(data, pos)
        if m is None:
            raise _Bad()
        # Leading OWS is separator; trailing OWS stays in the value (and
        # makes framing values invalid, as a strict reader sees them).
        headers.append((m.group(1).lower(), m.group(2).lstrip(b" \t")))
        pos = m.end()


def _check_one(data: bytes, pos: int) -> int:
    m = _REQ_LINE.match(data, pos)
    if m is None:
        raise _Bad()
    pos = m.end()
    headers, pos = _check_headers(data, pos)
    cl = [v for n, v in headers if n == b"content-length"]
    te = [v for n, v in headers if n == b"transfer-encoding"]
    if te:
        if cl or len(te) != 1 or te[0].lower() != b"chunked":
            raise _Bad()
        chunks = 0
        while True:
            if chunks >= MAX_CHUNKS:
                raise _Bad()
            cm = _CHUNK_LINE.match(data, pos)
            if cm is None:
                raise _Bad()
            size = int(cm.group(1), 16)
            if size > MAX_SAFE_INT:
                raise _Bad()
            pos = cm.end()
            chunks += 1
            if size == 0:
                _trailers, pos = _check_headers(data, pos)
                return pos
            if pos + size + 2 > len(data) or data[pos + size:pos + size + 2] != b"\r\n":
                raise _Bad()
            pos += size + 2
    elif cl:
        if len(set(cl)) != 1 or not _DECIMAL.match(cl[0]):
            raise _Bad()
        length = int(cl[0])
        if length > MAX_SAFE_INT or pos + length > len(data):
            raise _Bad()
        pos += length
    return pos


def independent_strict_accepts(data: bytes) -> bool:
    """True iff ``data`` is a complete, fully consumed sequence of one
    or more requests under the RFC sender grammar."""
    if not data:
        return False
    pos = 0
    try:
        while pos < len(data):
            pos = _check_one(data, pos)
    except _Bad:
        return False
    return True


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

_METHODS = [b"GET", b"POST", b"HEAD", b"PUT", b"DELETE"]
_URIS = [b"/", b"/a", b"/index.html", b"/x?y=1", b"/very/deep/path"]
_HDR_NAMES = [b"Host", b"Accept", b"X-Test", b"User-Agent", b"Cookie"]
_HDR_VALUES = [b"a", b"example.test", b"*/*", b"v;q=0.9", b"k=v"]


def random_valid_request(rnd: random.Random, allow_trailers: bool = True,
                         canonical_only: bool = False) -> bytes:
    """One strictly valid request.

    ``canonical_only`` avoids constructs that are valid on the wire but
    interpreted differently by quirky personalities (trailer fields,
    leading-zero sizes never appear in any case; this flag additionally
    suppresses trailers and POST-without-framing).
    """
    method = rnd.choice(_METHODS)
    out = [method, b" ", rnd.choice(_URIS), b" HTTP/1.1\r\n"]
    for _ in range(rnd.randrange(4)):
        out += [rnd.choice(_HDR_NAMES), b": ", rnd.choice(_HDR_VALUES), b"\r\n"]
    framing = rnd.choice(["none", "cl", "chunked"])
    if canonical_only and method == b"POST" and framing == "none":
        framing = "cl"
    if framing == "cl":
        body = bytes(rnd.randrange(256) for _ in range(rnd.randrange(40)))
        out += [b"Content-Length: %d\r\n\r\n" % len(body), body]
    elif framing == "chunked":
        out.append(b"Transfer-Encoding: chunked\r\n\r\n")
        for _ in range(rnd.randrange(3)):
            data = bytes(rnd.randrange(256) for _ in range(rnd.randrange(1, 20)))
            ext = b";ext=val" if rnd.random() < 0.3 else b""
            out += [b"%x" % len(data), ext, b"\r\n", data, b"\r\n"]
        out.append(b"0\r\n")
        if allow_trailers and not canonical_only and rnd.random() < 0.4:
            out.append(b"X-Trailer: t\r\n")
        out.append(b"\r\n")
    else:
        out.append(b"\r\n")
    return b"".join(out)


def random_valid_stream(rnd: random.Random, **kwargs) -> bytes:
    return b"".join(random_valid_request(rnd, **kwargs)
                    for _ in range(rnd.randint(1, 3)))


_SPECIALS = [b"\r", b"\n", b"\r\n", b"\x00", b"0x", b"_", b"-", b"+", b";",
             b":", b",chunked", b"0", b" ", b"\t", b"\x7f", b"\xff"]


def random_fuzz_input(rnd: random.Random) -> bytes:
    """Near-valid / arbitrary inputs for differential cross-checks."""
    kind = rnd.randrange(4)
    if kind == 0:
        return bytes(rnd.randrange(256) for _ in range(rnd.randrange(80)))
    base = bytearray(random_valid_stream(rnd))
    if kind == 1 and base:
        # byte-level corruption
        for _ in range(rnd.randint(1, 4)):
            op = rnd.randrange(3)
            pos = rnd.randrange(len(base) + (op == 2))
            if op == 0 and base:
                base[pos % len(base)] = rnd.randrange(256)
            elif op == 1 and base:
                del base[pos % len(base)]
            else:
                base[pos:pos] = bytes([rnd.randrange(256)])
    elif kind == 2 and base:
        # splice in dictionary tokens
        for _ in range(rnd.randint(1, 3)):
            pos = rnd.randrange(len(base) + 1)
            base[pos:pos] = rnd.choice(_SPECIALS)
    else:
        # truncation
        base = base[:rnd.randrange(len(base) + 1)]
    return bytes(base)
