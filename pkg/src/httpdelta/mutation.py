"""Byte, stream, and grammar mutations over request streams.

All mutations are driven by a seeded deterministic random source and
emit a replayable MutationRecord: the record stores the contiguous
slice of elements it replaced, so applying it to the parent always
reproduces the child regardless of mutation kind.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .wire import (
    CRLF,
    ChunkModel,
    ChunkedBody,
    HeaderLine,
    HttpRequestModel,
    MAX_STREAM_BYTES,
    RawBody,
    RequestStream,
    clone_model,
    parse_lenient,
    serialize_all,
)

__all__ = [
    "Rng",
    "MutationRecord",
    "ReplayError",
    "apply_record",
    "mutate_bytes",
    "mutate_stream",
    "mutate_grammar",
    "mutate",
    "GRAMMAR_RULES",
    "DEFAULT_WEIGHTS",
]


class Rng:
    """Seeded deterministic random source (thin wrapper so the seed and
    draw count are inspectable)."""

    def __init__(self, seed: int):
        self.seed = seed
        self.draws = 0
        self._r = random.Random(seed)

    def randrange(self, n: int) -> int:
        self.draws += 1
        return self._r.randrange(n)

    def randint(self, a: int, b: int) -> int:
        self.draws += 1
        return self._r.randint(a, b)

    def choice(self, seq: Sequence):
        self.draws += 1
        return seq[self._r.randrange(len(seq))]


# Delimiter-ish bytes drawn 4x as often as an arbitrary byte.
_FAVORED = b"\r\n\x00 \t;:,0123456789x_-"
_ALPHABET = bytes(range(256)) + _FAVORED * 3


@dataclass(frozen=True)
class MutationRecord:
    """Replayable description of one mutation.

    ``old`` is the contiguous slice of parent elements starting at
    ``element_index`` that the mutation replaced; ``new`` is what it
    became.  ``rule`` names the grammar rule or stream-op detail;
    ``offset`` is the byte locus for byte mutations.
    """

    kind: str
    element_index: int
    old: tuple[bytes, ...]
    new: tuple[bytes, ...]
    rule: str = ""
    offset: int = -1


class ReplayError(ValueError):
    pass


def _finalize(elements: list[bytes], changed: int) -> list[bytes]:
    """Enforce RequestStream invariants: non-empty element list and the
    total size cap (oversize children are truncated at the changed
    element)."""
    if not elements:
        elements = [b""]
    total = sum(len(e) for e in elements)
    if total > MAX_STREAM_BYTES:
        overflow = total - MAX_STREAM_BYTES
        idx = min(changed, len(elements) - 1)
        keep = max(len(elements[idx]) - overflow, 0)
        elements[idx] = elements[idx][:keep]
        # If the changed element alone cannot absorb it, trim the tail.
        while sum(len(e) for e in elements) > MAX_STREAM_BYTES:
            elements[-1] = elements[-1][:-1] or elements.pop() or b""
            if not elements:
                elements = [b""]
                break
    return elements


def _build(parent: RequestStream, idx: int, old_len: int,
           new_slice: list[bytes], kind: str, rule: str = "",
           offset: int = -1) -> tuple[RequestStream, MutationRecord]:
    elements = list(parent.elements)
    elements[idx:idx + old_len] = new_slice
    elements = _finalize(elements, idx)
    # Record the slice as it actually ended up (post-truncation) so
    # replay is exact.
    final_new = tuple(elements[idx:idx + len(new_slice)])
    record = MutationRecord(kind=kind, element_index=idx,
                            old=tuple(parent.elements[idx:idx + old_len]),
                            new=final_new, rule=rule, offset=offset)
    return RequestStream(tuple(elements)), record


def apply_record(parent: RequestStream, rec: MutationRecord) -> RequestStream:
    """Re-apply a recorded mutation; exact inverse of the recording."""
    elements = list(parent.elements)
    i = rec.element_index
    if tuple(elements[i:i + len(rec.old)]) != rec.old:
        raise ReplayError("parent does not match record at element %d" % i)
    elements[i:i + len(rec.old)] = list(rec.new)
    if not elements:
        elements = [b""]
    return RequestStream(tuple(elements))


# ---------------------------------------------------------------------------
# Byte mutations
# ---------------------------------------------------------------------------

def _pick_element(s: RequestStream, rng: Rng) -> int:
    # Weight by length so mutations land where the bytes are, but every
    # element (even empty ones) keeps a chance.
    weights = [len(e) + 1 for e in s.elements]
    total = sum(weights)
    roll = rng.randrange(total)
    for i, w in enumerate(weights):
        if roll < w:
            return i
        roll -= w
    return len(weights) - 1


def _rand_bytes(rng: Rng, n: int) -> bytes:
    return bytes(_ALPHABET[rng.randrange(len(_ALPHABET))] for _ in range(n))


def mutate_bytes(s: RequestStream, rng: Rng) -> tuple[RequestStream, MutationRecord]:
    idx = _pick_element(s, rng)
    element = s.elements[idx]
    ops = ["byte-insert"]
    if element:
        ops += ["byte-replace", "byte-delete"]
    op = rng.choice(ops)
    count = rng.randint(1, 4)
    if op == "byte-insert":
        pos = rng.randint(0, len(element))
        new = element[:pos] + _rand_bytes(rng, count) + element[pos:]
    elif op == "byte-replace":
        count = min(count, len(element))
        pos = rng.randint(0, len(element) - count)
        new = element[:pos] + _rand_bytes(rng, count) + element[pos + count:]
    else:
        count = min(count, len(element))
        pos = rng.randint(0, len(element) - count)
        new = element[:pos] + element[pos + count:]
    return _build(s, idx, 1, [new], op, offset=pos)


# ---------------------------------------------------------------------------
# Stream mutations
# ---------------------------------------------------------------------------

def mutate_stream(s: RequestStream, rng: Rng,
                  corpus: Optional[list[RequestStream]] = None
                  ) -> tuple[RequestStream, MutationRecord]:
    ops = ["insert-split", "insert-dup", "insert-empty"]
    if len(s.elements) > 1:
        ops += ["delete", "combine"]
    if corpus:
        ops.append("replace")
    op = rng.choice(ops)
    if op == "insert-split":
        idx = _pick_element(s, rng)
        element = s.elements[idx]
        cut = rng.randint(0, len(element))
        return _build(s, idx, 1, [element[:cut], element[cut:]],
                      "stream-insert", rule=op, offset=cut)
    if op == "insert-dup":
        idx = _pick_element(s, rng)
        element = s.elements[idx]
        return _build(s, idx, 1, [element, element], "stream-insert", rule=op)
    if op == "insert-empty":
        idx = rng.randint(0, len(s.elements))
        return _build(s, idx, 0, [b""], "stream-insert", rule=op)
    if op == "delete":
        idx = rng.randrange(len(s.elements))
        return _build(s, idx, 1, [], "stream-delete", rule=op)
    if op == "combine":
        idx = rng.randrange(len(s.elements) - 1)
        merged = s.elements[idx] + s.elements[idx + 1]
        return _build(s, idx, 2, [merged], "stream-combine", rule=op)
    # replace from corpus
    idx = rng.randrange(len(s.elements))
    donor = rng.choice(corpus)
    replacement = donor.elements[rng.randrange(len(donor.elements))]
    return _build(s, idx, 1, [replacement], "stream-replace", rule=op)


# ---------------------------------------------------------------------------
# Grammar mutations
# ---------------------------------------------------------------------------

_METHOD_POOL = [b"GET", b"POST", b"HEAD", b"PUT", b"DELETE", b"OPTIONS"]
_TERMINATORS = [CRLF, b"\n", b"\r"]
_EXTENSIONS = [b";a=b", b";a", b"\r;x", b" ;y"]


def _cl_headers(model: HttpRequestModel) -> list[HeaderLine]:
    return [h for h in model.headers if h.name.lower() == b"content-length"]


def _te_headers(model: HttpRequestModel) -> list[HeaderLine]:
    return [h for h in model.headers if h.name.lower() == b"transfer-encoding"]


def _rule_swap_method(model: HttpRequestModel, rng: Rng) -> bool:
    if not model.has_request_shape:
        return False
    pool = [m for m in _METHOD_POOL if m != model.method]
    model.method = rng.choice(pool)
    return True


def _rule_toggle_framing(model: HttpRequestModel, rng: Rng) -> bool:
    if not model.has_request_shape or model.headers_term == b"":
        return False
    if isinstance(model.body, ChunkedBody):
        decoded = model.body.decoded
        model.headers = [h for h in model.headers
                         if h.name.lower() not in (b"transfer-encoding",
                                                   b"content-length")]
        model.headers.append(HeaderLine(b"Content-Length", b": ",
                                        b"%d" % len(decoded), CRLF))
        model.body = RawBody(decoded)
    else:
        data = model.body.raw()
        model.headers = [h for h in model.headers
                         if h.name.lower() not in (b"transfer-encoding",
                                                   b"content-length")]
        model.headers.append(HeaderLine(b"Transfer-Encoding", b": ",
                                        b"chunked", CRLF))
        chunks = []
        if data:
            chunks.append(ChunkModel(b"%x" % len(data), len(data), b"",
                                     CRLF, data, CRLF))
        chunks.append(ChunkModel(b"0", 0, b"", CRLF, b"", b""))
        model.body = ChunkedBody(chunks, CRLF)
    return True


def _rule_duplicate_header(model: HttpRequestModel, rng: Rng) -> bool:
    real = [i for i, h in enumerate(model.headers) if h.term != b""]
    if not real:
        return False
    i = rng.choice(real)
    h = model.headers[i]
    model.headers.insert(i + 1, HeaderLine(h.name, h.sep, h.value, h.term))
    return True


def _digit_variants(n: int, rng: Rng, hexa: bool) -> bytes:
    base = (b"%x" if hexa else b"%d") % n
    style = rng.choice(["leading-zero", "underscore", "0x"])
    if style == "leading-zero":
        return b"0" + base
    if style == "underscore":
        if len(base) >= 2:
            cut = rng.randint(1, len(base) - 1)
            return base[:cut] + b"_" + base[cut:]
        return b"0_" + base
    return b"0x" + base


def _rule_set_cl_raw(model: HttpRequestModel, rng: Rng) -> bool:
    cls = _cl_headers(model)
    if not cls or not isinstance(model.body, RawBody):
        return False
    rng.choice(cls).value = _digit_variants(len(model.body.data), rng, False)
    return True


def _rule_set_chunk_size_raw(model: HttpRequestModel, rng: Rng) -> bool:
    if not isinstance(model.body, ChunkedBody) or not model.body.chunks:
        return False
    chunk = rng.choice(model.body.chunks)
    chunk.size_raw = _digit_variants(len(chunk.data), rng, True)
    return True


def _rule_append_chunk_extension(model: HttpRequestModel, rng: Rng) -> bool:
    if not isinstance(model.body, ChunkedBody) or not model.body.chunks:
        return False
    chunk = rng.choice(model.body.chunks)
    chunk.extension_raw = chunk.extension_raw + rng.choice(_EXTENSIONS)
    return True


def _rule_change_line_terminator(model: HttpRequestModel, rng: Rng) -> bool:
    slots: list[tuple[object, str]] = []
    if model.request_line_term:
        slots.append((model, "request_line_term"))
    for h in model.headers:
        if h.term:
            slots.append((h, "term"))
    if model.headers_term:
        slots.append((model, "headers_term"))
    if isinstance(model.body, ChunkedBody):
        for c in model.body.chunks:
            if c.size_terminator:
                slots.append((c, "size_terminator"))
            if c.data_terminator:
                slots.append((c, "data_terminator"))
    if not slots:
        return False
    obj, attr = rng.choice(slots)
    current = getattr(obj, attr)
    setattr(obj, attr, rng.choice([t for t in _TERMINATORS if t != current]))
    return True


def _rule_inject_trailer(model: HttpRequestModel, rng: Rng) -> bool:
    if not isinstance(model.body, ChunkedBody):
        return False
    body = model.body
    line = b"X-Trailer: v" + CRLF
    if body.trailer_raw.endswith(CRLF):
        body.trailer_raw = body.trailer_raw[:-2] + line + CRLF
    else:
        body.trailer_raw = body.trailer_raw + line + CRLF
    return True


def _rule_prepend_comma_te(model: HttpRequestModel, rng: Rng) -> bool:
    tes = [h for h in _te_headers(model) if not h.value.startswith(b",")]
    if not tes:
        return False
    target = rng.choice(tes)
    target.value = b"," + target.value
    return True


GRAMMAR_RULES = {
    "swap-method": _rule_swap_method,
    "toggle-framing": _rule_toggle_framing,
    "duplicate-header": _rule_duplicate_header,
    "set-cl-raw": _rule_set_cl_raw,
    "set-chunk-size-raw": _rule_set_chunk_size_raw,
    "append-chunk-extension": _rule_append_chunk_extension,
    "change-line-terminator": _rule_change_line_terminator,
    "inject-trailer": _rule_inject_trailer,
    "prepend-comma-te": _rule_prepend_comma_te,
}

_RULE_ORDER = list(GRAMMAR_RULES)
_GRAMMAR_RETRIES = 8


def mutate_grammar(s: RequestStream, rng: Rng
                   ) -> tuple[RequestStream, MutationRecord]:
    """Parse an element leniently, apply one structural rule, and
    re-serialize; falls back to a byte mutation when no rule applies."""
    idx = _pick_element(s, rng)
    element = s.elements[idx]
    models = parse_lenient(element)
    for _ in range(_GRAMMAR_RETRIES):
        rule_name = rng.choice(_RULE_ORDER)
        mutated = [clone_model(m) for m in models]
        target = rng.choice(mutated)
        if GRAMMAR_RULES[rule_name](target, rng):
            new = serialize_all(mutated)
            if new != element:
                return _build(s, idx, 1, [new], "grammar", rule=rule_name)
    return mutate_bytes(s, rng)


# ---------------------------------------------------------------------------
# Dispatcher
# ---------------------------------------------------------------------------

DEFAULT_WEIGHTS = (40, 20, 40)  # byte / stream / grammar


def mutate(s: RequestStream, rng: Rng,
           weights: tuple[int, int, int] = DEFAULT_WEIGHTS,
           corpus: Optional[list[RequestStream]] = None
           ) -> tuple[RequestStream, MutationRecord]:
    wb, ws, wg = weights
    roll = rng.randrange(wb + ws + wg)
    if roll < wb:
        return mutate_bytes(s, rng)
    if roll < wb + ws:
        return mutate_stream(s, rng, corpus)
    return mutate_grammar(s, rng)
