"""TCP harness: timeout-segmented stream client, the echo server, and
shims that serve personalities over the wire.

The echo server responds to every idle period with a 200 response
containing the bytes it just read; origins self-report their parse as
Base64-JSON documents, one 200 response per parsed request; a
transducer shim forwards its rewritten output to a backend (normally
the echo server) and relays the responses, so the forwarded bytes can
be recovered from the echoed bodies.
"""

from __future__ import annotations

import base64
import json
import socket
import threading
from dataclasses import dataclass, field

from .personalities import (
    InterpretationReport,
    Personality,
    Rejection,
    ReportEntry,
    interpret,
    transduce,
)
from .wire import RequestStream

__all__ = [
    "Endpoint",
    "Segment",
    "ResponseSegments",
    "exchange_stream",
    "ServerHandle",
    "run_echo_server",
    "serve_origin",
    "serve_transducer",
    "decode_origin_report",
    "recover_transduction",
    "RecoveryError",
]


@dataclass(frozen=True)
class Endpoint:
    host: str
    port: int
    connect_timeout_ms: int = 2000
    read_timeout_ms: int = 100

    def __post_init__(self) -> None:
        if not (1 <= self.port <= 65535):
            raise ValueError("port out of range")
        if self.read_timeout_ms < 10:
            raise ValueError("read timeout below 10 ms")


@dataclass(frozen=True)
class Segment:
    data: bytes
    element_index: int


@dataclass(frozen=True)
class ResponseSegments:
    segments: tuple[Segment, ...]
    reset: bool = False  # connection dropped mid-stream

    @property
    def data(self) -> bytes:
        return b"".join(s.data for s in self.segments)


def _read_until_idle(conn: socket.socket, timeout_s: float) -> tuple[bytes, bool]:
    """Read until a full timeout window passes with no data.
    Returns (data, peer_closed)."""
    conn.settimeout(timeout_s)
    chunks: list[bytes] = []
    while True:
        try:
            chunk = conn.recv(65536)
        except socket.timeout:
            return b"".join(chunks), False
        except OSError:
            return b"".join(chunks), True
        if not chunk:
            return b"".join(chunks), True
        chunks.append(chunk)


def exchange_stream(e: Endpoint, s: RequestStream) -> ResponseSegments:
    """Write each element, then read until the read-timeout elapses with
    no data, before sending the next element."""
    segments: list[Segment] = []
    reset = False
    conn = socket.create_connection((e.host, e.port),
                                    timeout=e.connect_timeout_ms / 1000)
    try:
        for idx, element in enumerate(s.elements):
            try:
                if element:
                    conn.sendall(element)
            except OSError:
                reset = True
                break
            data, closed = _read_until_idle(conn, e.read_timeout_ms / 1000)
            if data:
                segments.append(Segment(data, idx))
            if closed:
                reset = idx < len(s.elements) - 1
                break
    finally:
        conn.close()
    return ResponseSegments(tuple(segments), reset=reset)


# ---------------------------------------------------------------------------
# Servers
# ---------------------------------------------------------------------------

@dataclass
class ServerHandle:
    endpoint: Endpoint
    _sock: socket.socket
    _thread: threading.Thread
    _stop: threading.Event

    def stop(self) -> None:
        self._stop.set()
        try:
            self._sock.close()
        except OSError:
            pass
        self._thread.join(timeout=5)

    def __enter__(self) -> "ServerHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def _serve(handler, host: str = "127.0.0.1", port: int = 0,
           idle_ms: int = 30) -> ServerHandle:
    """Start an accept loop; ``handler(conn, idle_s, stop)`` runs per
    connection in its own thread."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host, port))
    sock.listen(32)
    stop = threading.Event()
    bound = Endpoint(host, sock.getsockname()[1])

    def accept_loop() -> None:
        while not stop.is_set():
            try:
                conn, _ = sock.accept()
            except OSError:
                return
            t = threading.Thread(
                target=_guarded, args=(handler, conn, idle_ms / 1000, stop),
                daemon=True)
            t.start()

    def _guarded(h, conn, idle_s, stop_evt) -> None:
        try:
            h(conn, idle_s, stop_evt)
        except OSError:
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass

    thread = threading.Thread(target=accept_loop, daemon=True)
    thread.start()
    return ServerHandle(bound, sock, thread, stop)


def run_echo_server(host: str = "127.0.0.1", port: int = 0,
                    idle_ms: int = 30) -> ServerHandle:
    """Echo server: each idle period's bytes come back as the body of a
    Content-Length-framed 200 response."""

    def handler(conn: socket.socket, idle_s: float, stop: threading.Event) -> None:
        while not stop.is_set():
            data, closed = _read_until_idle(conn, idle_s)
            if data:
                conn.sendall(b"HTTP/1.1 200 OK\r\nContent-Length: %d\r\n\r\n"
                             % len(data) + data)
            if closed:
                return

    return _serve(handler, host, port, idle_ms)


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _entry_response(entry: ReportEntry) -> bytes:
    doc = {
        "method": _b64(entry.method),
        "uri": _b64(entry.uri),
        "version": _b64(entry.version),
        "headers": [[_b64(n), _b64(v)] for n, v in entry.headers],
        "body": _b64(entry.body),
    }
    body = json.dumps(doc, sort_keys=True).encode("ascii")
    return (b"HTTP/1.1 200 OK\r\nContent-Length: %d\r\n\r\n" % len(body)
            + body)


_REASONS = {400: b"Bad Request", 411: b"Length Required",
            431: b"Request Header Fields Too Large",
            501: b"Not Implemented"}


def _rejection_response(rej: Rejection) -> bytes:
    reason = _REASONS.get(rej.status, b"Error")
    return (b"HTTP/1.1 %d %s\r\nX-Reject-Offset: %d\r\nContent-Length: 0\r\n\r\n"
            % (rej.status, reason, rej.offset))


def serve_origin(p: Personality, host: str = "127.0.0.1", port: int = 0,
                 idle_ms: int = 30) -> ServerHandle:
    """Serve an origin personality: after each idle period the
    cumulative connection bytes are re-interpreted and one report
    response is emitted per newly parsed request; a rejection emits its
    status response and closes; a busy loop emits nothing."""

    def handler(conn: socket.socket, idle_s: float, stop: threading.Event) -> None:
        buffer = b""
        reported = 0
        while not stop.is_set():
            data, closed = _read_until_idle(conn, idle_s)
            buffer += data
            if data and buffer:
                report = interpret(p, RequestStream.of(buffer))
                for entry in report.entries[reported:]:
                    conn.sendall(_entry_response(entry))
                reported = max(reported, len(report.entries))
                if report.rejection is not None:
                    conn.sendall(_rejection_response(report.rejection))
                    return
                if report.termination in ("loop-detected", "crash"):
                    # The modeled server would never respond again.
                    if closed:
                        return
                    continue
            if closed:
                return

    return _serve(handler, host, port, idle_ms)


def serve_transducer(p: Personality, backend: Endpoint,
                     host: str = "127.0.0.1", port: int = 0,
                     idle_ms: int = 30, element_gap_ms: int = 80
                     ) -> ServerHandle:
    """Serve a transducer personality in front of a backend (normally
    the echo server).  Each idle period re-transduces the cumulative
    input; newly produced forwarded elements are sent to the backend
    with inter-element gaps so the backend's own idle framing sees one
    read period per element, and backend responses are relayed back."""

    def handler(conn: socket.socket, idle_s: float, stop: threading.Event) -> None:
        buffer = b""
        sent_elements = 0
        back = socket.create_connection((backend.host, backend.port), timeout=5)
        try:
            while not stop.is_set():
                data, closed = _read_until_idle(conn, idle_s)
                buffer += data
                if data and buffer:
                    result = transduce(p, RequestStream.of(buffer))
                    if result.forwarded is None:
                        if result.rejected_offset is not None:
                            conn.sendall(_rejection_response(
                                Rejection(400, result.rejected_offset)))
                            return
                    else:
                        elements = result.forwarded.elements
                        for element in elements[sent_elements:]:
                            back.sendall(element)
                            # Let the backend's idle framing fire between
                            # forwarded elements.
                            stop.wait(element_gap_ms / 1000)
                            reply, back_closed = _read_until_idle(
                                back, idle_s)
                            if reply:
                                conn.sendall(reply)
                            if back_closed:
                                return
                        sent_elements = len(elements)
                if closed:
                    return
        finally:
            back.close()

    return _serve(handler, host, port, idle_ms)


# ---------------------------------------------------------------------------
# Response decoding
# ---------------------------------------------------------------------------

class RecoveryError(RuntimeError):
    def __init__(self, message: str, response: bytes = b""):
        super().__init__(message)
        self.response = response


def _split_responses(data: bytes) -> list[tuple[int, bytes]]:
    """Parse a run of Content-Length-framed responses into
    (status, body) pairs; trailing garbage raises RecoveryError."""
    out: list[tuple[int, bytes]] = []
    pos = 0
    while pos < len(data):
        head_end = data.find(b"\r\n\r\n", pos)
        if head_end < 0:
            raise RecoveryError("truncated response head", data[pos:])
        head = data[pos:head_end]
        lines = head.split(b"\r\n")
        parts = lines[0].split(b" ", 2)
        if len(parts) < 2 or not parts[0].startswith(b"HTTP/"):
            raise RecoveryError("malformed status line", data[pos:])
        try:
            status = int(parts[1])
        except ValueError:
            raise RecoveryError("malformed status code", data[pos:])
        length = 0
        for line in lines[1:]:
            name, _, value = line.partition(b":")
            if name.strip().lower() == b"content-length":
                length = int(value.strip())
        body_start = head_end + 4
        if body_start + length > len(data):
            raise RecoveryError("truncated response body", data[pos:])
        out.append((status, data[body_start:body_start + length]))
        pos = body_start + length
    return out


def _reject_offset(data: bytes, pos: int) -> int:
    head_end = data.find(b"\r\n\r\n", pos)
    for line in data[pos:head_end].split(b"\r\n"):
        name, _, value = line.partition(b":")
        if name.strip().lower() == b"x-reject-offset":
            try:
                return int(value.strip())
            except ValueError:
                return 0
    return 0


def decode_origin_report(r: ResponseSegments) -> InterpretationReport:
    """Decode the Base64-JSON report convention back into an
    interpretation report."""
    data = r.data
    entries: list[ReportEntry] = []
    rejection = None
    errors: list[str] = []
    try:
        responses = _split_responses(data)
    except RecoveryError as exc:
        return InterpretationReport(decode_errors=(str(exc),))
    for status, body in responses:
        if 200 <= status < 300:
            try:
                doc = json.loads(body)
                entry = ReportEntry(
                    method=base64.b64decode(doc["method"]),
                    uri=base64.b64decode(doc["uri"]),
                    version=base64.b64decode(doc["version"]),
                    headers=tuple(
                        (base64.b64decode(n), base64.b64decode(v))
                        for n, v in doc["headers"]),
                    body=base64.b64decode(doc["body"]))
            except (ValueError, KeyError, TypeError) as exc:
                errors.append("malformed report body: %s" % exc)
                continue
            entries.append(entry)
        else:
            offset = _reject_offset(data, data.find(b"HTTP/1.1 %d" % status))
            rejection = Rejection(status, offset)
            break
    return InterpretationReport(tuple(entries), rejection=rejection,
                                decode_errors=tuple(errors))


def recover_transduction(r: ResponseSegments) -> RequestStream:
    """Reconstruct the forwarded stream from echoed response bodies."""
    responses = _split_responses(r.data)
    bodies: list[bytes] = []
    for status, body in responses:
        if not (200 <= status < 300):
            raise RecoveryError("transducer rejected the stream",
                                r.data)
        bodies.append(body)
    if not bodies:
        raise RecoveryError("no echo responses recovered")
    return RequestStream(tuple(bodies))
