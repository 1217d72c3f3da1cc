"""Coverage feedback: edge-hit maps, path signatures, and the
novelty state over per-target signature tuples.

Two providers share the map abstraction: the in-process recorder that
personality interpreters write into directly, and a client for the
external map-file control protocol used with instrumented server
processes (clear the remote map, run the input, dump the map to a file,
read the file).
"""

from __future__ import annotations

import hashlib
import os
import signal
import struct
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

__all__ = [
    "MAP_SIZE",
    "CoverageMap",
    "path_signature",
    "UNTRACED_SIGNATURE",
    "DeltaState",
    "ControlChannel",
    "SignalControlChannel",
    "MockControlChannel",
    "ExternalTarget",
    "SnapshotError",
    "external_snapshot",
    "external_clear",
]

MAP_SIZE = 65536

# Reference external binding: the instrumented process dumps its map on
# signal 10 (USR1) and clears it on signal 12 (USR2).
DUMP_SIGNAL = 10
CLEAR_SIGNAL = 12


class CoverageMap:
    """Fixed-size edge-hit map with saturating 8-bit counters.

    Doubles as the in-process recorder: interpreters call
    ``record_edge`` at each branch decision.
    """

    __slots__ = ("cells", "_touched")

    def __init__(self, cells: bytes | bytearray | None = None):
        if cells is None:
            self.cells = bytearray(MAP_SIZE)
            # Indices written through record_edge, so signatures need
            # not scan the whole map; None for maps loaded from bytes.
            self._touched: set[int] | None = set()
        else:
            if len(cells) != MAP_SIZE:
                raise ValueError("coverage map must be exactly %d bytes"
                                 % MAP_SIZE)
            self.cells = bytearray(cells)
            self._touched = None

    def clear(self) -> None:
        self.cells = bytearray(MAP_SIZE)
        self._touched = set()

    def record_edge(self, from_site: int, to_site: int) -> None:
        idx = (from_site * 2654435761 + to_site * 40503) & 0xFFFF
        cell = self.cells[idx]
        if cell != 0xFF:
            self.cells[idx] = cell + 1
        if self._touched is not None:
            self._touched.add(idx)

    def nonzero_cells(self) -> list[tuple[int, int]]:
        cells = self.cells
        if self._touched is not None:
            return [(i, cells[i]) for i in sorted(self._touched) if cells[i]]
        return [(i, c) for i, c in enumerate(cells) if c]

    def __eq__(self, other) -> bool:
        return isinstance(other, CoverageMap) and self.cells == other.cells

    def __hash__(self):  # pragma: no cover - maps are mutable
        raise TypeError("CoverageMap is unhashable")


def _bucket(count: int) -> int:
    """log2 bucketing: 1→1, 2..3→2, 4..7→3, ... 128..255→8."""
    return count.bit_length()


def path_signature(m: CoverageMap) -> int:
    """Stable 64-bit digest of the bucketed map contents."""
    h = hashlib.blake2b(digest_size=8)
    for idx, count in m.nonzero_cells():
        h.update(struct.pack("<IB", idx, _bucket(count)))
    return int.from_bytes(h.digest(), "little")


_EMPTY = CoverageMap()
# Constant signature contributed by targets whose coverage could not be
# collected for an input.
UNTRACED_SIGNATURE = path_signature(_EMPTY)


@dataclass
class DeltaState:
    """Set of per-target path-signature tuples seen so far."""

    targets_order: tuple[str, ...]
    seen: set[tuple[int, ...]] = field(default_factory=set)

    def observe(self, t: tuple[int, ...]) -> bool:
        """Record the tuple; True iff it had never been seen."""
        if len(t) != len(self.targets_order):
            raise ValueError("tuple arity %d != target count %d"
                             % (len(t), len(self.targets_order)))
        t = tuple(t)
        if t in self.seen:
            return False
        self.seen.add(t)
        return True


# ---------------------------------------------------------------------------
# External map-file control protocol
# ---------------------------------------------------------------------------

class SnapshotError(RuntimeError):
    """Dump timed out or the map file was malformed; the target is
    treated as untraced for this input."""


class ControlChannel(Protocol):
    def dump(self) -> None: ...
    def clear(self) -> None: ...


@dataclass
class SignalControlChannel:
    """Reference binding: commands are delivered as process signals."""

    pid: int

    def dump(self) -> None:
        os.kill(self.pid, DUMP_SIGNAL)

    def clear(self) -> None:
        os.kill(self.pid, CLEAR_SIGNAL)


@dataclass
class MockControlChannel:
    """Test double: commands invoke callables instead of signaling."""

    on_dump: Callable[[], None] = lambda: None
    on_clear: Callable[[], None] = lambda: None

    def dump(self) -> None:
        self.on_dump()

    def clear(self) -> None:
        self.on_clear()


@dataclass
class ExternalTarget:
    map_path: str
    channel: ControlChannel
    timeout: float = 2.0
    poll_interval: float = 0.01


def _mtime_or_none(path: str) -> float | None:
    try:
        return os.stat(path).st_mtime_ns
    except OSError:
        return None


def external_snapshot(target: ExternalTarget) -> CoverageMap:
    """Ask the target to dump its map, wait for the file to be
    (re)written, and parse it."""
    before = _mtime_or_none(target.map_path)
    try:
        target.channel.dump()
    except OSError as exc:
        raise SnapshotError("control channel dead: %s" % exc) from exc
    deadline = time.monotonic() + target.timeout
    while True:
        now = _mtime_or_none(target.map_path)
        if now is not None and now != before:
            break
        if time.monotonic() >= deadline:
            raise SnapshotError("timed out waiting for map dump at %s"
                                % target.map_path)
        time.sleep(target.poll_interval)
    with open(target.map_path, "rb") as fh:
        data = fh.read()
    if len(data) != MAP_SIZE:
        raise SnapshotError("map file is %d bytes, expected %d"
                            % (len(data), MAP_SIZE))
    return CoverageMap(data)


def external_clear(target: ExternalTarget) -> None:
    try:
        target.channel.clear()
    except OSError as exc:
        raise SnapshotError("control channel dead: %s" % exc) from exc
