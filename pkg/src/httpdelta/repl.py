"""Interactive session for iterating fuzzer output into payloads.

Line-oriented command grammar:

    load <path>                      load a results JSONL file
    results                          list discrepancy groups
    use <group#>                     adopt a group's input as the stream
    stream set <idx> "<bytes>"       set/append one stream element
    stream show                      render the stream
    send [-v] [origin...]            per-origin reports, diffs marked
    transduce <transducer>           replace stream with forwarded form
    mutate <byte|stream|grammar> [seed]
    matrix                           discrepancy matrix over origins
    quirks <origin>                  show probed allowances
    history                          list successful commands
    quit

Byte strings use the escape syntax \\r \\n \\0 \\t \\\\ \\xNN; all
other printable ASCII stands for itself.  Failed commands leave the
session unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .analysis import (
    QuirksRecord,
    discrepancy_matrix,
    group_results,
    origin_handle,
    probe_quirks,
)
from .fuzzer import PersistedResult, load_results
from .mutation import Rng, mutate_bytes, mutate_grammar, mutate_stream
from .personalities import (
    InterpretationReport,
    Personality,
    builtin_registry,
    interpret,
    registry_by_name,
    transduce,
)
from .wire import MAX_STREAM_BYTES, RequestStream

__all__ = ["Session", "CommandError", "eval_command", "escape_bytes",
           "unescape_bytes", "run_repl"]


class CommandError(Exception):
    """Raised before any session mutation; carries the message to show."""


_USAGE = __doc__.split("Line-oriented command grammar:")[1].strip()


# ---------------------------------------------------------------------------
# Escape syntax
# ---------------------------------------------------------------------------

_SIMPLE = {0x0D: "\\r", 0x0A: "\\n", 0x00: "\\0", 0x09: "\\t", 0x5C: "\\\\"}
_UNESCAPE = {"r": b"\r", "n": b"\n", "0": b"\x00", "t": b"\t", "\\": b"\\"}


def escape_bytes(data: bytes) -> str:
    out = []
    for b in data:
        if b in _SIMPLE:
            out.append(_SIMPLE[b])
        elif 0x20 <= b <= 0x7E and b != 0x22:  # printable, not '"'
            out.append(chr(b))
        else:
            out.append("\\x%02x" % b)
    return "".join(out)


def unescape_bytes(text: str) -> bytes:
    out = bytearray()
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text):
                raise CommandError("dangling backslash in byte string")
            esc = text[i + 1]
            if esc in _UNESCAPE:
                out += _UNESCAPE[esc]
                i += 2
                continue
            if esc == "x":
                hexpart = text[i + 2:i + 4]
                if len(hexpart) != 2:
                    raise CommandError("\\x needs two hex digits")
                try:
                    out.append(int(hexpart, 16))
                except ValueError:
                    raise CommandError("bad hex escape %r" % ("\\x" + hexpart))
                i += 4
                continue
            raise CommandError("unknown escape \\%s" % esc)
        if ch == '"':
            raise CommandError("raw quote inside byte string; use \\x22")
        code = ord(ch)
        if not 0x20 <= code <= 0x7E:
            raise CommandError("non-printable character; use an escape")
        out.append(code)
        i += 1
    return bytes(out)


# ---------------------------------------------------------------------------
# Session
# ---------------------------------------------------------------------------

@dataclass
class Session:
    registry: dict[str, Personality] = field(
        default_factory=lambda: registry_by_name(builtin_registry()))
    origins: list[str] = field(default_factory=list)
    stream: RequestStream = field(
        default_factory=lambda: RequestStream.of(b""))
    results: list[PersistedResult] = field(default_factory=list)
    groups: list[list[PersistedResult]] = field(default_factory=list)
    history: list[str] = field(default_factory=list)
    done: bool = False
    _quirks: dict[str, QuirksRecord] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.origins:
            self.origins = [p.name for p in self.registry.values()
                            if p.kind == "origin"]

    def quirks_for(self, name: str) -> QuirksRecord:
        if name not in self._quirks:
            self._quirks[name] = probe_quirks(
                origin_handle(self.registry[name]))
        return self._quirks[name]


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise CommandError(message)


def _personality(s: Session, name: str, kind: Optional[str] = None) -> Personality:
    p = s.registry.get(name)
    _require(p is not None, "unknown personality %r" % name)
    if kind is not None:
        _require(p.kind == kind, "%s is not a %s" % (name, kind))
    return p


def _render_entries(report: InterpretationReport, verbose: bool,
                    marks: dict[tuple[int, str], bool]) -> list[str]:
    lines = []
    for i, e in enumerate(report.entries):
        def m(fieldname: str) -> str:
            return "*" if marks.get((i, fieldname)) else " "
        lines.append("  [%d]%smethod=%s%suri=%s%sversion=%s" % (
            i, m("method"), escape_bytes(e.method),
            " " + m("uri"), escape_bytes(e.uri),
            " " + m("version"), escape_bytes(e.version)))
        if verbose or marks.get((i, "headers")):
            for n, v in e.headers:
                lines.append("      %shdr %s: %s" % (
                    m("headers"), escape_bytes(n), escape_bytes(v)))
        if verbose or marks.get((i, "body")):
            lines.append("      %sbody \"%s\"" % (
                m("body"), escape_bytes(e.body)))
        else:
            lines.append("       body-len %d" % len(e.body))
    if report.rejection is not None:
        lines.append("  rejection status=%d offset=%d"
                     % (report.rejection.status, report.rejection.offset))
    if report.termination != "clean":
        lines.append("  termination=%s" % report.termination)
    return lines


def _field_marks(reports: dict[str, InterpretationReport]) -> dict:
    """(entry index, field) -> True when the origins are not unanimous."""
    marks: dict[tuple[int, str], bool] = {}
    depth = max((len(r.entries) for r in reports.values()), default=0)
    for i in range(depth):
        for fieldname in ("method", "uri", "version", "headers", "body"):
            values = set()
            for r in reports.values():
                if i >= len(r.entries):
                    values.add(None)
                    continue
                e = r.entries[i]
                if fieldname == "headers":
                    values.add(tuple((n.lower(), v) for n, v in e.headers))
                else:
                    values.add(getattr(e, fieldname))
            if len(values) > 1:
                marks[(i, fieldname)] = True
    return marks


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------

def _cmd_load(s: Session, args: list[str]) -> str:
    _require(len(args) == 1, "usage: load <path>")
    try:
        results = load_results(args[0])
    except OSError as exc:
        raise CommandError("cannot read %s: %s" % (args[0], exc))
    except ValueError as exc:
        raise CommandError(str(exc))
    groups = group_results(results)
    s.results = results
    s.groups = groups
    return "loaded %d results in %d groups" % (len(results), len(groups))


def _cmd_results(s: Session, args: list[str]) -> str:
    _require(not args, "usage: results")
    if not s.groups:
        return "no results loaded"
    lines = []
    for i, g in enumerate(g for g in s.groups):
        m = g[0].matrix
        lines.append("#%d  size=%d  bits=%d  matrix=%s  origins=%s"
                     % (i + 1, len(g), m.set_bit_count(), m.row_major(),
                        ",".join(m.origins)))
    return "\n".join(lines)


def _cmd_use(s: Session, args: list[str]) -> str:
    _require(len(args) == 1 and args[0].isdigit(), "usage: use <group#>")
    idx = int(args[0])
    _require(1 <= idx <= len(s.groups), "no group #%s" % args[0])
    result = s.groups[idx - 1][0]
    for name in result.matrix.origins:
        _require(name in s.registry,
                 "origin %r not in this session's registry" % name)
    s.stream = result.input
    s.origins = list(result.matrix.origins)
    return ("using group #%d; stream has %d element(s); origins %s"
            % (idx, len(result.input.elements), ",".join(s.origins)))


def _cmd_stream(s: Session, args: list[str]) -> str:
    _require(bool(args), "usage: stream set <idx> \"<bytes>\" | stream show")
    if args[0] == "show":
        lines = ["[%d] \"%s\"" % (i, escape_bytes(e))
                 for i, e in enumerate(s.stream.elements)]
        return "\n".join(lines)
    _require(args[0] == "set" and len(args) >= 3,
             "usage: stream set <idx> \"<bytes>\"")
    _require(args[1].isdigit(), "element index must be a number")
    idx = int(args[1])
    quoted = " ".join(args[2:])
    _require(len(quoted) >= 2 and quoted[0] == '"' and quoted[-1] == '"',
             "byte string must be double-quoted")
    data = unescape_bytes(quoted[1:-1])
    elements = list(s.stream.elements)
    _require(0 <= idx <= len(elements), "element index out of range")
    if idx == len(elements):
        elements.append(data)
    else:
        elements[idx] = data
    total = sum(len(e) for e in elements)
    _require(total <= MAX_STREAM_BYTES,
             "stream would exceed %d bytes" % MAX_STREAM_BYTES)
    s.stream = RequestStream(tuple(elements))
    return "element %d set (%d bytes)" % (idx, len(data))


def _cmd_send(s: Session, args: list[str]) -> str:
    verbose = False
    names = []
    for a in args:
        if a == "-v":
            verbose = True
        else:
            names.append(a)
    if not names:
        names = list(s.origins)
    _require(bool(names), "no origins selected")
    for n in names:
        _personality(s, n)
    reports = {n: interpret(s.registry[n], s.stream) for n in names}
    marks = _field_marks(reports)
    lines = []
    for n in names:
        lines.append("== %s ==" % n)
        lines.extend(_render_entries(reports[n], verbose, marks))
    if marks:
        first = sorted(marks)[0]
        lines.append("first difference: entry %d field %s" % first)
    else:
        lines.append("no differences")
    return "\n".join(lines)


def _cmd_transduce(s: Session, args: list[str]) -> str:
    _require(len(args) == 1, "usage: transduce <transducer>")
    p = _personality(s, args[0], kind="transducer")
    result = transduce(p, s.stream)
    if result.forwarded is None:
        raise CommandError("%s rejected the stream at offset %s"
                           % (p.name, result.rejected_offset))
    old = s.stream
    s.stream = result.forwarded
    lines = ["forwarded %d element(s)" % len(result.forwarded.elements)]
    if result.forwarded.data == old.data:
        lines.append("bytes unchanged")
    else:
        lines.append("before: \"%s\"" % escape_bytes(old.data))
        lines.append("after:  \"%s\"" % escape_bytes(result.forwarded.data))
    return "\n".join(lines)


_MUTATORS = {"byte": mutate_bytes, "stream": mutate_stream,
             "grammar": mutate_grammar}


def _cmd_mutate(s: Session, args: list[str]) -> str:
    _require(1 <= len(args) <= 2 and args[0] in _MUTATORS,
             "usage: mutate <byte|stream|grammar> [seed]")
    seed = 0
    if len(args) == 2:
        _require(args[1].lstrip("-").isdigit(), "seed must be an integer")
        seed = int(args[1])
    child, record = _MUTATORS[args[0]](s.stream, Rng(seed))
    s.stream = child
    return ("applied %s%s at element %d; stream now \"%s\""
            % (record.kind,
               " (%s)" % record.rule if record.rule else "",
               record.element_index, escape_bytes(child.data)))


def _cmd_matrix(s: Session, args: list[str]) -> str:
    _require(not args, "usage: matrix")
    names = list(s.origins)
    _require(len(names) >= 2, "need at least two selected origins")
    for n in names:
        _personality(s, n)
    quirks = {n: s.quirks_for(n) for n in names}
    reports = {n: interpret(s.registry[n], s.stream) for n in names}
    m = discrepancy_matrix(reports, quirks, tuple(names))
    width = max(len(n) for n in names)
    lines = ["matrix %s" % m.row_major()]
    for i, n in enumerate(names):
        row = " ".join("1" if b else "." for b in m.bits[i])
        lines.append("%-*s  %s" % (width, n, row))
    return "\n".join(lines)


def _cmd_quirks(s: Session, args: list[str]) -> str:
    _require(len(args) == 1, "usage: quirks <origin>")
    _personality(s, args[0])
    rec = s.quirks_for(args[0])
    if not rec.allowances:
        return "%s: no recorded allowances" % args[0]
    return "%s: %s" % (args[0], ", ".join(sorted(rec.allowances)))


def _cmd_history(s: Session, args: list[str]) -> str:
    _require(not args, "usage: history")
    return "\n".join("%3d  %s" % (i + 1, line)
                     for i, line in enumerate(s.history)) or "(empty)"


def _cmd_quit(s: Session, args: list[str]) -> str:
    s.done = True
    return "bye"


_COMMANDS = {
    "load": _cmd_load,
    "results": _cmd_results,
    "use": _cmd_use,
    "stream": _cmd_stream,
    "send": _cmd_send,
    "transduce": _cmd_transduce,
    "mutate": _cmd_mutate,
    "matrix": _cmd_matrix,
    "quirks": _cmd_quirks,
    "history": _cmd_history,
    "quit": _cmd_quit,
}


def eval_command(s: Session, line: str) -> tuple[Session, str]:
    """Execute one command line; on failure the session is unchanged and
    the output is the error plus usage."""
    words = line.strip().split()
    if not words:
        return s, ""
    handler = _COMMANDS.get(words[0])
    if handler is None:
        return s, "unknown command %r\n%s" % (words[0], _USAGE)
    try:
        output = handler(s, words[1:])
    except CommandError as exc:
        return s, "error: %s" % exc
    s.history.append(line.strip())
    return s, output


def run_repl(session: Optional[Session] = None, stdin=None, stdout=None) -> int:
    import sys
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    s = session if session is not None else Session()
    while not s.done:
        stdout.write("httpdelta> ")
        stdout.flush()
        line = stdin.readline()
        if not line:
            break
        s, output = eval_command(s, line)
        if output:
            stdout.write(output + "\n")
    return 0
