"""Dynamic instruction trace model and trace file formats.

A trace is an ordered stream of loads, stores, branches and other
instructions, identified by static PC and dynamic sequence number.
Memory operations carry an effective byte address and an access width;
overlap between accesses is resolved at byte granularity over the
half-open range [addr, addr + size).

Two file formats are supported: a line-oriented text format (canonical,
used by all tools and tests) and a fixed-record binary format for large
traces.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

KIND_LOAD = "L"
KIND_STORE = "S"
KIND_BRANCH = "B"
KIND_OTHER = "O"

VALID_KINDS = (KIND_LOAD, KIND_STORE, KIND_BRANCH, KIND_OTHER)
VALID_SIZES = (1, 2, 4, 8)

TEXT_HEADER = "#mdp-trace v1"
BINARY_MAGIC = b"MDPTRB1\x00"


class TraceParseError(ValueError):
    """Malformed trace input. Carries the byte offset of the bad record."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class TraceOrderError(TraceParseError):
    """Sequence numbers did not strictly increase."""


@dataclass(frozen=True, slots=True)
class TraceEvent:
    """One dynamic instruction.

    addr/size are set only for loads and stores, taken only for branches.
    """

    seq: int
    pc: int
    kind: str
    addr: int | None = None
    size: int | None = None
    taken: bool | None = None

    def is_mem(self) -> bool:
        return self.kind in (KIND_LOAD, KIND_STORE)

    def byte_range(self) -> range:
        return range(self.addr, self.addr + self.size)

    def overlaps(self, other: "TraceEvent") -> bool:
        """Byte-granular overlap of two memory operations."""
        return self.addr < other.addr + other.size and other.addr < self.addr + self.size

    def check(self) -> None:
        if self.kind not in VALID_KINDS:
            raise ValueError(f"bad event kind {self.kind!r}")
        if self.is_mem():
            if self.addr is None or self.size is None:
                raise ValueError(f"memory op seq={self.seq} missing addr/size")
            if self.size not in VALID_SIZES:
                raise ValueError(f"bad access size {self.size} at seq={self.seq}")
            if self.taken is not None:
                raise ValueError(f"memory op seq={self.seq} must not carry taken")
        elif self.kind == KIND_BRANCH:
            if self.taken is None:
                raise ValueError(f"branch seq={self.seq} missing taken")
            if self.addr is not None or self.size is not None:
                raise ValueError(f"branch seq={self.seq} must not carry addr/size")
        else:
            if self.addr is not None or self.size is not None or self.taken is not None:
                raise ValueError(f"other op seq={self.seq} must not carry addr/size/taken")


@dataclass
class Trace:
    """An ordered, immutable-by-convention sequence of trace events."""

    name: str
    events: tuple[TraceEvent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        self.events = tuple(self.events)

    def validate(self) -> None:
        """Check per-event field rules and strict seq ordering."""
        prev = None
        for ev in self.events:
            ev.check()
            if prev is not None and ev.seq <= prev:
                raise ValueError(f"seq regression: {ev.seq} after {prev}")
            prev = ev.seq

    def loads(self) -> list[int]:
        """Indices of load events, in trace order."""
        return [i for i, ev in enumerate(self.events) if ev.kind == KIND_LOAD]


def serialize_trace(t: Trace) -> bytes:
    """Emit the canonical text format. Inverse of parse_trace."""
    lines = [f"{TEXT_HEADER} name={t.name}"]
    for ev in t.events:
        parts = [ev.kind, f"pc={ev.pc:#x}", f"seq={ev.seq}"]
        if ev.is_mem():
            parts.append(f"addr={ev.addr:#x}")
            parts.append(f"size={ev.size}")
        elif ev.kind == KIND_BRANCH:
            parts.append(f"taken={1 if ev.taken else 0}")
        lines.append(" ".join(parts))
    return ("\n".join(lines) + "\n").encode("ascii")


def _parse_record(line: str, offset: int) -> TraceEvent:
    tokens = line.split()
    kind = tokens[0]
    if kind not in VALID_KINDS:
        raise TraceParseError(f"unknown event kind {kind!r}", offset)
    fields: dict[str, str] = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise TraceParseError(f"malformed field {tok!r}", offset)
        key, _, val = tok.partition("=")
        if key in fields:
            raise TraceParseError(f"duplicate field {key!r}", offset)
        fields[key] = val
    try:
        pc = int(fields.pop("pc"), 16)
        seq = int(fields.pop("seq"))
        addr = size = taken = None
        if kind in (KIND_LOAD, KIND_STORE):
            addr = int(fields.pop("addr"), 16)
            size = int(fields.pop("size"))
        elif kind == KIND_BRANCH:
            taken = fields.pop("taken")
            if taken not in ("0", "1"):
                raise TraceParseError(f"taken must be 0 or 1, got {taken!r}", offset)
            taken = taken == "1"
    except KeyError as e:
        raise TraceParseError(f"missing field {e.args[0]!r}", offset) from None
    except ValueError as e:
        raise TraceParseError(f"bad field value: {e}", offset) from None
    if fields:
        raise TraceParseError(f"unexpected fields {sorted(fields)}", offset)
    ev = TraceEvent(seq=seq, pc=pc, kind=kind, addr=addr, size=size, taken=taken)
    try:
        ev.check()
    except ValueError as e:
        raise TraceParseError(str(e), offset) from None
    return ev


def parse_trace(data: bytes) -> Trace:
    """Parse the text trace format.

    Raises TraceParseError (with byte offset) on malformed records and
    TraceOrderError when sequence numbers fail to strictly increase.
    """
    text = data.decode("ascii", errors="replace")
    offset = 0
    name = None
    events: list[TraceEvent] = []
    prev_seq = None
    first_line = True
    for raw in text.splitlines(keepends=True):
        line = raw.rstrip("\r\n")
        if first_line:
            if not line.startswith(TEXT_HEADER):
                raise TraceParseError(f"missing header {TEXT_HEADER!r}", offset)
            rest = line[len(TEXT_HEADER):].strip()
            if not rest.startswith("name="):
                raise TraceParseError("header missing name= field", offset)
            name = rest[len("name="):]
            first_line = False
        elif line.startswith("#") or not line.strip():
            pass
        else:
            ev = _parse_record(line, offset)
            if prev_seq is not None and ev.seq <= prev_seq:
                raise TraceOrderError(
                    f"seq {ev.seq} does not increase past {prev_seq}", offset)
            prev_seq = ev.seq
            events.append(ev)
        offset += len(raw.encode("ascii", errors="replace"))
    if first_line:
        raise TraceParseError("empty input", 0)
    return Trace(name=name, events=tuple(events))


_BIN_RECORD = struct.Struct("<BQQQBB")


def serialize_trace_binary(t: Trace) -> bytes:
    """Fixed-record binary format: magic, name, count, then packed events."""
    name_bytes = t.name.encode("utf-8")
    out = [BINARY_MAGIC, struct.pack("<H", len(name_bytes)), name_bytes,
           struct.pack("<Q", len(t.events))]
    for ev in t.events:
        out.append(_BIN_RECORD.pack(
            VALID_KINDS.index(ev.kind), ev.seq, ev.pc,
            ev.addr or 0, ev.size or 0,
            1 if ev.taken else 0))
    return b"".join(out)


def parse_trace_binary(data: bytes) -> Trace:
    if not data.startswith(BINARY_MAGIC):
        raise TraceParseError("bad binary trace magic", 0)
    pos = len(BINARY_MAGIC)
    (name_len,) = struct.unpack_from("<H", data, pos)
    pos += 2
    name = data[pos:pos + name_len].decode("utf-8")
    pos += name_len
    (count,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    events = []
    prev_seq = None
    for _ in range(count):
        try:
            kind_i, seq, pc, addr, size, taken = _BIN_RECORD.unpack_from(data, pos)
        except struct.error:
            raise TraceParseError("truncated binary record", pos) from None
        kind = VALID_KINDS[kind_i]
        if prev_seq is not None and seq <= prev_seq:
            raise TraceOrderError(f"seq {seq} does not increase past {prev_seq}", pos)
        prev_seq = seq
        if kind in (KIND_LOAD, KIND_STORE):
            events.append(TraceEvent(seq=seq, pc=pc, kind=kind, addr=addr, size=size))
        elif kind == KIND_BRANCH:
            events.append(TraceEvent(seq=seq, pc=pc, kind=kind, taken=bool(taken)))
        else:
            events.append(TraceEvent(seq=seq, pc=pc, kind=kind))
        pos += _BIN_RECORD.size
    return Trace(name=name, events=tuple(events))


def load_trace_file(path: str) -> Trace:
    """Read a trace file, auto-detecting text vs binary."""
    with open(path, "rb") as f:
        data = f.read()
    if data.startswith(BINARY_MAGIC):
        return parse_trace_binary(data)
    return parse_trace(data)
