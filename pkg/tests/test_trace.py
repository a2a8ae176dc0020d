"""Trace model and file format tests."""

import pytest

from mdpsim.trace import (KIND_BRANCH, KIND_LOAD, KIND_OTHER, KIND_STORE,
                          Trace, TraceEvent, TraceOrderError, TraceParseError,
                          load_trace_file, parse_trace, parse_trace_binary,
                          serialize_trace, serialize_trace_binary)
from mdpsim.workloads import gen_random_trace


def test_parse_header_only():
    t = parse_trace(b"#mdp-trace v1 name=empty\n")
    assert t.name == "empty"
    assert t.events == ()


def test_parse_single_load_record():
    t = parse_trace(b"#mdp-trace v1 name=x\n"
                    b"L pc=0x40 seq=0 addr=0x1000 size=4\n")
    assert len(t.events) == 1
    ev = t.events[0]
    assert (ev.kind, ev.pc, ev.seq, ev.addr, ev.size) == (KIND_LOAD, 0x40, 0, 0x1000, 4)


def test_parse_all_kinds():
    t = parse_trace(b"#mdp-trace v1 name=x\n"
                    b"S pc=0x10 seq=1 addr=0x20 size=8\n"
                    b"B pc=0x14 seq=2 taken=1\n"
                    b"O pc=0x18 seq=3\n")
    kinds = [ev.kind for ev in t.events]
    assert kinds == [KIND_STORE, KIND_BRANCH, KIND_OTHER]
    assert t.events[1].taken is True


def test_serialize_empty_trace_is_header_only():
    data = serialize_trace(Trace(name="nothing"))
    assert data == b"#mdp-trace v1 name=nothing\n"


@pytest.mark.parametrize("seed", range(5))
def test_round_trip_parse_of_serialize(seed):
    t = gen_random_trace(1000, seed=seed)
    assert parse_trace(serialize_trace(t)) == t


@pytest.mark.parametrize("seed", range(3))
def test_round_trip_serialize_of_parse_canonical(seed):
    data = serialize_trace(gen_random_trace(500, seed=seed))
    assert serialize_trace(parse_trace(data)) == data


def test_parse_skips_comments_and_blank_lines():
    t = parse_trace(b"#mdp-trace v1 name=x\n"
                    b"# a comment\n"
                    b"\n"
                    b"O pc=0x18 seq=0\n")
    assert len(t.events) == 1


def test_parse_error_carries_byte_offset():
    head = b"#mdp-trace v1 name=x\n"
    good = b"O pc=0x18 seq=0\n"
    with pytest.raises(TraceParseError) as exc:
        parse_trace(head + good + b"L pc=zz seq=1 addr=0x0 size=4\n")
    assert exc.value.offset == len(head) + len(good)


def test_seq_regression_is_ordering_error():
    data = (b"#mdp-trace v1 name=x\n"
            b"O pc=0x18 seq=5\n"
            b"O pc=0x18 seq=5\n")
    with pytest.raises(TraceOrderError):
        parse_trace(data)


@pytest.mark.parametrize("line", [
    b"L pc=0x40 seq=0 addr=0x1000 size=3",   # bad size
    b"L pc=0x40 seq=0 size=4",               # missing addr
    b"O pc=0x18 seq=0 addr=0x10 size=4",     # addr on non-memory op
    b"B pc=0x14 seq=0",                      # branch without taken
    b"B pc=0x14 seq=0 taken=2",              # bad taken value
    b"X pc=0x14 seq=0",                      # unknown kind
    b"L pc=0x40 seq=0 addr=0x1000 size=4 extra=1",
])
def test_malformed_records_rejected(line):
    with pytest.raises(TraceParseError):
        parse_trace(b"#mdp-trace v1 name=x\n" + line + b"\n")


def test_missing_header_rejected():
    with pytest.raises(TraceParseError):
        parse_trace(b"L pc=0x40 seq=0 addr=0x1000 size=4\n")
    with pytest.raises(TraceParseError):
        parse_trace(b"")


def test_event_field_rules():
    with pytest.raises(ValueError):
        TraceEvent(seq=0, pc=1, kind=KIND_LOAD, addr=0, size=16).check()
    with pytest.raises(ValueError):
        TraceEvent(seq=0, pc=1, kind=KIND_OTHER, taken=True).check()
    with pytest.raises(ValueError):
        TraceEvent(seq=0, pc=1, kind="Q").check()


def test_validate_rejects_seq_regression():
    t = Trace(name="x", events=(
        TraceEvent(seq=1, pc=1, kind=KIND_OTHER),
        TraceEvent(seq=0, pc=1, kind=KIND_OTHER),
    ))
    with pytest.raises(ValueError):
        t.validate()


def test_overlap_is_byte_granular():
    a = TraceEvent(seq=0, pc=1, kind=KIND_STORE, addr=0x10, size=4)
    b = TraceEvent(seq=1, pc=2, kind=KIND_LOAD, addr=0x13, size=1)
    c = TraceEvent(seq=2, pc=3, kind=KIND_LOAD, addr=0x14, size=4)
    assert a.overlaps(b) and b.overlaps(a)
    assert not a.overlaps(c)


@pytest.mark.parametrize("seed", range(3))
def test_binary_round_trip(seed):
    t = gen_random_trace(800, seed=seed)
    assert parse_trace_binary(serialize_trace_binary(t)) == t


def test_binary_bad_magic():
    with pytest.raises(TraceParseError):
        parse_trace_binary(b"not a trace")


def test_load_trace_file_autodetects(tmp_path):
    t = gen_random_trace(50, seed=9)
    text = tmp_path / "a.trace"
    text.write_bytes(serialize_trace(t))
    binary = tmp_path / "b.trace"
    binary.write_bytes(serialize_trace_binary(t))
    assert load_trace_file(str(text)) == t
    assert load_trace_file(str(binary)) == t
