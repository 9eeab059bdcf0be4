import time

import pytest

from src.client import connect
from src.harness import cases_by_id, run_case
from src.harness.models import Exchange
from src.protocol import Opcode, TraceError, ViolationKind, encode_frame
from src.server import Flaw, FlawSet
from src.trace import (
    Direction, FrameEntry, ResidueEntry, TraceSink, decode_trace, format_listing, load_trace,
    parse_trace_line, read_trace, record,
)


def test_record_then_load(tmp_path):
    path = tmp_path / "one.trace"
    with TraceSink(path) as sink:
        sink.record(Direction.C2S, b"\x46\x54\x01")
    [rec] = load_trace(path)
    assert rec.direction is Direction.C2S
    assert rec.data == b"\x46\x54\x01"


def test_records_keep_order_and_monotonic_time(tmp_path):
    path = tmp_path / "two.trace"
    with TraceSink(path) as sink:
        sink.record(Direction.C2S, b"a")
        time.sleep(0.005)
        sink.record(Direction.S2C, b"b")
    first, second = load_trace(path)
    assert (first.data, second.data) == (b"a", b"b")
    assert second.timestamp_ms >= first.timestamp_ms + 5


def test_record_is_flushed_immediately(tmp_path):
    path = tmp_path / "flush.trace"
    sink = TraceSink(path)
    sink.record(Direction.S2C, b"\x00\x01")
    assert path.read_text().strip().endswith("S2C 0001")
    sink.close()


def test_empty_data_not_recorded(tmp_path):
    with TraceSink(tmp_path / "empty.trace") as sink:
        record(sink, Direction.C2S, b"")
        assert sink.records_written == 0


def test_write_after_close_is_surfaced(tmp_path):
    sink = TraceSink(tmp_path / "closed.trace")
    sink.close()
    with pytest.raises(TraceError):
        sink.record(Direction.C2S, b"x")


def test_unwritable_sink(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(TraceError):
        TraceSink(blocker / "nested.trace")


@pytest.mark.parametrize("line", ["12 C2S", "x C2S 00", "1 UP 00", "1 C2S zz", "-1 C2S 00", "1 C2S "])
def test_parse_rejects_corrupt_lines(line):
    with pytest.raises(TraceError):
        parse_trace_line(line)


def test_corrupt_line_flagged_rest_decoded(tmp_path):
    path = tmp_path / "mixed.trace"
    hello = encode_frame(Opcode.HELLO, b"cli")
    path.write_text(f"0 C2S {hello.hex()}\nnot a record\n")
    records, corrupt = read_trace(path)
    assert len(records) == 1
    assert corrupt[0].line_number == 2

    listing = decode_trace(path)
    assert len(listing.frames) == 1
    assert len(listing.corrupt_lines) == 1
    assert "CORRUPT line 2" in format_listing(listing)
    with pytest.raises(TraceError):
        load_trace(path)
    assert len(load_trace(path, strict=False)) == 1


def test_empty_trace(tmp_path):
    path = tmp_path / "empty.trace"
    path.write_text("")
    listing = decode_trace(path)
    assert listing.entries == []
    assert format_listing(listing) == "0 frames, 0 residue runs, 0 violations, 0 corrupt lines"


def test_missing_trace_file(tmp_path):
    with pytest.raises(TraceError):
        decode_trace(tmp_path / "missing.trace")


def test_honest_hello_trace(hosted, receive_timeout, tmp_path):
    host = hosted()
    path = tmp_path / "honest.trace"
    with TraceSink(path) as sink, connect(host.server.address, sink, receive_timeout=receive_timeout) as session:
        session.hello("cli")
    listing = decode_trace(path)
    assert [(f.direction, f.opcode) for f in listing.frames] == [(Direction.C2S, Opcode.HELLO), (Direction.S2C, Opcode.OK)]
    assert listing.violation_count == 0
    assert listing.residue == []
    assert all(f.checksum_ok for f in listing.frames)


def test_residue_after_garbage(tmp_path):
    path = tmp_path / "garbage.trace"
    stream = b"\xde\xad" + encode_frame(Opcode.BYE, b"") + b"\x01\x02"
    path.write_text(f"0 C2S {stream.hex()}\n")
    listing = decode_trace(path)
    kinds = [type(entry) for entry in listing.entries]
    assert kinds == [ResidueEntry, FrameEntry, ResidueEntry]
    assert listing.residue[0].data == b"\xde\xad"
    assert listing.residue[1].data == b"\x01\x02"


def test_smear_attack_trace_fidelity(hosted, receive_timeout, tmp_path):
    host = hosted(FlawSet.of([Flaw.F3]))
    case = cases_by_id()["C-LEN-UP"]
    path = tmp_path / "len-up.trace"
    with TraceSink(path) as sink:
        run_case(case, host.server.address, receive_timeout=receive_timeout, trace_sink=sink)

    records = load_trace(path)
    captured = b"".join(r.data for r in records if r.direction is Direction.C2S)
    forged = b"".join(step.spec.resolve() for step in case.script if isinstance(step, Exchange))
    assert captured == forged

    listing = decode_trace(path)
    assert listing.has_violation(ViolationKind.LENGTH_MISMATCH)
    hello = next(f for f in listing.frames if f.direction is Direction.C2S)
    assert (hello.declared_length, hello.actual_length) == (10, 5)
    assert not hello.checksum_ok
    [residue] = [r for r in listing.residue if r.direction is Direction.C2S]
    assert residue.data == bytes(4)
    assert "RESIDUE 4 bytes" in format_listing(listing)


def test_trace_survives_crash(hosted, receive_timeout, tmp_path):
    host = hosted(FlawSet.of([Flaw.F2]))
    case = cases_by_id()["C-OVR-L"]
    path = tmp_path / "crash.trace"
    with TraceSink(path) as sink:
        run_case(case, host.server.address, receive_timeout=receive_timeout, trace_sink=sink)
    listing = decode_trace(path)
    sent = [f.opcode for f in listing.frames if f.direction is Direction.C2S]
    assert sent == [Opcode.HELLO, Opcode.PUT_REQ, Opcode.DATA]


def test_decode_does_not_modify_trace(tmp_path):
    path = tmp_path / "ro.trace"
    path.write_text(f"0 C2S {encode_frame(Opcode.BYE, b'').hex()}\n3 S2C 4654\n")
    before = path.read_bytes()
    decode_trace(path)
    assert path.read_bytes() == before


def test_documented_hello_exchange_decodes(tmp_path):
    path = tmp_path / "hello.trace"
    path.write_text("0 C2S 4654010100000003636c6966\n2 S2C 465401020000000568656c6c6f62\n")
    listing = decode_trace(path)
    assert {(f.direction, f.opcode, f.timestamp_ms, f.checksum_ok) for f in listing.frames} == {
        (Direction.C2S, Opcode.HELLO, 0, True),
        (Direction.S2C, Opcode.OK, 2, True),
    }
    assert listing.corrupt_lines == []
