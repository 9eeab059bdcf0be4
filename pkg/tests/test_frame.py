import pytest
from hypothesis import given, settings, strategies as st

from src.protocol import (
    BufferSource, FRAME_OVERHEAD, Opcode, ViolationKind,
    checksum, decode_frame, encode_frame, find_overrun, opcode_name,
)
from src.harness import fuzz_decoder


def test_checksum_empty_payload():
    assert checksum(b"") == 0x00


def test_checksum_xor_fold():
    assert checksum(bytes([0x41, 0x42, 0x43])) == 0x40


@settings(max_examples=1000)
@given(st.binary(max_size=64), st.binary(max_size=64))
def test_checksum_self_inverse_and_linear(a, b):
    assert checksum(a + a) == 0
    assert checksum(a + b) == checksum(a) ^ checksum(b)


def test_encode_empty_bye():
    assert encode_frame(0x7F, b"") == bytes.fromhex("4654017f0000000000")


def test_encode_hello_layout():
    assert encode_frame(0x01, b"cli") == bytes.fromhex("4654010100000003636c6966")


@settings(max_examples=1000)
@given(st.integers(min_value=0, max_value=255), st.binary(max_size=512))
def test_encode_length_discipline(opcode, payload):
    assert len(encode_frame(opcode, payload)) == FRAME_OVERHEAD + len(payload)


def test_decode_round_trip():
    report = decode_frame(encode_frame(0x01, b"cli"))
    assert report.well_formed
    assert report.frame.opcode == Opcode.HELLO
    assert report.frame.payload == b"cli"
    assert report.violations == []
    assert report.consumed == 12


@settings(max_examples=1000)
@given(st.sampled_from(list(Opcode)), st.binary(max_size=256))
def test_decode_round_trip_any_payload(opcode, payload):
    report = decode_frame(encode_frame(opcode, payload))
    assert report.well_formed
    assert (report.frame.opcode, report.frame.payload) == (opcode, payload)


def test_decode_truncated_on_close():
    report = decode_frame(bytes.fromhex("4654010100000005636c69"))
    assert report.kinds() == {ViolationKind.TRUNCATED}
    assert report.frame is None
    assert report.consumed == 11
    assert report.closed
    assert not report.timed_out


def test_decode_bad_checksum_keeps_frame():
    frame = bytearray(encode_frame(0x01, b"cli"))
    frame[-1] ^= 0xFF
    report = decode_frame(bytes(frame))
    assert report.frame is not None
    assert report.kinds() == {ViolationKind.BAD_CHECKSUM}


def test_decode_header_violations():
    frame = bytearray(encode_frame(0x55, b"x"))
    frame[0] = 0x00
    frame[2] = 0x02
    report = decode_frame(bytes(frame))
    assert report.kinds() == {ViolationKind.BAD_MAGIC, ViolationKind.BAD_VERSION, ViolationKind.UNKNOWN_OPCODE}


def test_decode_empty_stream_is_end_of_stream():
    report = decode_frame(b"")
    assert report.end_of_stream
    assert report.violations == []
    assert report.frame is None


def test_decode_oversize_skips_payload():
    data = encode_frame(0x01, b"x" * 100)
    report = decode_frame(data, max_length=10)
    assert report.kinds() == {ViolationKind.OVERSIZE}
    assert report.consumed == 8


def test_decode_signed_length_reads_no_payload():
    data = bytes.fromhex("465401018000000000")
    report = decode_frame(data, signed_length=True)
    assert report.frame is not None
    assert report.frame.payload == b""
    assert report.kinds() == {ViolationKind.LENGTH_MISMATCH}


def test_decode_detects_overrun_into_next_frame():
    forged = bytes.fromhex("465401010000000a") + b"smear" + bytes([checksum(b"smear")])
    stream = forged + encode_frame(Opcode.BYE, b"")
    source = BufferSource(stream)
    report = decode_frame(source)
    assert report.kinds() == {ViolationKind.BAD_CHECKSUM, ViolationKind.LENGTH_MISMATCH}
    assert report.frame.payload == b"smearhFT\x01\x7f"
    assert report.consumed == 19
    assert source.remaining == bytes(4)


def test_find_overrun():
    assert find_overrun(b"smearhFT\x01\x7f") == 5
    assert find_overrun(b"plain payload") is None
    assert find_overrun(b"abcxFT\x01") is None


def test_consecutive_frames_from_one_source():
    source = BufferSource(encode_frame(Opcode.HELLO, b"a") + encode_frame(Opcode.BYE, b""))
    assert decode_frame(source).frame.opcode == Opcode.HELLO
    assert decode_frame(source).frame.opcode == Opcode.BYE
    assert decode_frame(source).end_of_stream


@pytest.mark.parametrize("value, name", [(0x01, "HELLO"), (0x7F, "BYE"), (0x55, "0x55")])
def test_opcode_name(value, name):
    assert opcode_name(value) == name


def test_decode_never_raises_on_garbage():
    assert fuzz_decoder(10_000, seed=1) == 0
