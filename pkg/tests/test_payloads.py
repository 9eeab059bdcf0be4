import pytest
from hypothesis import given, settings, strategies as st

from src.protocol import (
    Bye, Data, Err, FileInfo, GetReq, Hello, Ok, Opcode, PayloadMalformed, PutCommit, PutReq,
    decode_payload, encode_payload,
)

texts = st.text(max_size=64)
u16 = st.integers(min_value=0, max_value=0xFFFF)
u32 = st.integers(min_value=0, max_value=0xFFFFFFFF)

STRATEGIES = {
    Opcode.HELLO: st.builds(Hello, texts),
    Opcode.OK: st.builds(Ok, texts),
    Opcode.ERR: st.builds(Err, st.integers(min_value=0, max_value=255), texts),
    Opcode.PUT_REQ: st.builds(PutReq, texts, u32, u16),
    Opcode.DATA: st.builds(Data, u32, st.binary(min_size=1, max_size=256)),
    Opcode.PUT_COMMIT: st.just(PutCommit()),
    Opcode.GET_REQ: st.builds(GetReq, texts),
    Opcode.FILE_INFO: st.builds(FileInfo, u32),
    Opcode.BYE: st.just(Bye()),
}
payloads = st.one_of(*STRATEGIES.values())


def test_put_req_layout():
    assert encode_payload(PutReq("a.txt", 10, 4)) == bytes.fromhex("0005612e7478740000000a0004")


def test_put_commit_from_empty_body():
    assert decode_payload(0x12, b"") == PutCommit()


def test_short_filename_names_the_field():
    with pytest.raises(PayloadMalformed) as info:
        decode_payload(0x10, bytes.fromhex("000561"))
    assert info.value.field == "filename"


def test_missing_file_size():
    with pytest.raises(PayloadMalformed) as info:
        decode_payload(0x10, bytes.fromhex("000161"))
    assert info.value.field == "file_size"


def test_trailing_bytes_are_malformed():
    body = encode_payload(GetReq("a")) + b"!"
    with pytest.raises(PayloadMalformed):
        decode_payload(Opcode.GET_REQ, body)


def test_invalid_utf8_filename():
    with pytest.raises(PayloadMalformed) as info:
        decode_payload(Opcode.GET_REQ, b"\x00\x02\xff\xfe")
    assert "UTF-8" in info.value.detail


def test_empty_data_payload_is_malformed():
    with pytest.raises(PayloadMalformed):
        decode_payload(Opcode.DATA, b"")


def test_unknown_opcode_rejected():
    with pytest.raises(ValueError):
        decode_payload(0x55, b"")


@settings(max_examples=1000)
@given(payloads)
def test_round_trip(payload):
    assert decode_payload(payload.OPCODE, encode_payload(payload)) == payload


@pytest.mark.parametrize("opcode", list(Opcode))
def test_round_trip_per_opcode(opcode):
    @settings(max_examples=1000)
    @given(STRATEGIES[opcode])
    def check(payload):
        assert payload.OPCODE is opcode
        assert decode_payload(opcode, encode_payload(payload)) == payload

    check()
