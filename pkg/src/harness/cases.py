"""
Builtin attack cases

Every case opens a fresh session. Steps marked as judged are the ones the
signature is judged on; the steps before the first judged one are setup and must
be answered with Ok.
"""
import struct
from typing import Dict, List

from ..client import RawFrameSpec
from ..protocol import (
    ErrCode, Opcode, Hello, PutReq, Data, PutCommit, GetReq, Bye,
)
from ..server import CRASH_THRESHOLD, Flaw
from .bva import NumericField, bva_values
from .models import (
    AttackCase, Category, Exchange, Greet, PutFile, ReadBack, Reconnect, SignatureKind, VulnSignature,
)

BLOCK_SIZE_FIELD = NumericField(width=16, min=1, max=4096, nominal=512)
FILE_SIZE_FIELD = NumericField(width=32, min=0, max=16 * 1024 * 1024, nominal=1024)

OVERRUN_BLOCK_SIZE = 4
OVERRUNS = {"S": 16, "M": 128, "L": 300}
LONG_STRING_LENGTH = 60_000
BULK_BLOCKS = 5001

CONFIRM_CONTENT = b"confirmatory transfer: the quick brown fox\n"
BULK_CONTENT = bytes(i % 251 for i in range(BULK_BLOCKS))


def canary_in_reply(expected: ErrCode) -> VulnSignature:
    return VulnSignature(SignatureKind.CANARY_IN_REPLY, expected_err=expected)


def illegal_accept(expected: ErrCode) -> VulnSignature:
    return VulnSignature(SignatureKind.ILLEGAL_ACCEPT, expected_err=expected)


SIMULATED_CRASH = VulnSignature(SignatureKind.SIMULATED_CRASH)
SMEAR_REPLY = VulnSignature(SignatureKind.SMEAR_REPLY, expected_err=ErrCode.MALFORMED)
TRANSFER_INTACT = VulnSignature(SignatureKind.TRANSFER_INTACT)
DEBUG_DISCLOSURE = VulnSignature(SignatureKind.DEBUG_DISCLOSURE, expected_err=ErrCode.UNKNOWN_OP)


def _send(payload, judged: bool = False, **overrides) -> Exchange:
    return Exchange(RawFrameSpec.of(payload, **overrides), judged=judged)


def _judged(payload, **overrides) -> Exchange:
    return _send(payload, judged=True, **overrides)


def confirmatory_cases() -> List[AttackCase]:
    return [
        AttackCase(
            id="C-PUT-OK",
            category=Category.CONFIRMATORY_PUT,
            script=(
                Greet(),
                PutFile("confirm.txt", CONFIRM_CONTENT, 4),
                ReadBack("confirm.txt", CONFIRM_CONTENT),
                _send(Bye()),
            ),
            signature=TRANSFER_INTACT,
            description="correctly formatted PUT, then GET it back",
        ),
        AttackCase(
            id="C-BULK",
            category=Category.CONFIRMATORY_PUT,
            script=(
                Greet(),
                PutFile("bulk.bin", BULK_CONTENT, 1),
                ReadBack("bulk.bin", BULK_CONTENT),
                _send(Bye()),
            ),
            signature=TRANSFER_INTACT,
            description=f"PUT of {BULK_BLOCKS} one-byte Data frames",
        ),
    ]


def directory_cases() -> List[AttackCase]:
    return [
        AttackCase(
            id="C-DIR-1",
            category=Category.DIRECTORY_ATTACK,
            script=(Greet(), _judged(GetReq("../secret.txt"))),
            signature=canary_in_reply(ErrCode.PATH_DENIED),
            targets_flaw=Flaw.F1,
            description="GET of a file one level above the sandbox",
        ),
        AttackCase(
            id="C-DIR-2",
            category=Category.DIRECTORY_ATTACK,
            script=(Greet(), _judged(PutReq("/tmp/cft-absolute-target.bin", 4, 4)), _send(Bye())),
            signature=illegal_accept(ErrCode.PATH_DENIED),
            targets_flaw=Flaw.F1,
            description="PUT to an absolute path, abandoned before commit",
        ),
        AttackCase(
            id="C-DIR-3",
            category=Category.DIRECTORY_ATTACK,
            script=(Greet(), _judged(GetReq("a/../../secret.txt"))),
            signature=canary_in_reply(ErrCode.PATH_DENIED),
            targets_flaw=Flaw.F1,
            description="GET through a nested parent-directory path",
        ),
        AttackCase(
            id="C-DIR-4",
            category=Category.DIRECTORY_ATTACK,
            script=(Greet(), _judged(PutReq("../planted.txt", 4, 4)), _send(Bye())),
            signature=illegal_accept(ErrCode.PATH_DENIED),
            targets_flaw=Flaw.F1,
            description="PUT one level above the sandbox, abandoned before commit",
        ),
    ]


def overrun_cases() -> List[AttackCase]:
    cases = []
    for size, overrun in OVERRUNS.items():
        signature = SIMULATED_CRASH if overrun > CRASH_THRESHOLD else canary_in_reply(ErrCode.FRAME_TOO_LARGE)
        cases.append(AttackCase(
            id=f"C-OVR-{size}",
            category=Category.LONG_STRINGS,
            script=(
                Greet(),
                _send(PutReq(f"overrun-{size.lower()}.bin", OVERRUN_BLOCK_SIZE, OVERRUN_BLOCK_SIZE)),
                _judged(Data(0, b"A" * (OVERRUN_BLOCK_SIZE + overrun))),
            ),
            signature=signature,
            targets_flaw=Flaw.F2,
            description=f"Data block {overrun} bytes longer than block_size",
        ))
    return cases


def length_cases() -> List[AttackCase]:
    return [
        AttackCase(
            id="C-LEN-UP",
            category=Category.MALFORMED_SEQUENCE,
            script=(_judged(Hello("smear"), declared_length=len(b"smear") + 5), _judged(Bye())),
            signature=SMEAR_REPLY,
            targets_flaw=Flaw.F3,
            description="declared_length 5 past the payload, followed by Bye",
        ),
        AttackCase(
            id="C-LEN-DOWN",
            category=Category.MALFORMED_SEQUENCE,
            script=(_judged(Hello("smear-down"), declared_length=5),),
            signature=SMEAR_REPLY,
            targets_flaw=Flaw.F3,
            description="declared_length shorter than the payload",
        ),
    ]


def _block_size_case(value: int) -> AttackCase:
    if value == 0:
        signature, flaw = SIMULATED_CRASH, Flaw.F4
    elif value > BLOCK_SIZE_FIELD.max:
        signature = illegal_accept(ErrCode.INVALID_VALUE)
        flaw = Flaw.F4 if value >= 1 << (BLOCK_SIZE_FIELD.width - 1) else None
    else:
        signature, flaw = SIMULATED_CRASH, None
    return AttackCase(
        id=f"C-NUM-BS-{value}",
        category=Category.BVA,
        script=(Greet(), _judged(PutReq(f"bva-bs-{value}.bin", 1024, value))),
        signature=signature,
        targets_flaw=flaw,
        description=f"PutReq with block_size {value}",
    )


def _file_size_case(value: int) -> AttackCase:
    if value > FILE_SIZE_FIELD.max:
        signature = illegal_accept(ErrCode.FRAME_TOO_LARGE)
        flaw = Flaw.F4 if value >= 1 << (FILE_SIZE_FIELD.width - 1) else None
    else:
        signature, flaw = SIMULATED_CRASH, None
    return AttackCase(
        id=f"C-NUM-FS-{value}",
        category=Category.BVA,
        script=(Greet(), _judged(PutReq(f"bva-fs-{value}.bin", value, 512))),
        signature=signature,
        targets_flaw=flaw,
        description=f"PutReq with file_size {value}",
    )


def numeric_cases() -> List[AttackCase]:
    cases = [_block_size_case(value) for value in bva_values(BLOCK_SIZE_FIELD)]
    cases += [_file_size_case(value) for value in bva_values(FILE_SIZE_FIELD)]
    cases += [
        AttackCase(
            id="C-NUM-FS-NEG",
            category=Category.EXTREME_NUMERICS,
            script=(Greet(), _judged(PutReq("negative.bin", 0xC0000000, 512))),
            signature=illegal_accept(ErrCode.FRAME_TOO_LARGE),
            targets_flaw=Flaw.F4,
            description="file_size that reads as -1073741824 when signed",
        ),
        AttackCase(
            id="C-NUM-LEN-NEG",
            category=Category.EXTREME_NUMERICS,
            script=(_judged(Hello(""), declared_length=0x80000000),),
            signature=illegal_accept(ErrCode.FRAME_TOO_LARGE),
            targets_flaw=Flaw.F4,
            description="declared_length 0x80000000 with an empty payload",
        ),
    ]
    return cases


def _residue_case(case_id: str, greet_before_judged: bool) -> AttackCase:
    marker = f"RESIDUE-{case_id}".encode("ascii")
    second = (Greet(),) if greet_before_judged else ()
    return AttackCase(
        id=case_id,
        category=Category.MALFORMED_SEQUENCE,
        script=(
            Greet(),
            PutFile(f"{case_id.lower()}.bin", marker, len(marker)),
            _send(Bye()),
            Reconnect(),
            *second,
            _judged(Data(0, b"stale000")),
        ),
        signature=VulnSignature(SignatureKind.STALE_RESIDUE, expected_err=ErrCode.BAD_SEQUENCE, marker=marker),
        targets_flaw=Flaw.F5,
        description="Data with no transfer open, after another session stored a marker block",
    )


def sequence_cases() -> List[AttackCase]:
    return [
        _residue_case("C-SEQ-DATA-BEFORE-HELLO", greet_before_judged=False),
        _residue_case("C-SEQ-DATA-BEFORE-PUT", greet_before_judged=True),
        AttackCase(
            id="C-SEQ-DOUBLE-COMMIT",
            category=Category.MALFORMED_SEQUENCE,
            script=(
                Greet(),
                _send(PutReq("double.bin", 4, 4)),
                _send(Data(0, b"abcd")),
                _send(PutCommit()),
                _judged(PutCommit()),
            ),
            signature=illegal_accept(ErrCode.BAD_SEQUENCE),
            targets_flaw=Flaw.F5,
            description="second PutCommit after a completed transfer",
        ),
        AttackCase(
            id="C-SEQ-PUT-IN-TRANSFER",
            category=Category.MALFORMED_SEQUENCE,
            script=(Greet(), _send(PutReq("first.bin", 4, 4)), _judged(PutReq("second.bin", 4, 4))),
            signature=illegal_accept(ErrCode.BAD_SEQUENCE),
            targets_flaw=Flaw.F5,
            description="PutReq while a transfer is open",
        ),
    ]


def opcode_cases() -> List[AttackCase]:
    undefined = [op for op in range(256) if not Opcode.is_known(op)]
    return [
        AttackCase(
            id="C-OPC-UNKNOWN",
            category=Category.MALFORMED_SEQUENCE,
            script=(Greet(), *(Exchange(RawFrameSpec(opcode=op), judged=True) for op in undefined)),
            signature=DEBUG_DISCLOSURE,
            targets_flaw=Flaw.F6,
            description=f"sweep over the {len(undefined)} undefined opcodes",
        ),
    ]


def missing_value_cases() -> List[AttackCase]:
    filename = b"missing.bin"
    return [
        AttackCase(
            id="C-MISSING-FILESIZE",
            category=Category.MISSING_VALUES,
            script=(
                Greet(),
                Exchange(RawFrameSpec(Opcode.PUT_REQ, struct.pack("!H", len(filename)) + filename), judged=True),
            ),
            signature=illegal_accept(ErrCode.MALFORMED),
            description="PutReq cut off before file_size",
        ),
        AttackCase(
            id="C-MISSING-DATA",
            category=Category.MISSING_VALUES,
            script=(Greet(), _send(PutReq("missing-data.bin", 4, 4)), Exchange(RawFrameSpec(Opcode.DATA), judged=True)),
            signature=illegal_accept(ErrCode.MALFORMED),
            description="Data frame with an empty payload",
        ),
        AttackCase(
            id="C-MISSING-FILENAME",
            category=Category.MISSING_VALUES,
            script=(Greet(), Exchange(RawFrameSpec(Opcode.GET_REQ), judged=True)),
            signature=illegal_accept(ErrCode.MALFORMED),
            description="GetReq with an empty payload",
        ),
    ]


def long_string_cases() -> List[AttackCase]:
    return [
        AttackCase(
            id="C-LONG-1",
            category=Category.LONG_STRINGS,
            script=(Greet(), _judged(PutReq("L" * LONG_STRING_LENGTH, 4, 4))),
            signature=illegal_accept(ErrCode.INVALID_VALUE),
            description=f"filename of {LONG_STRING_LENGTH} bytes",
        ),
        AttackCase(
            id="C-LONG-2",
            category=Category.LONG_STRINGS,
            script=(_judged(Hello("H" * LONG_STRING_LENGTH)),),
            signature=SIMULATED_CRASH,
            description=f"Hello client id of {LONG_STRING_LENGTH} bytes",
        ),
    ]


def builtin_cases() -> List[AttackCase]:
    """The full attack suite, in run order"""
    return [
        *confirmatory_cases(),
        *directory_cases(),
        *overrun_cases(),
        *length_cases(),
        *numeric_cases(),
        *sequence_cases(),
        *opcode_cases(),
        *missing_value_cases(),
        *long_string_cases(),
    ]


def cases_by_id() -> Dict[str, AttackCase]:
    return {case.id: case for case in builtin_cases()}
