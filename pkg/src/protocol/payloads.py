"""
Typed payload bodies for each CFT opcode

    Hello      client_id (UTF-8, rest of payload)
    Ok         message (UTF-8, rest of payload)
    Err        code u8, message (UTF-8, rest of payload)
    PutReq     filename_len u16, filename, file_size u32, block_size u16
    Data       block_index u32, data (rest of payload)
    PutCommit  empty
    GetReq     filename_len u16, filename
    FileInfo   file_size u32
    Bye        empty
"""
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import ClassVar, Tuple, Union

from .errors import PayloadMalformed
from .frame import Opcode


class ErrCode(IntEnum):
    """Error codes carried by Err replies"""

    UNKNOWN_OP = 0x01
    BAD_SEQUENCE = 0x02
    PATH_DENIED = 0x03
    INVALID_VALUE = 0x04
    FRAME_TOO_LARGE = 0x05
    MALFORMED = 0x06


@dataclass(frozen=True)
class Hello:
    OPCODE: ClassVar[Opcode] = Opcode.HELLO
    client_id: str


@dataclass(frozen=True)
class Ok:
    OPCODE: ClassVar[Opcode] = Opcode.OK
    message: str


@dataclass(frozen=True)
class Err:
    OPCODE: ClassVar[Opcode] = Opcode.ERR
    code: int
    message: str


@dataclass(frozen=True)
class PutReq:
    OPCODE: ClassVar[Opcode] = Opcode.PUT_REQ
    filename: str
    file_size: int
    block_size: int


@dataclass(frozen=True)
class Data:
    OPCODE: ClassVar[Opcode] = Opcode.DATA
    block_index: int
    data: bytes


@dataclass(frozen=True)
class PutCommit:
    OPCODE: ClassVar[Opcode] = Opcode.PUT_COMMIT


@dataclass(frozen=True)
class GetReq:
    OPCODE: ClassVar[Opcode] = Opcode.GET_REQ
    filename: str


@dataclass(frozen=True)
class FileInfo:
    OPCODE: ClassVar[Opcode] = Opcode.FILE_INFO
    file_size: int


@dataclass(frozen=True)
class Bye:
    OPCODE: ClassVar[Opcode] = Opcode.BYE


OpPayload = Union[Hello, Ok, Err, PutReq, Data, PutCommit, GetReq, FileInfo, Bye]


def _text(value: str) -> bytes:
    return value.encode("utf-8")


def _prefixed(value: str) -> bytes:
    encoded = _text(value)
    if len(encoded) > 0xFFFF:
        raise ValueError(f"text of {len(encoded)} bytes does not fit a 16-bit length prefix")
    return struct.pack("!H", len(encoded)) + encoded


def encode_payload(payload: OpPayload) -> bytes:
    """Serialize a typed payload into its wire body"""
    if isinstance(payload, Hello):
        return _text(payload.client_id)
    if isinstance(payload, Ok):
        return _text(payload.message)
    if isinstance(payload, Err):
        return bytes([payload.code]) + _text(payload.message)
    if isinstance(payload, PutReq):
        return _prefixed(payload.filename) + struct.pack("!IH", payload.file_size, payload.block_size)
    if isinstance(payload, Data):
        return struct.pack("!I", payload.block_index) + bytes(payload.data)
    if isinstance(payload, GetReq):
        return _prefixed(payload.filename)
    if isinstance(payload, FileInfo):
        return struct.pack("!I", payload.file_size)
    if isinstance(payload, (PutCommit, Bye)):
        return b""
    raise TypeError(f"not a CFT payload: {payload!r}")


class _Reader:
    """Cursor over a payload body that names the field on failure"""

    def __init__(self, body: bytes):
        self.body = body
        self.offset = 0

    def take(self, size: int, name: str) -> bytes:
        end = self.offset + size
        if end > len(self.body):
            raise PayloadMalformed(name, f"needs {size} bytes, {len(self.body) - self.offset} present")
        chunk = self.body[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, name: str) -> Tuple[int, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), name))

    def text(self, size: int, name: str) -> str:
        chunk = self.take(size, name)
        try:
            return chunk.decode("utf-8")
        except UnicodeDecodeError as e:
            raise PayloadMalformed(name, f"invalid UTF-8 at byte {e.start}") from e

    def prefixed_text(self, name: str) -> str:
        (size,) = self.unpack("!H", f"{name} length")
        return self.text(size, name)

    def rest(self) -> bytes:
        chunk = self.body[self.offset:]
        self.offset = len(self.body)
        return chunk

    def rest_text(self, name: str) -> str:
        return self.text(len(self.body) - self.offset, name)

    def done(self) -> None:
        if self.offset != len(self.body):
            raise PayloadMalformed("trailer", f"{len(self.body) - self.offset} unexpected trailing bytes")


def decode_payload(opcode: int, body: bytes) -> OpPayload:
    """
    Parse a wire body into its typed payload.

    Raises:
        PayloadMalformed: the body is short, overlong or holds invalid UTF-8
        ValueError: the opcode is not defined
    """
    if not Opcode.is_known(opcode):
        raise ValueError(f"undefined opcode 0x{opcode:02X}")
    reader = _Reader(bytes(body))
    op = Opcode(opcode)

    if op is Opcode.HELLO:
        return Hello(reader.rest_text("client_id"))
    if op is Opcode.OK:
        return Ok(reader.rest_text("message"))
    if op is Opcode.ERR:
        (code,) = reader.unpack("!B", "code")
        return Err(code, reader.rest_text("message"))
    if op is Opcode.PUT_REQ:
        filename = reader.prefixed_text("filename")
        (file_size,) = reader.unpack("!I", "file_size")
        (block_size,) = reader.unpack("!H", "block_size")
        reader.done()
        return PutReq(filename, file_size, block_size)
    if op is Opcode.DATA:
        (block_index,) = reader.unpack("!I", "block_index")
        return Data(block_index, reader.rest())
    if op is Opcode.GET_REQ:
        filename = reader.prefixed_text("filename")
        reader.done()
        return GetReq(filename)
    if op is Opcode.FILE_INFO:
        (file_size,) = reader.unpack("!I", "file_size")
        reader.done()
        return FileInfo(file_size)

    reader.done()
    return PutCommit() if op is Opcode.PUT_COMMIT else Bye()
