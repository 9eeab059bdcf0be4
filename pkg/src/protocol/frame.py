"""
CFT wire framing

Frame layout, all integers big-endian:

    offset  size  field
    0       2     magic            46 54 ("FT")
    2       1     version          01
    3       1     opcode
    4       4     declared_length  payload byte count, unsigned
    8       n     payload
    8+n     1     checksum         XOR-fold of the payload bytes

Decoding never raises on wire garbage: every deviation from the layout is
recorded as a Violation on the returned DecodeReport.
"""
import functools
import logging
import operator
import socket
import struct
import time
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Callable, List, Optional, Protocol, Set, Union

logger = logging.getLogger(__name__)

MAGIC = b"FT"
VERSION = 0x01
HEADER_FORMAT = "!2sBBI"
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)
FRAME_OVERHEAD = HEADER_SIZE + 1
FRAME_MARKER = MAGIC + bytes([VERSION])
MAX_DECLARED_LENGTH = 0xFFFFFFFF
SIGNED_THRESHOLD = 0x80000000
DEFAULT_READ_TIMEOUT = 2.0

assert HEADER_SIZE == 8, f"Header size mismatch: expected 8, got {HEADER_SIZE}"


class Opcode(IntEnum):
    """Defined CFT opcodes"""

    HELLO = 0x01
    OK = 0x02
    ERR = 0x03
    PUT_REQ = 0x10
    DATA = 0x11
    PUT_COMMIT = 0x12
    GET_REQ = 0x20
    FILE_INFO = 0x21
    BYE = 0x7F

    @classmethod
    def is_known(cls, value: int) -> bool:
        return value in cls._value2member_map_


def opcode_name(value: int) -> str:
    """Symbolic name of an opcode, hex for undefined ones"""
    if Opcode.is_known(value):
        return Opcode(value).name
    return f"0x{value:02X}"


class ViolationKind(str, Enum):
    """Ways a frame can deviate from the wire layout"""

    BAD_MAGIC = "bad-magic"
    BAD_VERSION = "bad-version"
    LENGTH_MISMATCH = "length-mismatch"
    BAD_CHECKSUM = "bad-checksum"
    UNKNOWN_OPCODE = "unknown-opcode"
    TRUNCATED = "truncated"
    OVERSIZE = "oversize"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    detail: str = ""


@dataclass(frozen=True, kw_only=True)
class Frame:
    """One wire message"""

    magic: bytes = MAGIC
    version: int = VERSION
    opcode: int
    declared_length: int
    payload: bytes
    checksum: int

    @property
    def opcode_name(self) -> str:
        return opcode_name(self.opcode)


@dataclass
class DecodeReport:
    """Outcome of reading one frame from a byte source"""

    frame: Optional[Frame] = None
    violations: List[Violation] = field(default_factory=list)
    consumed: int = 0
    raw: bytes = b""
    closed: bool = False
    timed_out: bool = False
    idle: bool = False
    opcode: Optional[int] = None
    declared_length: Optional[int] = None

    @property
    def well_formed(self) -> bool:
        return self.frame is not None and not self.violations

    @property
    def end_of_stream(self) -> bool:
        """Stream closed before a single byte of a new frame arrived"""
        return self.closed and self.consumed == 0

    def kinds(self) -> Set[ViolationKind]:
        return {violation.kind for violation in self.violations}

    def has(self, kind: ViolationKind) -> bool:
        return kind in self.kinds()


def checksum(payload: bytes) -> int:
    """XOR-fold of all payload bytes; 0x00 for an empty payload"""
    return functools.reduce(operator.xor, payload, 0)


def encode_frame(opcode: int, payload: bytes) -> bytes:
    """Emit a well-formed frame: header, payload, checksum"""
    if len(payload) > MAX_DECLARED_LENGTH:
        raise ValueError(f"payload of {len(payload)} bytes does not fit a 32-bit length")
    header = struct.pack(HEADER_FORMAT, MAGIC, VERSION, opcode, len(payload))
    return header + bytes(payload) + bytes([checksum(payload)])


def find_overrun(payload: bytes) -> Optional[int]:
    """
    Detect a frame whose declared length ran into the next frame.

    Returns the real payload length when the payload embeds a frame marker
    directly preceded by a byte that is the checksum of everything before it.
    """
    start = 1
    while True:
        position = payload.find(FRAME_MARKER, start)
        if position < 0:
            return None
        if payload[position - 1] == checksum(payload[: position - 1]):
            return position - 1
        start = position + 1


class ByteSource(Protocol):
    """Anything decode_frame can pull bytes from"""

    closed: bool
    timed_out: bool

    def read(self, n: int, deadline: Optional[float] = None) -> bytes:
        ...


class BufferSource:
    """In-memory byte source; running off the end behaves like EOF"""

    def __init__(self, data: bytes):
        self._data = bytes(data)
        self._position = 0
        self.closed = False
        self.timed_out = False

    def read(self, n: int, deadline: Optional[float] = None) -> bytes:
        chunk = self._data[self._position:self._position + n]
        self._position += len(chunk)
        if len(chunk) < n:
            self.closed = True
        return chunk

    @property
    def remaining(self) -> bytes:
        return self._data[self._position:]


class SocketSource:
    """Socket-backed byte source with per-read deadlines"""

    def __init__(self, sock: socket.socket, on_bytes: Optional[Callable[[bytes], None]] = None):
        self._sock = sock
        self._on_bytes = on_bytes
        self.closed = False
        self.timed_out = False

    def read(self, n: int, deadline: Optional[float] = None) -> bytes:
        self.timed_out = False
        buffer = bytearray()
        while len(buffer) < n and not self.closed:
            if deadline is not None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    self.timed_out = True
                    break
                self._sock.settimeout(remaining)
            else:
                self._sock.settimeout(None)
            try:
                chunk = self._sock.recv(min(n - len(buffer), 65536))
            except socket.timeout:
                self.timed_out = True
                break
            except OSError as e:
                logger.debug(f"recv failed, treating as closed: {e}")
                self.closed = True
                break
            if not chunk:
                self.closed = True
                break
            if self._on_bytes is not None:
                self._on_bytes(chunk)
            buffer += chunk
        return bytes(buffer)


def decode_frame(
    source: Union[ByteSource, bytes],
    timeout: Optional[float] = DEFAULT_READ_TIMEOUT,
    *,
    idle_timeout: Optional[float] = None,
    max_length: Optional[int] = None,
    signed_length: bool = False,
) -> DecodeReport:
    """
    Read one frame and report every violation found.

    Args:
        source: Byte source, or raw bytes to decode from memory
        timeout: Bound on the rest of the frame once its first byte arrived (None = unbounded)
        idle_timeout: Bound on the wait for the first byte (None = wait until data or EOF)
        max_length: Largest acceptable declared_length; larger frames are reported as oversize
        signed_length: Read declared_length as signed 32-bit (lengths >= 2^31 become negative)

    Returns:
        DecodeReport with the frame (when fully read) and its violations
    """
    if isinstance(source, (bytes, bytearray, memoryview)):
        source = BufferSource(bytes(source))

    report = DecodeReport()
    raw = bytearray()

    idle_deadline = None if idle_timeout is None else time.monotonic() + idle_timeout
    first = source.read(1, idle_deadline)
    if not first:
        report.closed = source.closed
        report.idle = not source.closed
        return report
    raw += first
    frame_deadline = None if timeout is None else time.monotonic() + timeout

    def finish() -> DecodeReport:
        report.raw = bytes(raw)
        report.consumed = len(raw)
        report.closed = source.closed
        return report

    def truncated(stage: str) -> DecodeReport:
        cause = "stream closed" if source.closed else "read timed out"
        report.timed_out = not source.closed
        report.violations.append(
            Violation(ViolationKind.TRUNCATED, f"{cause} during {stage} after {len(raw)} bytes")
        )
        return finish()

    raw += source.read(HEADER_SIZE - 1, frame_deadline)
    if len(raw) < HEADER_SIZE:
        return truncated("header")

    magic, version, opcode, declared = struct.unpack(HEADER_FORMAT, bytes(raw[:HEADER_SIZE]))
    report.opcode = opcode
    report.declared_length = declared
    if magic != MAGIC:
        report.violations.append(Violation(ViolationKind.BAD_MAGIC, f"expected {MAGIC.hex()}, got {magic.hex()}"))
    if version != VERSION:
        report.violations.append(Violation(ViolationKind.BAD_VERSION, f"expected 0x{VERSION:02X}, got 0x{version:02X}"))
    if not Opcode.is_known(opcode):
        report.violations.append(Violation(ViolationKind.UNKNOWN_OPCODE, f"opcode 0x{opcode:02X}"))

    to_read = declared
    if signed_length and declared >= SIGNED_THRESHOLD:
        to_read = 0
        report.violations.append(
            Violation(ViolationKind.LENGTH_MISMATCH, f"declared {declared - (1 << 32)} (signed), read 0 payload bytes")
        )
    elif max_length is not None and declared > max_length:
        report.violations.append(Violation(ViolationKind.OVERSIZE, f"declared {declared} exceeds {max_length}"))
        return finish()

    payload = source.read(to_read, frame_deadline)
    raw += payload
    if len(payload) < to_read:
        return truncated("payload")

    tail = source.read(1, frame_deadline)
    if not tail:
        return truncated("checksum")
    raw += tail

    expected = checksum(payload)
    if tail[0] != expected:
        report.violations.append(
            Violation(ViolationKind.BAD_CHECKSUM, f"expected 0x{expected:02X}, got 0x{tail[0]:02X}")
        )
        overrun = find_overrun(payload)
        if overrun is not None:
            report.violations.append(
                Violation(ViolationKind.LENGTH_MISMATCH, f"declared {declared}, frame ends after {overrun} payload bytes")
            )

    report.frame = Frame(
        magic=magic,
        version=version,
        opcode=opcode,
        declared_length=declared,
        payload=payload,
        checksum=tail[0],
    )
    return finish()
