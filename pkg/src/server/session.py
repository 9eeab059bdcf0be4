"""
Session state machine for the reference server, including the seeded flaws

Memory unsafety is simulated: a block buffer of block_size bytes sits next
to an "adjacent memory" region filled with the canary secret, and a residue
pool keeps the last block written by any session. The flaws in FlawSet
decide whether those regions ever reach the wire.
"""
import logging
import os
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Set, Union

from ..protocol import (
    ByteSource, DecodeReport, ErrCode, Opcode, PayloadMalformed, ViolationKind, CFTError,
    Hello, Ok, Err, PutReq, Data, PutCommit, GetReq, FileInfo, Bye,
    decode_frame, decode_payload, encode_frame, encode_payload,
)
from ..protocol.frame import SIGNED_THRESHOLD
from .config import ServerConfig

logger = logging.getLogger(__name__)

LEAK_WINDOW = 64
CRASH_THRESHOLD = 256
ADJACENT_REGION_SIZE = 512
RESIDUE_POOL_SIZE = 256


class Phase(str, Enum):
    START = "Start"
    GREETED = "Greeted"
    TRANSFERRING = "Transferring"
    CLOSED = "Closed"


class SessionEventKind(str, Enum):
    LEAK = "leak"
    SIMULATED_CRASH = "simulated-crash"
    SEQUENCE_ACCEPTED_ILLEGALLY = "sequence-accepted-illegally"


@dataclass(frozen=True)
class SessionEvent:
    kind: SessionEventKind
    data: bytes = b""
    detail: str = ""


@dataclass
class Transfer:
    """Bookkeeping for one PUT in progress"""

    filename: str
    path: Path
    file_size: int
    block_size: int
    block_count: int
    blocks_received: Set[int] = field(default_factory=set)
    blocks: Dict[int, bytes] = field(default_factory=dict)
    buffer: bytearray = field(default_factory=bytearray)


@dataclass
class SessionState:
    """Protocol position of one connection"""

    session_id: int = 0
    peer: str = ""
    phase: Phase = Phase.START
    transfer: Optional[Transfer] = None


@dataclass
class HandleResult:
    """New state, outbound frames and events produced by one inbound frame"""

    state: SessionState
    replies: List[bytes] = field(default_factory=list)
    events: List[SessionEvent] = field(default_factory=list)
    close: bool = False

    @property
    def crashed(self) -> bool:
        return any(event.kind is SessionEventKind.SIMULATED_CRASH for event in self.events)


class PathDenied(CFTError):
    """Filename rejected by the sandbox rules"""


class ResiduePool:
    """Block staging memory shared by every session and never cleared"""

    def __init__(self, size: int = RESIDUE_POOL_SIZE):
        self._region = bytearray(size)
        self._lock = threading.Lock()

    def _write(self, data: bytes) -> None:
        count = min(len(data), len(self._region))
        self._region[:count] = data[:count]

    def absorb(self, data: bytes) -> None:
        with self._lock:
            self._write(data)

    def exchange(self, data: bytes) -> bytes:
        """Return the current residue window, then write data over it"""
        with self._lock:
            previous = bytes(self._region[:LEAK_WINDOW])
            self._write(data)
            return previous

    def snapshot(self) -> bytes:
        with self._lock:
            return bytes(self._region)


def adjacent_region(canary: str, size: int = ADJACENT_REGION_SIZE) -> bytes:
    """Simulated memory lying right after a block buffer: the canary, repeated"""
    encoded = canary.encode("utf-8")
    return (encoded * (size // len(encoded) + 1))[:size]


class ServerContext:
    """State shared by all sessions of one server"""

    def __init__(self, config: ServerConfig, pool: Optional[ResiduePool] = None):
        self.config = config
        self.pool = pool or ResiduePool()
        self.adjacent_memory = adjacent_region(config.canary_secret)
        self._sessions: Dict[int, SessionState] = {}
        self._next_id = 1
        self._lock = threading.Lock()

    def register(self, peer: str) -> SessionState:
        with self._lock:
            state = SessionState(session_id=self._next_id, peer=peer)
            self._sessions[state.session_id] = state
            self._next_id += 1
        return state

    def unregister(self, state: SessionState) -> None:
        with self._lock:
            self._sessions.pop(state.session_id, None)

    def session_table(self) -> str:
        with self._lock:
            rows = [f"#{s.session_id} {s.phase.value} {s.peer}" for s in self._sessions.values()]
        return "[" + ", ".join(rows) + "]"


def read_frame(source: ByteSource, config: ServerConfig) -> DecodeReport:
    """Read the next inbound frame the way this server's flaw set dictates"""
    flaws = config.flaws
    return decode_frame(
        source,
        timeout=None if flaws.f3_length_smearing else config.read_timeout,
        max_length=config.max_frame_length,
        signed_length=flaws.f4_signed_confusion,
    )


def resolve_path(root: Union[str, Path], filename: str, traversal_flaw: bool = False) -> Path:
    """
    Map a client filename onto the sandbox.

    With the traversal flaw the name is joined naively, so ".." segments and
    absolute names escape the root. Otherwise absolute names, ".." segments,
    NUL bytes and anything resolving outside the root raise PathDenied.
    """
    if traversal_flaw:
        return Path(os.path.normpath(os.path.join(root, filename)))

    if "\x00" in filename:
        raise PathDenied("NUL byte in filename")
    if os.path.isabs(filename) or filename.startswith(("/", "\\")):
        raise PathDenied("absolute path")
    if ".." in re.split(r"[\\/]", filename):
        raise PathDenied("parent directory segment")

    base = Path(root).resolve()
    candidate = (base / filename).resolve()
    if not candidate.is_relative_to(base):
        raise PathDenied("path resolves outside the sandbox")
    return candidate


def _ok(message: str) -> bytes:
    return encode_frame(Opcode.OK, encode_payload(Ok(message)))


def _err(code: ErrCode, message: str) -> bytes:
    return encode_frame(Opcode.ERR, encode_payload(Err(code, message)))


def _fail(result: HandleResult, code: ErrCode, message: str, close: bool = False) -> HandleResult:
    logger.debug(f"session {result.state.session_id}: Err {code.name}: {message}")
    result.replies.append(_err(code, message))
    if close:
        result.close = True
        result.state.phase = Phase.CLOSED
    return result


def _crash(result: HandleResult, detail: str) -> HandleResult:
    result.events.append(SessionEvent(SessionEventKind.SIMULATED_CRASH, detail=detail))
    result.close = True
    result.state.phase = Phase.CLOSED
    result.state.transfer = None
    return result


def _signed(value: int, bits: int) -> int:
    return value - (1 << bits) if value >= 1 << (bits - 1) else value


def handle_frame(
    state: SessionState,
    report: DecodeReport,
    config: ServerConfig,
    context: Optional[ServerContext] = None,
) -> HandleResult:
    """
    Apply one decoded frame to a session.

    The state is updated in place and returned on the result together with
    the encoded reply frames and any leak / crash / illegal-sequence events.
    Under a hardened flaw set every non-conforming frame yields exactly one
    Err reply.
    """
    context = context or ServerContext(config)
    flaws = config.flaws
    result = HandleResult(state)

    if report.idle:
        return result
    if report.end_of_stream:
        state.phase = Phase.CLOSED
        result.close = True
        return result

    kinds = report.kinds()
    details = "; ".join(f"{v.kind.value}: {v.detail}" for v in report.violations)

    if kinds & {ViolationKind.BAD_MAGIC, ViolationKind.BAD_VERSION}:
        return _fail(result, ErrCode.MALFORMED, f"framing lost ({details})", close=True)
    if ViolationKind.OVERSIZE in kinds:
        return _fail(result, ErrCode.FRAME_TOO_LARGE, details, close=True)
    if ViolationKind.TRUNCATED in kinds:
        return _fail(result, ErrCode.MALFORMED, details, close=report.closed)

    tolerated = set()
    if flaws.f3_length_smearing:
        tolerated |= {ViolationKind.BAD_CHECKSUM, ViolationKind.LENGTH_MISMATCH}
    if flaws.f4_signed_confusion and (report.declared_length or 0) >= SIGNED_THRESHOLD:
        tolerated.add(ViolationKind.LENGTH_MISMATCH)
    if (kinds & {ViolationKind.BAD_CHECKSUM, ViolationKind.LENGTH_MISMATCH}) - tolerated:
        return _fail(result, ErrCode.MALFORMED, details)

    frame = report.frame
    if ViolationKind.UNKNOWN_OPCODE in kinds:
        if flaws.f6_debug_disclosure:
            return _debug_dump(result, frame.opcode, config, context)
        return _fail(result, ErrCode.UNKNOWN_OP, f"unknown opcode 0x{frame.opcode:02X}")

    try:
        payload = decode_payload(frame.opcode, frame.payload)
    except PayloadMalformed as e:
        return _fail(result, ErrCode.MALFORMED, str(e))

    return _dispatch(result, payload, config, context)


def _dispatch(result: HandleResult, payload, config: ServerConfig, context: ServerContext) -> HandleResult:
    state = result.state
    flaws = config.flaws
    phase = state.phase

    if isinstance(payload, Bye):
        state.phase = Phase.CLOSED
        state.transfer = None
        result.replies.append(_ok("bye"))
        result.close = True
        return result

    if isinstance(payload, (Ok, Err, FileInfo)):
        return _fail(result, ErrCode.BAD_SEQUENCE, f"{payload.OPCODE.name} is a server reply")

    if isinstance(payload, Hello):
        if phase is not Phase.START:
            return _fail(result, ErrCode.BAD_SEQUENCE, "session already greeted")
        state.phase = Phase.GREETED
        result.replies.append(_ok(f"welcome {payload.client_id}"))
        return result

    if isinstance(payload, Data):
        if phase is Phase.TRANSFERRING:
            return write_block(state, payload, config, context, result)
        if flaws.f5_sequence_lax:
            return _stale_write(result, payload, context)
        return _fail(result, ErrCode.BAD_SEQUENCE, f"DATA not allowed in phase {phase.value}")

    if phase is Phase.START:
        return _fail(result, ErrCode.BAD_SEQUENCE, "HELLO required first")

    if isinstance(payload, PutReq):
        if phase is Phase.TRANSFERRING and not flaws.f5_sequence_lax:
            return _fail(result, ErrCode.BAD_SEQUENCE, "transfer already in progress")
        illegal = phase is Phase.TRANSFERRING
        result = _open_transfer(result, payload, config)
        if illegal and state.phase is Phase.TRANSFERRING:
            result.events.append(SessionEvent(SessionEventKind.SEQUENCE_ACCEPTED_ILLEGALLY, detail="PUT_REQ inside transfer"))
        return result

    if isinstance(payload, PutCommit):
        if phase is Phase.TRANSFERRING:
            return _commit(result)
        if flaws.f5_sequence_lax:
            result.events.append(SessionEvent(SessionEventKind.SEQUENCE_ACCEPTED_ILLEGALLY, detail="PUT_COMMIT without transfer"))
            result.replies.append(_ok("committed 0 bytes"))
            return result
        return _fail(result, ErrCode.BAD_SEQUENCE, "no transfer to commit")

    if isinstance(payload, GetReq):
        if phase is not Phase.GREETED:
            return _fail(result, ErrCode.BAD_SEQUENCE, f"GET_REQ not allowed in phase {phase.value}")
        return _serve_file(result, payload, config)

    return _fail(result, ErrCode.UNKNOWN_OP, f"unhandled payload {payload!r}")


def _check_filename(result: HandleResult, filename: str, config: ServerConfig) -> Optional[Path]:
    """Resolve a filename, appending the Err reply and returning None when it is refused"""
    if not filename:
        _fail(result, ErrCode.INVALID_VALUE, "empty filename")
        return None
    length = len(filename.encode("utf-8"))
    if length > config.max_filename_length:
        _fail(result, ErrCode.INVALID_VALUE, f"filename of {length} bytes exceeds {config.max_filename_length}")
        return None
    try:
        return resolve_path(config.sandbox_root, filename, config.flaws.f1_path_traversal)
    except PathDenied as e:
        _fail(result, ErrCode.PATH_DENIED, str(e))
        return None


def _open_transfer(result: HandleResult, request: PutReq, config: ServerConfig) -> HandleResult:
    state = result.state
    flaws = config.flaws

    path = _check_filename(result, request.filename, config)
    if path is None:
        return result

    file_size = request.file_size
    block_size = request.block_size
    if flaws.f4_signed_confusion:
        file_size = _signed(file_size, 32)
        block_size = _signed(block_size, 16)
        try:
            block_count = -(-file_size // block_size)
        except ZeroDivisionError:
            return _crash(result, "block count division by zero")
    elif block_size == 0:
        return _fail(result, ErrCode.INVALID_VALUE, "block_size must be at least 1")
    else:
        block_count = -(-file_size // block_size)

    if block_size > config.max_block_size:
        return _fail(result, ErrCode.INVALID_VALUE, f"block_size {block_size} exceeds {config.max_block_size}")
    if file_size > config.max_file_size:
        return _fail(result, ErrCode.FRAME_TOO_LARGE, f"file_size {file_size} exceeds {config.max_file_size}")

    state.transfer = Transfer(
        filename=request.filename,
        path=path,
        file_size=file_size,
        block_size=block_size,
        block_count=block_count,
        buffer=bytearray(max(block_size, 0)),
    )
    state.phase = Phase.TRANSFERRING
    result.replies.append(_ok(f"ready for {block_count} blocks"))
    return result


def _store(transfer: Transfer, index: int, data: bytes, context: ServerContext) -> None:
    transfer.buffer[:len(data)] = data
    transfer.blocks[index] = data
    transfer.blocks_received.add(index)
    context.pool.absorb(data)


def write_block(
    state: SessionState,
    payload: Data,
    config: ServerConfig,
    context: Optional[ServerContext] = None,
    result: Optional[HandleResult] = None,
) -> HandleResult:
    """
    Copy one Data block into the transfer buffer.

    Hardened: data longer than block_size is refused with FRAME_TOO_LARGE and
    an out-of-range index with INVALID_VALUE. With the overrun flaw the extra
    bytes spill past the buffer: the reply carries up to LEAK_WINDOW bytes of
    adjacent memory, and an overrun beyond CRASH_THRESHOLD aborts the session.
    """
    context = context or ServerContext(config)
    result = result or HandleResult(state)
    transfer = state.transfer
    size = len(payload.data)
    index = payload.block_index

    if size > transfer.block_size:
        if not config.flaws.f2_overrun_leak:
            return _fail(result, ErrCode.FRAME_TOO_LARGE, f"block of {size} bytes exceeds block_size {transfer.block_size}")
        overrun = size - max(transfer.block_size, 0)
        if overrun > CRASH_THRESHOLD:
            return _crash(result, f"block overran its buffer by {overrun} bytes")
        leaked = context.adjacent_memory[:min(overrun, LEAK_WINDOW)]
        if 0 <= index < transfer.block_count:
            _store(transfer, index, payload.data[:transfer.block_size], context)
        result.events.append(SessionEvent(SessionEventKind.LEAK, data=leaked, detail=f"overrun of {overrun} bytes"))
        result.replies.append(_ok(f"stored block {index} ({size} bytes) {leaked.decode('utf-8', 'replace')}"))
        return result

    if index >= transfer.block_count:
        return _fail(result, ErrCode.INVALID_VALUE, f"block index {index} outside 0..{transfer.block_count - 1}")

    _store(transfer, index, payload.data, context)
    result.replies.append(_ok(f"stored block {index} ({size} bytes)"))
    return result


def _stale_write(result: HandleResult, payload: Data, context: ServerContext) -> HandleResult:
    residue = context.pool.exchange(payload.data)
    result.events.append(SessionEvent(SessionEventKind.SEQUENCE_ACCEPTED_ILLEGALLY, detail="DATA without transfer"))
    result.events.append(SessionEvent(SessionEventKind.LEAK, data=residue, detail="pooled buffer residue"))
    result.replies.append(
        _ok(f"stored block {payload.block_index} ({len(payload.data)} bytes) {residue.decode('utf-8', 'replace')}")
    )
    return result


def _commit(result: HandleResult) -> HandleResult:
    state = result.state
    transfer = state.transfer
    state.transfer = None
    state.phase = Phase.GREETED

    count = max(transfer.block_count, 0)
    missing = [i for i in range(count) if i not in transfer.blocks_received]
    if missing:
        return _fail(result, ErrCode.INVALID_VALUE, f"missing {len(missing)} of {count} blocks")
    content = b"".join(transfer.blocks[i] for i in range(count))
    if len(content) != transfer.file_size:
        return _fail(result, ErrCode.INVALID_VALUE, f"received {len(content)} bytes, announced {transfer.file_size}")

    try:
        transfer.path.parent.mkdir(parents=True, exist_ok=True)
        transfer.path.write_bytes(content)
    except (OSError, ValueError) as e:
        return _fail(result, ErrCode.INVALID_VALUE, f"cannot store {transfer.filename}: {e}")

    logger.info(f"session {state.session_id}: stored {transfer.filename} ({len(content)} bytes)")
    result.replies.append(_ok(f"committed {len(content)} bytes"))
    return result


def _serve_file(result: HandleResult, request: GetReq, config: ServerConfig) -> HandleResult:
    path = _check_filename(result, request.filename, config)
    if path is None:
        return result
    try:
        content = path.read_bytes()
    except (OSError, ValueError):
        return _fail(result, ErrCode.INVALID_VALUE, f"cannot read {request.filename}")

    result.replies.append(encode_frame(Opcode.FILE_INFO, encode_payload(FileInfo(len(content)))))
    step = config.max_block_size
    for index, offset in enumerate(range(0, len(content), step)):
        chunk = content[offset:offset + step]
        result.replies.append(encode_frame(Opcode.DATA, encode_payload(Data(index, chunk))))
    result.replies.append(_ok(f"sent {len(content)} bytes"))
    return result


def _debug_dump(result: HandleResult, opcode: int, config: ServerConfig, context: ServerContext) -> HandleResult:
    dump = (
        f"debug: unknown opcode 0x{opcode:02X}; root={Path(config.sandbox_root).resolve()}; "
        f"sessions={context.session_table()}; "
        f"config=flaws:{config.flaws} canary:{config.canary_secret} max_file_size:{config.max_file_size}"
    )
    result.events.append(SessionEvent(SessionEventKind.LEAK, data=dump.encode("utf-8"), detail="debug dump"))
    result.replies.append(_ok(dump))
    return result
