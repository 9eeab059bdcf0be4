"""
CFT client: an honest session API plus a stateless subversion layer

The honest methods mirror the server state machine and refuse to run out of
phase. send_raw / receive bypass all of that and put whatever a RawFrameSpec
describes on the wire.
"""
import logging
import socket
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple, Union

from ..protocol import (
    ConnectError, DecodeReport, ErrCode, ProtocolStateError, SocketSource, PayloadMalformed,
    Hello, Ok, Err, PutReq, Data, PutCommit, GetReq, FileInfo, Bye, OpPayload,
    decode_frame, decode_payload, encode_frame, encode_payload,
)
from ..trace import Direction, TraceSink
from .raw import RawFrameSpec

logger = logging.getLogger(__name__)

DEFAULT_RECEIVE_TIMEOUT = 3.0
DEFAULT_CONNECT_TIMEOUT = 3.0


@dataclass(frozen=True)
class Reply:
    report: DecodeReport

    @property
    def payload(self) -> Optional[OpPayload]:
        """Typed payload of a well-formed reply, None otherwise"""
        frame = self.report.frame
        if frame is None or self.report.violations:
            return None
        try:
            return decode_payload(frame.opcode, frame.payload)
        except (PayloadMalformed, ValueError):
            return None

    @property
    def is_ok(self) -> bool:
        return isinstance(self.payload, Ok)

    @property
    def err_code(self) -> Optional[int]:
        payload = self.payload
        return payload.code if isinstance(payload, Err) else None


@dataclass(frozen=True)
class Closed:
    pass


@dataclass(frozen=True)
class Timeout:
    pass


ServerEvent = Union[Reply, Closed, Timeout]


class ClientPhase(str, Enum):
    START = "Start"
    GREETED = "Greeted"
    CLOSED = "Closed"


@dataclass
class TransferResult:
    """Outcome of an honest PUT or GET"""

    ok: bool = False
    replies: List[ServerEvent] = field(default_factory=list)
    err_code: Optional[int] = None
    message: str = ""
    aborted: bool = False
    content: bytes = b""
    frames_sent: int = 0

    @property
    def err_name(self) -> Optional[str]:
        if self.err_code is None:
            return None
        try:
            return ErrCode(self.err_code).name
        except ValueError:
            return f"0x{self.err_code:02X}"


class ClientSession:
    """One connection to a CFT server"""

    def __init__(
        self,
        sock: socket.socket,
        trace_sink: Optional[TraceSink] = None,
        receive_timeout: float = DEFAULT_RECEIVE_TIMEOUT,
    ):
        self._sock = sock
        self._trace = trace_sink
        self.receive_timeout = receive_timeout
        self.phase = ClientPhase.START
        self._source = SocketSource(sock, on_bytes=self._traced_inbound)
        self._broken = False
        self.sent: List[bytes] = []

    def _traced_inbound(self, chunk: bytes) -> None:
        if self._trace is not None:
            self._trace.record(Direction.S2C, chunk)

    # Subversion layer

    def send_bytes(self, data: bytes) -> None:
        """Write raw bytes; a broken connection surfaces as Closed on the next receive"""
        self.sent.append(bytes(data))
        if self._broken:
            return
        try:
            self._sock.settimeout(DEFAULT_CONNECT_TIMEOUT)
            self._sock.sendall(data)
        except OSError as e:
            logger.debug(f"send failed: {e}")
            self._broken = True
            return
        if self._trace is not None:
            self._trace.record(Direction.C2S, data)

    def send_raw(self, spec: RawFrameSpec) -> bytes:
        """Emit exactly the bytes the spec resolves to and return them"""
        data = spec.resolve()
        self.send_bytes(data)
        return data

    def receive(self, timeout: Optional[float] = None) -> ServerEvent:
        """Wait for one server frame"""
        wait = self.receive_timeout if timeout is None else timeout
        if self._broken and self._source.closed:
            return Closed()
        report = decode_frame(self._source, timeout=wait, idle_timeout=wait)
        if report.idle:
            return Timeout()
        if report.end_of_stream:
            return Closed()
        return Reply(report)

    # Honest layer

    def _send(self, payload: OpPayload) -> None:
        self.send_bytes(encode_frame(payload.OPCODE, encode_payload(payload)))

    def _require(self, *phases: ClientPhase) -> None:
        if self.phase not in phases:
            raise ProtocolStateError(f"operation not allowed in client phase {self.phase.value}")

    def request(self, payload: OpPayload, timeout: Optional[float] = None) -> ServerEvent:
        self._send(payload)
        return self.receive(timeout)

    def hello(self, client_id: str = "cftbench") -> ServerEvent:
        self._require(ClientPhase.START)
        event = self.request(Hello(client_id))
        if isinstance(event, Reply) and event.is_ok:
            self.phase = ClientPhase.GREETED
        return event

    def put_file(self, filename: str, content: bytes, block_size: int = 512) -> TransferResult:
        """
        Send a file: PutReq, ceil(len/block_size) Data frames, PutCommit.

        Stops at the first Err reply (its code lands on the result) or at the
        first timeout / close, which marks the result aborted.
        """
        self._require(ClientPhase.GREETED)
        if block_size < 1:
            raise ValueError("block_size must be at least 1")
        result = TransferResult()

        def step(payload: OpPayload) -> bool:
            event = self.request(payload)
            result.replies.append(event)
            result.frames_sent += 1
            return self._settle(result, event)

        if not step(PutReq(filename, len(content), block_size)):
            return result
        for index, offset in enumerate(range(0, len(content), block_size)):
            if not step(Data(index, content[offset:offset + block_size])):
                return result
        if step(PutCommit()):
            result.ok = True
        return result

    def get_file(self, filename: str) -> TransferResult:
        """Fetch a file: GetReq, then FileInfo and Data frames until the closing Ok"""
        self._require(ClientPhase.GREETED)
        result = TransferResult()
        self._send(GetReq(filename))
        result.frames_sent = 1
        chunks: List[bytes] = []
        expected = None

        while True:
            event = self.receive()
            result.replies.append(event)
            if not isinstance(event, Reply):
                result.aborted = True
                self._mark_lost(event)
                return result
            payload = event.payload
            if isinstance(payload, FileInfo):
                expected = payload.file_size
            elif isinstance(payload, Data):
                chunks.append(payload.data)
            elif isinstance(payload, Ok):
                result.content = b"".join(chunks)
                result.message = payload.message
                result.ok = expected is None or expected == len(result.content)
                return result
            else:
                self._settle(result, event)
                return result

    def bye(self) -> ServerEvent:
        event = self.request(Bye())
        self.phase = ClientPhase.CLOSED
        return event

    def _settle(self, result: TransferResult, event: ServerEvent) -> bool:
        """Record an event on a transfer result; False means stop"""
        if not isinstance(event, Reply):
            result.aborted = True
            self._mark_lost(event)
            return False
        payload = event.payload
        if isinstance(payload, Ok):
            result.message = payload.message
            return True
        if isinstance(payload, Err):
            result.err_code = payload.code
            result.message = payload.message
        else:
            result.message = "unexpected reply"
        return False

    def _mark_lost(self, event: ServerEvent) -> None:
        if isinstance(event, Closed):
            self.phase = ClientPhase.CLOSED

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass
        self.phase = ClientPhase.CLOSED

    def __enter__(self) -> "ClientSession":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()


def connect(
    address: Tuple[str, int],
    trace_sink: Optional[TraceSink] = None,
    timeout: float = DEFAULT_CONNECT_TIMEOUT,
    receive_timeout: float = DEFAULT_RECEIVE_TIMEOUT,
) -> ClientSession:
    """Open a session, raising ConnectError when the server cannot be reached"""
    host, port = address
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as e:
        raise ConnectError(f"cannot connect to {host}:{port}: {e}") from e
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    logger.debug(f"Connected to {host}:{port}")
    return ClientSession(sock, trace_sink=trace_sink, receive_timeout=receive_timeout)
