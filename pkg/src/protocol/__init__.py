"""
CFT protocol core: framing, payloads, errors
"""
from .errors import (
    CFTError, PayloadMalformed, ConnectError, ProtocolStateError, ConfigError, TraceError, StartupError,
    ReportError,
)
from .frame import (
    MAGIC, VERSION, HEADER_SIZE, FRAME_OVERHEAD, FRAME_MARKER, DEFAULT_READ_TIMEOUT,
    Opcode, ViolationKind, Violation, Frame, DecodeReport, ByteSource, BufferSource, SocketSource,
    checksum, encode_frame, decode_frame, find_overrun, opcode_name
)
from .payloads import (
    ErrCode, Hello, Ok, Err, PutReq, Data, PutCommit, GetReq, FileInfo, Bye, OpPayload,
    encode_payload, decode_payload
)

__all__ = [
    "CFTError", "PayloadMalformed", "ConnectError", "ProtocolStateError", "ConfigError", "TraceError",
    "StartupError", "ReportError",
    "MAGIC", "VERSION", "HEADER_SIZE", "FRAME_OVERHEAD", "FRAME_MARKER", "DEFAULT_READ_TIMEOUT",
    "Opcode", "ViolationKind", "Violation", "Frame", "DecodeReport", "ByteSource", "BufferSource",
    "SocketSource", "checksum", "encode_frame", "decode_frame", "find_overrun", "opcode_name",
    "ErrCode", "Hello", "Ok", "Err", "PutReq", "Data", "PutCommit", "GetReq", "FileInfo", "Bye",
    "OpPayload", "encode_payload", "decode_payload",
]
