"""
Forged frame description for the subversion layer
"""
import struct
from dataclasses import dataclass
from typing import Optional

from ..protocol import MAGIC, VERSION, OpPayload, checksum, encode_payload


@dataclass(frozen=True)
class RawFrameSpec:
    """
    Every wire field of one frame, independently settable.

    declared_length and checksum default to the honest values when left as
    None; anything else is emitted exactly as given, inconsistent or not.
    """

    opcode: int
    payload_bytes: bytes = b""
    magic: bytes = MAGIC
    version: int = VERSION
    declared_length: Optional[int] = None
    checksum: Optional[int] = None
    trailing_garbage: bytes = b""

    @classmethod
    def of(cls, payload: OpPayload, **overrides) -> "RawFrameSpec":
        """Spec for a typed payload, with optional field overrides"""
        return cls(opcode=payload.OPCODE, payload_bytes=encode_payload(payload), **overrides)

    def resolve(self) -> bytes:
        """Exact bytes this spec puts on the wire"""
        if len(self.magic) != 2:
            raise ValueError(f"magic must be 2 bytes, got {len(self.magic)}")
        length = len(self.payload_bytes) if self.declared_length is None else self.declared_length
        check = checksum(self.payload_bytes) if self.checksum is None else self.checksum
        header = struct.pack("!2sBBI", self.magic, self.version, self.opcode, length)
        return header + bytes(self.payload_bytes) + bytes([check]) + bytes(self.trailing_garbage)
