"""
CFT attack client: honest session API and raw-frame subversion layer
"""
from .raw import RawFrameSpec
from .session import (
    ClientSession, ClientPhase, ServerEvent, Reply, Closed, Timeout, TransferResult, connect,
    DEFAULT_RECEIVE_TIMEOUT,
)

__all__ = [
    "RawFrameSpec", "ClientSession", "ClientPhase", "ServerEvent", "Reply", "Closed", "Timeout",
    "TransferResult", "connect", "DEFAULT_RECEIVE_TIMEOUT",
]
