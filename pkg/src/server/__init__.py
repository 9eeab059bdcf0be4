"""
Reference CFT server with seeded, toggleable flaws
"""
from .flaws import Flaw, FlawSet, VULNERABLE, HARDENED
from .config import ServerConfig
from .session import (
    Phase, SessionState, SessionEvent, SessionEventKind, HandleResult, Transfer, ServerContext,
    ResiduePool, PathDenied, LEAK_WINDOW, CRASH_THRESHOLD,
    handle_frame, read_frame, resolve_path, write_block, adjacent_region,
)
from .server import CFTServer, serve, plant_canary, CANARY_FILENAME

__all__ = [
    "Flaw", "FlawSet", "VULNERABLE", "HARDENED", "ServerConfig",
    "Phase", "SessionState", "SessionEvent", "SessionEventKind", "HandleResult", "Transfer",
    "ServerContext", "ResiduePool", "PathDenied", "LEAK_WINDOW", "CRASH_THRESHOLD",
    "handle_frame", "read_frame", "resolve_path", "write_block", "adjacent_region",
    "CFTServer", "serve", "plant_canary", "CANARY_FILENAME",
]
