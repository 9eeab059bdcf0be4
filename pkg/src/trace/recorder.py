"""
Wire trace capture

A trace file holds one record per line:

    <timestamp_ms> <C2S|S2C> <hex>

timestamp_ms counts milliseconds since the sink was opened, direction is
client-to-server or server-to-client and hex is the lowercase hex encoding
of the bytes seen in that direction. Records are flushed as they are written.
"""
import logging
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple, Union

from ..protocol import TraceError

logger = logging.getLogger(__name__)


class Direction(str, Enum):
    C2S = "C2S"
    S2C = "S2C"


@dataclass(frozen=True)
class TraceRecord:
    timestamp_ms: int
    direction: Direction
    data: bytes

    def to_line(self) -> str:
        return f"{self.timestamp_ms} {self.direction.value} {self.data.hex()}"


@dataclass(frozen=True)
class CorruptLine:
    """A trace line that could not be parsed"""

    line_number: int
    text: str
    reason: str


def parse_trace_line(line: str) -> TraceRecord:
    """Parse one trace line, raising TraceError when it does not fit the format"""
    parts = line.split()
    if len(parts) != 3:
        raise TraceError(f"expected 3 fields, got {len(parts)}")
    stamp, direction, encoded = parts
    try:
        timestamp_ms = int(stamp)
    except ValueError:
        raise TraceError(f"bad timestamp {stamp!r}") from None
    if timestamp_ms < 0:
        raise TraceError(f"negative timestamp {timestamp_ms}")
    try:
        data = bytes.fromhex(encoded)
    except ValueError:
        raise TraceError("bad hex payload") from None
    if not data:
        raise TraceError("empty record")
    try:
        return TraceRecord(timestamp_ms, Direction(direction), data)
    except ValueError:
        raise TraceError(f"bad direction {direction!r}") from None


class TraceSink:
    """Append-only trace file shared by the two directions of one session"""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._started = time.monotonic()
        self._last_ms = 0
        self.records_written = 0
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._file = self.path.open("w", encoding="utf-8")
        except OSError as e:
            raise TraceError(f"cannot open trace file {self.path}: {e}") from e
        logger.debug(f"Tracing to {self.path}")

    def record(self, direction: Direction, data: bytes) -> None:
        """Append one record and flush it"""
        if not data:
            return
        with self._lock:
            elapsed = int((time.monotonic() - self._started) * 1000)
            self._last_ms = max(self._last_ms, elapsed)
            line = TraceRecord(self._last_ms, Direction(direction), bytes(data)).to_line()
            try:
                self._file.write(line + "\n")
                self._file.flush()
            except (OSError, ValueError) as e:
                raise TraceError(f"cannot write trace record to {self.path}: {e}") from e
            self.records_written += 1

    def close(self) -> None:
        with self._lock:
            if not self._file.closed:
                self._file.close()

    def __enter__(self) -> "TraceSink":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()


def record(sink: TraceSink, direction: Direction, data: bytes) -> None:
    sink.record(direction, data)


def read_trace(path: Union[str, Path]) -> Tuple[List[TraceRecord], List[CorruptLine]]:
    """Read every parseable record, collecting the lines that are not"""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise TraceError(f"cannot read trace file {path}: {e}") from e

    records: List[TraceRecord] = []
    corrupt: List[CorruptLine] = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(parse_trace_line(line))
        except TraceError as e:
            corrupt.append(CorruptLine(number, line, str(e)))
    return records, corrupt


def load_trace(path: Union[str, Path], strict: bool = True) -> List[TraceRecord]:
    """
    Load a trace file.

    Args:
        path: Trace file
        strict: Raise TraceError on the first corrupt line instead of skipping it
    """
    records, corrupt = read_trace(path)
    if strict and corrupt:
        first: Optional[CorruptLine] = corrupt[0]
        raise TraceError(f"{path}:{first.line_number}: {first.reason}")
    return records
