"""
Offline reviewer for trace files: re-frames each direction and annotates every frame
"""
import bisect
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Union

from ..protocol import (
    BufferSource, DecodeReport, HEADER_SIZE, MAGIC, PayloadMalformed, ViolationKind,
    decode_frame, decode_payload, find_overrun, opcode_name,
)
from .recorder import CorruptLine, Direction, TraceRecord, read_trace

logger = logging.getLogger(__name__)

SUMMARY_WIDTH = 60
RESIDUE_PREVIEW = 64


@dataclass(frozen=True)
class FrameEntry:
    direction: Direction
    offset: int
    timestamp_ms: int
    opcode: int
    declared_length: int
    actual_length: int
    checksum_ok: bool
    violations: List[str]
    summary: str

    @property
    def opcode_name(self) -> str:
        return opcode_name(self.opcode)


@dataclass(frozen=True)
class ResidueEntry:
    """Bytes that belong to no frame"""

    direction: Direction
    offset: int
    timestamp_ms: int
    data: bytes


@dataclass
class TraceListing:
    frames: List[FrameEntry] = field(default_factory=list)
    residue: List[ResidueEntry] = field(default_factory=list)
    corrupt_lines: List[CorruptLine] = field(default_factory=list)

    @property
    def entries(self) -> List[Union[FrameEntry, ResidueEntry]]:
        """Frames and residue per direction, in stream order"""
        order = {Direction.C2S: 0, Direction.S2C: 1}
        return sorted([*self.frames, *self.residue], key=lambda e: (order[e.direction], e.offset))

    @property
    def violation_count(self) -> int:
        return sum(len(f.violations) for f in self.frames)

    def has_violation(self, kind: ViolationKind) -> bool:
        return any(v.startswith(kind.value) for f in self.frames for v in f.violations)


def _summarize(report: DecodeReport) -> str:
    frame = report.frame
    if frame is None:
        return "(incomplete)"
    try:
        text = repr(decode_payload(frame.opcode, frame.payload))
    except PayloadMalformed as e:
        text = f"undecodable: {e}"
    except ValueError:
        text = f"raw {frame.payload[:16].hex()}"
    if len(text) > SUMMARY_WIDTH:
        text = text[:SUMMARY_WIDTH - 3] + "..."
    return text


class _StreamClock:
    """Maps a byte offset in a direction's stream to the record it arrived in"""

    def __init__(self, records: List[TraceRecord]):
        self.starts: List[int] = []
        self.stamps: List[int] = []
        position = 0
        for rec in records:
            self.starts.append(position)
            self.stamps.append(rec.timestamp_ms)
            position += len(rec.data)

    def at(self, offset: int) -> int:
        index = bisect.bisect_right(self.starts, offset) - 1
        return self.stamps[index] if index >= 0 else 0


def reframe(direction: Direction, stream: bytes, records: List[TraceRecord], listing: TraceListing) -> None:
    """Split one direction's byte stream into frames and residue"""
    clock = _StreamClock(records)
    position = 0

    while position < len(stream):
        remaining = stream[position:]
        if len(remaining) < HEADER_SIZE:
            listing.residue.append(ResidueEntry(direction, position, clock.at(position), remaining))
            break

        if remaining[:2] != MAGIC:
            resync = stream.find(MAGIC, position + 1)
            end = len(stream) if resync < 0 else resync
            listing.residue.append(ResidueEntry(direction, position, clock.at(position), stream[position:end]))
            position = end
            continue

        report = decode_frame(BufferSource(remaining), timeout=None)
        payload_seen = max(report.consumed - HEADER_SIZE, 0)
        actual = payload_seen if report.frame is None else len(report.frame.payload)
        if report.frame is not None:
            overrun = find_overrun(report.frame.payload)
            if overrun is not None and report.has(ViolationKind.LENGTH_MISMATCH):
                actual = overrun

        listing.frames.append(FrameEntry(
            direction=direction,
            offset=position,
            timestamp_ms=clock.at(position),
            opcode=report.opcode,
            declared_length=report.declared_length,
            actual_length=actual,
            checksum_ok=report.frame is not None and not report.has(ViolationKind.BAD_CHECKSUM),
            violations=[f"{v.kind.value}: {v.detail}" for v in report.violations],
            summary=_summarize(report),
        ))
        position += report.consumed


def decode_trace(path: Union[str, Path]) -> TraceListing:
    """
    Decode a trace file into an annotated listing.

    Corrupt lines are listed and skipped; the remaining records are still
    decoded. The file is only read.
    """
    records, corrupt = read_trace(path)
    listing = TraceListing(corrupt_lines=corrupt)
    for line in corrupt:
        logger.warning(f"{path}:{line.line_number}: corrupt trace line ({line.reason})")

    by_direction: Dict[Direction, List[TraceRecord]] = {Direction.C2S: [], Direction.S2C: []}
    for rec in records:
        by_direction[rec.direction].append(rec)

    for direction, recs in by_direction.items():
        stream = b"".join(rec.data for rec in recs)
        reframe(direction, stream, recs, listing)
    return listing


def format_listing(listing: TraceListing) -> str:
    """Human-readable listing, one line per frame or residue run"""
    lines = []
    for line in listing.corrupt_lines:
        lines.append(f"CORRUPT line {line.line_number}: {line.reason}")

    for entry in listing.entries:
        if isinstance(entry, ResidueEntry):
            preview = entry.data[:RESIDUE_PREVIEW].hex(" ")
            more = "" if len(entry.data) <= RESIDUE_PREVIEW else " ..."
            lines.append(
                f"{entry.timestamp_ms:>8} {entry.direction.value} @{entry.offset:<6} RESIDUE "
                f"{len(entry.data)} bytes: {preview}{more}"
            )
            continue
        check = "ok" if entry.checksum_ok else "BAD"
        lines.append(
            f"{entry.timestamp_ms:>8} {entry.direction.value} @{entry.offset:<6} {entry.opcode_name:<10} "
            f"len declared={entry.declared_length} actual={entry.actual_length} checksum={check} {entry.summary}"
        )
        for violation in entry.violations:
            lines.append(f"{'':>8}     ! {violation}")

    lines.append(
        f"{len(listing.frames)} frames, {len(listing.residue)} residue runs, "
        f"{listing.violation_count} violations, {len(listing.corrupt_lines)} corrupt lines"
    )
    return "\n".join(lines)
