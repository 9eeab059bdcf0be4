"""
Wire trace capture and offline decoding
"""
from .recorder import (
    Direction, TraceRecord, TraceSink, CorruptLine, record, read_trace, load_trace, parse_trace_line
)
from .decoder import FrameEntry, ResidueEntry, TraceListing, decode_trace, format_listing, reframe

__all__ = [
    "Direction", "TraceRecord", "TraceSink", "CorruptLine", "record", "read_trace", "load_trace",
    "parse_trace_line", "FrameEntry", "ResidueEntry", "TraceListing", "decode_trace", "format_listing",
    "reframe",
]
