"""
Mutation fuzzing of the server state machine

Streams start as honest sessions and receive one mutation each: a byte
flip, a header field override (length, checksum, opcode, magic), a
truncation or an insertion of random bytes. Replay is in-process through
read_frame + handle_frame, so no sockets or timeouts are involved.
"""
import logging
import struct
import tempfile
from pathlib import Path
from typing import Callable, Dict, Iterator, List, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, Field

from ..protocol import (
    BufferSource, DecodeReport, Opcode, HEADER_SIZE, PayloadMalformed,
    Hello, PutReq, Data, PutCommit, GetReq, Bye, Err,
    decode_frame, decode_payload, encode_frame, encode_payload,
)
from ..server import (
    HARDENED, ServerConfig, ServerContext, SessionEventKind, handle_frame, plant_canary, read_frame,
)
from .signatures import contains_canary

logger = logging.getLogger(__name__)

INTERESTING_LENGTHS = (0, 1, 0x7F, 0x80, 0xFF, 0xFFFF, 0x7FFFFFFF, 0x80000000, 0xFFFFFFFF)
SERVER_OPCODES = frozenset({Opcode.OK, Opcode.ERR, Opcode.FILE_INFO})


class FuzzFinding(BaseModel):
    iteration: int
    kind: str
    detail: str
    stream_hex: str = ""


class FuzzReport(BaseModel):
    iterations: int
    seed: int
    frames: int = 0
    non_conforming: int = 0
    leaks: int = 0
    crashes: int = 0
    missing_err: int = 0
    mutations: Dict[str, int] = Field(default_factory=dict)
    findings: List[FuzzFinding] = Field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.findings


def honest_frames(rng: np.random.Generator) -> List[bytes]:
    """A well-formed session: Hello, a PUT of random content, a GET of it, Bye"""
    content = rng.bytes(int(rng.integers(0, 48)))
    block_size = int(rng.integers(1, 17))
    name = f"fuzz-{int(rng.integers(0, 1000))}.bin"
    payloads = [Hello(f"fuzzer-{int(rng.integers(0, 100))}"), PutReq(name, len(content), block_size)]
    payloads += [Data(i, content[o:o + block_size]) for i, o in enumerate(range(0, len(content), block_size))]
    payloads += [PutCommit(), GetReq(name), Bye()]
    return [encode_frame(p.OPCODE, encode_payload(p)) for p in payloads]


def _pick(rng: np.random.Generator, frames: List[bytes]) -> int:
    return int(rng.integers(0, len(frames)))


def _flip(rng, frames):
    i = _pick(rng, frames)
    frame = bytearray(frames[i])
    position = int(rng.integers(0, len(frame)))
    frame[position] ^= int(rng.integers(1, 256))
    frames[i] = bytes(frame)
    return i


def _length(rng, frames):
    i = _pick(rng, frames)
    frame = bytearray(frames[i])
    actual = len(frame) - HEADER_SIZE - 1
    choices = INTERESTING_LENGTHS + (actual + 1, max(actual - 1, 0), actual + 5)
    value = choices[int(rng.integers(0, len(choices)))]
    frame[4:8] = struct.pack("!I", value)
    frames[i] = bytes(frame)
    return i


def _checksum(rng, frames):
    i = _pick(rng, frames)
    frame = bytearray(frames[i])
    frame[-1] ^= int(rng.integers(1, 256))
    frames[i] = bytes(frame)
    return i


def _opcode(rng, frames):
    i = _pick(rng, frames)
    frame = bytearray(frames[i])
    frame[3] = int(rng.integers(0, 256))
    frames[i] = bytes(frame)
    return i


def _magic(rng, frames):
    i = _pick(rng, frames)
    frame = bytearray(frames[i])
    position = int(rng.integers(0, 3))
    frame[position] ^= int(rng.integers(1, 256))
    frames[i] = bytes(frame)
    return i


def _truncate(rng, frames):
    stream = b"".join(frames)
    cut = int(rng.integers(0, len(stream)))
    frames[:] = [stream[:cut]]
    return None


def _insert(rng, frames):
    stream = b"".join(frames)
    position = int(rng.integers(0, len(stream) + 1))
    junk = rng.bytes(int(rng.integers(1, 33)))
    frames[:] = [stream[:position] + junk + stream[position:]]
    return None


MUTATORS: Dict[str, Callable[[np.random.Generator, List[bytes]], Optional[int]]] = {
    "flip": _flip,
    "length": _length,
    "checksum": _checksum,
    "opcode": _opcode,
    "magic": _magic,
    "truncate": _truncate,
    "insert": _insert,
}


class Mutation(NamedTuple):
    name: str
    stream: bytes
    frame_index: Optional[int]  # None when the mutation spans the whole stream


def mutations(iterations: int, seed: int) -> Iterator[Mutation]:
    """Yield mutated sessions, reproducible for a given seed"""
    rng = np.random.default_rng(seed)
    names = list(MUTATORS)
    for _ in range(iterations):
        frames = honest_frames(rng)
        name = names[int(rng.integers(0, len(names)))]
        index = MUTATORS[name](rng, frames)
        yield Mutation(name, b"".join(frames), index)


def mutated_streams(iterations: int, seed: int) -> Iterator[tuple[str, bytes]]:
    """Yield (mutation name, stream) pairs, reproducible for a given seed"""
    for mutation in mutations(iterations, seed):
        yield mutation.name, mutation.stream


def _is_single_err(replies: List[bytes]) -> bool:
    if len(replies) != 1:
        return False
    report = decode_frame(replies[0])
    if not report.well_formed or report.frame.opcode != Opcode.ERR:
        return False
    return isinstance(decode_payload(report.frame.opcode, report.frame.payload), Err)


def non_conforming(decoded: DecodeReport) -> Optional[str]:
    """Why a frame breaks the protocol whatever the session phase, or None"""
    if decoded.violations:
        return ",".join(sorted(k.value for k in decoded.kinds()))
    if decoded.frame.opcode in SERVER_OPCODES:
        return f"{decoded.frame.opcode_name} sent by a client"
    try:
        decode_payload(decoded.frame.opcode, decoded.frame.payload)
    except PayloadMalformed as e:
        return f"malformed {e.field}"
    return None


def replay(
    stream: bytes,
    config: ServerConfig,
    context: ServerContext,
    report: FuzzReport,
    iteration: int,
    mutated_index: Optional[int] = None,
) -> None:
    """
    Feed one stream through a fresh session and record any finding.

    A non-conforming frame must get exactly one Err. The frame at
    mutated_index must get some answer, and a refusal of it is a lone Err.
    """
    source = BufferSource(stream)
    state = context.register(f"fuzz-{iteration}")

    def finding(kind: str, detail: str) -> None:
        report.findings.append(FuzzFinding(iteration=iteration, kind=kind, detail=detail, stream_hex=stream[:512].hex()))

    try:
        index = -1
        while True:
            decoded = read_frame(source, config)
            if decoded.end_of_stream:
                break
            index += 1
            report.frames += 1
            result = handle_frame(state, decoded, config, context)

            for event in result.events:
                if event.kind is SessionEventKind.SIMULATED_CRASH:
                    report.crashes += 1
                    finding("crash", event.detail)
                elif event.kind is SessionEventKind.LEAK:
                    report.leaks += 1
                    finding("leak", event.detail)
            for frame in result.replies:
                if contains_canary(frame, config.canary_secret):
                    report.leaks += 1
                    finding("canary", f"canary in reply to {decoded.opcode}")

            reason = non_conforming(decoded)
            if reason is not None:
                report.non_conforming += 1
                if not _is_single_err(result.replies):
                    report.missing_err += 1
                    finding("missing-err", f"{len(result.replies)} replies to a frame with {reason}")
            elif index == mutated_index:
                opcodes = [decode_frame(reply).opcode for reply in result.replies]
                if not opcodes or (Opcode.ERR in opcodes and len(opcodes) != 1):
                    report.missing_err += 1
                    finding("missing-err", f"mutated {decoded.frame.opcode_name} got {len(opcodes)} replies")
            if result.close:
                break
    except Exception as e:
        finding("exception", f"{type(e).__name__}: {e}")
    finally:
        context.unregister(state)


def fuzz_hardened(iterations: int, seed: int = 0, config: Optional[ServerConfig] = None) -> FuzzReport:
    """
    Replay mutated streams against a hardened server state machine.

    Without a config a temporary sandbox is used. Clean means no leak, no
    simulated crash, no exception and exactly one Err for every frame that
    broke the wire layout, carried a malformed payload or a server-only opcode.
    """
    report = FuzzReport(iterations=iterations, seed=seed)
    with tempfile.TemporaryDirectory(prefix="cft-fuzz-") as workdir:
        if config is None:
            root = Path(workdir) / "root"
            root.mkdir()
            config = ServerConfig(sandbox_root=root, flaws=HARDENED)
        plant_canary(config)
        context = ServerContext(config)
        for iteration, mutation in enumerate(mutations(iterations, seed)):
            report.mutations[mutation.name] = report.mutations.get(mutation.name, 0) + 1
            replay(mutation.stream, config, context, report, iteration, mutation.frame_index)

    logger.info(
        f"Fuzzed {iterations} streams ({report.frames} frames, {report.non_conforming} non-conforming): "
        f"{len(report.findings)} findings"
    )
    return report


def fuzz_decoder(iterations: int, seed: int = 0, max_size: int = 64) -> int:
    """Decode random byte strings; returns how many raised"""
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(iterations):
        data = rng.bytes(int(rng.integers(0, max_size + 1)))
        try:
            decode_frame(data)
        except Exception as e:
            failures += 1
            logger.error(f"decode_frame raised on {data.hex()}: {e}")
    return failures

