"""
Verdict engine: decides a case from the server events and the crash counter
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import FrozenSet, List, Optional, Tuple

from ..client import Closed, Reply, ServerEvent, Timeout, TransferResult
from ..protocol import ErrCode, opcode_name
from .models import SignatureKind, Verdict, VulnSignature

MIN_FRAGMENT = 8


@lru_cache(maxsize=16)
def canary_fragments(canary: str) -> FrozenSet[bytes]:
    """Every canary window of min(8, len) bytes, including ones that wrap around"""
    encoded = canary.encode("utf-8")
    if not encoded:
        return frozenset()
    size = min(MIN_FRAGMENT, len(encoded))
    doubled = encoded + encoded
    return frozenset(doubled[i:i + size] for i in range(len(encoded)))


def contains_canary(data: bytes, canary: str) -> bool:
    return any(fragment in data for fragment in canary_fragments(canary))


@dataclass
class Observation:
    """Everything a case run saw"""

    events: List[Tuple[bool, ServerEvent]] = field(default_factory=list)
    transfers: List[TransferResult] = field(default_factory=list)
    readbacks: List[Tuple[bytes, TransferResult]] = field(default_factory=list)
    crash_delta: Optional[int] = None

    @property
    def judged_events(self) -> List[ServerEvent]:
        return [event for judged, event in self.events if judged]

    @property
    def replies(self) -> List[Reply]:
        return [event for _, event in self.events if isinstance(event, Reply)]


def describe(event: ServerEvent) -> str:
    if isinstance(event, Closed):
        return "closed"
    if isinstance(event, Timeout):
        return "timeout"
    payload = event.payload
    if payload is None:
        kinds = ",".join(sorted(k.value for k in event.report.kinds())) or "undecodable"
        return f"reply {opcode_name(event.report.opcode or 0)} [{kinds}]"
    if event.err_code is not None:
        try:
            return f"Err {ErrCode(event.err_code).name}"
        except ValueError:
            return f"Err 0x{event.err_code:02X}"
    return type(payload).__name__


def _all_err(events: List[ServerEvent], code: Optional[ErrCode]) -> bool:
    return bool(events) and all(isinstance(e, Reply) and e.err_code == code for e in events)


def _summary(events: List[ServerEvent]) -> str:
    seen = [describe(e) for e in events[:4]]
    more = f" (+{len(events) - 4} more)" if len(events) > 4 else ""
    return ", ".join(seen) + more if seen else "no judged events"


def evaluate(signature: VulnSignature, observation: Observation, canary: str) -> Tuple[Verdict, str]:
    """Judge one case run; INCONCLUSIVE whenever the evidence fits neither outcome"""
    kind = signature.kind
    judged = observation.judged_events
    expected = signature.expected_err

    if kind is SignatureKind.CANARY_IN_REPLY:
        if any(contains_canary(r.report.raw, canary) for r in observation.replies):
            return Verdict.VULNERABLE_CONFIRMED, "canary disclosed in a reply"
        if _all_err(judged, expected):
            return Verdict.SECURE, f"refused with Err {expected.name}"
        return Verdict.INCONCLUSIVE, f"no canary, judged steps saw {_summary(judged)}"

    if kind is SignatureKind.SIMULATED_CRASH:
        if observation.crash_delta:
            return Verdict.VULNERABLE_CONFIRMED, f"crash counter rose by {observation.crash_delta}"
        if observation.crash_delta is None and any(isinstance(e, Closed) for e in judged):
            return Verdict.VULNERABLE_CONFIRMED, "connection aborted mid-protocol"
        if judged and all(isinstance(e, Reply) for e in judged):
            return Verdict.SECURE, f"server kept answering: {_summary(judged)}"
        return Verdict.INCONCLUSIVE, f"no crash recorded, judged steps saw {_summary(judged)}"

    if kind is SignatureKind.ILLEGAL_ACCEPT:
        if any(isinstance(e, Reply) and e.is_ok for e in judged):
            return Verdict.VULNERABLE_CONFIRMED, f"accepted where Err {expected.name} was due"
        if _all_err(judged, expected):
            return Verdict.SECURE, f"refused with Err {expected.name}"
        return Verdict.INCONCLUSIVE, f"judged steps saw {_summary(judged)}"

    if kind is SignatureKind.SMEAR_REPLY:
        first = next((e for e in judged if isinstance(e, Reply)), None)
        if first is None:
            return Verdict.INCONCLUSIVE, f"no reply after the forged frame: {_summary(judged)}"
        if first.is_ok:
            return Verdict.VULNERABLE_CONFIRMED, "forged length accepted, following bytes smeared into the frame"
        if first.err_code == expected:
            return Verdict.SECURE, f"refused with Err {expected.name}"
        return Verdict.INCONCLUSIVE, f"first reply was {describe(first)}"

    if kind is SignatureKind.STALE_RESIDUE:
        if any(isinstance(e, Reply) and signature.marker in e.report.raw for e in judged):
            return Verdict.VULNERABLE_CONFIRMED, "reply carried another session's buffer residue"
        if _all_err(judged, expected):
            return Verdict.SECURE, f"refused with Err {expected.name}"
        return Verdict.INCONCLUSIVE, f"no residue, judged steps saw {_summary(judged)}"

    if kind is SignatureKind.DEBUG_DISCLOSURE:
        for event in judged:
            if isinstance(event, Reply) and (event.is_ok or contains_canary(event.report.raw, canary)):
                return Verdict.VULNERABLE_CONFIRMED, "unknown opcode answered with a debug dump"
        if _all_err(judged, expected):
            return Verdict.SECURE, f"{len(judged)} unknown opcodes refused with Err {expected.name}"
        return Verdict.INCONCLUSIVE, f"judged steps saw {_summary(judged)}"

    if kind is SignatureKind.TRANSFER_INTACT:
        return _transfer_intact(observation)

    raise ValueError(f"unhandled signature {kind}")


def _transfer_intact(observation: Observation) -> Tuple[Verdict, str]:
    results = observation.transfers + [result for _, result in observation.readbacks]
    refused = next((r for r in results if r.err_code is not None), None)
    if refused is not None:
        return Verdict.VULNERABLE_CONFIRMED, f"legal transfer refused with Err {refused.err_name}: {refused.message}"
    if not results or any(r.aborted or not r.ok for r in results):
        return Verdict.INCONCLUSIVE, "transfer did not complete"
    for expected, result in observation.readbacks:
        if result.content != expected:
            return Verdict.VULNERABLE_CONFIRMED, f"read-back of {len(result.content)} bytes differs from the {len(expected)} sent"
    return Verdict.SECURE, f"{len(observation.transfers)} transfers intact"
