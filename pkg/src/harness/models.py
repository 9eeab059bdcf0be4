"""
Attack case and report models for the security harness
"""
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field

from ..client import RawFrameSpec
from ..protocol import ErrCode
from ..server import Flaw, FlawSet, VULNERABLE


class Category(str, Enum):
    BVA = "BVA"
    MISSING_VALUES = "MissingValues"
    EXTREME_NUMERICS = "ExtremeNumerics"
    LONG_STRINGS = "LongStrings"
    MALFORMED_SEQUENCE = "MalformedSequence"
    DIRECTORY_ATTACK = "DirectoryAttack"
    CONFIRMATORY_PUT = "ConfirmatoryPut"


class Verdict(str, Enum):
    VULNERABLE_CONFIRMED = "VULNERABLE_CONFIRMED"
    SECURE = "SECURE"
    INCONCLUSIVE = "INCONCLUSIVE"


class SignatureKind(str, Enum):
    CANARY_IN_REPLY = "CanaryInReply"
    SIMULATED_CRASH = "SimulatedCrash"
    ILLEGAL_ACCEPT = "IllegalAccept"
    SMEAR_REPLY = "SmearReply"
    STALE_RESIDUE = "StaleResidue"
    DEBUG_DISCLOSURE = "DebugDisclosure"
    TRANSFER_INTACT = "TransferIntact"


@dataclass(frozen=True)
class VulnSignature:
    """Observable pattern that separates a flawed reply from a hardened one"""

    kind: SignatureKind
    expected_err: Optional[ErrCode] = None
    marker: bytes = b""

    @property
    def uses_shared_state(self) -> bool:
        """Reads the crash counter or the residue pool, so it must not overlap other cases"""
        return self.kind in (SignatureKind.SIMULATED_CRASH, SignatureKind.STALE_RESIDUE)

    def __str__(self) -> str:
        if self.expected_err is not None:
            return f"{self.kind.value}{{{self.expected_err.name}}}"
        if self.marker:
            return f"{self.kind.value}{{{self.marker.decode('utf-8', 'replace')}}}"
        return self.kind.value


# Script steps

@dataclass(frozen=True)
class Greet:
    """Honest Hello"""

    client_id: str = "cftbench"


@dataclass(frozen=True)
class Exchange:
    """Send one forged frame and collect replies until a terminal one"""

    spec: RawFrameSpec
    judged: bool = False


@dataclass(frozen=True)
class PutFile:
    """Honest PUT through the client API"""

    filename: str
    content: bytes
    block_size: int


@dataclass(frozen=True)
class ReadBack:
    """Honest GET whose content must equal what was put"""

    filename: str
    expected: bytes


@dataclass(frozen=True)
class Reconnect:
    """Close the session and open a fresh one to the same target"""


Step = Union[Greet, Exchange, PutFile, ReadBack, Reconnect]


@dataclass(frozen=True)
class AttackCase:
    id: str
    category: Category
    script: Tuple[Step, ...]
    signature: VulnSignature
    targets_flaw: Optional[Flaw] = None
    description: str = ""

    def expected_verdict(self, flaws: FlawSet) -> Verdict:
        """What a correct run reports against a server with these flaws"""
        if self.targets_flaw is not None and flaws.has(self.targets_flaw):
            return Verdict.VULNERABLE_CONFIRMED
        return Verdict.SECURE


@dataclass
class CaseOutcome:
    verdict: Verdict
    reason: str
    evidence: List[str] = field(default_factory=list)
    duration_ms: float = 0.0


@dataclass(frozen=True)
class Target:
    """A server under test"""

    name: str
    address: Tuple[str, int]
    flaws: FlawSet = VULNERABLE
    crash_counter: Optional[Callable[[], int]] = None


# Report models

class CaseRecord(BaseModel):
    """One case run against one target"""
    case_id: str
    category: str
    signature: str
    targets_flaw: Optional[str] = None
    target: str
    flaws: str
    expected: Verdict
    verdict: Verdict
    reason: str
    passed: bool
    duration_ms: float = 0.0
    evidence: List[str] = Field(default_factory=list)


class SuiteReport(BaseModel):
    """Differential run of the whole suite"""
    records: List[CaseRecord]
    passed: bool
    flawed_flaws: str
    confirmations: int = Field(..., description="Flaw-targeting cases confirmed against the flawed target")
    hardened_failures: int = Field(..., description="Cases not SECURE against the hardened target")
    inconclusive: List[str] = Field(default_factory=list)
    failures: List[str] = Field(default_factory=list)
    wall_time_s: float = 0.0
    timestamp: datetime = Field(default_factory=datetime.now)


class FlawIsolation(BaseModel):
    """Cases that flipped when exactly one flaw was enabled"""
    flaw: str
    expected: List[str]
    flipped: List[str]
    unexpected: List[str] = Field(default_factory=list)
    missing: List[str] = Field(default_factory=list)
    inconclusive: List[str] = Field(default_factory=list)
    passed: bool


class IsolationReport(BaseModel):
    baseline_failures: List[str] = Field(default_factory=list)
    flaws: List[FlawIsolation]
    passed: bool
    wall_time_s: float = 0.0

    def by_flaw(self) -> Dict[str, FlawIsolation]:
        return {entry.flaw: entry for entry in self.flaws}
