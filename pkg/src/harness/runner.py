"""
Differential runner: executes attack cases against a flawed and a hardened target
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Tuple, Union

from ..client import ClientSession, Reply, ServerEvent, DEFAULT_RECEIVE_TIMEOUT, connect
from ..config import DEFAULT_CANARY
from ..protocol import ConnectError, Data, FileInfo, ProtocolStateError
from ..server import Flaw, FlawSet, HARDENED
from ..trace import TraceSink
from .cases import builtin_cases
from .hosting import HostedTarget
from .models import (
    AttackCase, CaseOutcome, CaseRecord, Exchange, FlawIsolation, Greet, IsolationReport, PutFile,
    ReadBack, Reconnect, SuiteReport, Target, Verdict,
)
from .signatures import Observation, describe, evaluate

logger = logging.getLogger(__name__)

EVIDENCE_HEX_LIMIT = 256
MAX_FRAMES_PER_EXCHANGE = 100_000


def _hex(data: bytes) -> str:
    if len(data) <= EVIDENCE_HEX_LIMIT:
        return data.hex()
    return f"{data[:EVIDENCE_HEX_LIMIT].hex()}...(+{len(data) - EVIDENCE_HEX_LIMIT} bytes)"


def _log_event(evidence: List[str], event: ServerEvent) -> None:
    if isinstance(event, Reply):
        evidence.append(f"S2C {describe(event)} {_hex(event.report.raw)}")
    else:
        evidence.append(f"EVENT {describe(event)}")


def receive_until_terminal(session: ClientSession) -> List[ServerEvent]:
    """Collect replies until one that ends the exchange (anything but FileInfo / Data)"""
    events: List[ServerEvent] = []
    while len(events) < MAX_FRAMES_PER_EXCHANGE:
        event = session.receive()
        events.append(event)
        if not isinstance(event, Reply) or not isinstance(event.payload, (FileInfo, Data)):
            break
    return events


class _CaseRun:
    """State of one case execution"""

    def __init__(self, case: AttackCase, target: Tuple[str, int], receive_timeout: float, trace_sink: Optional[TraceSink]):
        self.case = case
        self.target = target
        self.receive_timeout = receive_timeout
        self.trace_sink = trace_sink
        self.observation = Observation()
        self.evidence: List[str] = []
        self.session: Optional[ClientSession] = None

    def open(self) -> None:
        self.session = connect(self.target, trace_sink=self.trace_sink, receive_timeout=self.receive_timeout)

    def close(self) -> None:
        if self.session is not None:
            self.session.close()

    def execute(self) -> Optional[str]:
        """Run the script; returns a reason when setup failed"""
        first_judged = next((i for i, s in enumerate(self.case.script) if isinstance(s, Exchange) and s.judged), None)
        for index, step in enumerate(self.case.script):
            setup = first_judged is not None and index < first_judged
            failure = self._step(step, setup)
            if failure:
                return failure
        return None

    def _step(self, step, setup: bool) -> Optional[str]:
        session = self.session
        if isinstance(step, Greet):
            event = session.hello(step.client_id)
            self.evidence.append(f"HELLO {step.client_id}")
            _log_event(self.evidence, event)
            self.observation.events.append((False, event))
            if not (isinstance(event, Reply) and event.is_ok):
                return f"Hello not accepted: {describe(event)}"
        elif isinstance(step, Exchange):
            data = session.send_raw(step.spec)
            self.evidence.append(f"C2S {_hex(data)}")
            events = receive_until_terminal(session)
            for event in events:
                _log_event(self.evidence, event)
                self.observation.events.append((step.judged, event))
            last = events[-1]
            if setup and not (isinstance(last, Reply) and last.is_ok):
                return f"setup frame not accepted: {describe(last)}"
        elif isinstance(step, PutFile):
            try:
                result = session.put_file(step.filename, step.content, step.block_size)
            except ProtocolStateError as e:
                return str(e)
            self.observation.transfers.append(result)
            self.evidence.append(
                f"PUT {step.filename} {len(step.content)} bytes in {result.frames_sent} frames: "
                f"{'ok' if result.ok else result.err_name or 'aborted'} {result.message}"
            )
            if setup and not result.ok:
                return f"setup PUT failed: {result.err_name or 'aborted'}"
        elif isinstance(step, ReadBack):
            try:
                result = session.get_file(step.filename)
            except ProtocolStateError as e:
                return str(e)
            self.observation.readbacks.append((step.expected, result))
            self.evidence.append(
                f"GET {step.filename}: {len(result.content)} bytes, "
                f"{'ok' if result.ok else result.err_name or 'aborted'}"
            )
        elif isinstance(step, Reconnect):
            self.close()
            self.open()
            self.evidence.append("RECONNECT")
        return None


def run_case(
    case: AttackCase,
    target: Tuple[str, int],
    crash_counter: Optional[Callable[[], int]] = None,
    canary: str = DEFAULT_CANARY,
    receive_timeout: float = DEFAULT_RECEIVE_TIMEOUT,
    trace_sink: Optional[TraceSink] = None,
) -> CaseOutcome:
    """
    Run one case on a fresh connection and judge it.

    Args:
        case: Attack case
        target: Server address
        crash_counter: Reads the server's simulated-crash counter, when available
        canary: Secret whose fragments mark a leak
        receive_timeout: Seconds to wait for each reply
        trace_sink: Optional capture of every byte exchanged
    """
    started = time.monotonic()
    logger.info(f"{case.id}: running against {target[0]}:{target[1]}")
    run = _CaseRun(case, target, receive_timeout, trace_sink)
    baseline = crash_counter() if crash_counter else None

    try:
        run.open()
    except ConnectError as e:
        return CaseOutcome(Verdict.INCONCLUSIVE, f"unreachable: {e}", run.evidence, _elapsed_ms(started))

    try:
        failure = run.execute()
    except ConnectError as e:
        failure = f"unreachable on reconnect: {e}"
    finally:
        run.close()

    if failure:
        verdict, reason = Verdict.INCONCLUSIVE, failure
    else:
        if crash_counter is not None:
            run.observation.crash_delta = crash_counter() - baseline
            run.evidence.append(f"CRASHES +{run.observation.crash_delta}")
        verdict, reason = evaluate(case.signature, run.observation, canary)

    logger.info(f"{case.id}: {verdict.value} ({reason})")
    return CaseOutcome(verdict, reason, run.evidence, _elapsed_ms(started))


def _elapsed_ms(started: float) -> float:
    return round((time.monotonic() - started) * 1000, 1)


def _record(case: AttackCase, target: Target, outcome: CaseOutcome) -> CaseRecord:
    expected = case.expected_verdict(target.flaws)
    return CaseRecord(
        case_id=case.id,
        category=case.category.value,
        signature=str(case.signature),
        targets_flaw=case.targets_flaw.label if case.targets_flaw else None,
        target=target.name,
        flaws=str(target.flaws),
        expected=expected,
        verdict=outcome.verdict,
        reason=outcome.reason,
        passed=outcome.verdict is expected,
        duration_ms=outcome.duration_ms,
        evidence=outcome.evidence,
    )


def run_against(
    cases: List[AttackCase],
    target: Target,
    canary: str = DEFAULT_CANARY,
    receive_timeout: float = DEFAULT_RECEIVE_TIMEOUT,
    workers: int = 1,
) -> List[CaseRecord]:
    """
    Run cases against one target, in case order.

    With workers > 1 the cases that do not touch shared server state run
    concurrently; crash-counter and residue cases always run one at a time
    afterwards.
    """
    def one(case: AttackCase) -> CaseRecord:
        outcome = run_case(case, target.address, target.crash_counter, canary, receive_timeout)
        return _record(case, target, outcome)

    if workers <= 1:
        return [one(case) for case in cases]

    shared = [case for case in cases if case.signature.uses_shared_state]
    independent = [case for case in cases if not case.signature.uses_shared_state]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        records: Dict[str, CaseRecord] = {r.case_id: r for r in pool.map(one, independent)}
    for case in shared:
        records[case.id] = one(case)
    return [records[case.id] for case in cases]


def write_report(records: Iterable[CaseRecord], path: Union[str, Path]) -> Path:
    """Write one JSON record per line"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for rec in records:
            f.write(rec.model_dump_json() + "\n")
    logger.info(f"Report written to {path}")
    return path


def run_suite(
    flawed: Target,
    hardened: Target,
    cases: Optional[List[AttackCase]] = None,
    report_path: Optional[Union[str, Path]] = None,
    canary: str = DEFAULT_CANARY,
    receive_timeout: float = DEFAULT_RECEIVE_TIMEOUT,
    workers: int = 1,
) -> SuiteReport:
    """
    Run every case against both targets.

    PASS when each case matches its expectation: VULNERABLE_CONFIRMED against
    the flawed target when it targets one of that target's flaws, SECURE
    otherwise, and SECURE against the hardened target.
    """
    cases = builtin_cases() if cases is None else cases
    started = time.monotonic()

    flawed_records = run_against(cases, flawed, canary, receive_timeout, workers)
    hardened_records = run_against(cases, hardened, canary, receive_timeout, workers)
    records = [r for pair in zip(flawed_records, hardened_records) for r in pair]

    failures = [f"{r.case_id}@{r.target}: expected {r.expected.value}, got {r.verdict.value} ({r.reason})"
                for r in records if not r.passed]
    inconclusive = [f"{r.case_id}@{r.target}" for r in records if r.verdict is Verdict.INCONCLUSIVE]
    report = SuiteReport(
        records=records,
        passed=not failures,
        flawed_flaws=str(flawed.flaws),
        confirmations=sum(1 for r in flawed_records if r.targets_flaw and r.verdict is Verdict.VULNERABLE_CONFIRMED),
        hardened_failures=sum(1 for r in hardened_records if r.verdict is not Verdict.SECURE),
        inconclusive=inconclusive,
        failures=failures,
        wall_time_s=round(time.monotonic() - started, 2),
    )
    if report_path is not None:
        write_report(records, report_path)
    logger.info(
        f"Suite {'PASS' if report.passed else 'FAIL'}: {report.confirmations} confirmations, "
        f"{report.hardened_failures} hardened failures, {len(inconclusive)} inconclusive"
    )
    return report


def run_isolation(
    cases: Optional[List[AttackCase]] = None,
    canary: str = DEFAULT_CANARY,
    receive_timeout: float = DEFAULT_RECEIVE_TIMEOUT,
    read_timeout: float = 2.0,
    workers: int = 1,
) -> IsolationReport:
    """
    Run the cases against a hardened server and against each single-flaw
    server, all self-hosted. Passes when enabling one flaw flips exactly the
    cases that target it.
    """
    cases = builtin_cases() if cases is None else cases
    started = time.monotonic()

    with HostedTarget(HARDENED, name="hardened", canary=canary, read_timeout=read_timeout) as host:
        baseline = run_against(cases, host.target, canary, receive_timeout, workers)
    baseline_failures = [r.case_id for r in baseline if r.verdict is not Verdict.SECURE]

    entries = []
    for flaw in Flaw:
        flaws = FlawSet.of([flaw])
        with HostedTarget(flaws, name=flaw.label, canary=canary, read_timeout=read_timeout) as host:
            records = run_against(cases, host.target, canary, receive_timeout, workers)
        expected = [c.id for c in cases if c.targets_flaw is flaw]
        flipped = [r.case_id for r in records if r.verdict is Verdict.VULNERABLE_CONFIRMED]
        inconclusive = [r.case_id for r in records if r.verdict is Verdict.INCONCLUSIVE]
        entry = FlawIsolation(
            flaw=flaw.label,
            expected=expected,
            flipped=flipped,
            unexpected=[c for c in flipped if c not in expected],
            missing=[c for c in expected if c not in flipped],
            inconclusive=inconclusive,
            passed=set(flipped) == set(expected) and not inconclusive,
        )
        logger.info(f"{flaw.label}: flipped {len(flipped)}/{len(expected)} expected cases, passed={entry.passed}")
        entries.append(entry)

    return IsolationReport(
        baseline_failures=baseline_failures,
        flaws=entries,
        passed=not baseline_failures and all(e.passed for e in entries),
        wall_time_s=round(time.monotonic() - started, 2),
    )
