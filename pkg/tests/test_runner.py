import json
import socket

import pytest

from src.harness import (
    Target, Verdict, builtin_cases, cases_by_id, load_report, run_against, run_case, run_isolation, run_suite,
)
from src.server import HARDENED, VULNERABLE, Flaw, FlawSet


def _run(host, case_id, receive_timeout):
    return run_case(cases_by_id()[case_id], host.server.address, host.target.crash_counter,
                    canary=host.canary, receive_timeout=receive_timeout)


def test_directory_attack_confirmed(hosted, receive_timeout, canary):
    outcome = _run(hosted(FlawSet.of([Flaw.F1])), "C-DIR-1", receive_timeout)
    assert outcome.verdict is Verdict.VULNERABLE_CONFIRMED
    assert any(canary.encode().hex() in line for line in outcome.evidence)


def test_directory_attack_refused(hosted, receive_timeout):
    outcome = _run(hosted(HARDENED), "C-DIR-1", receive_timeout)
    assert outcome.verdict is Verdict.SECURE
    assert "PATH_DENIED" in outcome.reason


def test_large_overrun_crash(hosted, receive_timeout):
    host = hosted(FlawSet.of([Flaw.F2]))
    outcome = _run(host, "C-OVR-L", receive_timeout)
    assert outcome.verdict is Verdict.VULNERABLE_CONFIRMED
    assert "crash counter" in outcome.reason
    assert host.server.crash_count == 1


def test_crash_detected_without_crash_counter(hosted, receive_timeout):
    host = hosted(FlawSet.of([Flaw.F2]))
    outcome = run_case(cases_by_id()["C-OVR-L"], host.server.address, receive_timeout=receive_timeout)
    assert outcome.verdict is Verdict.VULNERABLE_CONFIRMED


def test_small_overrun_leaks(hosted, receive_timeout):
    outcome = _run(hosted(FlawSet.of([Flaw.F2])), "C-OVR-S", receive_timeout)
    assert outcome.verdict is Verdict.VULNERABLE_CONFIRMED


def test_confirmatory_put_secure_with_no_err(hosted, receive_timeout):
    outcome = _run(hosted(HARDENED), "C-PUT-OK", receive_timeout)
    assert outcome.verdict is Verdict.SECURE
    assert not any("Err" in line for line in outcome.evidence)


@pytest.mark.parametrize("flaws", [HARDENED, VULNERABLE])
def test_bulk_put_succeeds(hosted, receive_timeout, flaws):
    assert _run(hosted(flaws), "C-BULK", receive_timeout).verdict is Verdict.SECURE


def test_stale_residue(hosted, receive_timeout):
    assert _run(hosted(FlawSet.of([Flaw.F5])), "C-SEQ-DATA-BEFORE-PUT", receive_timeout).verdict \
        is Verdict.VULNERABLE_CONFIRMED
    assert _run(hosted(HARDENED), "C-SEQ-DATA-BEFORE-HELLO", receive_timeout).verdict is Verdict.SECURE


def test_smear_cases(hosted, receive_timeout):
    flawed = hosted(FlawSet.of([Flaw.F3]))
    hardened = hosted(HARDENED)
    for case_id in ("C-LEN-UP", "C-LEN-DOWN"):
        assert _run(flawed, case_id, receive_timeout).verdict is Verdict.VULNERABLE_CONFIRMED
        assert _run(hardened, case_id, receive_timeout).verdict is Verdict.SECURE


def test_negative_declared_length(hosted, receive_timeout):
    assert _run(hosted(FlawSet.of([Flaw.F4])), "C-NUM-LEN-NEG", receive_timeout).verdict \
        is Verdict.VULNERABLE_CONFIRMED
    assert _run(hosted(HARDENED), "C-NUM-LEN-NEG", receive_timeout).verdict is Verdict.SECURE


def test_opcode_sweep(hosted, receive_timeout):
    assert _run(hosted(FlawSet.of([Flaw.F6])), "C-OPC-UNKNOWN", receive_timeout).verdict \
        is Verdict.VULNERABLE_CONFIRMED
    assert _run(hosted(HARDENED), "C-OPC-UNKNOWN", receive_timeout).verdict is Verdict.SECURE


def test_unreachable_is_inconclusive(receive_timeout):
    with socket.socket() as spare:
        spare.bind(("127.0.0.1", 0))
        port = spare.getsockname()[1]
    outcome = run_case(cases_by_id()["C-DIR-1"], ("127.0.0.1", port), receive_timeout=receive_timeout)
    assert outcome.verdict is Verdict.INCONCLUSIVE
    assert outcome.reason.startswith("unreachable")


def test_stopped_target_is_inconclusive(hosted, receive_timeout):
    host = hosted(FlawSet.of([Flaw.F1]))
    host.server.shutdown()
    outcome = run_case(cases_by_id()["C-OVR-S"], host.server.address, receive_timeout=receive_timeout)
    assert outcome.verdict is Verdict.INCONCLUSIVE


def test_parallel_run_keeps_case_order(hosted, receive_timeout):
    host = hosted(HARDENED, name="hardened")
    cases = [c for c in builtin_cases() if c.id != "C-BULK"]
    records = run_against(cases, host.target, receive_timeout=receive_timeout, workers=4)
    assert [r.case_id for r in records] == [c.id for c in cases]
    assert all(r.verdict is Verdict.SECURE for r in records), [r.reason for r in records if not r.passed]


@pytest.mark.slow
def test_differential_suite_passes(hosted, receive_timeout, tmp_path):
    flawed = hosted(VULNERABLE, name="flawed")
    hardened = hosted(HARDENED, name="hardened")
    report_path = tmp_path / "report.jsonl"
    cases = builtin_cases()

    report = run_suite(flawed.target, hardened.target, report_path=report_path, receive_timeout=receive_timeout)

    assert report.passed, report.failures
    assert report.confirmations == sum(1 for c in cases if c.targets_flaw)
    assert report.hardened_failures == 0
    lines = report_path.read_text().splitlines()
    assert len(lines) == 2 * len(cases)
    assert {json.loads(line)["target"] for line in lines} == {"flawed", "hardened"}
    assert len(load_report(report_path)) == 2 * len(cases)

    again = run_suite(flawed.target, hardened.target, receive_timeout=receive_timeout)
    assert [r.verdict for r in again.records] == [r.verdict for r in report.records]


@pytest.mark.slow
def test_hardened_target_stays_secure_across_repeats(hosted, receive_timeout):
    host = hosted(HARDENED, name="hardened")
    cases = builtin_cases()
    not_secure = []
    for run in range(20):
        records = run_against(cases, host.target, receive_timeout=receive_timeout, workers=4)
        not_secure += [(run, r.case_id, r.reason) for r in records if r.verdict is not Verdict.SECURE]
    assert not_secure == []


@pytest.mark.slow
def test_misconfigured_flawed_target_fails(hosted, receive_timeout):
    host = hosted(HARDENED, name="hardened")
    misconfigured = Target("flawed", host.server.address, VULNERABLE, host.target.crash_counter)
    report = run_suite(misconfigured, host.target, receive_timeout=receive_timeout)
    assert not report.passed
    assert report.confirmations == 0
    assert any(failure.startswith("C-DIR-1@flawed") for failure in report.failures)


@pytest.mark.slow
def test_single_flaw_isolation(receive_timeout):
    report = run_isolation(receive_timeout=receive_timeout, read_timeout=0.3)
    assert report.baseline_failures == []
    for entry in report.flaws:
        assert entry.passed, (entry.flaw, entry.unexpected, entry.missing, entry.inconclusive)
    assert report.passed
