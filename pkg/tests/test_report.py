import pytest

from src.harness import CaseRecord, Verdict, failures, flaw_coverage, load_report, summarize, write_report
from src.protocol import ReportError


def record(case_id, target, verdict, expected, targets_flaw="F1", category="DIRECTORY"):
    return CaseRecord(
        case_id=case_id, category=category, signature="CanaryInReply{PATH_DENIED}", targets_flaw=targets_flaw,
        target=target, flaws="all" if target == "flawed" else "none", expected=expected, verdict=verdict,
        reason="test", passed=verdict is expected, evidence=["C2S Hello 00", "S2C Ok 01"],
    )


@pytest.fixture
def report_path(tmp_path):
    records = [
        record("C-DIR-1", "flawed", Verdict.VULNERABLE_CONFIRMED, Verdict.VULNERABLE_CONFIRMED),
        record("C-DIR-1", "hardened", Verdict.SECURE, Verdict.SECURE),
        record("C-DIR-2", "flawed", Verdict.INCONCLUSIVE, Verdict.VULNERABLE_CONFIRMED),
        record("C-DIR-2", "hardened", Verdict.SECURE, Verdict.SECURE),
        record("C-PUT-OK", "flawed", Verdict.SECURE, Verdict.SECURE, targets_flaw=None, category="CONFIRMATORY"),
    ]
    return write_report(records, tmp_path / "nested" / "report.jsonl")


def test_load_report(report_path):
    df = load_report(report_path)
    assert len(df) == 5
    assert "evidence" not in df.columns
    assert set(df["evidence_lines"]) == {2}
    assert df["verdict"].iloc[0] == "VULNERABLE_CONFIRMED"


def test_unreadable_lines_are_skipped(report_path):
    with report_path.open("a") as f:
        f.write("{not json\n\n")
    assert len(load_report(report_path)) == 5


def test_summarize(report_path):
    table = summarize(load_report(report_path))
    assert table.loc[("DIRECTORY", "hardened"), "SECURE"] == 2
    assert table.loc[("DIRECTORY", "flawed"), "total"] == 2
    assert table["total"].sum() == 5


def test_flaw_coverage(report_path):
    coverage = flaw_coverage(load_report(report_path))
    assert list(coverage.index) == ["F1"]
    assert coverage.loc["F1", "cases"] == 2
    assert coverage.loc["F1", "confirmed"] == 1
    assert coverage.loc["F1", "passed"] == 1


def test_failures(report_path):
    failed = failures(load_report(report_path))
    assert list(failed["case_id"]) == ["C-DIR-2"]
    assert failed["target"].iloc[0] == "flawed"


def test_missing_report(tmp_path):
    with pytest.raises(ReportError):
        load_report(tmp_path / "absent.jsonl")
