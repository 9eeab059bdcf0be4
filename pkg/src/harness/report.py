"""
Suite report analysis with pandas
"""
import json
import logging
from pathlib import Path
from typing import Union

import pandas as pd

from ..protocol import ReportError

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "case_id", "category", "signature", "targets_flaw", "target", "flaws",
    "expected", "verdict", "reason", "passed", "duration_ms",
]


def load_report(path: Union[str, Path]) -> pd.DataFrame:
    """Load a line-delimited suite report, one row per case and target"""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ReportError(f"cannot read report {path}: {e}") from e

    rows = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as e:
            logger.warning(f"{path}:{number}: skipping unreadable record ({e})")

    df = pd.DataFrame(rows, columns=REPORT_COLUMNS + ["evidence"])
    df["evidence_lines"] = df["evidence"].apply(lambda ev: len(ev) if isinstance(ev, list) else 0)
    logger.info(f"Loaded {len(df)} records from {path}")
    return df.drop(columns=["evidence"])


def summarize(df: pd.DataFrame) -> pd.DataFrame:
    """Verdict counts per category and target"""
    if df.empty:
        return pd.DataFrame()
    table = pd.crosstab([df["category"], df["target"]], df["verdict"])
    table["total"] = table.sum(axis=1)
    return table


def flaw_coverage(df: pd.DataFrame) -> pd.DataFrame:
    """Per targeted flaw: cases, confirmations against the flawed target, passes"""
    targeted = df[df["targets_flaw"].notna()]
    if targeted.empty:
        return pd.DataFrame(columns=["cases", "confirmed", "passed"])
    flawed = targeted[targeted["target"] != "hardened"]
    return flawed.groupby("targets_flaw").agg(
        cases=("case_id", "nunique"),
        confirmed=("verdict", lambda v: int((v == "VULNERABLE_CONFIRMED").sum())),
        passed=("passed", "sum"),
    )


def failures(df: pd.DataFrame) -> pd.DataFrame:
    return df.loc[~df["passed"].astype(bool), ["case_id", "target", "expected", "verdict", "reason"]]
