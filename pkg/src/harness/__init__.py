"""
Security harness: attack cases, verdict engine, differential runner, fuzzing
"""
from .bva import NumericField, bva_values
from .models import (
    AttackCase, Category, Verdict, SignatureKind, VulnSignature, Greet, Exchange, PutFile, ReadBack,
    Reconnect, Step, CaseOutcome, Target, CaseRecord, SuiteReport, FlawIsolation, IsolationReport,
)
from .cases import builtin_cases, cases_by_id
from .signatures import Observation, contains_canary, canary_fragments, evaluate
from .hosting import HostedTarget, wait_until_ready
from .runner import run_case, run_against, run_suite, run_isolation, write_report, receive_until_terminal
from .fuzz import FuzzReport, FuzzFinding, fuzz_hardened, fuzz_decoder, mutated_streams
from .report import load_report, summarize, flaw_coverage, failures

__all__ = [
    "NumericField", "bva_values",
    "AttackCase", "Category", "Verdict", "SignatureKind", "VulnSignature", "Greet", "Exchange", "PutFile",
    "ReadBack", "Reconnect", "Step", "CaseOutcome", "Target", "CaseRecord", "SuiteReport",
    "FlawIsolation", "IsolationReport",
    "builtin_cases", "cases_by_id",
    "Observation", "contains_canary", "canary_fragments", "evaluate",
    "HostedTarget", "wait_until_ready",
    "run_case", "run_against", "run_suite", "run_isolation", "write_report", "receive_until_terminal",
    "FuzzReport", "FuzzFinding", "fuzz_hardened", "fuzz_decoder", "mutated_streams",
    "load_report", "summarize", "flaw_coverage", "failures",
]
