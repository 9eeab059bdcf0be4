"""
Command-line entry point for the CFT security workbench

Exit status: 0 on success or suite PASS, 1 on suite FAIL or an attack that
did not come back SECURE, 2 on usage or configuration errors.
"""
import argparse
import logging
import sys
from contextlib import ExitStack
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

from .client import ClientPhase, connect
from .config import parse_address, settings
from .harness import (
    HostedTarget, Target, Verdict, builtin_cases, cases_by_id, fuzz_hardened, load_report,
    run_case, run_isolation, run_suite, summarize,
)
from .harness.signatures import describe
from .protocol import CFTError, ConfigError, ConnectError, StartupError, TraceError
from .server import CFTServer, FlawSet, HARDENED, ServerConfig
from .trace import TraceSink, decode_trace, format_listing

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _address(value: str):
    try:
        return parse_address(value)
    except ConfigError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _flaws(value: str) -> FlawSet:
    try:
        return FlawSet.parse(value)
    except ConfigError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _receive_timeout(args) -> float:
    return (args.timeout_ms or settings.RECEIVE_TIMEOUT_MS) / 1000


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cftbench", description=f"{settings.APP_NAME} {settings.APP_VERSION}")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="DEBUG, INFO, WARNING or ERROR")
    commands = parser.add_subparsers(dest="command", required=True)

    serve = commands.add_parser("serve", help="run the reference server")
    serve.add_argument("--config", type=Path, help="key = value server config file")
    serve.add_argument("--root", type=Path, help="sandbox root directory")
    serve.add_argument("--listen", help="bind address host:port")
    serve.add_argument("--port", type=int, help="listen port (0 = ephemeral)")
    serve.add_argument("--flaws", type=_flaws, help="all, none or a list such as F1,F4")
    serve.add_argument("--timeout-ms", type=int, help="mid-frame read timeout")

    put = commands.add_parser("put", help="honest upload")
    put.add_argument("--target", type=_address, required=True)
    put.add_argument("file", type=Path)
    put.add_argument("--name", help="remote filename (default: local file name)")
    put.add_argument("--block-size", type=int, default=512)
    put.add_argument("--trace", type=Path)
    put.add_argument("--timeout-ms", type=int)

    get = commands.add_parser("get", help="honest download")
    get.add_argument("--target", type=_address, required=True)
    get.add_argument("filename")
    get.add_argument("--output", type=Path, help="write here instead of standard output")
    get.add_argument("--trace", type=Path)
    get.add_argument("--timeout-ms", type=int)

    attack = commands.add_parser("attack", help="run one attack case")
    attack.add_argument("--target", type=_address, required=True)
    attack.add_argument("--case", required=True, dest="case_id")
    attack.add_argument("--trace", type=Path)
    attack.add_argument("--timeout-ms", type=int)

    suite = commands.add_parser("suite", help="differential run: flawed vs hardened")
    suite.add_argument("--self-hosted", action="store_true", help="launch both targets on loopback")
    suite.add_argument("--flawed", type=_address, help="external flawed target host:port")
    suite.add_argument("--hardened", type=_address, help="external hardened target host:port")
    suite.add_argument("--flaws", type=_flaws, default=FlawSet.vulnerable(), help="flaws of the flawed target")
    suite.add_argument("--report", type=Path, default=Path(settings.REPORT_PATH))
    suite.add_argument("--workers", type=int, default=1)
    suite.add_argument("--isolation", action="store_true", help="also run every single-flaw configuration")
    suite.add_argument("--timeout-ms", type=int, help="reply timeout")
    suite.add_argument("--server-timeout-ms", type=int, help="read timeout of self-hosted servers")

    decode = commands.add_parser("decode", help="annotate a trace file")
    decode.add_argument("trace", type=Path)

    commands.add_parser("list-cases", help="list builtin attack cases")

    fuzz = commands.add_parser("fuzz", help="mutation fuzzing of the hardened state machine")
    fuzz.add_argument("--iterations", type=int, default=10_000)
    fuzz.add_argument("--seed", type=int, default=0)

    return parser


def cmd_serve(args) -> int:
    config = ServerConfig.from_settings()
    if args.config:
        config = ServerConfig.from_file(args.config, base=config)
    changes = {}
    if args.root:
        changes["sandbox_root"] = args.root
    if args.listen:
        changes["listen_host"], changes["listen_port"] = parse_address(args.listen)
    if args.port is not None:
        changes["listen_port"] = args.port
    if args.flaws is not None:
        changes["flaws"] = args.flaws
    if args.timeout_ms:
        changes["read_timeout"] = args.timeout_ms / 1000
    config = replace(config, **changes)

    errors = config.validate()
    if errors:
        raise ConfigError(f"Configuration errors: {errors}")

    server = CFTServer(config).start()
    host, port = server.address
    print(f"listening on {host}:{port} flaws={config.flaws} root={config.sandbox_root}", flush=True)
    try:
        server.wait()
    except KeyboardInterrupt:
        logger.info("Interrupted, shutting down")
    finally:
        server.shutdown()
    return EXIT_OK


def cmd_put(args) -> int:
    if not 1 <= args.block_size <= 0xFFFF:
        raise ConfigError("--block-size must be between 1 and 65535")
    try:
        content = args.file.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read {args.file}: {e}") from e
    if len(content) > 0xFFFFFFFF:
        raise ConfigError(f"{args.file} is larger than a 32-bit file size")

    with ExitStack() as stack:
        sink = stack.enter_context(TraceSink(args.trace)) if args.trace else None
        session = stack.enter_context(connect(args.target, trace_sink=sink, receive_timeout=_receive_timeout(args)))
        greeting = session.hello()
        if session.phase is not ClientPhase.GREETED:
            print(f"hello refused: {describe(greeting)}", file=sys.stderr)
            return EXIT_FAIL
        result = session.put_file(args.name or args.file.name, content, args.block_size)
        session.bye()

    if result.ok:
        print(f"stored {len(content)} bytes in {result.frames_sent - 2} blocks: {result.message}")
        return EXIT_OK
    print(f"put failed: {result.err_name or 'aborted'} {result.message}", file=sys.stderr)
    return EXIT_FAIL


def cmd_get(args) -> int:
    with ExitStack() as stack:
        sink = stack.enter_context(TraceSink(args.trace)) if args.trace else None
        session = stack.enter_context(connect(args.target, trace_sink=sink, receive_timeout=_receive_timeout(args)))
        greeting = session.hello()
        if session.phase is not ClientPhase.GREETED:
            print(f"hello refused: {describe(greeting)}", file=sys.stderr)
            return EXIT_FAIL
        result = session.get_file(args.filename)
        session.bye()

    if not result.ok:
        print(f"get failed: {result.err_name or 'aborted'} {result.message}", file=sys.stderr)
        return EXIT_FAIL
    if args.output:
        args.output.write_bytes(result.content)
        print(f"wrote {len(result.content)} bytes to {args.output}")
    else:
        sys.stdout.buffer.write(result.content)
        sys.stdout.flush()
    return EXIT_OK


def cmd_attack(args) -> int:
    case = cases_by_id().get(args.case_id)
    if case is None:
        raise ConfigError(f"unknown case {args.case_id!r}; see list-cases")

    with ExitStack() as stack:
        sink = stack.enter_context(TraceSink(args.trace)) if args.trace else None
        outcome = run_case(case, args.target, canary=settings.CANARY,
                           receive_timeout=_receive_timeout(args), trace_sink=sink)

    print(f"{case.id} {outcome.verdict.value}: {outcome.reason}")
    for line in outcome.evidence:
        print(f"  {line}")
    return EXIT_OK if outcome.verdict is Verdict.SECURE else EXIT_FAIL


def cmd_suite(args) -> int:
    receive_timeout = _receive_timeout(args)
    read_timeout = (args.server_timeout_ms or settings.READ_TIMEOUT_MS) / 1000
    if read_timeout >= receive_timeout:
        raise ConfigError("server read timeout must be shorter than the reply timeout")

    with ExitStack() as stack:
        if args.flawed:
            flawed = Target("flawed", args.flawed, args.flaws)
        else:
            host = stack.enter_context(HostedTarget(args.flaws, "flawed", settings.CANARY, read_timeout))
            flawed = host.target
        if args.hardened:
            hardened = Target("hardened", args.hardened, HARDENED)
        else:
            host = stack.enter_context(HostedTarget(HARDENED, "hardened", settings.CANARY, read_timeout))
            hardened = host.target

        report = run_suite(flawed, hardened, report_path=args.report, canary=settings.CANARY,
                           receive_timeout=receive_timeout, workers=args.workers)

    print(summarize(load_report(args.report)).to_string())
    print(
        f"\nSuite {'PASS' if report.passed else 'FAIL'}: {report.confirmations} confirmations, "
        f"{report.hardened_failures} hardened failures, {len(report.inconclusive)} inconclusive, "
        f"{report.wall_time_s}s. Report: {args.report}"
    )
    for failure in report.failures:
        print(f"  FAIL {failure}")
    passed = report.passed

    if args.isolation:
        isolation = run_isolation(canary=settings.CANARY, receive_timeout=receive_timeout,
                                  read_timeout=read_timeout, workers=args.workers)
        for entry in isolation.flaws:
            status = "ok" if entry.passed else "FAIL"
            print(f"isolation {entry.flaw}: {len(entry.flipped)}/{len(entry.expected)} flipped {status}")
            for case_id in entry.unexpected:
                print(f"  unexpected flip {case_id}")
            for case_id in entry.missing:
                print(f"  missing flip {case_id}")
        for case_id in isolation.baseline_failures:
            print(f"  hardened baseline not SECURE: {case_id}")
        passed = passed and isolation.passed

    return EXIT_OK if passed else EXIT_FAIL


def cmd_decode(args) -> int:
    if not args.trace.is_file():
        raise TraceError(f"trace file not found: {args.trace}")
    print(format_listing(decode_trace(args.trace)))
    return EXIT_OK


def cmd_list_cases(args) -> int:
    cases = builtin_cases()
    for case in cases:
        target = case.targets_flaw.label if case.targets_flaw else "-"
        print(f"{case.id:<26} {case.category.value:<18} {target:<3} {case.signature}")
    print(f"{len(cases)} cases")
    return EXIT_OK


def cmd_fuzz(args) -> int:
    report = fuzz_hardened(args.iterations, args.seed)
    print(
        f"{report.iterations} streams, {report.frames} frames, {report.non_conforming} non-conforming, "
        f"{report.leaks} leaks, {report.crashes} crashes, {report.missing_err} missing Err replies"
    )
    for finding in report.findings[:20]:
        print(f"  #{finding.iteration} {finding.kind}: {finding.detail}")
    return EXIT_OK if report.clean else EXIT_FAIL


COMMANDS = {
    "serve": cmd_serve,
    "put": cmd_put,
    "get": cmd_get,
    "attack": cmd_attack,
    "suite": cmd_suite,
    "decode": cmd_decode,
    "list-cases": cmd_list_cases,
    "fuzz": cmd_fuzz,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )

    config_errors = settings.validate()
    if config_errors:
        logger.error(f"Configuration errors: {config_errors}")
        print(f"error: configuration errors: {config_errors}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return COMMANDS[args.command](args)
    except (ConfigError, StartupError, TraceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConnectError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    except CFTError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAIL


def run(argv: Optional[List[str]] = None) -> None:
    sys.exit(main(argv))
