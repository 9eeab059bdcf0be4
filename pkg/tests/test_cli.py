import pytest

from src.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from src.protocol import Opcode, encode_frame
from src.server import Flaw, FlawSet


def address(host) -> str:
    hostname, port = host.server.address
    return f"{hostname}:{port}"


def test_list_cases(capsys):
    assert main(["list-cases"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.strip().endswith("42 cases")
    assert "C-DIR-1" in out
    assert "CanaryInReply{PATH_DENIED}" in out


def test_unknown_flag_is_usage_error():
    assert main(["list-cases", "--bogus"]) == EXIT_USAGE


def test_missing_command_is_usage_error():
    assert main([]) == EXIT_USAGE


def test_bad_flaw_list_is_usage_error():
    assert main(["suite", "--self-hosted", "--flaws", "F9"]) == EXIT_USAGE


def test_decode_missing_trace(tmp_path, capsys):
    assert main(["decode", str(tmp_path / "absent.trace")]) == EXIT_USAGE
    assert "trace file not found" in capsys.readouterr().err


def test_decode_trace(tmp_path, capsys):
    path = tmp_path / "bye.trace"
    path.write_text(f"0 C2S {encode_frame(Opcode.BYE, b'').hex()}\n")
    assert main(["decode", str(path)]) == EXIT_OK
    assert "BYE" in capsys.readouterr().out


def test_attack_unknown_case(hosted):
    assert main(["attack", "--target", address(hosted()), "--case", "C-NOPE"]) == EXIT_USAGE


def test_attack_exit_status(hosted, capsys):
    flawed = hosted(FlawSet.of([Flaw.F1]))
    hardened = hosted()
    assert main(["attack", "--target", address(flawed), "--case", "C-DIR-1", "--timeout-ms", "1000"]) == EXIT_FAIL
    assert "VULNERABLE_CONFIRMED" in capsys.readouterr().out
    assert main(["attack", "--target", address(hardened), "--case", "C-DIR-1", "--timeout-ms", "1000"]) == EXIT_OK
    assert "SECURE" in capsys.readouterr().out


def test_attack_writes_trace(hosted, tmp_path):
    trace = tmp_path / "attack.trace"
    args = ["attack", "--target", address(hosted()), "--case", "C-OPC-UNKNOWN", "--trace", str(trace),
            "--timeout-ms", "1000"]
    assert main(args) == EXIT_OK
    assert main(["decode", str(trace)]) == EXIT_OK


def test_put_then_get(hosted, tmp_path, capsys):
    host = hosted()
    source = tmp_path / "upload.bin"
    source.write_bytes(bytes(range(256)) * 4)
    assert main(["put", "--target", address(host), str(source), "--block-size", "100"]) == EXIT_OK
    assert "stored 1024 bytes in 11 blocks" in capsys.readouterr().out
    assert (host.sandbox_root / "upload.bin").read_bytes() == source.read_bytes()

    output = tmp_path / "download.bin"
    assert main(["get", "--target", address(host), "upload.bin", "--output", str(output)]) == EXIT_OK
    assert output.read_bytes() == source.read_bytes()


def test_get_refused(hosted, capsys):
    assert main(["get", "--target", address(hosted()), "../secret.txt"]) == EXIT_FAIL
    assert "PATH_DENIED" in capsys.readouterr().err


def test_put_unreadable_file(hosted, tmp_path):
    assert main(["put", "--target", address(hosted()), str(tmp_path / "absent.bin")]) == EXIT_USAGE


def test_put_to_closed_port(tmp_path):
    source = tmp_path / "a.txt"
    source.write_text("x")
    assert main(["put", "--target", "127.0.0.1:1", str(source)]) == EXIT_FAIL


@pytest.mark.parametrize("block_size", ["0", "70000"])
def test_put_block_size_out_of_range(hosted, tmp_path, block_size):
    source = tmp_path / "a.txt"
    source.write_text("x")
    assert main(["put", "--target", address(hosted()), str(source), "--block-size", block_size]) == EXIT_USAGE


def test_serve_port_out_of_range(tmp_path):
    assert main(["serve", "--root", str(tmp_path), "--port", "70000"]) == EXIT_USAGE


@pytest.mark.slow
def test_self_hosted_suite(tmp_path, capsys):
    report = tmp_path / "report.jsonl"
    args = ["suite", "--self-hosted", "--report", str(report), "--timeout-ms", "1000", "--server-timeout-ms", "300"]
    assert main(args) == EXIT_OK
    assert "Suite PASS" in capsys.readouterr().out
    assert report.is_file()
