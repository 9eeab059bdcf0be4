import time

import pytest

from src.client import Closed, RawFrameSpec, Reply, connect
from src.config import DEFAULT_CANARY
from src.protocol import Data, ErrCode, Hello, PutCommit, PutReq, StartupError
from src.server import (
    CANARY_FILENAME, HARDENED, CFTServer, Flaw, FlawSet, ServerConfig, plant_canary, serve,
)


def test_plant_canary_next_to_root(make_config, sandbox, canary):
    path = plant_canary(make_config())
    assert path == sandbox.resolve().parent / CANARY_FILENAME
    assert path.read_text() == canary
    assert not (sandbox / CANARY_FILENAME).exists()


def test_startup_rejects_missing_root(tmp_path):
    config = ServerConfig(sandbox_root=tmp_path / "absent")
    with pytest.raises(StartupError):
        CFTServer(config).start()


def test_startup_rejects_busy_port(make_config):
    with serve(make_config()) as first:
        with pytest.raises(StartupError):
            CFTServer(make_config(listen_port=first.address[1])).start()


def test_bye_session_closes_cleanly(make_config, receive_timeout):
    with serve(make_config()) as server:
        with connect(server.address, receive_timeout=receive_timeout) as session:
            assert session.hello().is_ok
            assert session.bye().is_ok
            assert isinstance(session.receive(), Closed)
        assert server.crash_count == 0
        deadline = time.monotonic() + 2.0
        while server.sessions_served < 1 and time.monotonic() < deadline:
            time.sleep(0.01)
        assert server.sessions_served == 1


def test_startup_rejects_port_out_of_range(make_config):
    with pytest.raises(StartupError):
        CFTServer(make_config(listen_port=70000)).start()


def test_shutdown_drops_sessions(make_config, receive_timeout):
    server = serve(make_config())
    session = connect(server.address, receive_timeout=receive_timeout)
    session.hello()
    started = time.monotonic()
    server.shutdown()
    assert time.monotonic() - started < 2.0
    assert not server.running
    assert isinstance(session.receive(), Closed)
    session.close()


def test_oversize_reply_survives_close(make_config, receive_timeout):
    with serve(make_config()) as server, connect(server.address, receive_timeout=receive_timeout) as session:
        session.send_raw(RawFrameSpec.of(Hello("x" * 64), declared_length=0x7FFFFFFF))
        event = session.receive()
        assert isinstance(event, Reply)
        assert event.err_code == ErrCode.FRAME_TOO_LARGE
        assert isinstance(session.receive(), Closed)


def test_crash_aborts_only_its_session(make_config, receive_timeout):
    content = bytes(range(40))
    with serve(make_config(FlawSet.of([Flaw.F2]))) as server:
        honest = connect(server.address, receive_timeout=receive_timeout)
        attacker = connect(server.address, receive_timeout=receive_timeout)
        try:
            assert honest.hello().is_ok
            assert honest.request(PutReq("honest.bin", len(content), 8)).is_ok
            assert honest.request(Data(0, content[:8])).is_ok

            assert attacker.hello().is_ok
            assert attacker.request(PutReq("overrun.bin", 4, 4)).is_ok
            assert isinstance(attacker.request(Data(0, b"A" * 304)), Closed)

            for index in range(1, 5):
                assert honest.request(Data(index, content[index * 8:(index + 1) * 8])).is_ok
            assert honest.request(PutCommit()).is_ok
        finally:
            honest.close()
            attacker.close()
        assert server.crash_count == 1
        assert server.running
    assert (server.config.sandbox_root / "honest.bin").read_bytes() == content


def test_server_survives_many_crashes(make_config, receive_timeout):
    with serve(make_config(FlawSet.of([Flaw.F4]))) as server:
        for _ in range(3):
            with connect(server.address, receive_timeout=receive_timeout) as session:
                session.hello()
                assert isinstance(session.request(PutReq("z.bin", 10, 0)), Closed)
        with connect(server.address, receive_timeout=receive_timeout) as session:
            assert session.hello().is_ok
        assert server.crash_count == 3


def test_hardened_times_out_mid_frame(make_config, receive_timeout):
    config = make_config(HARDENED)
    with serve(config) as server, connect(server.address, receive_timeout=receive_timeout) as session:
        session.send_bytes(RawFrameSpec.of(Hello("slow")).resolve()[:6])
        started = time.monotonic()
        event = session.receive()
        assert event.err_code == ErrCode.MALFORMED
        assert time.monotonic() - started < receive_timeout


def test_default_canary_planted_by_start(make_config, sandbox):
    with serve(make_config()):
        assert (sandbox.parent / CANARY_FILENAME).read_text() == DEFAULT_CANARY
