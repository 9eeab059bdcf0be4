"""
Shared fixtures: temporary sandboxes and loopback servers with short timeouts
"""
import pytest

from src.config import DEFAULT_CANARY
from src.harness import HostedTarget
from src.server import HARDENED, FlawSet, ServerConfig, ServerContext

READ_TIMEOUT = 0.3
RECEIVE_TIMEOUT = 1.0


@pytest.fixture
def canary():
    return DEFAULT_CANARY


@pytest.fixture
def sandbox(tmp_path):
    root = tmp_path / "root"
    root.mkdir()
    return root


@pytest.fixture
def make_config(sandbox):
    """ServerConfig over the temporary sandbox for a given flaw set"""
    def factory(flaws: FlawSet = HARDENED, **overrides) -> ServerConfig:
        return ServerConfig(sandbox_root=sandbox, flaws=flaws, read_timeout=READ_TIMEOUT, **overrides)
    return factory


@pytest.fixture
def make_context(make_config):
    def factory(flaws: FlawSet = HARDENED, **overrides):
        config = make_config(flaws, **overrides)
        return config, ServerContext(config)
    return factory


@pytest.fixture
def hosted():
    """Start loopback servers on demand; all of them are stopped after the test"""
    started = []

    def factory(flaws: FlawSet = HARDENED, name=None) -> HostedTarget:
        host = HostedTarget(flaws, name=name, read_timeout=READ_TIMEOUT).start()
        started.append(host)
        return host

    yield factory
    for host in started:
        host.stop()


@pytest.fixture
def receive_timeout():
    return RECEIVE_TIMEOUT
