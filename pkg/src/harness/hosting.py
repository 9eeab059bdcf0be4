"""
Self-hosted loopback targets for the suite
"""
import logging
import shutil
import tempfile
from pathlib import Path
from typing import Optional, Tuple

from tenacity import retry, retry_if_exception_type, stop_after_delay, wait_fixed

from ..client import connect
from ..config import DEFAULT_CANARY
from ..protocol import ConnectError
from ..server import CFTServer, FlawSet, ServerConfig
from .models import Target

logger = logging.getLogger(__name__)


@retry(
    stop=stop_after_delay(5),
    wait=wait_fixed(0.05),
    retry=retry_if_exception_type(ConnectError),
    reraise=True,
)
def wait_until_ready(address: Tuple[str, int]) -> None:
    """Block until the server accepts a connection"""
    connect(address, timeout=0.5).close()


class HostedTarget:
    """
    A server on an ephemeral loopback port with its own temporary sandbox.

    The sandbox lives in a fresh temporary directory, so the planted canary
    file (next to the sandbox) never collides with another target's.
    """

    def __init__(
        self,
        flaws: FlawSet,
        name: Optional[str] = None,
        canary: str = DEFAULT_CANARY,
        read_timeout: float = 2.0,
        max_file_size: int = 16 * 1024 * 1024,
    ):
        self.flaws = flaws
        self.name = name or str(flaws)
        self.canary = canary
        self.read_timeout = read_timeout
        self.max_file_size = max_file_size
        self.server: Optional[CFTServer] = None
        self._workdir: Optional[Path] = None

    @property
    def sandbox_root(self) -> Path:
        return self._workdir / "root"

    @property
    def target(self) -> Target:
        server = self.server
        return Target(name=self.name, address=server.address, flaws=self.flaws, crash_counter=lambda: server.crash_count)

    def start(self) -> "HostedTarget":
        self._workdir = Path(tempfile.mkdtemp(prefix="cft-"))
        self.sandbox_root.mkdir()
        config = ServerConfig(
            sandbox_root=self.sandbox_root,
            listen_host="127.0.0.1",
            listen_port=0,
            flaws=self.flaws,
            canary_secret=self.canary,
            read_timeout=self.read_timeout,
            max_file_size=self.max_file_size,
        )
        self.server = CFTServer(config).start()
        wait_until_ready(self.server.address)
        logger.info(f"Hosted {self.name} target on {self.server.address[0]}:{self.server.address[1]}")
        return self

    def stop(self) -> None:
        if self.server is not None:
            self.server.shutdown()
        if self._workdir is not None:
            shutil.rmtree(self._workdir, ignore_errors=True)

    def __enter__(self) -> "HostedTarget":
        return self.start()

    def __exit__(self, exc_type, exc, tb) -> None:
        self.stop()
