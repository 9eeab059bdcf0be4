"""
Threaded TCP server for the CFT protocol
"""
import logging
import socket
import threading
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ..protocol import SocketSource, StartupError
from .config import ServerConfig
from .session import (
    ServerContext, SessionEventKind, SessionState, HandleResult, handle_frame, read_frame,
)

logger = logging.getLogger(__name__)

ACCEPT_POLL_INTERVAL = 0.2
LINGER_TIMEOUT = 0.2
LINGER_MAX_BYTES = 1024 * 1024
CANARY_FILENAME = "secret.txt"


def _linger(conn: socket.socket) -> None:
    """Half-close and drain unread input so the final reply is not lost to a reset"""
    try:
        conn.shutdown(socket.SHUT_WR)
        conn.settimeout(LINGER_TIMEOUT)
        drained = 0
        while drained < LINGER_MAX_BYTES:
            chunk = conn.recv(65536)
            if not chunk:
                break
            drained += len(chunk)
    except OSError:
        pass


def plant_canary(config: ServerConfig) -> Path:
    """Write the canary secret next to (not inside) the sandbox root"""
    target = Path(config.sandbox_root).resolve().parent / CANARY_FILENAME
    target.write_text(config.canary_secret, encoding="utf-8")
    logger.info(f"Planted canary file at {target}")
    return target


class CFTServer:
    """CFT server: one accept loop, one thread and one session state machine per connection"""

    def __init__(self, config: ServerConfig):
        self.config = config
        self.context = ServerContext(config)
        self.address: Optional[Tuple[str, int]] = None
        self._listener: Optional[socket.socket] = None
        self._accept_thread: Optional[threading.Thread] = None
        self._connections: Dict[int, socket.socket] = {}
        self._threads: List[threading.Thread] = []
        self._lock = threading.Lock()
        self._crash_count = 0
        self._sessions_served = 0
        self._stopping = threading.Event()

    @property
    def crash_count(self) -> int:
        """Sessions terminated by a simulated crash"""
        with self._lock:
            return self._crash_count

    @property
    def sessions_served(self) -> int:
        with self._lock:
            return self._sessions_served

    @property
    def running(self) -> bool:
        return self._accept_thread is not None and self._accept_thread.is_alive()

    def start(self) -> "CFTServer":
        """Validate the config, plant the canary, bind and start accepting"""
        errors = self.config.validate()
        if errors:
            raise StartupError(f"Configuration errors: {errors}")

        try:
            plant_canary(self.config)
        except OSError as e:
            raise StartupError(f"cannot plant canary file: {e}") from e

        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind(self.config.listen_address)
            listener.listen(16)
        except (OSError, OverflowError) as e:
            listener.close()
            raise StartupError(f"cannot bind {self.config.listen_host}:{self.config.listen_port}: {e}") from e
        listener.settimeout(ACCEPT_POLL_INTERVAL)

        self._listener = listener
        self.address = listener.getsockname()[:2]
        self._accept_thread = threading.Thread(target=self._accept_loop, name=f"cft-accept-{self.address[1]}", daemon=True)
        self._accept_thread.start()
        logger.info(f"Listening on {self.address[0]}:{self.address[1]} (flaws: {self.config.flaws}, root: {self.config.sandbox_root})")
        return self

    def shutdown(self) -> None:
        """Close the listener and drop every open session"""
        self._stopping.set()
        if self._listener is not None:
            self._listener.close()
        with self._lock:
            connections = list(self._connections.values())
            threads = list(self._threads)
        for conn in connections:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=self.config.read_timeout)
        for thread in threads:
            thread.join(timeout=self.config.read_timeout)
        logger.info(
            f"Server on {self.address} shut down after {self.sessions_served} sessions "
            f"({self.crash_count} simulated crashes)"
        )

    def wait(self) -> None:
        """Block until the accept loop ends"""
        while self.running:
            self._accept_thread.join(timeout=0.5)

    def __enter__(self) -> "CFTServer":
        if self._listener is None:
            self.start()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.shutdown()

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError as e:
                if not self._stopping.is_set():
                    logger.error(f"Accept error: {e}")
                break

            thread = threading.Thread(target=self._run_session, args=(conn, addr), daemon=True)
            with self._lock:
                self._connections[conn.fileno()] = conn
                self._threads = [t for t in self._threads if t.is_alive()]
                self._threads.append(thread)
                self._sessions_served += 1
            thread.start()

    def _run_session(self, conn: socket.socket, addr: Tuple[str, int]) -> None:
        key = conn.fileno()
        state = self.context.register(f"{addr[0]}:{addr[1]}")
        source = SocketSource(conn)
        crashed = False
        logger.info(f"session {state.session_id}: connected from {state.peer}")

        try:
            while not self._stopping.is_set():
                report = read_frame(source, self.config)
                if report.end_of_stream:
                    break
                result = handle_frame(state, report, self.config, self.context)
                self._log_events(state, result)
                if result.crashed:
                    crashed = True
                    with self._lock:
                        self._crash_count += 1
                    break
                conn.settimeout(None)
                for frame in result.replies:
                    conn.sendall(frame)
                if result.close or report.closed:
                    break
        except OSError as e:
            logger.info(f"session {state.session_id}: connection error: {e}")
        except Exception as e:
            logger.error(f"session {state.session_id}: handler error: {e}")
        finally:
            self.context.unregister(state)
            with self._lock:
                self._connections.pop(key, None)
            if not crashed and not source.closed:
                _linger(conn)
            try:
                conn.close()
            except OSError:
                pass
            logger.info(f"session {state.session_id}: closed ({state.phase.value})")

    def _log_events(self, state: SessionState, result: HandleResult) -> None:
        for event in result.events:
            if event.kind is SessionEventKind.SIMULATED_CRASH:
                logger.warning(f"session {state.session_id}: simulated crash: {event.detail}")
            elif event.kind is SessionEventKind.LEAK:
                logger.warning(f"session {state.session_id}: leaked {len(event.data)} bytes ({event.detail})")
            else:
                logger.warning(f"session {state.session_id}: {event.kind.value}: {event.detail}")


def serve(config: ServerConfig) -> CFTServer:
    """Start a server and return its running handle"""
    return CFTServer(config).start()
