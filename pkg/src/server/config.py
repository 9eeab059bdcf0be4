"""
Server configuration
"""
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional

from ..config import settings, DEFAULT_CANARY, parse_address, parse_config_file
from ..protocol.errors import ConfigError
from .flaws import FlawSet

MAX_FILENAME_LENGTH = 255


@dataclass(frozen=True)
class ServerConfig:
    """Everything one server instance needs"""

    sandbox_root: Path
    listen_host: str = "127.0.0.1"
    listen_port: int = 0
    flaws: FlawSet = field(default_factory=FlawSet)
    canary_secret: str = DEFAULT_CANARY
    max_file_size: int = 16 * 1024 * 1024
    read_timeout: float = 2.0
    max_block_size: int = 4096
    max_frame_length: int = 1024 * 1024
    max_filename_length: int = MAX_FILENAME_LENGTH

    @property
    def listen_address(self) -> tuple[str, int]:
        return self.listen_host, self.listen_port

    def validate(self) -> list[str]:
        """Validate configuration"""
        errors = []

        if not self.sandbox_root.is_dir():
            errors.append(f"sandbox root is not an existing directory: {self.sandbox_root}")

        if not self.canary_secret:
            errors.append("canary secret must not be empty")

        if self.read_timeout <= 0:
            errors.append("read timeout must be positive")

        if not 0 <= self.listen_port <= 0xFFFF:
            errors.append(f"listen port {self.listen_port} is outside 0..65535")

        if self.max_file_size < 0 or self.max_file_size > 0xFFFFFFFF:
            errors.append("max_file_size must fit an unsigned 32-bit value")

        return errors

    @classmethod
    def from_mapping(cls, values: Dict[str, str], base: Optional["ServerConfig"] = None) -> "ServerConfig":
        """Build a config from config-file keys (listen, root, flaws, canary, max_file_size, timeout_ms)"""
        config = base or cls.from_settings()
        changes = {}
        try:
            if "listen" in values:
                changes["listen_host"], changes["listen_port"] = parse_address(values["listen"])
            if "root" in values:
                changes["sandbox_root"] = Path(values["root"])
            if "flaws" in values:
                changes["flaws"] = FlawSet.parse(values["flaws"])
            if "canary" in values:
                changes["canary_secret"] = values["canary"]
            if "max_file_size" in values:
                changes["max_file_size"] = int(values["max_file_size"])
            if "timeout_ms" in values:
                changes["read_timeout"] = int(values["timeout_ms"]) / 1000
        except ValueError as e:
            raise ConfigError(f"invalid numeric value in server config: {e}") from e
        return replace(config, **changes)

    @classmethod
    def from_file(cls, path: Path, base: Optional["ServerConfig"] = None) -> "ServerConfig":
        return cls.from_mapping(parse_config_file(path), base)

    @classmethod
    def from_settings(cls) -> "ServerConfig":
        host, port = parse_address(settings.LISTEN)
        return cls(
            sandbox_root=Path(settings.SANDBOX_ROOT),
            listen_host=host,
            listen_port=port,
            flaws=FlawSet.parse(settings.FLAWS),
            canary_secret=settings.CANARY,
            max_file_size=settings.MAX_FILE_SIZE,
            read_timeout=settings.READ_TIMEOUT_MS / 1000,
            max_block_size=settings.MAX_BLOCK_SIZE,
            max_frame_length=settings.MAX_FRAME_LENGTH,
        )
