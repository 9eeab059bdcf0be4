"""
Configuration settings for the CFT security workbench
"""
import os
from pathlib import Path
from typing import Dict, Union

from dotenv import load_dotenv

from ..protocol.errors import ConfigError

# Load environment variables
load_dotenv()

DEFAULT_CANARY = "CFT-CANARY-7f3a9d"

CONFIG_FILE_KEYS = ("listen", "root", "flaws", "canary", "max_file_size", "timeout_ms")


class Settings:
    """Application settings"""

    # Application
    APP_NAME: str = "CFT Security Workbench"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = os.getenv("DEBUG", "false").lower() == "true"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO").upper()

    # Server
    LISTEN: str = os.getenv("CFT_LISTEN", "127.0.0.1:9000")
    SANDBOX_ROOT: str = os.getenv("CFT_ROOT", "sandbox")
    FLAWS: str = os.getenv("CFT_FLAWS", "none")
    CANARY: str = os.getenv("CFT_CANARY", DEFAULT_CANARY)
    MAX_FILE_SIZE: int = int(os.getenv("CFT_MAX_FILE_SIZE", str(16 * 1024 * 1024)))
    MAX_BLOCK_SIZE: int = int(os.getenv("CFT_MAX_BLOCK_SIZE", "4096"))
    MAX_FRAME_LENGTH: int = int(os.getenv("CFT_MAX_FRAME_LENGTH", str(1024 * 1024)))
    READ_TIMEOUT_MS: int = int(os.getenv("CFT_TIMEOUT_MS", "2000"))

    # Client / harness
    RECEIVE_TIMEOUT_MS: int = int(os.getenv("CFT_RECEIVE_TIMEOUT_MS", "3000"))
    REPORT_PATH: str = os.getenv("CFT_REPORT_PATH", "suite-report.jsonl")

    @classmethod
    def validate(cls) -> list[str]:
        """Validate configuration"""
        errors = []

        if not cls.CANARY:
            errors.append("CFT_CANARY must not be empty")

        if cls.READ_TIMEOUT_MS <= 0:
            errors.append("CFT_TIMEOUT_MS must be positive")

        if cls.RECEIVE_TIMEOUT_MS <= cls.READ_TIMEOUT_MS:
            errors.append("CFT_RECEIVE_TIMEOUT_MS must exceed CFT_TIMEOUT_MS so timeout replies are observable")

        if cls.MAX_BLOCK_SIZE < 1 or cls.MAX_BLOCK_SIZE > 0xFFFF:
            errors.append("CFT_MAX_BLOCK_SIZE must be between 1 and 65535")

        try:
            parse_address(cls.LISTEN)
        except ConfigError as e:
            errors.append(str(e))

        return errors


def parse_address(value: str, default_host: str = "127.0.0.1") -> tuple[str, int]:
    """Parse host:port (or a bare port) into an address tuple"""
    host, sep, port = value.rpartition(":")
    if not sep:
        host, port = default_host, value
    try:
        number = int(port)
    except ValueError:
        raise ConfigError(f"invalid address {value!r}: port must be a number") from None
    if not 0 <= number <= 0xFFFF:
        raise ConfigError(f"invalid address {value!r}: port out of range")
    return host or default_host, number


def parse_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """
    Read a server config file of `key = value` lines.

    Blank lines and lines starting with `#` are ignored. Unknown keys and
    lines without `=` raise ConfigError naming the offending line.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e

    values: Dict[str, str] = {}
    for number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{number}: expected 'key = value', got {stripped!r}")
        key = key.strip().lower()
        if key not in CONFIG_FILE_KEYS:
            raise ConfigError(f"{path}:{number}: unknown key {key!r}")
        values[key] = value.strip()
    return values


# Global settings instance
settings = Settings()
