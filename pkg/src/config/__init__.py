"""
Configuration module
"""
from .settings import settings, Settings, DEFAULT_CANARY, parse_address, parse_config_file

__all__ = ["settings", "Settings", "DEFAULT_CANARY", "parse_address", "parse_config_file"]
