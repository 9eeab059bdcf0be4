"""
Seeded vulnerability catalog
"""
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Iterable, List

from ..protocol.errors import ConfigError


class Flaw(str, Enum):
    """Toggleable seeded vulnerabilities of the reference server"""

    F1 = "f1_path_traversal"
    F2 = "f2_overrun_leak"
    F3 = "f3_length_smearing"
    F4 = "f4_signed_confusion"
    F5 = "f5_sequence_lax"
    F6 = "f6_debug_disclosure"

    @property
    def label(self) -> str:
        return self.name


@dataclass(frozen=True)
class FlawSet:
    """Which flaws a server instance exhibits"""

    f1_path_traversal: bool = False
    f2_overrun_leak: bool = False
    f3_length_smearing: bool = False
    f4_signed_confusion: bool = False
    f5_sequence_lax: bool = False
    f6_debug_disclosure: bool = False

    @classmethod
    def vulnerable(cls) -> "FlawSet":
        return cls.of(Flaw)

    @classmethod
    def hardened(cls) -> "FlawSet":
        return cls()

    @classmethod
    def of(cls, flaws: Iterable[Flaw]) -> "FlawSet":
        return replace(cls(), **{flaw.value: True for flaw in flaws})

    @classmethod
    def parse(cls, text: str) -> "FlawSet":
        """Parse "all", "none" or a comma list such as "F1,F4" """
        value = text.strip()
        if value.lower() == "all":
            return cls.vulnerable()
        if value.lower() in ("none", ""):
            return cls.hardened()
        selected = []
        for item in value.split(","):
            name = item.strip().upper()
            if name not in Flaw.__members__:
                raise ConfigError(f"unknown flaw {item.strip()!r}; expected all, none or a list of F1..F6")
            selected.append(Flaw[name])
        return cls.of(selected)

    def enabled(self) -> List[Flaw]:
        return [flaw for flaw in Flaw if getattr(self, flaw.value)]

    def has(self, flaw: Flaw) -> bool:
        return getattr(self, flaw.value)

    @property
    def is_hardened(self) -> bool:
        return not any(getattr(self, f.name) for f in fields(self))

    def __str__(self) -> str:
        enabled = self.enabled()
        if not enabled:
            return "none"
        if len(enabled) == len(Flaw):
            return "all"
        return ",".join(flaw.label for flaw in enabled)


VULNERABLE = FlawSet.vulnerable()
HARDENED = FlawSet.hardened()
