"""
Exception hierarchy for the CFT workbench
"""


class CFTError(Exception):
    """Base class for workbench errors"""


class PayloadMalformed(CFTError):
    """A payload body does not match its opcode's field layout"""

    def __init__(self, field: str, detail: str):
        self.field = field
        self.detail = detail
        super().__init__(f"payload malformed at {field}: {detail}")


class ConnectError(CFTError):
    """Could not open a connection to a CFT server"""


class ProtocolStateError(CFTError):
    """Honest client API used in the wrong protocol phase"""


class ConfigError(CFTError):
    """Invalid configuration value or config file"""


class TraceError(CFTError):
    """Trace sink could not be written or a trace file could not be read"""


class StartupError(CFTError):
    """Server could not start (bind failure, invalid configuration)"""


class ReportError(CFTError):
    """Suite report file could not be read"""
