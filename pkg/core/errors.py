# core/errors.py
"""Exception hierarchy shared by every engine in ``core``."""
from dataclasses import dataclass
from typing import Any, Dict, List, Optional


class AirCompError(Exception):
    """Base class for all errors raised by aircomp."""


class ParameterError(AirCompError, ValueError):
    """Invalid count, radius, seed or other structural argument."""


class DomainError(AirCompError, ValueError):
    """Argument outside the mathematical domain of a formula."""


class DivergenceError(DomainError):
    """The requested quantity is infinite."""


class DegeneracyError(AirCompError, ValueError):
    """Coplanar / near-zero-volume geometry."""


class NumericError(AirCompError, RuntimeError):
    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        extra = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        return f"{base} ({extra})"


class SolverError(NumericError):
    """Root bracketing or solving failed."""


@dataclass(frozen=True)
class ConfigIssue:
    line: int
    key: str
    message: str

    def format(self, source: str = "<config>") -> str:
        if self.line > 0:
            return f"{source}:{self.line}: {self.key}: {self.message}"
        return f"{source}: {self.key}: {self.message}"


class ConfigError(AirCompError, ValueError):
    def __init__(self, issues: List[ConfigIssue], source: str = "<config>"):
        self.issues = list(issues)
        self.source = source
        super().__init__("\n".join(i.format(source) for i in self.issues) or "invalid configuration")


class Cancelled(AirCompError):
    """A stop was requested through a run controller."""
