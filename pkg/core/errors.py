"""Exception hierarchy.

The CLI maps ConfigurationError and InputDataError to exit code 2 and
ConvergenceError to exit code 3.
"""
from typing import Dict, Optional


class DephasimError(Exception):
    """Base class for all dephasim errors."""


class ConfigurationError(DephasimError, ValueError):
    """Invalid or incomplete configuration."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        location = []
        if field:
            location.append(field)
        if line is not None:
            location.append(f"line {line}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class InputDataError(DephasimError, ValueError):
    """A data file could not be parsed or holds invalid values."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ConvergenceError(DephasimError, RuntimeError):
    """Least-squares iteration stopped without converging."""

    def __init__(
        self,
        message: str,
        last_state: Optional[Dict[str, float]] = None,
        iterations: int = 0,
    ):
        self.last_state = dict(last_state or {})
        self.iterations = iterations
        super().__init__(message)

    def diagnostics(self) -> str:
        """Human readable dump of the last optimizer state."""
        lines = [f"iterations: {self.iterations}"]
        for name, value in self.last_state.items():
            lines.append(f"  {name} = {value:.10g}")
        return "\n".join(lines)
