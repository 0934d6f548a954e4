#!/usr/bin/env python3
"""
Exception hierarchy shared by the toolkit modules and the CLI.
"""

from typing import Any, Optional


class ArmError(Exception):
    """Base exception for all toolkit errors."""
    pass


class InvalidArgumentError(ArmError, ValueError):
    """An argument violates the documented preconditions."""
    pass


class GeometryViolationError(ArmError):
    """The requested geometry cannot exist (e.g. tendon crossing the backbone axis)."""
    pass


class NoSolutionError(ArmError):
    """An inverse problem has no solution for the given data."""
    pass


class DegenerateFitError(ArmError):
    """Circle fit input is collinear or coincident."""
    pass


class ConfigError(ArmError):
    """Project configuration could not be loaded or validated."""
    pass


class SolverFailureError(ArmError):
    """Numerical solver did not converge."""

    def __init__(self, message: str, gradient_norm: float = float("nan"),
                 iterations: int = 0, context: Optional[Any] = None):
        super().__init__(message)
        self.gradient_norm = gradient_norm
        self.iterations = iterations
        self.context = context

    def __str__(self) -> str:
        text = f"{self.args[0]} (gradient norm {self.gradient_norm:.3e} after {self.iterations} iterations)"
        if self.context is not None:
            text += f" [{self.context}]"
        return text


class MocapParseError(ArmError):
    """Malformed motion-capture input."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message)
        self.line = line

    def __str__(self) -> str:
        if self.line is None:
            return str(self.args[0])
        return f"line {self.line}: {self.args[0]}"


class MocapFormatError(MocapParseError):
    """Structurally invalid motion-capture file (header, frame order, emptiness)."""
    pass
