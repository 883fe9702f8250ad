"""Exception types shared across the toolkit.

Every error carries the name of the subsystem that raised it so the CLI
can emit machine-readable error documents with a stable ``module`` field.
"""

from __future__ import annotations


class EigenspotError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, message: str, *, module: str = "eigenspot") -> None:
        super().__init__(message)
        self.module = module


class InputError(EigenspotError):
    """Invalid data, configuration, or arguments (CLI exit code 2)."""


class NumericalError(EigenspotError):
    """Numerical failure during a computation (CLI exit code 3)."""


class ConvergenceError(NumericalError):
    """An iterative solver ran out of iterations.

    The achieved residual is kept so callers can report how far the
    solve got before giving up.
    """

    def __init__(
        self,
        message: str,
        *,
        residual: float,
        iterations: int,
        module: str = "tensors",
    ) -> None:
        super().__init__(message, module=module)
        self.residual = residual
        self.iterations = iterations


class DegenerateModeError(NumericalError):
    """A tensor mode whose unfolding carries no mass at all.

    No eigen-direction is meaningful for such a mode, so decomposition
    refuses to proceed. The offending mode is named in the message and
    kept as an attribute.
    """

    def __init__(self, message: str, *, mode: int, module: str = "tensors") -> None:
        super().__init__(message, module=module)
        self.mode = mode
