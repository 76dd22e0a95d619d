"""Exceptions raised by nonlocal_compactness.

Every error derives from a builtin so callers can keep catching
``ValueError`` or ``NotImplementedError``. The CLI maps them to exit codes.
"""

from typing import Optional


class KernelSingularityError(ValueError):
    """A kernel singular at the origin was evaluated at xi = 0."""


class DegenerateKernelError(ValueError):
    """A kernel integral that must be positive vanished."""


class DomainError(ValueError):
    """A point lies outside the set an operation is defined on."""


class ResolutionError(ValueError):
    """The grid is too coarse for the requested scale."""


class RankError(ValueError):
    """A matrix that must be nonsingular is numerically singular."""


class HypothesisViolatedError(ValueError):
    """An experiment's standing hypothesis failed on the data."""


class CapabilityError(NotImplementedError):
    """The requested combination of inputs is not supported."""


class ConfigError(ValueError):
    """Invalid experiment configuration.

    Attributes:
        key: Offending config key, if any.
        line: 1-based line in the config text, if known.
    """

    def __init__(
        self,
        message: str,
        key: Optional[str] = None,
        line: Optional[int] = None,
    ):
        self.key = key
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
