"""Exceptions raised by the toolkit. The command line maps each of them onto a stable exit code."""
from typing import Optional


class SampledControlException(Exception):
    pass


class DomainError(SampledControlException):
    """An argument lies outside the range an operation is defined on."""
    pass


class NumericalFailure(SampledControlException):
    pass


class FormatError(SampledControlException):
    """An input document could not be parsed against its schema."""
    pass


class ValidationError(SampledControlException):
    """Parsed input violates a model invariant. `field_path` names the offending field, e.g. ``diffusion[0]``."""

    def __init__(self, message: str, *, field_path: Optional[str] = None):
        super().__init__(message if field_path is None else f"{field_path}: {message}")
        self.field_path = field_path


class InfeasibleError(SampledControlException):
    pass


class CallbackError(SampledControlException):
    """A user supplied callback raised or returned garbage while simulating at time `t`."""

    def __init__(self, message: str, *, t: float):
        super().__init__(f"{message} (at t={t:.6g})")
        self.t = t


class DegenerateEnsemble(SampledControlException):
    pass
