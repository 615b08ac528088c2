"""Exception hierarchy shared across the package."""

from __future__ import annotations


class MVSwitchError(Exception):
    """Base class for all package errors."""


class DomainError(MVSwitchError, ValueError):
    """An argument lies outside the domain of an operation."""


class PreconditionError(MVSwitchError, ValueError):
    """An operation was called on data that violates its precondition."""


class UnsupportedSpecError(MVSwitchError):
    """The equation is valid but outside what the requested analysis handles."""


class SpecError(MVSwitchError, ValueError):
    """A spec file or spec object failed to parse or validate.

    ``line`` is the 1-based line in the source file when known.
    """

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class BlowUp(MVSwitchError, ArithmeticError):
    """A particle left the finite range during simulation.

    Carries the step index where it happened and, when raised from ``run``,
    the partial moment curve recorded so far.
    """

    def __init__(self, step_index: int, t: float, partial=None, ensemble=None):
        self.step_index = step_index
        self.t = t
        self.partial = partial
        self.ensemble = ensemble
        super().__init__(f"non-finite particle state at step {step_index} (t={t:.17g})")
