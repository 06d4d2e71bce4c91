"""Exception hierarchy shared by every module."""

from __future__ import annotations


class DiscriminationError(Exception):
    """Base class for all errors raised by loccdisc."""


class InputError(DiscriminationError, ValueError):
    """An argument violates a documented precondition."""


class NumericalFailure(DiscriminationError, ArithmeticError):
    """An iterative procedure did not reach its target residual.

    ``stage`` names the procedure and ``residual`` the best value reached.
    """

    def __init__(self, message: str, *, stage: str = "", residual: float | None = None):
        super().__init__(message)
        self.stage = stage
        self.residual = residual

    def __str__(self) -> str:
        base = super().__str__()
        parts = [base]
        if self.stage:
            parts.append(f"stage={self.stage}")
        if self.residual is not None:
            parts.append(f"residual={self.residual:.3e}")
        return " ".join(parts) if len(parts) > 1 else base
