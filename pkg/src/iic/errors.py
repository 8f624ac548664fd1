"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations

import numpy as np


class IICError(Exception):
    """Base class. ``term`` names the criterion term that failed, when known."""

    def __init__(self, message: str = "", *, term: str | None = None):
        super().__init__(message)
        self.term = term


class ContractViolation(IICError, ValueError):
    """Inputs break a documented precondition (shapes, signs, feasibility)."""


class NumericError(IICError, ArithmeticError):
    """A computation produced non-finite values."""


class RankDeficient(IICError):
    """A Jacobian or Gram matrix is singular to working precision."""

    def __init__(self, message: str = "", singular_values=None, *, term: str | None = None):
        super().__init__(message, term=term)
        self.singular_values = None if singular_values is None else np.asarray(singular_values)


class NotPositiveDefinite(IICError):
    """Cholesky factorisation failed on a matrix required to be SPD."""


class Infeasible(IICError):
    """The interpolating set is empty: targets are not reachable."""


class DidNotConverge(IICError):
    def __init__(self, message: str = "", residual: float | None = None, *, term: str | None = None):
        super().__init__(message, term=term)
        self.residual = residual


class Unsupported(IICError):
    """Request outside the desk-scale range an oracle is built for."""


class DegenerateParameterization(IICError):
    pass


class TailNotResolved(IICError):
    pass


class PriorDegenerate(IICError):
    """The prior mode already interpolates, so the iterated log is undefined."""


class DegenerateResidual(IICError):
    """Zero least-squares residual: BIC is used outside its regime."""


class FormatError(IICError):
    def __init__(self, message: str = "", offset: int | None = None):
        super().__init__(message)
        self.offset = offset


def with_term(exc: IICError, term: str) -> IICError:
    """Re-create ``exc`` tagged with ``term`` for error provenance."""
    exc.term = term
    exc.args = (f"[{term}] {exc.args[0] if exc.args else ''}",) + exc.args[1:]
    return exc
