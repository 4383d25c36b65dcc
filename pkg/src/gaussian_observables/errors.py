from __future__ import annotations
import logging
from typing import Optional

logger = logging.getLogger(__name__)


class ObservableError(Exception):
    """
    Base exception for the package. The message is logged when the error is raised.
    """

    def __init__(self, message: str):
        self.message = message
        logger.error(self.message)
        super().__init__(self.message)


class ShapeError(ObservableError):
    """Matrix or vector dimensions do not match the declared mode/outcome counts."""


class SymmetryError(ObservableError):
    """A matrix required to be symmetric (or skew-symmetric) is not, within tolerance."""


class ColumnRankError(ObservableError):
    """K does not have full column rank."""


class ValidityError(ObservableError):
    """The matrix inequality alpha >= +-(i/2) Delta_K (or its state analogue) fails."""

    def __init__(self, message: str, min_eigenvalue: Optional[float] = None):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(message)


class InfeasibleComplementError(ObservableError):
    """No isotropic partner with the requested properties exists."""


class DecompositionError(ObservableError):
    """A canonical form failed its residual postcondition."""

    def __init__(self, message: str, residual: Optional[float] = None):
        self.residual = residual
        super().__init__(message)


class TypeMismatchError(ObservableError):
    """An operation restricted to one observable type received another."""


class StateError(ObservableError):
    """Invalid Gaussian state or outcome distribution."""


class SchemaError(ObservableError):
    """An input file does not follow the observable/state file schema."""
