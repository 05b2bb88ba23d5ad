"""Exception and warning types shared by all modules."""

from __future__ import annotations


class QSphereError(Exception):
    """Base class for all library errors."""


class ParameterError(QSphereError, ValueError):
    """A model parameter lies outside its admissible range."""


class DomainError(QSphereError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class PoleError(DomainError):
    """Evaluation at (or too close to) a pole.

    Parameters
    ----------
    message : str
        Human readable description.
    pole : complex or int
        The offending pole, or the nearest lattice point.
    """

    def __init__(self, message: str, pole):
        super().__init__(message)
        self.pole = pole


class NumericError(QSphereError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""


class PrecisionWarning(UserWarning):
    """Result is valid but carries reduced precision."""
