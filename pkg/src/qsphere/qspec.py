"""Deformation parameters, q-numbers and the Dirac spectra.

The Dirac operator of the standard Podles sphere has the distinct
eigenvalues ``|w| [k+1]_q`` (k = 0, 1, ...) with multiplicity ``4(k+1)``.
The simplified operator keeps only the geometric growth,
``|w| q^{-k} / (1 - q^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NumericError, ParameterError

Q_MIN = 1e-6
Q_MAX = 1.0 - 1e-6
# above this the continuation based modules lose accuracy
Q_NEAR_ONE = 0.95


def _check_q(q: float) -> float:
    q = float(q)
    if not (Q_MIN <= q <= Q_MAX):
        raise ParameterError(f"q={q!r} outside [{Q_MIN}, {Q_MAX}]")
    return q


@dataclass(frozen=True)
class DerivedConstants:
    """Constants derived from ``(q, |w|)``.

    Attributes
    ----------
    u : float
        ``|w| q / (1 - q^2)``.
    eta : float
        ``-2 pi / log q``, the spacing of the imaginary pole lattice.
    log_q : float
        ``log q`` (negative).
    """

    u: float
    eta: float
    log_q: float

    def a_tilde(self, a: int) -> float:
        """Return ``2 pi a / log q``."""
        return 2.0 * math.pi * a / self.log_q


@dataclass(frozen=True)
class QParams:
    """Deformation parameter and Dirac scale.

    Parameters
    ----------
    q : float
        Deformation parameter, ``1e-6 <= q <= 1 - 1e-6``.
    w_abs : float, optional
        Modulus of the Dirac constant ``w``; only ``|w|`` enters spectra.
    """

    q: float
    w_abs: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "q", _check_q(self.q))
        w = float(self.w_abs)
        if not (w > 0.0 and math.isfinite(w)):
            raise ParameterError(f"w_abs={self.w_abs!r} must be positive and finite")
        object.__setattr__(self, "w_abs", w)

    @cached_property
    def constants(self) -> DerivedConstants:
        lq = math.log(self.q)
        u = self.w_abs * self.q / (1.0 - self.q * self.q)
        return DerivedConstants(u=u, eta=-2.0 * math.pi / lq, log_q=lq)

    @property
    def u(self) -> float:
        return self.constants.u

    @property
    def eta(self) -> float:
        return self.constants.eta

    @property
    def log_q(self) -> float:
        return self.constants.log_q

    def a_tilde(self, a: int) -> float:
        return self.constants.a_tilde(a)

    @property
    def near_one(self) -> bool:
        """True when q is close enough to 1 that residue series degrade."""
        return self.q > Q_NEAR_ONE


def q_number(n: int, q: float) -> float:
    """Return the q-number ``[n] = (q^-n - q^n) / (q^-1 - q)``.

    Evaluated in the factored form ``q^(1-n) (1 - q^(2n)) / (1 - q^2)``
    with ``expm1`` so that neither overflow nor cancellation occurs.

    Parameters
    ----------
    n : int
        Integer index; ``[-n] = -[n]``.
    q : float
        Deformation parameter in ``[1e-6, 1 - 1e-6]``.

    Returns
    -------
    float

    Raises
    ------
    NumericError
        If ``[n]`` exceeds the binary64 range.
    """
    q = _check_q(q)
    n = int(n)
    if n == 0:
        return 0.0
    if n < 0:
        return -q_number(-n, q)
    lq = math.log(q)
    try:
        return math.exp((1 - n) * lq) * math.expm1(2 * n * lq) / math.expm1(2 * lq)
    except OverflowError:
        raise NumericError(f"[{n}]_q overflows binary64 at q={q}") from None


def eigenvalue_full(k: int, params: QParams) -> float:
    """Return ``|w| [k+1]_q``, the k-th distinct eigenvalue of ``|D|``."""
    if k < 0:
        raise ParameterError(f"eigenvalue index k={k} must be >= 0")
    return params.w_abs * q_number(k + 1, params.q)


def eigenvalue_simplified(k: int, params: QParams) -> float:
    """Return ``|w| q^-k / (1 - q^2)``, the k-th eigenvalue of ``|D_S|``."""
    if k < 0:
        raise ParameterError(f"eigenvalue index k={k} must be >= 0")
    q = params.q
    try:
        return params.w_abs * math.exp(-k * math.log(q)) / (1.0 - q * q)
    except OverflowError:
        raise NumericError(f"simplified eigenvalue k={k} overflows binary64 at q={q}") from None


def multiplicity(k: int) -> int:
    """Return ``4(k+1)``, the multiplicity of the k-th eigenvalue."""
    if k < 0:
        raise ParameterError(f"eigenvalue index k={k} must be >= 0")
    return 4 * (k + 1)


def eigenvalues_full(count: int, params: QParams) -> np.ndarray:
    """Vectorised ``eigenvalue_full`` for ``k = 0 .. count-1``."""
    n = np.arange(1, count + 1, dtype=float)
    lq = params.log_q
    return params.w_abs * np.exp((1 - n) * lq) * np.expm1(2 * n * lq) / math.expm1(2 * lq)


def eigenvalues_simplified(count: int, params: QParams) -> np.ndarray:
    """Vectorised ``eigenvalue_simplified`` for ``k = 0 .. count-1``."""
    k = np.arange(count, dtype=float)
    q = params.q
    return params.w_abs * np.exp(-k * params.log_q) / (1.0 - q * q)
