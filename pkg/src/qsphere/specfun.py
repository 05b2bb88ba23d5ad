"""Complex special functions used by the residue series.

Gamma is a Lanczos approximation (g = 607/128, 15 terms) continued by
reflection, polygamma uses upward recurrence plus the Stirling tail, and
Bessel functions of complex order are summed from their power series
with the reciprocal gamma and polygamma values carried by recurrence.
"""

from __future__ import annotations

import cmath
import math
from typing import NamedTuple

from .errors import DomainError, NumericError, PoleError

EULER_GAMMA = 0.57721566490153286060651209008240243

_LANCZOS_G = 607.0 / 128.0
_LANCZOS_C = (
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# B_2k for the Stirling tails of the polygamma functions
_BERNOULLI = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
)

SERIES_CAP = 500
SERIES_TOL = 1e-17


def _nonpositive_integer(z: complex) -> int | None:
    if z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real):
        return int(z.real)
    return None


def _sin_pi(z: complex) -> complex:
    # argument reduction keeps sin(pi z) accurate for large |Re z|
    n = round(z.real)
    s = cmath.sin(math.pi * (z - n))
    return -s if n % 2 else s


def _lanczos(z: complex) -> complex:
    """Gamma(z) for Re z >= 0.5."""
    zm = z - 1.0
    acc = complex(_LANCZOS_C[0])
    for i in range(1, len(_LANCZOS_C)):
        acc += _LANCZOS_C[i] / (zm + i)
    t = zm + _LANCZOS_G + 0.5
    return cmath.exp(_HALF_LOG_2PI + (zm + 0.5) * cmath.log(t) - t) * acc


def gamma_c(z: complex) -> complex:
    """Gamma function of a complex argument.

    Parameters
    ----------
    z : complex
        Any point except the non-positive integers.

    Returns
    -------
    complex

    Raises
    ------
    PoleError
        If ``z`` is a non-positive integer; ``pole`` carries the integer.
    """
    z = complex(z)
    n = _nonpositive_integer(z)
    if n is not None:
        raise PoleError(f"Gamma has a pole at z={n}", n)
    if z.real < 0.5:
        return math.pi / (_sin_pi(z) * _lanczos(1.0 - z))
    return _lanczos(z)


def recip_gamma(z: complex) -> complex:
    """Entire function ``1/Gamma(z)``, exactly zero at ``z = 0, -1, -2, ...``."""
    z = complex(z)
    if _nonpositive_integer(z) is not None:
        return 0j
    if z.real < 0.5:
        return _sin_pi(z) * _lanczos(1.0 - z) / math.pi
    return 1.0 / _lanczos(z)


def polygamma(n: int, z: complex) -> complex:
    """Polygamma function ``psi^(n)(z)`` for ``n`` in ``{0, 1, 2}``.

    Parameters
    ----------
    n : int
        Order, 0 (digamma), 1 (trigamma) or 2.
    z : complex
        Argument, not a non-positive integer.

    Returns
    -------
    complex
    """
    if n not in (0, 1, 2):
        raise DomainError(f"polygamma order n={n} not in {{0, 1, 2}}")
    z = complex(z)
    p = _nonpositive_integer(z)
    if p is not None:
        raise PoleError(f"polygamma has a pole at z={p}", p)
    shift = 0j
    while z.real < 10.0:
        if n == 0:
            shift -= 1.0 / z
        elif n == 1:
            shift += 1.0 / (z * z)
        else:
            shift -= 2.0 / (z * z * z)
        z += 1.0
    w = 1.0 / z
    w2 = w * w
    if n == 0:
        tail = 0j
        wp = w2
        for k, b in enumerate(_BERNOULLI, start=1):
            tail += b / (2 * k) * wp
            wp *= w2
        return shift + cmath.log(z) - 0.5 * w - tail
    if n == 1:
        tail = 0j
        wp = w2 * w
        for b in _BERNOULLI:
            tail += b * wp
            wp *= w2
        return shift + w + 0.5 * w2 + tail
    tail = 0j
    wp = w2 * w2
    for k, b in enumerate(_BERNOULLI, start=1):
        tail += (2 * k + 1) * b * wp
        wp *= w2
    return shift - w2 - w2 * w - tail


class SeriesResult(NamedTuple):
    """Value of a power series together with diagnostics.

    Attributes
    ----------
    value : complex
        Compensated sum of the series.
    terms : int
        Number of terms used.
    s_max : float
        Largest magnitude reached by a partial sum.
    """

    value: complex
    terms: int
    s_max: float


def _csum(terms: list[complex]) -> complex:
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


def _rg_derivs_at_nonpositive(j: int, order: int) -> complex:
    # derivative of 1/Gamma at z = -j from 1/Gamma(-j+e) = (-1)^j j! e (1 - e psi(j+1) + ...)
    base = (-1) ** j * math.factorial(j)
    if order == 0:
        return 0j
    if order == 1:
        return complex(base)
    return complex(-2.0 * base * polygamma(0, j + 1).real)


def bessel_series(nu: complex, x: float, order: int = 0,
                  tol: float = SERIES_TOL, cap: int = SERIES_CAP) -> SeriesResult:
    """Sum ``sum_k (-1)^k/k! (x/2)^(2k+nu) R(k+nu+1)`` with diagnostics.

    ``R`` is ``1/Gamma`` for ``order=0`` and its first or second derivative
    for ``order`` 1 or 2, which gives ``J_nu`` and the two derivative
    families ``Jtilde^(1)``, ``Jtilde^(2)``.

    Parameters
    ----------
    nu : complex
        Order of the Bessel function.
    x : float
        Real argument, ``x >= 0``.
    order : int
        0, 1 or 2.
    tol : float
        Relative stopping tolerance.
    cap : int
        Maximal number of terms.

    Returns
    -------
    SeriesResult
    """
    nu = complex(nu)
    x = float(x)
    if x < 0.0 or not math.isfinite(x):
        raise DomainError(f"Bessel argument x={x} must be finite and >= 0")
    if x == 0.0:
        if nu == 0:
            return SeriesResult(_rg_value(1.0 + 0j, order), 1, abs(_rg_value(1.0 + 0j, order)))
        if nu.real > 0.0:
            return SeriesResult(0j, 1, 0.0)
        raise DomainError(f"Bessel series at x=0 undefined for Re(nu)={nu.real} <= 0, nu != 0")

    half = 0.5 * x
    y = half * half
    p = cmath.exp(nu * math.log(half))
    ni = _nonpositive_integer(nu + 1.0)
    if ni is not None:
        # integer order nu = -p: coefficients via the entire-function limit
        r = psi = psi1 = 0j
    else:
        m = nu + 1.0
        r = recip_gamma(m)
        psi = polygamma(0, m) if order >= 1 else 0j
        psi1 = polygamma(1, m) if order >= 2 else 0j

    terms: list[complex] = []
    partial = 0j
    s_max = 0.0
    small = 0
    for k in range(cap):
        if ni is not None:
            mk = k + ni
            if mk <= 0:
                rk = _rg_derivs_at_nonpositive(-mk, order)
            else:
                if mk == 1:
                    r, psi, psi1 = 1.0 + 0j, complex(-EULER_GAMMA), complex(math.pi ** 2 / 6.0)
                rk = _combine(r, psi, psi1, order)
        else:
            rk = _combine(r, psi, psi1, order)
        term = p * rk
        terms.append(term)
        partial += term
        s_max = max(s_max, abs(partial))
        if abs(term) <= tol * (abs(partial) + 1.0):
            small += 1
            if small >= 3:
                return SeriesResult(_csum(terms), k + 1, s_max)
        else:
            small = 0
        # advance k -> k+1
        p *= -y / (k + 1)
        if ni is not None:
            mk = k + ni
            if mk >= 1:
                r, psi, psi1 = r / mk, psi + 1.0 / mk, psi1 - 1.0 / (mk * mk)
        else:
            mk = nu + 1.0 + k
            r, psi, psi1 = r / mk, psi + 1.0 / mk, psi1 - 1.0 / (mk * mk)
    raise NumericError(f"Bessel series did not converge in {cap} terms (nu={nu}, x={x})")


def _combine(r: complex, psi: complex, psi1: complex, order: int) -> complex:
    if order == 0:
        return r
    if order == 1:
        return -psi * r
    return (psi * psi - psi1) * r


def _rg_value(m: complex, order: int) -> complex:
    r = recip_gamma(m)
    if order == 0:
        return r
    psi = polygamma(0, m)
    if order == 1:
        return -psi * r
    return (psi * psi - polygamma(1, m)) * r


def bessel_j(nu: complex, x: float) -> complex:
    """Bessel function ``J_nu(x)`` of complex order and real argument ``x >= 0``."""
    return bessel_series(nu, x, 0).value


def jtilde(n: int, nu: complex, x: float) -> complex:
    """Derivative family ``d^n/da^n [(x/2)^-a J_(a+nu)(x)]`` at ``a = 0``.

    Parameters
    ----------
    n : int
        1 or 2.
    nu : complex
        Order.
    x : float
        Real argument, ``x >= 0``.
    """
    if n not in (1, 2):
        raise DomainError(f"jtilde order n={n} not in {{1, 2}}")
    return bessel_series(nu, x, n).value


def bessel_y0(x: float) -> float:
    """Bessel function of the second kind ``Y_0(x)``, ``x > 0``.

    Uses the classical harmonic-number series, independent of ``jtilde``.
    """
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"Y0 requires x > 0, got {x}")
    y = 0.25 * x * x
    j0_terms = [1.0]
    rem_terms = []
    term = 1.0
    harmonic = 0.0
    for k in range(1, SERIES_CAP):
        term *= -y / (k * k)
        harmonic += 1.0 / k
        j0_terms.append(term)
        rem_terms.append(-term * harmonic)
        if abs(term) * (1.0 + harmonic) < 1e-18:
            break
    j0 = math.fsum(j0_terms)
    return (2.0 / math.pi) * ((math.log(0.5 * x) + EULER_GAMMA) * j0 + math.fsum(rem_terms))


def erf(x: float) -> float:
    """Error function (delegates to :func:`math.erf`)."""
    return math.erf(x)
