"""Spectral zeta functions of ``|D|`` and ``|D_S|``.

``zeta_direct`` sums the Dirichlet series, ``zeta_continued`` uses the
binomial expansion of ``(1 - q^(2k+2))^(-s)`` which continues the function
to the whole plane with double poles on ``-2N + i eta Z``.  Laurent data at
the poles are extracted by trapezoidal quadrature on small circles.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DomainError, NumericError, PoleError
from .qspec import QParams


@dataclass(frozen=True)
class SeriesControl:
    """Truncation caps and tolerances for infinite series.

    Parameters
    ----------
    tol : float
        Target relative tolerance.
    max_terms : int
        Hard cap on the number of terms of any single series.
    lattice_guard : float or None
        Minimal distance to a pole below which continuation refuses to
        evaluate; ``None`` means ``min(0.1, eta/8)``.
    min_re_direct : float
        Smallest ``Re s`` accepted by :func:`zeta_direct`.
    """

    tol: float = 1e-16
    max_terms: int = 200_000
    lattice_guard: float | None = None
    min_re_direct: float = 0.05

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError(f"tol={self.tol} must be positive")
        if self.max_terms < 10:
            raise DomainError(f"max_terms={self.max_terms} must be >= 10")
        if self.lattice_guard is not None and not self.lattice_guard > 0:
            raise DomainError(f"lattice_guard={self.lattice_guard} must be positive")

    def guard(self, params: QParams) -> float:
        if self.lattice_guard is not None:
            return self.lattice_guard
        return min(0.1, params.eta / 8.0)


DEFAULT_CONTROL = SeriesControl()


class PoleLattice:
    """Enumerator of the lattice ``step*(-N) + i eta Z``.

    Parameters
    ----------
    params : QParams
    step : int
        2 for the pole set of ``zeta_D`` and 1 for the full dimension
        spectrum ``-N + i eta Z``.
    """

    def __init__(self, params: QParams, step: int = 2):
        if step not in (1, 2):
            raise DomainError(f"lattice step={step} not in {{1, 2}}")
        self.params = params
        self.step = step

    @property
    def eta(self) -> float:
        return self.params.eta

    def point(self, m: int, a: int) -> complex:
        return complex(-self.step * m, a * self.eta)

    def points_in(self, re_range, im_range) -> list[complex]:
        """Lattice points in a closed rectangle, ordered by (-Re, Im)."""
        lo, hi = re_range
        m_lo = max(0, math.ceil(-hi / self.step - 1e-12))
        m_hi = math.floor(-lo / self.step + 1e-12)
        a_lo = math.ceil(im_range[0] / self.eta - 1e-12)
        a_hi = math.floor(im_range[1] / self.eta + 1e-12)
        return [self.point(m, a) for m in range(m_lo, m_hi + 1) for a in range(a_lo, a_hi + 1)]

    def nearest(self, s: complex) -> complex:
        m = max(0, round(-s.real / self.step))
        return self.point(m, round(s.imag / self.eta))

    def contains(self, s: complex, tol: float = 1e-9) -> bool:
        return abs(s - self.nearest(s)) <= tol * max(1.0, abs(s))


def _cexpm1(z: complex) -> complex:
    """Complex ``exp(z) - 1`` without cancellation for small ``|z|``."""
    a, b = z.real, z.imag
    em = math.expm1(a)
    sb = math.sin(0.5 * b)
    return complex(em * math.cos(b) - 2.0 * sb * sb, math.exp(a) * math.sin(b))


def _one_minus_qpow(z: complex, log_q: float) -> complex:
    return -_cexpm1(z * log_q)


def zeta_direct(s: complex, params: QParams, ctl: SeriesControl = DEFAULT_CONTROL) -> complex:
    """Dirichlet series ``sum_k 4(k+1) (|w|[k+1])^-s`` for ``Re s > 0``.

    The series is summed as
    ``4((1-q^2)/|w|)^s sum_k (k+1) q^(ks) (1-q^(2k+2))^-s``
    in blocks until the geometric tail bound drops below ``tol``.

    Raises
    ------
    DomainError
        If ``Re s < ctl.min_re_direct``.
    NumericError
        If ``ctl.max_terms`` is exceeded.
    """
    s = complex(s)
    if s.real < ctl.min_re_direct:
        raise DomainError(f"zeta_direct needs Re s >= {ctl.min_re_direct}, got s={s}")
    q, lq = params.q, params.log_q
    r = q ** s.real
    c = (1.0 - q * q) ** (-s.real)
    re_parts: list[float] = []
    im_parts: list[float] = []
    block = 256
    k0 = 0
    while True:
        k = np.arange(k0, k0 + block, dtype=float)
        t = (k + 1.0) * np.exp(s * k * lq - s * np.log1p(-np.exp(2.0 * (k + 1.0) * lq)))
        re_parts.extend(t.real.tolist())
        im_parts.extend(t.imag.tolist())
        k0 += block
        tail = c * r ** k0 * ((k0 + 1) - k0 * r) / (1.0 - r) ** 2
        partial = abs(complex(math.fsum(re_parts), math.fsum(im_parts)))
        if tail <= ctl.tol * partial:
            break
        if k0 >= ctl.max_terms:
            raise NumericError(f"zeta_direct: no convergence in {ctl.max_terms} terms at s={s}")
    total = complex(math.fsum(re_parts), math.fsum(im_parts))
    return 4.0 * cmath.exp(s * math.log((1.0 - q * q) / params.w_abs)) * total


def zeta_continued(s: complex, params: QParams, ctl: SeriesControl = DEFAULT_CONTROL) -> complex:
    """Meromorphic continuation of ``zeta_D`` to the whole plane.

    Evaluates ``4((1-q^2)/|w|)^s sum_n (s)_n/n! q^(2n) / (1 - q^(s+2n))^2``
    with the rising factorial ``(s)_n`` built as a running product.

    Raises
    ------
    PoleError
        If ``s`` lies within ``ctl.guard(params)`` of ``-2N + i eta Z``;
        ``pole`` carries the nearest lattice point.
    """
    s = complex(s)
    lattice = PoleLattice(params, 2)
    near = lattice.nearest(s)
    if abs(s - near) <= ctl.guard(params):
        raise PoleError(f"s={s} within lattice guard of the pole {near}", near)
    return _zeta_continued_unchecked(s, params, ctl)


def _zeta_continued_unchecked(s: complex, params: QParams, ctl: SeriesControl) -> complex:
    lq = params.log_q
    q2 = params.q * params.q
    coef = 1.0 + 0j
    terms: list[complex] = []
    partial = 0j
    for n in range(ctl.max_terms):
        if coef == 0:
            break
        d = _one_minus_qpow(s + 2 * n, lq)
        term = coef / (d * d)
        terms.append(term)
        partial += term
        rho = abs(s + n) / (n + 1) * q2
        if n > abs(s) and rho < 1.0:
            bound = abs(term) * rho / (1.0 - rho) * 1.5
            if bound <= ctl.tol * abs(partial):
                break
        coef *= (s + n) / (n + 1) * q2
    else:
        raise NumericError(f"zeta_continued: no convergence in {ctl.max_terms} terms at s={s}")
    total = complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))
    return 4.0 * cmath.exp(s * math.log((1.0 - q2) / params.w_abs)) * total


def zeta_simplified(s: complex, params: QParams, ctl: SeriesControl = DEFAULT_CONTROL) -> complex:
    """Zeta function of the simplified operator, ``4|w|^-s (1-q^2)^s (1-q^s)^-2``.

    Raises
    ------
    PoleError
        Near the imaginary lattice ``i eta Z``.
    """
    s = complex(s)
    near = complex(0.0, params.eta * round(s.imag / params.eta))
    if abs(s - near) <= ctl.guard(params):
        raise PoleError(f"s={s} within lattice guard of the pole {near}", near)
    return _zeta_simplified_unchecked(s, params)


def _zeta_simplified_unchecked(s: complex, params: QParams) -> complex:
    q = params.q
    d = _one_minus_qpow(s, params.log_q)
    return 4.0 * cmath.exp(s * (math.log(1.0 - q * q) - math.log(params.w_abs))) / (d * d)


class LaurentData(NamedTuple):
    """Leading Laurent data of a function about ``alpha``.

    Attributes
    ----------
    alpha : complex
    order : int
        Measured pole order (0, 1 or 2).
    c_m2, c_m1, c0 : complex
        Coefficients of ``(s-alpha)^-2``, ``(s-alpha)^-1`` and ``(s-alpha)^0``.
    """

    alpha: complex
    order: int
    c_m2: complex
    c_m1: complex
    c0: complex


# relative threshold (against the circle maximum) for declaring a coefficient nonzero
ORDER_TOL = 1e-8


def circle_laurent(f: Callable[[complex], complex], alpha: complex, radius: float,
                   tol: float = 1e-13, n0: int = 64, n_max: int = 4096) -> LaurentData:
    """Laurent coefficients ``c_-2, c_-1, c_0`` of ``f`` about ``alpha``.

    Trapezoidal rule on the circle ``|s - alpha| = radius``, starting with
    ``n0`` nodes and doubling until two successive estimates agree.

    Raises
    ------
    NumericError
        If ``n_max`` nodes do not reach agreement.
    """
    prev = None
    n = n0
    while n <= n_max:
        theta = 2.0 * math.pi * np.arange(n) / n
        z = radius * np.exp(1j * theta)
        vals = np.array([f(alpha + zi) for zi in z], dtype=complex)
        fmax = float(np.max(np.abs(vals)))
        # normalised coefficients chat_j = c_j radius^j
        e = np.exp(-1j * theta)
        chat = np.array([np.mean(vals / (e * e)), np.mean(vals / e), np.mean(vals)])
        if prev is not None and np.max(np.abs(chat - prev)) <= tol * max(fmax, 1e-300):
            c_m2 = chat[0] * radius ** 2
            c_m1 = chat[1] * radius
            c0 = chat[2]
            if abs(chat[0]) > ORDER_TOL * fmax:
                order = 2
            elif abs(chat[1]) > ORDER_TOL * fmax:
                order = 1
            else:
                order = 0
            return LaurentData(complex(alpha), order, complex(c_m2), complex(c_m1), complex(c0))
        prev = chat
        n *= 2
    raise NumericError(f"circle quadrature about {alpha} did not converge with {n_max} nodes")


def _probe_function(params: QParams, variant: str, shift: int) -> Callable[[complex], complex]:
    ctl = DEFAULT_CONTROL
    if variant == "full":
        return lambda s: _zeta_continued_unchecked(s + shift, params, ctl)
    if variant == "simplified":
        return lambda s: _zeta_simplified_unchecked(s + shift, params)
    raise DomainError(f"unknown zeta variant {variant!r}")


def _radius(params: QParams) -> float:
    return min(0.25, params.eta / 4.0)


def laurent_at_pole(alpha: complex, params: QParams, ctl: SeriesControl = DEFAULT_CONTROL,
                    *, variant: str = "full", shift: int = 0) -> LaurentData:
    """Laurent data of ``zeta(s + shift)`` at a lattice point ``alpha``.

    Parameters
    ----------
    alpha : complex
        A point with ``alpha + shift`` in ``-2N + i eta Z`` (``variant="full"``)
        or in ``i eta Z`` (``variant="simplified"``).
    params : QParams
    ctl : SeriesControl
    variant : {"full", "simplified"}
    shift : int
        Evaluate ``zeta(s + shift)``, i.e. the zeta function of ``|D|^-shift``.

    Raises
    ------
    DomainError
        If ``alpha`` is not on the relevant lattice.
    """
    alpha = complex(alpha)
    target = alpha + shift
    if variant == "full":
        ok = PoleLattice(params, 2).contains(target)
    elif variant == "simplified":
        ok = abs(target.real) <= 1e-9 and abs(target.imag / params.eta - round(target.imag / params.eta)) <= 1e-9
    else:
        raise DomainError(f"unknown zeta variant {variant!r}")
    if not ok:
        raise DomainError(f"alpha={alpha} (shift {shift}) is not a lattice point of the {variant} zeta")
    return circle_laurent(_probe_function(params, variant, shift), alpha, _radius(params),
                          tol=max(ctl.tol, 1e-13))


class PoleRecord(NamedTuple):
    location: complex
    order: int
    c_m2: complex
    c_m1: complex


def pole_scan(re_range, im_range, params: QParams, ctl: SeriesControl = DEFAULT_CONTROL,
              *, variant: str = "full", shift: int = 0) -> list[PoleRecord]:
    """Locate the poles of ``zeta(s + shift)`` in a closed rectangle.

    Every point ``n + i eta j`` with integer ``n`` inside the rectangle is
    probed by circle quadrature, so points between lattice columns are
    measured rather than assumed regular.  Points of measured order zero
    are dropped.

    Returns
    -------
    list of PoleRecord
        Ordered by decreasing real part, then increasing imaginary part.
    """
    lo, hi = map(float, re_range)
    ilo, ihi = map(float, im_range)
    if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(ilo) and math.isfinite(ihi)):
        raise DomainError("pole_scan needs a finite rectangle")
    if lo > hi or ilo > ihi:
        return []
    eta = params.eta
    f = _probe_function(params, variant, shift)
    radius = _radius(params)
    out = []
    for n in range(math.floor(hi), math.ceil(lo) - 1, -1):
        for j in range(math.ceil(ilo / eta - 1e-12), math.floor(ihi / eta + 1e-12) + 1):
            alpha = complex(n, j * eta)
            data = circle_laurent(f, alpha, radius, tol=max(ctl.tol, 1e-13))
            if data.order > 0:
                out.append(PoleRecord(alpha, data.order, data.c_m2, data.c_m1))
    return out


def dimension_spectrum(re_range, im_range, params: QParams,
                       ctl: SeriesControl = DEFAULT_CONTROL) -> list[PoleRecord]:
    """Union of the poles of ``zeta_D(s)`` and ``zeta_D(s+1)`` in a rectangle.

    Realises the lattice ``-N + i eta Z``.
    """
    recs = pole_scan(re_range, im_range, params, ctl, shift=0)
    recs += pole_scan(re_range, im_range, params, ctl, shift=1)
    return sorted(recs, key=lambda r: (-r.location.real, r.location.imag))
