"""Heat trace ``Tr exp(-t|D|)``: direct sums and the exact residue series.

The residue series reads

    (1/log^2 q) [g log^2 t + (h_0 + sum_a h_a) log t + c_0 + sum_a c_a]
        + sum_n d_n t^(2n)

where ``g, h_0, c_0`` are combinations of ``J_0`` and its order derivatives
at ``2ut``, ``h_a, c_a`` involve ``J_(i a~)``, and ``d_n`` come from the
simple poles at negative even integers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import i0e

from .errors import DomainError, NumericError, PrecisionWarning
from .qspec import Q_NEAR_ONE, QParams, eigenvalue_full, eigenvalue_simplified
from .specfun import EULER_GAMMA, bessel_series, gamma_c, polygamma
from .zeta import DEFAULT_CONTROL, SeriesControl

# S_max/|result| above this marks a result as precision limited
CANCELLATION_THRESHOLD = 1e12
# hard caps for the residue-series truncation
MAX_OSC = 200
MAX_D_TERMS = 2000


def _check_t(t: float) -> float:
    t = float(t)
    if not (t > 0.0 and math.isfinite(t)):
        raise DomainError(f"t={t} must be positive and finite")
    return t


def _fsum_c(terms) -> complex:
    terms = list(terms)
    return complex(math.fsum(z.real for z in terms), math.fsum(z.imag for z in terms))


def _sum_decreasing(term_fn, ctl: SeriesControl, what: str, start: int = 0) -> float:
    """Sum a positive series whose terms eventually decrease geometrically or faster."""
    terms = []
    partial = 0.0
    prev = None
    for n in range(start, start + ctl.max_terms):
        term = term_fn(n)
        terms.append(term)
        partial += term
        if prev is not None and prev > 0 and term < prev:
            r = term / prev
            if term * r / (1.0 - r) <= ctl.tol * partial:
                return math.fsum(terms)
        prev = term
    raise NumericError(f"{what}: no convergence within {ctl.max_terms} terms")


def trace_direct(t: float, params: QParams, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Direct eigenvalue sum ``4 sum_n n exp(-t |w| [n]_q)``."""
    t = _check_t(t)
    return _sum_decreasing(
        lambda k: 4.0 * (k + 1) * math.exp(-t * eigenvalue_full(k, params)), ctl, "trace_direct")


def trace_simplified_direct(t: float, params: QParams,
                            ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Direct sum ``4 sum_k (k+1) exp(-t |w| q^-k / (1-q^2))``."""
    t = _check_t(t)
    return _sum_decreasing(
        lambda k: 4.0 * (k + 1) * math.exp(-t * eigenvalue_simplified(k, params)), ctl,
        "trace_simplified_direct")


def trace_classical(t: float, w_abs: float = 1.0) -> float:
    """Heat trace of the undeformed operator, ``4 e^-x / (1 - e^-x)^2`` with ``x = t|w|``."""
    t = _check_t(t)
    if not w_abs > 0:
        raise DomainError(f"w_abs={w_abs} must be positive")
    x = t * w_abs
    em = math.expm1(-x)
    return 4.0 * math.exp(-x) / (em * em)


# coefficient tables ---------------------------------------------------------

def d_tilde(n: int, params: QParams) -> float:
    """Literal residue coefficient ``d~_n`` at ``s = -n``.

    ``4 (u/q)^n sum_{k != n/2} (-1)^(n-k) q^(2k) / (k!(n-k)! (1-q^(2k-n))^2)``.
    Vanishes for ``n = 0`` and odd ``n``; prone to cancellation for large ``n``.
    """
    if n < 0:
        raise DomainError(f"n={n} must be >= 0")
    q = params.q
    terms = []
    for k in range(n + 1):
        if 2 * k == n:
            continue
        den = 1.0 - q ** (2 * k - n)
        terms.append((-1) ** (n - k) * q ** (2 * k) / (math.factorial(k) * math.factorial(n - k) * den * den))
    return 4.0 * (params.u / q) ** n * math.fsum(terms)


def d_tilde_exact(n: int, q: Fraction, w_abs: Fraction = Fraction(1)) -> Fraction:
    """``d~_n`` in exact rational arithmetic (rational ``q`` and ``|w|``)."""
    u = w_abs * q / (1 - q * q)
    total = Fraction(0)
    for k in range(n + 1):
        if 2 * k == n:
            continue
        den = (1 - q ** (2 * k - n)) ** 2
        total += Fraction((-1) ** (n - k), math.factorial(k) * math.factorial(n - k)) * q ** (2 * k) / den
    return 4 * (u / q) ** n * total


def _d_scaled(n: int, params: QParams, log_x: float) -> float:
    """``d_n x^(2n)`` with ``log_x = log(x)``, ``x = t`` or ``1``.

    Uses the symmetrised form
    ``8 u^(2n) (-1)^n sum_{j=1}^n (-1)^j q^(2j) / ((1-q^(2j))^2 (n-j)! (n+j)!)``,
    an alternating sum with decreasing terms.
    """
    if n == 0:
        return 0.0
    lq = params.log_q
    base = 2 * n * (math.log(params.u) + log_x)
    terms = []
    for j in range(1, n + 1):
        em = math.expm1(2 * j * lq)
        mag = math.exp(base + 2 * j * lq - math.lgamma(n - j + 1) - math.lgamma(n + j + 1))
        terms.append((-1) ** j * mag / (em * em))
    return 8.0 * (-1) ** n * math.fsum(terms)


def d_coefficient(n: int, params: QParams) -> float:
    """``d_n = d~_(2n)``, the coefficient of ``t^(2n)`` in the heat trace."""
    return _d_scaled(n, params, 0.0)


@dataclass(frozen=True)
class HeatCoefficientSet:
    """Residue-series coefficient tables.

    ``h_osc[m, a + A]`` and ``c_osc[m, a + A]`` hold ``h_(m,a)``, ``c_(m,a)``
    for ``0 < |a| <= A``; these multiply ``(ut)^(2m + i a~)``.  The column
    ``a = 0`` is zero; the non-oscillatory coefficients live in ``h0``, ``c0``.
    """

    params: QParams
    M: int
    A: int
    N: int
    g: np.ndarray
    h0: np.ndarray
    c0: np.ndarray
    h_osc: np.ndarray
    c_osc: np.ndarray
    d: np.ndarray = field(repr=False)

    def h(self, m: int, a: int) -> complex:
        self._check(m, a)
        return complex(self.h0[m]) if a == 0 else complex(self.h_osc[m, a + self.A])

    def c(self, m: int, a: int) -> complex:
        self._check(m, a)
        return complex(self.c0[m]) if a == 0 else complex(self.c_osc[m, a + self.A])

    def _check(self, m: int, a: int):
        if not (0 <= m <= self.M and abs(a) <= self.A):
            raise DomainError(f"coefficient (m={m}, a={a}) beyond table caps (M={self.M}, A={self.A})")


def _h_c(m: int, a: int, params: QParams) -> tuple[complex, complex]:
    """``(h_(m,a), c_(m,a))`` from the closed residue formulas."""
    lu = math.log(params.u)
    if a == 0:
        f2 = math.factorial(m) ** 2
        sgn = (-1) ** m
        psi = polygamma(0, m + 1).real
        psi1 = polygamma(1, m + 1).real
        h = sgn * 4.0 / f2 * (lu - psi)
        c = sgn / (3.0 * f2) * (6 * lu * lu - params.log_q ** 2 + 2 * math.pi ** 2 - 12 * lu * psi
                                + 6 * psi * psi - 6 * psi1)
        return complex(h), complex(c)
    z = complex(-m, -params.a_tilde(a))
    h = -4.0 / math.factorial(m) * gamma_c(z)
    return h, h * (lu - polygamma(0, z))


@lru_cache(maxsize=64)
def heat_coefficients(params: QParams, M: int, A: int, N: int) -> HeatCoefficientSet:
    """Fill the tables ``g_m, h_(m,a), c_(m,a)`` (``m <= M``, ``|a| <= A``) and ``d_n`` (``n <= N``)."""
    if min(M, A, N) < 0:
        raise DomainError("caps M, A, N must be >= 0")
    g = np.empty(M + 1)
    h0 = np.empty(M + 1)
    c0 = np.empty(M + 1)
    h_osc = np.zeros((M + 1, 2 * A + 1), dtype=complex)
    c_osc = np.zeros((M + 1, 2 * A + 1), dtype=complex)
    for m in range(M + 1):
        g[m] = (-1) ** m * 2.0 / math.factorial(m) ** 2
        h, c = _h_c(m, 0, params)
        h0[m], c0[m] = h.real, c.real
        for a in range(-A, A + 1):
            if a:
                h_osc[m, a + A], c_osc[m, a + A] = _h_c(m, a, params)
    d = np.array([d_coefficient(n, params) for n in range(N + 1)])
    for arr in (g, h0, c0, h_osc, c_osc, d):
        arr.setflags(write=False)
    return HeatCoefficientSet(params, M, A, N, g, h0, c0, h_osc, c_osc, d)


@lru_cache(maxsize=100_000)
def lattice_coefficients(m: int, n: int, params: QParams) -> tuple[complex, complex, complex]:
    """``(a_(alpha,0), a_(alpha,1), a_(alpha,2))`` at ``alpha = -2m + (2 pi i/log q) n``.

    Computed directly from the residue formulas, without table caps.
    """
    alpha = complex(-2 * m, 2.0 * math.pi * n / params.log_q)
    scale = _u_pow(alpha, params)
    inv = 1.0 / params.log_q ** 2
    h, c = _h_c(m, -n, params)
    if n == 0:
        g = (-1) ** m * 2.0 / math.factorial(m) ** 2
        return scale * inv * c + d_coefficient(m, params), scale * inv * h, scale * inv * g
    return scale * inv * c, scale * inv * h, 0j


def _u_pow(alpha: complex, params: QParams) -> complex:
    """``u^-alpha``."""
    lu = math.log(params.u)
    return math.exp(-alpha.real * lu) * complex(math.cos(alpha.imag * lu), -math.sin(alpha.imag * lu))


# residue series -------------------------------------------------------------

@dataclass(frozen=True)
class ResidueEvaluation:
    """Residue-series value with truncation and cancellation diagnostics.

    Attributes
    ----------
    value : float
        Real part of the assembled series.
    imag : float
        Imaginary residue before projection.
    s_max : float
        Largest partial-sum magnitude met during assembly.
    M, A, N : int
        Bessel terms used, oscillatory modes kept, ``d_n`` terms kept.
    precision_warning : bool
        ``s_max / |value|`` exceeded the cancellation threshold.
    """

    value: float
    imag: float
    s_max: float
    M: int
    A: int
    N: int
    precision_warning: bool

    @property
    def cancellation_ratio(self) -> float:
        return self.s_max / max(abs(self.value), 1e-300)


def _log_sinh(y: float) -> float:
    return y + math.log1p(-math.exp(-2.0 * y)) - math.log(2.0)


def _osc_bound(at: float, x: float, log_extra: float) -> float:
    """Majorant of one oscillatory mode: ``4 pi I_0(x) / sqrt(pi a~ sinh(pi a~))`` times ``e^log_extra``."""
    y = math.pi * at
    log_b = (math.log(4.0 * math.pi) + math.log(i0e(x)) + x
             - 0.5 * (math.log(y) + _log_sinh(y)) + log_extra)
    return math.exp(min(log_b, 700.0))


def _choose_A(params: QParams, x: float, weight: float, target: float) -> int:
    """Number of oscillatory modes so that the neglected pairs fall below ``target``."""
    A = 0
    while A < MAX_OSC:
        at = abs(params.a_tilde(A + 1))
        # |c_a| picks up at most |log u| + |psi| + pi coth <= weight + log(1 + x + at) + 4
        extra = math.log(weight + math.log1p(x + at) + 4.0)
        if 2.0 * _osc_bound(at, x, extra) <= target:
            return A
        A += 1
    raise NumericError(f"oscillatory sum needs more than {MAX_OSC} modes")


def _d_series(t: float, params: QParams, target: float):
    """Sum ``d_n t^(2n)`` with the majorant ``8 q^2/(1-q^2)^2 (ut)^(2n)/((n-1)!(n+1)!)``."""
    q = params.q
    log_ut = math.log(params.u * t)
    log_c = math.log(8.0 * q * q / (1.0 - q * q) ** 2)
    terms = []
    partial = 0.0
    s_max = 0.0
    log_t = math.log(t)
    for n in range(1, MAX_D_TERMS):
        v = _d_scaled(n, params, log_t)
        terms.append(v)
        partial += v
        s_max = max(s_max, abs(partial))
        # majorant of the next term; its ratio to the following one is (ut)^2/((n+1)(n+3))
        nxt = math.exp(log_c + 2 * (n + 1) * log_ut - math.lgamma(n + 1) - math.lgamma(n + 3))
        ratio = math.exp(2 * log_ut) / ((n + 2) * (n + 4))
        if ratio < 0.5 and 2.0 * nxt <= target:
            return math.fsum(terms), n, s_max
    raise NumericError(f"d_n series needs more than {MAX_D_TERMS} terms")


def _residue_target(t: float, params: QParams, ctl: SeriesControl) -> float:
    # the trace exceeds its ground-state term 4 exp(-t|w|)
    return max(ctl.tol, 1e-17) * 4.0 * math.exp(-t * params.w_abs)


def _check_q_residue(params: QParams):
    if params.q > Q_NEAR_ONE:
        raise DomainError(f"residue series refused for q={params.q} > {Q_NEAR_ONE}; use the direct sum")


def _finish(parts: list[complex], s_max: float, M: int, A: int, N: int) -> ResidueEvaluation:
    total = _fsum_c(parts)
    partial = 0j
    for z in parts:
        partial += z
        s_max = max(s_max, abs(partial))
    re, im = total.real, total.imag
    if abs(im) > max(1e-12 * abs(re), 1e-14 * s_max):
        raise NumericError(f"imaginary residue {im:.3e} exceeds tolerance (real part {re:.3e})")
    warn = s_max > CANCELLATION_THRESHOLD * abs(re)
    if warn:
        warnings.warn(f"residue series lost precision: S_max/|result| = {s_max / max(abs(re), 1e-300):.3e}",
                      PrecisionWarning, stacklevel=3)
    return ResidueEvaluation(re, im, s_max, M, A, N, warn)


def trace_residue(t: float, params: QParams, ctl: SeriesControl = DEFAULT_CONTROL,
                  *, full_output: bool = False):
    """Heat trace from the exact residue series.

    Parameters
    ----------
    t : float
        Positive time.
    params : QParams
        Requires ``q <= 0.95``.
    ctl : SeriesControl
    full_output : bool
        Return a :class:`ResidueEvaluation` instead of the float.

    Returns
    -------
    float or ResidueEvaluation

    Raises
    ------
    DomainError
        For ``t <= 0`` or ``q > 0.95``.
    NumericError
        If the assembled imaginary part is not negligible.

    Warns
    -----
    PrecisionWarning
        When the largest partial sum exceeds ``1e12 |result|``.
    """
    t = _check_t(t)
    _check_q_residue(params)
    u = params.u
    x = 2.0 * u * t
    lt, lu, L = math.log(t), math.log(u), params.log_q
    inv = 1.0 / (L * L)
    target = _residue_target(t, params, ctl)

    j0 = bessel_series(0, x, 0)
    j1 = bessel_series(0, x, 1)
    j2 = bessel_series(0, x, 2)
    k0 = 2.0 * lu * lu + 2.0 * math.pi ** 2 / 3.0 - L * L / 3.0
    parts = [
        inv * 2.0 * lt * lt * j0.value,
        inv * lt * 4.0 * lu * j0.value,
        inv * lt * 4.0 * j1.value,
        inv * k0 * j0.value,
        inv * 4.0 * lu * j1.value,
        inv * 2.0 * j2.value,
    ]
    s_max = inv * max(2.0 * lt * lt * j0.s_max, 4.0 * abs(lt) * (abs(lu) * j0.s_max + j1.s_max),
                      abs(k0) * j0.s_max + 4.0 * abs(lu) * j1.s_max + 2.0 * j2.s_max)
    M = max(j0.terms, j1.terms, j2.terms)

    A = _choose_A(params, x, abs(lu) + abs(lt), target / inv)
    for a in range(1, A + 1):
        for sa in (a, -a):
            at = params.a_tilde(sa)
            y = math.pi * at
            jn = bessel_series(1j * at, x, 0)
            jt = bessel_series(1j * at, x, 1)
            sh = math.sinh(y)
            ha = -4j * math.pi * jn.value / sh
            ca = (-4j * math.pi * (lu * jn.value + jt.value) / sh
                  + 4.0 * math.pi ** 2 * jn.value / (math.tanh(y) * sh))
            parts.append(inv * ha * lt)
            parts.append(inv * ca)
            M = max(M, jn.terms, jt.terms)

    dsum, N, d_smax = _d_series(t, params, target)
    parts.append(complex(dsum))
    s_max = max(s_max, d_smax)
    res = _finish(parts, s_max, M, A, N)
    return res if full_output else res.value


def h_simplified(x: float, params: QParams, A: int | None = None) -> float:
    """Periodic function ``h_S``, period 1 in ``x = log(ut)/log q``.

    ``4 gamma - 4 sum_(a != 0) Gamma(i a~) exp(-2 pi i a x)``.
    """
    A = _simplified_modes(params) if A is None else A
    parts = [complex(4.0 * EULER_GAMMA)]
    for a in range(-A, A + 1):
        if a:
            parts.append(-4.0 * gamma_c(1j * params.a_tilde(a)) * complex(math.cos(2 * math.pi * a * x),
                                                                            -math.sin(2 * math.pi * a * x)))
    return _fsum_c(parts).real


def c_simplified(x: float, params: QParams, A: int | None = None) -> float:
    """Periodic function ``c_S``, period 1 in ``x = log(ut)/log q``.

    ``(pi^2 + 6 gamma^2 - log^2 q)/3 + 4 sum_(a != 0) Gamma(i a~) psi(i a~) exp(-2 pi i a x)``.
    """
    A = _simplified_modes(params) if A is None else A
    parts = [complex((math.pi ** 2 + 6 * EULER_GAMMA ** 2 - params.log_q ** 2) / 3.0)]
    for a in range(-A, A + 1):
        if a:
            z = 1j * params.a_tilde(a)
            parts.append(4.0 * gamma_c(z) * polygamma(0, z) * complex(math.cos(2 * math.pi * a * x),
                                                                      -math.sin(2 * math.pi * a * x)))
    return _fsum_c(parts).real


def _simplified_modes(params: QParams, target: float = 1e-18) -> int:
    # |Gamma(i a~)| = sqrt(pi / (a~ sinh(pi a~))); psi grows like log a~
    for A in range(MAX_OSC):
        at = abs(params.a_tilde(A + 1))
        log_g = 0.5 * (math.log(math.pi) - math.log(at) - _log_sinh(math.pi * at))
        if math.exp(log_g) * (4.0 + math.log1p(at)) * 8.0 <= target:
            return A
    raise NumericError(f"simplified oscillatory sum needs more than {MAX_OSC} modes")


def remainder_simplified(x: float, params: QParams) -> float:
    """Regular part ``R(x) = 4 sum_(n>=1) (-1)^n q^n x^n / (n! (1-q^n)^2)``."""
    lq = params.log_q
    terms = []
    for n in range(1, MAX_D_TERMS):
        em = math.expm1(n * lq)
        mag = math.exp(n * (lq + math.log(x)) - math.lgamma(n + 1)) / (em * em) if x > 0 else 0.0
        terms.append(4.0 * (-1) ** n * mag)
        if n > x and mag <= 1e-18 * abs(math.fsum(terms)) + 1e-300:
            return math.fsum(terms)
    raise NumericError("remainder series did not converge")


def trace_simplified_residue(t: float, params: QParams, ctl: SeriesControl = DEFAULT_CONTROL,
                             *, full_output: bool = False):
    """Heat trace of ``|D_S|`` from its residue series.

    ``(1/log^2 q)[2 l^2 + h_S l + c_S] + R(ut)`` with ``l = log(ut)``.
    """
    t = _check_t(t)
    _check_q_residue(params)
    L = params.log_q
    ell = math.log(params.u * t)
    x = ell / L
    A = _simplified_modes(params, max(ctl.tol, 1e-17) * 4.0 * math.exp(-t * params.w_abs / (1 - params.q ** 2)))
    hs = h_simplified(x, params, A)
    cs = c_simplified(x, params, A)
    inv = 1.0 / (L * L)
    parts = [complex(inv * 2.0 * ell * ell), complex(inv * hs * ell), complex(inv * cs),
             complex(remainder_simplified(params.u * t, params))]
    res = _finish(parts, 0.0, 0, A, 0)
    return res if full_output else res.value


# lattice coefficients ---------------------------------------------------------

def lattice_indices(alpha: complex, params: QParams) -> tuple[int, int]:
    """Return ``(m, n)`` with ``alpha = -2m + (2 pi i / log q) n``."""
    alpha = complex(alpha)
    m = round(-alpha.real / 2.0)
    step = 2.0 * math.pi / params.log_q
    n = round(alpha.imag / step)
    if m < 0 or abs(alpha - complex(-2 * m, n * step)) > 1e-9 * max(1.0, abs(alpha)):
        raise DomainError(f"alpha={alpha} is not on the lattice -2N + (2 pi i/log q) Z")
    return m, n


def coeff_a(alpha: complex, p: int, params: QParams, coeffs: HeatCoefficientSet) -> complex:
    """Small-time coefficient ``a_(alpha,p)`` of ``log^p(t) t^-alpha``."""
    if p not in (0, 1, 2):
        raise DomainError(f"p={p} not in {{0, 1, 2}}")
    m, n = lattice_indices(alpha, params)
    alpha = complex(-2 * m, 2.0 * math.pi * n / params.log_q)
    scale = _u_pow(alpha, params)
    inv = 1.0 / params.log_q ** 2
    if n == 0:
        if p == 2:
            return scale * inv * coeffs.g[m]
        if p == 1:
            return scale * inv * coeffs.h(m, 0)
        if m > coeffs.N:
            raise DomainError(f"d_{m} beyond table cap N={coeffs.N}")
        return scale * inv * coeffs.c(m, 0) + coeffs.d[m]
    if p == 2:
        return 0j
    if p == 1:
        return scale * inv * coeffs.h(m, -n)
    return scale * inv * coeffs.c(m, -n)


def trace_from_coefficients(t: float, params: QParams, coeffs: HeatCoefficientSet) -> float:
    """Re-assemble ``sum a_(alpha,p) log^p(t) t^-alpha`` from a coefficient table."""
    t = _check_t(t)
    lt = math.log(t)
    step = 2.0 * math.pi / params.log_q
    parts = []
    for m in range(min(coeffs.M, coeffs.N) + 1):
        for n in range(-coeffs.A, coeffs.A + 1):
            alpha = complex(-2 * m, n * step)
            tpow = math.exp(-alpha.real * lt) * complex(math.cos(alpha.imag * lt), -math.sin(alpha.imag * lt))
            for p in range(3):
                parts.append(coeff_a(alpha, p, params, coeffs) * lt ** p * tpow)
    return _fsum_c(parts).real


def small_t_fit(samples) -> tuple[float, float, float]:
    """Least-squares fit of ``A2 log^2 t + A1 log t + A0`` to ``(t, value)`` samples."""
    data = np.asarray(list(samples), dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 3:
        raise NumericError("small_t_fit needs at least 3 (t, value) samples")
    t, v = data[:, 0], data[:, 1]
    if np.any(t <= 0):
        raise DomainError("small_t_fit needs t > 0")
    lt = np.log(t)
    X = np.column_stack([lt * lt, lt, np.ones_like(lt)])
    if np.unique(t).size < 3 or np.linalg.matrix_rank(X) < 3:
        raise NumericError("small_t_fit: degenerate design matrix")
    coef, *_ = np.linalg.lstsq(X, v, rcond=None)
    return float(coef[0]), float(coef[1]), float(coef[2])
