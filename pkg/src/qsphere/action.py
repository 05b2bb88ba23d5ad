"""Spectral action ``Tr f(|D|/Lambda)`` for Laplace-transform cutoffs.

A cutoff ``f = L(dphi)`` enters the exact action only through the moments
``f_(alpha,k) = int s^-alpha log^k(s) dphi(s)`` at the lattice points of the
heat-trace expansion.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from math import comb

from scipy.special import erfcx

from .errors import DomainError, NumericError, PoleError
from .heattrace import MAX_OSC, _fsum_c, _sum_decreasing, lattice_coefficients
from .qspec import QParams, eigenvalue_full, eigenvalue_simplified, multiplicity
from .specfun import gamma_c, polygamma, recip_gamma
from .zeta import DEFAULT_CONTROL, SeriesControl

MAX_M = 150


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise DomainError(f"{name}={value} must be positive and finite")
    return value


def _spow(s: float, alpha: complex) -> complex:
    """``s^-alpha`` for real ``s > 0``."""
    ls = math.log(s)
    return math.exp(-alpha.real * ls) * complex(math.cos(alpha.imag * ls), -math.sin(alpha.imag * ls))


class CutoffMeasure:
    """Base class of the supported measures ``dphi``.

    Subclasses provide ``evaluate`` (the cutoff ``f``), ``moment`` and the
    flag ``satisfies_phi`` (finite exponential moments of all orders).
    """

    satisfies_phi = True

    def evaluate(self, x: float) -> float:
        raise NotImplementedError

    def moment(self, alpha: complex, k: int) -> complex:
        raise NotImplementedError

    @property
    def provenance(self) -> str:
        return "exact" if self.satisfies_phi else "rem4-path"


@dataclass(frozen=True)
class PointMass(CutoffMeasure):
    """``dphi = delta_a``, ``f(x) = exp(-a x)``."""

    a: float

    def __post_init__(self):
        object.__setattr__(self, "a", _positive("a", self.a))

    def evaluate(self, x: float) -> float:
        return math.exp(-self.a * x)

    def moment(self, alpha: complex, k: int) -> complex:
        return _spow(self.a, complex(alpha)) * math.log(self.a) ** k


@dataclass(frozen=True)
class WeightedPolyPointMass(CutoffMeasure):
    """``dphi = sum_j c_j delta_a^(j)``, ``f(x) = (sum_j c_j x^j) exp(-a x)``, degree <= 3."""

    a: float
    c: tuple = field(default=(1.0,))

    def __post_init__(self):
        object.__setattr__(self, "a", _positive("a", self.a))
        c = tuple(float(v) for v in self.c)
        if not 1 <= len(c) <= 4:
            raise DomainError(f"polynomial degree {len(c) - 1} outside 0..3")
        if any(v < 0 or not math.isfinite(v) for v in c):
            raise DomainError(f"coefficients {c} must be finite and >= 0")
        object.__setattr__(self, "c", c)

    def evaluate(self, x: float) -> float:
        return sum(cj * x ** j for j, cj in enumerate(self.c)) * math.exp(-self.a * x)

    def moment(self, alpha: complex, k: int) -> complex:
        alpha = complex(alpha)
        la = math.log(self.a)
        # d^i/ds^i [s^-alpha log^k s] = s^(-alpha-i) P_i(log s)
        poly = [0j] * k + [1.0 + 0j]
        total = 0j
        for i, ci in enumerate(self.c):
            if i:
                dpoly = [j * poly[j] for j in range(1, len(poly))] + [0j]
                poly = [(-alpha - (i - 1)) * poly[j] + dpoly[j] for j in range(len(poly))]
            if ci:
                val = sum(pj * la ** j for j, pj in enumerate(poly))
                total += ci * (-1) ** i * _spow(self.a, alpha + i) * val
        return total


@dataclass(frozen=True)
class Step(CutoffMeasure):
    """``dphi = 1_[a,b](s) ds``, ``f(x) = (exp(-a x) - exp(-b x)) / x``."""

    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", _positive("a", self.a))
        object.__setattr__(self, "b", _positive("b", self.b))
        if not self.a < self.b:
            raise DomainError(f"Step needs a < b, got a={self.a}, b={self.b}")

    def evaluate(self, x: float) -> float:
        if x == 0:
            return self.b - self.a
        return math.exp(-self.a * x) * -math.expm1(-(self.b - self.a) * x) / x

    def moment(self, alpha: complex, k: int) -> complex:
        beta = 1.0 - complex(alpha)

        def anti(s: float) -> complex:
            ls = math.log(s)
            if beta == 0:
                return ls ** (k + 1) / (k + 1)
            sb = cmath.exp(beta * ls)
            if k == 0:
                return sb / beta
            if k == 1:
                return sb * (ls / beta - 1.0 / beta ** 2)
            return sb * (ls * ls / beta - 2.0 * ls / beta ** 2 + 2.0 / beta ** 3)

        return anti(self.b) - anti(self.a)


@dataclass(frozen=True)
class GammaDensity(CutoffMeasure):
    """``dphi = s^(r-1) exp(-a s) / Gamma(r) ds``, ``f(x) = (x + a)^-r``.

    Exponential moments exist only below ``a``, so the exact action uses
    the moment closed forms directly (flagged ``rem4-path``).
    """

    a: float
    r: float
    satisfies_phi = False

    def __post_init__(self):
        object.__setattr__(self, "a", _positive("a", self.a))
        object.__setattr__(self, "r", _positive("r", self.r))

    def evaluate(self, x: float) -> float:
        return (x + self.a) ** (-self.r)

    def moment(self, alpha: complex, k: int) -> complex:
        z = self.r - complex(alpha)
        try:
            base = self.a ** (-z.real) * cmath.exp(-1j * z.imag * math.log(self.a)) * gamma_c(z) * recip_gamma(self.r)
        except PoleError as exc:
            raise DomainError(f"moment not integrable: Gamma(r - alpha) has a pole at {exc.pole}") from exc
        if k == 0:
            return base
        d1 = polygamma(0, z) - math.log(self.a)
        if k == 1:
            return base * d1
        return base * (d1 * d1 + polygamma(1, z))


@dataclass(frozen=True)
class GaussianDensity(CutoffMeasure):
    """``dphi = sqrt(4a/pi) exp(-a s^2) ds``, ``f(x) = exp(x^2/4a) erfc(x / 2 sqrt(a))``."""

    a: float

    def __post_init__(self):
        object.__setattr__(self, "a", _positive("a", self.a))

    def evaluate(self, x: float) -> float:
        return float(erfcx(x / (2.0 * math.sqrt(self.a))))

    def moment(self, alpha: complex, k: int) -> complex:
        z = 0.5 * (1.0 - complex(alpha))
        try:
            base = _spow(self.a, -0.5 * complex(alpha)) * gamma_c(z) / math.sqrt(math.pi)
        except PoleError as exc:
            raise DomainError(f"moment not integrable: Gamma((1 - alpha)/2) has a pole at {exc.pole}") from exc
        if k == 0:
            return base
        d1 = 0.5 * (polygamma(0, z) - math.log(self.a))
        if k == 1:
            return base * d1
        return base * (d1 * d1 + 0.25 * polygamma(1, z))


def cutoff_eval(measure: CutoffMeasure, x: float) -> float:
    """Cutoff function ``f(x) = int exp(-s x) dphi(s)`` for ``x >= 0``."""
    x = float(x)
    if x < 0 or not math.isfinite(x):
        raise DomainError(f"cutoff argument x={x} must be finite and >= 0")
    return measure.evaluate(x)


def moment(measure: CutoffMeasure, alpha: complex, k: int,
           ctl: SeriesControl = DEFAULT_CONTROL) -> complex:
    """Moment ``f_(alpha,k) = int s^-alpha log^k(s) dphi(s)``, ``k`` in ``{0, 1, 2}``."""
    if k not in (0, 1, 2):
        raise DomainError(f"k={k} not in {{0, 1, 2}}")
    return measure.moment(complex(alpha), k)


@dataclass(frozen=True)
class ActionEvaluation:
    """Exact action with diagnostics.

    Attributes
    ----------
    value : float
    imag : float
        Imaginary residue before projection.
    M, A : int
        Real lattice columns and imaginary modes summed.
    provenance : str
        ``"exact"`` or ``"rem4-path"``.
    """

    value: float
    imag: float
    M: int
    A: int
    provenance: str


def _lam_pow(lam: float, alpha: complex) -> complex:
    """``Lambda^alpha`` as ``Lambda^Re(alpha) (cos + i sin)(Im(alpha) log Lambda)``."""
    ll = math.log(lam)
    return lam ** alpha.real * complex(math.cos(alpha.imag * ll), math.sin(alpha.imag * ll))


def _lattice_term(alpha: complex, coeffs, measure: CutoffMeasure, lam: float) -> complex:
    ll = math.log(lam)
    f = [measure.moment(alpha, k) for k in range(3)]
    total = 0j
    for p in range(3):
        if coeffs[p] == 0:
            continue
        inner = sum((-1) ** (p - k) * comb(p, k) * f[k] * ll ** (p - k) for k in range(p + 1))
        total += coeffs[p] * inner
    return total * _lam_pow(lam, alpha)


def _check_gamma_convergence(measure: CutoffMeasure, lam: float, radius: float):
    if isinstance(measure, GammaDensity) and not measure.a * lam > radius:
        raise DomainError(
            f"lattice series diverges for GammaDensity: need Lambda*a > {radius:.6g}, got {measure.a * lam:.6g}")


def _imag_check(parts: list[complex]) -> complex:
    total = _fsum_c(parts)
    scale = max((abs(z) for z in parts), default=0.0)
    if abs(total.imag) > max(1e-12 * abs(total.real), 1e-14 * scale):
        raise NumericError(f"imaginary residue {total.imag:.3e} exceeds tolerance (real part {total.real:.3e})")
    return total


def action_exact(lam: float, measure: CutoffMeasure, params: QParams,
                 coeffs=None, ctl: SeriesControl = DEFAULT_CONTROL, *, full_output: bool = False):
    """Exact spectral action from the lattice expansion.

    ``sum_alpha sum_p a_(alpha,p) sum_k (-1)^(p-k) C(p,k) f_(alpha,k) log^(p-k)(Lambda) Lambda^alpha``.

    Parameters
    ----------
    lam : float
        Energy scale ``Lambda > 0``.
    measure : CutoffMeasure
    params : QParams
    coeffs : HeatCoefficientSet, optional
        If given, its caps bound the summation; otherwise the columns and
        modes are chosen adaptively.
    ctl : SeriesControl
    full_output : bool
        Return an :class:`ActionEvaluation`.
    """
    lam = _positive("lambda", lam)
    if params.near_one:
        raise DomainError(f"exact action refused for q={params.q} > 0.95; use action_direct")
    _check_gamma_convergence(measure, lam, 2.0 * params.u)
    step = 2.0 * math.pi / params.log_q
    tol = max(ctl.tol, 1e-17)
    m_cap = min(coeffs.M, coeffs.N) if coeffs is not None else MAX_M
    a_cap = coeffs.A if coeffs is not None else MAX_OSC

    parts: list[complex] = []
    partial = 0j
    quiet = 0
    A_used = 0
    m = 0
    for m in range(m_cap + 1):
        block = [_lattice_term(complex(-2 * m, 0.0), lattice_coefficients(m, 0, params), measure, lam)]
        small = 0
        for n in range(1, a_cap + 1):
            pair = [_lattice_term(complex(-2 * m, s * n * step), lattice_coefficients(m, s * n, params),
                                  measure, lam) for s in (1, -1)]
            block.extend(pair)
            A_used = max(A_used, n)
            if coeffs is None and abs(pair[0]) + abs(pair[1]) <= tol * 1e-3 * max(abs(partial), abs(block[0])):
                small += 1
                if small >= 2:
                    break
            else:
                small = 0
        parts.extend(block)
        bsum = _fsum_c(block)
        partial += bsum
        if coeffs is None:
            quiet = quiet + 1 if abs(bsum) <= tol * abs(partial) else 0
            if quiet >= 3:
                break
    else:
        if coeffs is None:
            raise NumericError(f"action lattice sum did not converge within {MAX_M} columns")
    total = _imag_check(parts)
    res = ActionEvaluation(total.real, total.imag, m, A_used, measure.provenance)
    return res if full_output else res.value


def action_simplified_exact(lam: float, measure: CutoffMeasure, params: QParams,
                            ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Exact action of the simplified operator.

    Imaginary-axis lattice terms plus ``sum_n b_n f_(-n,0) Lambda^-n`` with
    ``b_n = 4 (|w|/(1-q^2))^n (-1)^n / (n! (1-q^-n)^2)``.
    """
    lam = _positive("lambda", lam)
    if params.near_one:
        raise DomainError(f"exact action refused for q={params.q} > 0.95; use the direct sum")
    q = params.q
    _check_gamma_convergence(measure, lam, params.u * q)
    step = 2.0 * math.pi / params.log_q
    tol = max(ctl.tol, 1e-17)
    parts = []
    c0 = lattice_coefficients(0, 0, params)
    # the simplified operator has no d_0; at m = 0 it vanishes anyway
    parts.append(_lattice_term(0j, c0, measure, lam))
    small = 0
    for n in range(1, MAX_OSC + 1):
        pair = [_lattice_term(complex(0.0, s * n * step), lattice_coefficients(0, s * n, params), measure, lam)
                for s in (1, -1)]
        parts.extend(pair)
        if abs(pair[0]) + abs(pair[1]) <= tol * 1e-3 * abs(parts[0]):
            small += 1
            if small >= 2:
                break
        else:
            small = 0
    lq = params.log_q
    lb = math.log(params.u * q)
    quiet = 0
    for n in range(1, ctl.max_terms):
        em = math.expm1(n * lq)
        b = 4.0 * (-1) ** n * math.exp(n * lb - math.lgamma(n + 1)) / (em * em)
        term = b * measure.moment(complex(-n, 0.0), 0) * lam ** (-n)
        parts.append(term)
        quiet = quiet + 1 if abs(term) <= tol * abs(parts[0]) else 0
        if quiet >= 3:
            break
    else:
        raise NumericError("simplified action remainder did not converge")
    return _imag_check(parts).real


def action_direct(lam: float, measure: CutoffMeasure, params: QParams,
                  ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Direct sum ``sum_k 4(k+1) f(|w|[k+1]/Lambda)``."""
    lam = _positive("lambda", lam)
    return _sum_decreasing(lambda k: multiplicity(k) * measure.evaluate(eigenvalue_full(k, params) / lam),
                           ctl, "action_direct")


def action_simplified_direct(lam: float, measure: CutoffMeasure, params: QParams,
                             ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Direct sum over the simplified spectrum."""
    lam = _positive("lambda", lam)
    return _sum_decreasing(lambda k: multiplicity(k) * measure.evaluate(eigenvalue_simplified(k, params) / lam),
                           ctl, "action_simplified_direct")


def eta_kernel(alpha: complex, k: int, t: float) -> complex:
    """Inverse Laplace transform of ``s^-alpha log^k s``.

    ``(-1)^k d^k/dalpha^k [t^(alpha-1) / Gamma(alpha)]``, for ``alpha`` not in
    ``0, -1, -2, ...`` and ``t > 0``.
    """
    alpha = complex(alpha)
    if k not in (0, 1, 2):
        raise DomainError(f"k={k} not in {{0, 1, 2}}")
    if alpha.imag == 0 and alpha.real <= 0 and alpha.real == math.floor(alpha.real):
        raise DomainError(f"alpha={alpha} lies in -N")
    t = _positive("t", t)
    lt = math.log(t)
    base = math.exp((alpha.real - 1.0) * lt) * complex(math.cos(alpha.imag * lt),
                                                       math.sin(alpha.imag * lt)) * recip_gamma(alpha)
    if k == 0:
        return base
    d = lt - polygamma(0, alpha)
    if k == 1:
        return -base * d
    return base * (d * d - polygamma(1, alpha))


def parse_cutoff(spec: str) -> CutoffMeasure:
    """Parse ``kind:key=value,...`` into a measure.

    Examples: ``point:a=1``, ``poly-point:a=1,c=1,0,2``, ``step:a=1,b=3``,
    ``gamma:a=1,r=3``, ``gauss:a=2``.
    """
    kind, _, rest = spec.strip().partition(":")
    fields: dict[str, list[float]] = {}
    key = None
    for tok in filter(None, (x.strip() for x in rest.split(","))):
        if "=" in tok:
            key, _, val = tok.partition("=")
            key = key.strip()
            fields.setdefault(key, []).append(_num(val, spec))
        elif key is not None:
            fields[key].append(_num(tok, spec))
        else:
            raise DomainError(f"cannot parse cutoff spec {spec!r}")

    def one(name):
        vals = fields.get(name)
        if not vals or len(vals) != 1:
            raise DomainError(f"cutoff spec {spec!r} needs exactly one value for {name!r}")
        return vals[0]

    expected = {"point": {"a"}, "poly-point": {"a", "c"}, "step": {"a", "b"},
                "gamma": {"a", "r"}, "gauss": {"a"}}
    if kind not in expected:
        raise DomainError(f"unknown cutoff kind {kind!r}; expected one of {sorted(expected)}")
    if set(fields) != expected[kind]:
        raise DomainError(f"cutoff {kind!r} takes keys {sorted(expected[kind])}, got {sorted(fields)}")
    if kind == "point":
        return PointMass(one("a"))
    if kind == "poly-point":
        return WeightedPolyPointMass(one("a"), tuple(fields["c"]))
    if kind == "step":
        return Step(one("a"), one("b"))
    if kind == "gamma":
        return GammaDensity(one("a"), one("r"))
    return GaussianDensity(one("a"))


def _num(text: str, spec: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DomainError(f"bad number {text!r} in cutoff spec {spec!r}") from None
