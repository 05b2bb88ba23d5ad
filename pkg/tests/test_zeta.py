import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsphere.errors import DomainError, NumericError, PoleError
from qsphere.qspec import QParams, eigenvalues_full, eigenvalues_simplified
from qsphere.zeta import (
    DEFAULT_CONTROL,
    PoleLattice,
    SeriesControl,
    circle_laurent,
    dimension_spectrum,
    laurent_at_pole,
    pole_scan,
    zeta_continued,
    zeta_direct,
    zeta_simplified,
)

P = QParams(0.5)

# mpmath at 30 digits: binomial head in closed form plus the direct
# Dirichlet remainder, which converges for Re s + 2N > 0
ORACLE = [
    (-1.5 + 0.7j, 0.5, 5.4456391313709664 + 9.996998616258038j),
    (-3.3 + 2j, 0.5, -1.3580951294481927 - 1.2041252383891416j),
    (-0.5 + 1j, 0.7, -0.2743601993034541 + 35.39712687187869j),
    (-2.5, 0.3, -1.5483698638706926),
    (0.5 + 5j, 0.9, 2.295573809806349 + 1.4170282916768973j),
    (2, 0.5, 5.919697155197985),
]


def eigen_sum(s, params, simplified=False, count=400):
    lam = (eigenvalues_simplified if simplified else eigenvalues_full)(count, params)
    k = np.arange(count)
    return complex(np.sum(4 * (k + 1) * lam ** (-s)))


def test_control_validation():
    with pytest.raises(DomainError):
        SeriesControl(tol=0)
    with pytest.raises(DomainError):
        SeriesControl(max_terms=5)
    with pytest.raises(DomainError):
        SeriesControl(lattice_guard=-1)
    assert DEFAULT_CONTROL.guard(P) == pytest.approx(0.1)
    # eta shrinks only for small q
    assert DEFAULT_CONTROL.guard(QParams(1e-5)) == pytest.approx(QParams(1e-5).eta / 8)


def test_direct_matches_eigenvalue_sum():
    assert zeta_direct(2, P) == pytest.approx(eigen_sum(2, P), rel=1e-12)
    assert zeta_direct(1.3 + 4j, QParams(0.7, 1.5)) == pytest.approx(eigen_sum(1.3 + 4j, QParams(0.7, 1.5)),
                                                                    rel=1e-12)


@pytest.mark.parametrize("y", [0.0, 1.0, 5.0, 30.0])
def test_direct_majorant(y):
    q = 0.5
    assert abs(zeta_direct(1 + 1j * y, P)) <= 4 / (1 - q) ** 2


def test_direct_real_positive_and_domain():
    v = zeta_direct(0.7, P)
    assert v.imag == 0 and v.real > 0
    with pytest.raises(DomainError):
        zeta_direct(0.01, P)


@pytest.mark.parametrize("s,q,ref", ORACLE)
def test_continued_against_frozen_oracle(s, q, ref):
    assert abs(zeta_continued(s, QParams(q)) - ref) <= 1e-12 * abs(ref)


@pytest.mark.parametrize("q", [0.3, 0.5, 0.7, 0.9])
@pytest.mark.parametrize("re", [0.5, 1, 2, 3])
@pytest.mark.parametrize("im", [0, 1, 5])
def test_agreement_zone(q, re, im):
    p = QParams(q)
    s = complex(re, im)
    d = zeta_direct(s, p)
    assert abs(zeta_continued(s, p) - d) <= 1e-10 * abs(d)


def test_value_at_minus_one_vanishes():
    # between lattice columns, and the n = 1 term cancels the rest exactly
    assert abs(zeta_continued(-1, P)) < 1e-13
    assert math.isfinite(abs(zeta_continued(-1 + 0.3j, P)))


@settings(max_examples=60, deadline=None)
@given(x=st.floats(-6, 4), y=st.floats(-20, 20))
def test_conjugation_symmetry(x, y):
    s = complex(x, y)
    lat = PoleLattice(P, 2)
    if abs(s - lat.nearest(s)) < 0.2:
        return
    a, b = zeta_continued(s.conjugate(), P), zeta_continued(s, P).conjugate()
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@pytest.mark.parametrize("y", [0.0, 0.5, 3.0, 7.0])
def test_bound_left_of_first_column(y):
    q, M, delta = 0.5, 1, 0.5
    s = complex(-2 * M - delta, y)
    c = min((1 - q ** (2 - delta)) ** 2, (1 - q ** (-delta)) ** 2)
    bound = 4 / c * (1 - q * q) ** s.real * (1 - q * q) ** (-abs(s))
    assert abs(zeta_continued(s, P)) <= bound


def test_pole_guard():
    with pytest.raises(PoleError) as info:
        zeta_continued(-2 + 0.05j, P)
    assert info.value.pole == complex(-2, 0)
    with pytest.raises(PoleError) as info:
        zeta_continued(1j * P.eta + 0.01, P)
    assert info.value.pole == pytest.approx(1j * P.eta)
    with pytest.raises(PoleError):
        zeta_simplified(0.0, P)


def test_simplified_matches_eigenvalue_sum_and_scaling():
    v = zeta_simplified(2, P)
    assert v == pytest.approx(eigen_sum(2, P, simplified=True), rel=1e-12)
    assert zeta_simplified(2, QParams(0.5, 2.0)) == pytest.approx(v / 4, rel=1e-14)


def test_laurent_origin():
    ref = 4 / math.log(0.5) ** 2
    data = laurent_at_pole(0, P)
    assert data.order == 2
    assert abs(data.c_m2 - ref) <= 1e-8 * ref
    simp = laurent_at_pole(0, P, variant="simplified")
    assert simp.order == 2 and abs(simp.c_m2 - ref) <= 1e-8 * ref


@pytest.mark.parametrize("m", [1, 2])
def test_laurent_negative_even(m):
    # the n = m binomial term carries the pole:
    # c_-2 = 4 (1-q^2)^(-2m) (-2m)_m / m! q^(2m) / log^2 q
    q = 0.5
    rising = math.prod(-2 * m + j for j in range(m))
    ref = 4 * (1 - q * q) ** (-2 * m) * rising / math.factorial(m) * q ** (2 * m) / math.log(q) ** 2
    data = laurent_at_pole(-2 * m, P)
    assert data.order == 2
    assert data.c_m2.real == pytest.approx(ref, rel=1e-8)
    if m == 1:
        assert ref == pytest.approx(-7.4004, abs=1e-4)


def test_laurent_imaginary_lattice_point():
    assert laurent_at_pole(1j * P.eta, P).order == 2


def test_laurent_refuses_off_lattice():
    with pytest.raises(DomainError):
        laurent_at_pole(-1, P)
    with pytest.raises(DomainError):
        laurent_at_pole(0.5j, P, variant="simplified")


def test_simplified_periodicity():
    a = laurent_at_pole(0, P, variant="simplified")
    b = laurent_at_pole(1j * P.eta, P, variant="simplified")
    assert abs(abs(a.c_m2) - abs(b.c_m2)) <= 1e-10 * abs(a.c_m2)


def test_circle_laurent_known_function():
    f = lambda s: 3 / s ** 2 - 2 / s + cmath.exp(s)
    d = circle_laurent(f, 0, 0.25)
    assert d.order == 2
    assert d.c_m2 == pytest.approx(3, rel=1e-12)
    assert d.c_m1 == pytest.approx(-2, rel=1e-12)
    assert d.c0 == pytest.approx(1, rel=1e-12)
    simple = circle_laurent(lambda s: 1 / s + s, 0, 0.25)
    assert simple.order == 1
    assert circle_laurent(cmath.exp, 0, 0.25).order == 0


def test_circle_laurent_non_convergence():
    with pytest.raises(NumericError):
        circle_laurent(lambda s: 1 / (s - 0.2499), 0, 0.25, n0=8, n_max=16)


def test_pole_scan_examples():
    found = pole_scan((-5, 1), (-1, 1), P)
    assert [r.location for r in found] == [0, -2, -4]
    assert all(r.order == 2 for r in found)
    shifted = pole_scan((-5, 1), (-1, 1), P, shift=1)
    assert [r.location for r in shifted] == [-1, -3, -5]
    assert pole_scan((0.1, 3), (-1, 1), P) == []


def test_pole_scan_full_window():
    eta = P.eta
    found = pole_scan((-5, 1), (-2 * eta, 2 * eta), P)
    expected = PoleLattice(P, 2).points_in((-5, 1), (-2 * eta, 2 * eta))
    key = lambda z: (z.real, z.imag)
    assert sorted((r.location for r in found), key=key) == pytest.approx(sorted(expected, key=key))
    assert len(found) == 15 and all(r.order == 2 for r in found)


def test_dimension_spectrum_realises_integer_lattice():
    found = dimension_spectrum((-4, 0.5), (-0.5, 0.5), P)
    assert sorted(r.location.real for r in found) == [-4, -3, -2, -1, 0]


def test_lattice_enumerator():
    lat = PoleLattice(P, 1)
    pts = lat.points_in((-2, 0), (0, P.eta))
    assert len(pts) == 6
    assert lat.contains(complex(-3, 2 * P.eta))
    assert not PoleLattice(P, 2).contains(-3)
    with pytest.raises(DomainError):
        PoleLattice(P, 3)
