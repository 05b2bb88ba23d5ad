"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line."""

import math
import time
import warnings

import numpy as np
import pytest
from scipy import integrate

from qsphere.action import GammaDensity, GaussianDensity, PointMass, Step, action_direct, action_exact, eta_kernel
from qsphere.errors import PrecisionWarning
from qsphere.heattrace import (
    small_t_fit,
    trace_classical,
    trace_direct,
    trace_residue,
    trace_simplified_direct,
    trace_simplified_residue,
)
from qsphere.podles import (
    build_rep,
    check_real_structure,
    check_relations,
    commutation_probe,
    delta_power,
    fluctuated_trace,
    one_form,
    spectrum_residual,
)
from qsphere.qspec import QParams
from qsphere.specfun import EULER_GAMMA, bessel_j, gamma_c, jtilde
from qsphere.zeta import PoleLattice, pole_scan, zeta_continued, zeta_direct

pytestmark = pytest.mark.acceptance

GRID_Q = (0.3, 0.5, 0.7)
GRID_T = np.logspace(math.log10(0.05), math.log10(2), 20)


def residue_quiet(t, params, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PrecisionWarning)
        return trace_residue(t, params, **kw)


def test_criterion_01_zeta_continuation(report):
    t0 = time.perf_counter()
    worst = 0.0
    for q in (0.3, 0.5, 0.7, 0.9):
        p = QParams(q)
        for re in (0.5, 1, 2, 3):
            for im in (0, 1, 5):
                s = complex(re, im)
                d = zeta_direct(s, p)
                worst = max(worst, abs(zeta_continued(s, p) - d) / abs(d))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 1
    assert report(1, ok, f"max rel err {worst:.2e} (<= 1e-10), {dt:.2f} s (< 1 s)")


def test_criterion_02_exact_heat_trace(report):
    t0 = time.perf_counter()
    worst = 0.0
    for q in GRID_Q:
        p = QParams(q)
        for t in GRID_T:
            d = trace_direct(t, p)
            worst = max(worst, abs(residue_quiet(t, p) - d) / d)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 10
    assert report(2, ok, f"max rel err {worst:.2e} (<= 1e-8), {dt:.2f} s (< 10 s)")


def test_criterion_03_cancellation_regime(report):
    p = QParams(0.5)
    with warnings.catch_warnings(record=True) as caught10:
        warnings.simplefilter("always")
        ev10 = trace_residue(10.0, p, full_output=True)
    with warnings.catch_warnings(record=True) as caught1:
        warnings.simplefilter("always")
        ev1 = trace_residue(1.0, p, full_output=True)
    d = trace_direct(10.0, p)
    err = abs(ev10.value - d) / d
    fired10 = ev10.precision_warning and any(issubclass(w.category, PrecisionWarning) for w in caught10)
    fired1 = ev1.precision_warning or any(issubclass(w.category, PrecisionWarning) for w in caught1)
    ok = err <= 1e-3 and fired10 and not fired1
    assert report(3, ok, f"t=10 rel err {err:.2e} (<= 1e-3); S_max/|result| = {ev10.cancellation_ratio:.2e} "
                         f"at t=10 (warning {'fired' if fired10 else 'not fired'}, expected fired), "
                         f"{ev1.cancellation_ratio:.2e} at t=1 (warning {'fired' if fired1 else 'not fired'})")


def test_criterion_04_reality(report):
    worst = 0.0
    for q in GRID_Q:
        p = QParams(q)
        for t in GRID_T:
            ev = residue_quiet(t, p, full_output=True)
            worst = max(worst, abs(ev.imag) / abs(ev.value))
    assert report(4, worst <= 1e-12, f"max |Im|/|Re| {worst:.2e} (<= 1e-12)")


def test_criterion_05_pole_lattice(report):
    p = QParams(0.5)
    window = ((-5, 1), (-2 * p.eta, 2 * p.eta))
    found = pole_scan(*window, p)
    expected = PoleLattice(p, 2).points_in(*window)
    key = lambda z: (round(z.real, 9), round(z.imag, 9))
    same = sorted(map(key, (r.location for r in found))) == sorted(map(key, expected))
    orders = all(r.order == 2 for r in found)
    origin = next(r for r in found if r.location == 0)
    ref = 4 / p.log_q ** 2
    err = abs(origin.c_m2 - ref) / ref
    ok = same and orders and err <= 1e-8
    assert report(5, ok, f"{len(found)} poles found, {len(expected)} expected, all order 2: {orders}; "
                         f"c_-2(0) rel err {err:.2e} (<= 1e-8)")


def y0_quadrature(x):
    f = lambda th: math.cos(x * math.cos(th)) * (EULER_GAMMA + math.log(2 * x * math.sin(th) ** 2))
    return 4 / math.pi ** 2 * integrate.quad(f, 0, math.pi / 2, epsabs=1e-14, epsrel=1e-14, limit=200)[0]


def test_criterion_06_special_functions(report):
    e_gamma = 0.0
    for q in (0.3, 0.5, 0.8):
        a = QParams(q).a_tilde(1)
        ref = math.pi * a / math.sinh(math.pi * a)
        e_gamma = max(e_gamma, abs(abs(gamma_c(1 + 1j * a)) ** 2 - ref) / ref)
    e_j = max(abs(jtilde(1, 0, 0) - EULER_GAMMA), abs(jtilde(2, 0, 0) - (EULER_GAMMA ** 2 - math.pi ** 2 / 6)))
    e_y = max(abs(jtilde(1, 0, x) - (-math.log(x / 2) * bessel_j(0, x).real + math.pi / 2 * y0_quadrature(x)))
              for x in (0.5, 1.0, 2.0))
    ok = e_gamma <= 1e-12 and e_j <= 1e-12 and e_y <= 1e-9
    assert report(6, ok, f"|Gamma(1+ia)|^2 rel err {e_gamma:.1e}, jtilde(n,0,0) err {e_j:.1e} (<= 1e-12); "
                         f"Y0 identity err {e_y:.1e} (<= 1e-9)")


def test_criterion_07_simplified_operator(report):
    worst = 0.0
    for q in GRID_Q:
        p = QParams(q)
        for t in GRID_T:
            d = trace_simplified_direct(t, p)
            worst = max(worst, abs(trace_simplified_residue(t, p) - d) / d)
    p = QParams(0.5)
    ts = [10.0 ** -k for k in range(1, 7)]
    diffs = [trace_direct(t, p) - trace_simplified_direct(t, p) for t in ts]
    ratios = [dd / (t * math.log(t) ** 2) for dd, t in zip(diffs, ts)]
    positive = all(dd > 0 for dd in diffs)
    spread = max(ratios) / min(ratios)
    ok = worst <= 1e-8 and positive and spread <= 3
    assert report(7, ok, f"residue vs direct {worst:.2e} (<= 1e-8); difference positive: {positive}; "
                         f"diff/(t log^2 t) spread {spread:.1f} over t in [1e-6, 1e-1] (<= 3)")


def test_criterion_08_q_to_one(report):
    vals = [trace_direct(1.0, QParams(q)) for q in np.round(np.arange(0.5, 0.951, 0.05), 2)]
    increasing = all(a < b for a, b in zip(vals, vals[1:]))
    classical = trace_classical(1.0)
    dev = abs(trace_direct(1.0, QParams(0.99)) - classical) / classical
    ok = increasing and dev <= 0.05
    assert report(8, ok, f"increasing over q in [0.5, 0.95]: {increasing}; q=0.99 deviation from "
                         f"classical {classical:.6f}: {dev:.2%} (<= 5%)")


def test_criterion_09_spectral_action(report):
    t0 = time.perf_counter()
    p = QParams(0.5)
    worst = 0.0
    for m in (PointMass(1), Step(1, 3), GammaDensity(1, 3), GaussianDensity(2)):
        for lam in (2.0, 5.0, 10.0):
            d = action_direct(lam, m, p)
            worst = max(worst, abs(action_exact(lam, m, p) - d) / d)
    red = 0.0
    for lam in (2.0, 5.0, 10.0):
        ref = trace_residue(1 / lam, p)
        red = max(red, abs(action_exact(lam, PointMass(1), p) - ref) / ref)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and red <= 1e-13 and dt < 30
    assert report(9, ok, f"exact vs direct {worst:.2e} (<= 1e-6); heat-trace reduction {red:.1e} (<= 1e-13); "
                         f"{dt:.1f} s (< 30 s)")


def test_criterion_10_representation(report):
    rel = real = fa = spec = 0.0
    for q in (0.3, 0.5, 0.8):
        rep = build_rep(25, QParams(q))
        rel = max(rel, max(check_relations(rep).values()))
        rs = check_real_structure(rep)
        real = max(real, rs["J^2+1"], rs["DJ-JD"], rs["Jgamma+gammaJ"])
        fa = max(fa, rs["Fa-aF"])
        spec = max(spec, spectrum_residual(rep))
    ok = rel <= 1e-12 and real <= 1e-15 and fa <= 1e-13 and spec <= 1e-12
    assert report(10, ok, f"relations {rel:.1e} (<= 1e-12); J identities {real:.1e} (rounding); "
                          f"[F, pi(a)] {fa:.2e} (<= 1e-13); spectrum {spec:.1e} (<= 1e-12)")


def test_criterion_11_regularity(report):
    p = QParams(0.5)
    rep = build_rep(30, p)
    lq = math.log(1 / p.q)
    slope_dev = max(abs(delta_power(rep, g, n).slope / ((n - 1) * lq) - 1)
                    for g in ("A", "B", "B*") for n in (2, 3))
    r15, r25 = build_rep(15, p), build_rep(25, p)
    max_dev = max(abs(delta_power(r25, g, 1).max_element / delta_power(r15, g, 1).max_element - 1)
                  for g in ("A", "B", "B*"))
    probe_dev = abs(commutation_probe(r25, "A", 1) / commutation_probe(r15, "A", 1) - 1)
    ok = slope_dev <= 0.05 and max_dev <= 0.05 and probe_dev <= 0.05
    assert report(11, ok, f"slope deviation {slope_dev:.1e}, n=1 max-element drift {max_dev:.1e}, "
                          f"commutation drift {probe_dev:.1e} (each <= 5%)")


def test_criterion_12_fluctuation(report):
    p = QParams(0.5)
    rep = build_rep(30, p)
    form = one_form(rep, [("A", "A", 1)], 0.1)
    ts = np.logspace(-4, -2, 41)
    pert = fluctuated_trace(rep, form, ts)
    unp = fluctuated_trace(rep, None, ts)
    ref = 2 / p.log_q ** 2
    a2 = small_t_fit(zip(ts, pert))[0]
    dev = abs(a2 / ref - 1)
    d = np.abs((pert - unp) / np.log(ts) ** 2)
    monotone = bool(np.all(np.diff(d) > 0))
    ok = dev <= 0.02 and monotone
    assert report(12, ok, f"log^2 t coefficient {a2:.6f} vs {ref:.6f}: {dev:.2%} (<= 2%); "
                          f"|diff|/log^2 t decreasing toward t=1e-4: {monotone}")


def test_criterion_13_inverse_laplace_kernel(report):
    s = 2.0
    worst = 0.0
    for alpha, k in ((1, 0), (2, 0), (2, 1), (1.5, 2), (0.5 + 1j, 1)):
        # split at t = 1: the log^k singularity and the exponential tail
        parts = [sum(integrate.quad(lambda t, f=f: f(eta_kernel(alpha, k, t) * math.exp(-s * t)), lo, hi,
                                    epsabs=1e-14, epsrel=1e-12, limit=400)[0] for lo, hi in ((0, 1), (1, np.inf)))
                 for f in (lambda z: z.real, lambda z: z.imag)]
        ref = s ** (-complex(alpha)) * math.log(s) ** k
        worst = max(worst, abs(complex(*parts) - ref))
    assert report(13, worst <= 1e-8, f"max |L[eta](2) - 2^-alpha log^k 2| {worst:.1e} (<= 1e-8)")
