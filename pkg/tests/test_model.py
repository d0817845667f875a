import numpy as np
import pytest
from scipy.integrate import trapezoid

from effham.model import (
    HarmonicTerm,
    InteractionHamiltonian,
    StaticTermError,
    bandwidth_report,
    evaluate,
    normalize_term,
    v1,
)
from effham.opalg import HilbertSpace, Operator, collective_spin, is_hermitian, ketbra

from conftest import random_system

Q2 = HilbertSpace.of(("qudit", 2))
S21 = ketbra(Q2, 0, 1, 0)
S12 = ketbra(Q2, 0, 0, 1)


def stark(Omega=0.1, Delta=1.0):
    return InteractionHamiltonian(Q2, (normalize_term(S21 * (Omega / 2), Delta),))


def test_normalize_positive_is_identity():
    t = normalize_term(S21, 2.0)
    assert t.h is S21 and t.omega == 2.0


def test_normalize_negative_takes_adjoint():
    t = normalize_term(S21 * 0.05, -1.0)
    assert t.omega == 1.0
    assert t.h.allclose(S12 * 0.05, atol=0)


def test_normalize_is_idempotent():
    once = normalize_term(S21 * 0.3j, -2.5)
    twice = normalize_term(once.h, once.omega)
    assert twice.omega == once.omega and twice.h.allclose(once.h, atol=0)
    assert normalize_term(once) == once


def test_static_term_rejected():
    with pytest.raises(StaticTermError, match="static term not harmonic"):
        normalize_term(S21, 0.0)
    with pytest.raises(ValueError):
        HarmonicTerm(S21, -1.0)


def test_terms_sorted_and_merged():
    H = InteractionHamiltonian(Q2, (HarmonicTerm(S21, 2.0), HarmonicTerm(S12, 1.0), HarmonicTerm(S21, 1.0)))
    assert list(H.omegas) == [1.0, 2.0]
    assert H.terms[0].h.allclose(S12 + S21, atol=0)


def test_evaluate_ac_stark_at_zero():
    m = evaluate(stark(Omega=0.1), 0.0).matrix
    np.testing.assert_allclose(m, [[0, 0.05], [0.05, 0]], atol=1e-15)


def test_evaluate_periodicity():
    space = HilbertSpace.of(("qudit", 3))
    h1, h2 = ketbra(space, 0, 2, 0) * 0.1, ketbra(space, 0, 2, 1) * (0.05 + 0.02j)
    H = InteractionHamiltonian(space, (HarmonicTerm(h1, 1.0), HarmonicTerm(h2, 3.0)))
    assert evaluate(H, 2 * np.pi).allclose(evaluate(H, 0.0), atol=1e-12)


def test_evaluate_quarter_period():
    w = 1.7
    h = Operator(Q2, [[0.1, 0.2], [0.3, 0.4]])
    H = InteractionHamiltonian(Q2, (HarmonicTerm(h, w),))
    got = evaluate(H, np.pi / (2 * w))
    # exp(-i pi/2) = -i, exp(+i pi/2) = i
    expected = h * (-1j) + h.dag * 1j
    assert got.allclose(expected, atol=1e-12)
    assert is_hermitian(got, 1e-12)


def test_evaluate_hermitian_random(rng):
    for _ in range(100):
        H = random_system(rng)
        t = rng.uniform(-50, 50)
        assert is_hermitian(evaluate(H, t), 1e-12)


def test_bandwidth_examples():
    rep = bandwidth_report(stark())
    assert rep.ratio == 0 and rep.ok
    space = HilbertSpace.of(("qudit", 3))
    raman = InteractionHamiltonian(
        space, (HarmonicTerm(ketbra(space, 0, 2, 0), 10.0), HarmonicTerm(ketbra(space, 0, 2, 1), 10.5))
    )
    rep = bandwidth_report(raman)
    assert rep.ratio == pytest.approx(0.05, abs=1e-15) and rep.ok
    # bichromatic gate terms at delta - w0, delta, delta + w0 with delta = 1.05 w0
    ms = InteractionHamiltonian(Q2, tuple(HarmonicTerm(S21, w) for w in (0.05, 1.05, 2.05)))
    rep = bandwidth_report(ms)
    assert rep.spread == pytest.approx(2.0) and rep.floor == pytest.approx(0.05)
    assert rep.ratio == pytest.approx(40.0) and not rep.ok


def test_v1_hermitian_coefficient_vanishes_at_zero():
    H = InteractionHamiltonian(Q2, (HarmonicTerm(collective_spin(Q2, [0], "x"), 2.0),))
    assert np.count_nonzero(v1(H, 0.0).matrix) == 0


def test_v1_ac_stark_at_zero():
    Omega, Delta = 0.1, 2.0
    expected = (S21 - S12) * (Omega / (2 * Delta))
    assert v1(stark(Omega, Delta), 0.0).allclose(expected, atol=1e-15)


def test_v1_matches_trapezoid_integral(rng):
    H = random_system(rng, d=3, n_terms=3)
    t_end = 7.3
    ts = np.linspace(0.0, t_end, 20001)
    hs = H.evaluate_many(ts)
    integral = trapezoid(hs, ts, axis=0) / 1j
    diff = v1(H, t_end).matrix - v1(H, 0.0).matrix
    np.testing.assert_allclose(diff, integral, atol=1e-7)


def test_v1_antihermitian_and_derivative(rng):
    for _ in range(20):
        H = random_system(rng)
        t = rng.uniform(-10, 10)
        m = v1(H, t).matrix
        np.testing.assert_allclose(m.conj().T, -m, atol=1e-12)
        dt = 1e-3 / H.max_frequency()
        deriv = (v1(H, t + dt).matrix - v1(H, t - dt).matrix) / (2 * dt)
        target = evaluate(H, t).matrix / 1j
        # central differences: error ~ (w dt)^2 / 6 * ||H||
        assert np.linalg.norm(deriv - target) <= 1e-6 * max(1.0, np.linalg.norm(target))
