import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from effham.catalog import (
    ENTRIES,
    ac_stark,
    bloch_siegert,
    build,
    compare_to_expected,
    engine_effective,
    ms_chi,
    ms_gate,
    ms_target_state,
    quantum_ac_stark,
    raman,
    static_diagonal,
)
from effham.effective import evaluate, compact_effective, static_part
from effham.opalg import collective_spin, is_hermitian
from effham.propagate import phase_accumulation, propagate


@pytest.mark.parametrize("name", list(ENTRIES))
def test_engine_matches_expected(name):
    e = build(name)
    assert compare_to_expected(e) <= 1e-12


@pytest.mark.parametrize("name", list(ENTRIES))
def test_expected_is_hermitian(name):
    e = build(name)
    for t in (0.0, 1.3, 77.0):
        assert is_hermitian(evaluate(e.expected_effective, t), 1e-14)


def test_build_unknown_lists_names():
    with pytest.raises(KeyError, match="ac_stark, bloch_siegert, raman, quantum_ac_stark, ms_gate"):
        build("nope")


def test_ac_stark_values():
    np.testing.assert_allclose(static_diagonal(ac_stark(0.1, 1.0)), [0.0025, -0.0025], atol=1e-17)
    np.testing.assert_allclose(static_diagonal(ac_stark(0.1, -1.0)), [-0.0025, 0.0025], atol=1e-17)
    np.testing.assert_array_equal(static_diagonal(ac_stark(0.0, 1.0)), [0.0, 0.0])
    assert compare_to_expected(ac_stark(0.1, -1.0)) <= 1e-12
    with pytest.raises(ValueError):
        ac_stark(0.1, 0.0)


def test_bloch_siegert_counter_rotating_only():
    Omega, w = 0.1, 5.0
    e = bloch_siegert(Omega, w, 0.0)
    assert len(e.interaction.terms) == 1
    d = np.real(np.diag(static_part(engine_effective(e)).matrix))
    np.testing.assert_allclose(d[1] - d[0], 2 * Omega**2 / (8 * w), rtol=1e-12)
    assert np.count_nonzero(static_diagonal(bloch_siegert(0.0, w, 1.0))) == 0


def test_bloch_siegert_against_propagation():
    e = bloch_siegert(0.1, 5.0, 1.0)
    T = 200.0
    res = propagate(e.interaction, 0.0, T, e.simulation["dt"], store_every=1000, burn_in=50.0)
    d = static_diagonal(e)
    assert phase_accumulation(res, 1, 0) == pytest.approx((d[0] - d[1]) * T, rel=0.02)


def test_raman_symmetric():
    Omega, Delta = 0.05, 1.0
    e = raman(Omega, Omega, Delta, Delta)
    S = static_part(compact_effective(e.interaction)).matrix
    kappa = Omega**2 / (4 * Delta)
    assert S[0, 1] == pytest.approx(kappa) and S[1, 0] == pytest.approx(kappa)
    assert S[0, 0] == pytest.approx(S[1, 1])
    assert [t.freq for t in compact_effective(e.interaction).terms] == [0.0]


def test_raman_reduces_to_stark():
    e = raman(0.05, 0.0, 1.0, 1.3)
    S = static_part(compact_effective(e.interaction)).matrix
    stark = static_part(compact_effective(ac_stark(0.05, 1.0).interaction)).matrix
    np.testing.assert_allclose(S[np.ix_([0, 2], [0, 2])], stark, atol=1e-17)
    np.testing.assert_allclose(S[1], 0.0)


def test_raman_beat_bookkeeping():
    e = raman(0.05, 0.04, 1.3, 0.9)
    freqs = sorted(t.freq for t in engine_effective(e).terms)
    assert freqs[-1] == pytest.approx(1.3 - 0.9, abs=1e-15)
    with pytest.raises(ValueError):
        raman(0.05, 0.05, -1.0, 1.0)


def test_quantum_stark_reduces_to_stark():
    e = quantum_ac_stark(0.02, 1.0, 0.0, 0.3, 6)
    d = static_diagonal(e).reshape(2, 6)
    ref = static_diagonal(ac_stark(0.02, 1.0))
    np.testing.assert_allclose(d, np.repeat(ref[:, None], 6, axis=1), atol=1e-18)


def test_quantum_stark_per_level_oracle():
    Omega, Delta, eta, w0, N = 0.02, 1.0, 0.1, 0.3, 8
    e = quantum_ac_stark(Omega, Delta, eta, w0, N)
    S = static_part(engine_effective(e)).matrix
    diag = np.real(np.diag(S)).reshape(2, N)
    c, s = (Omega / 2) ** 2, (eta * Omega / 2) ** 2
    for n in range(N - 2):
        # scalar m = n commutators for the carrier and the two sidebands
        e1 = c / Delta + s * ((n + 1) / (Delta - w0) + n / (Delta + w0))
        e2 = -c / Delta - s * (n / (Delta - w0) + (n + 1) / (Delta + w0))
        offset = s * w0 / (Delta**2 - w0**2)
        assert diag[0, n] == pytest.approx(e1 - offset, rel=1e-12)
        assert diag[1, n] == pytest.approx(e2 - offset, rel=1e-12)
        split = (2 * n + 1) * Delta
        assert e2 - e1 == pytest.approx(-2 * c / Delta - s * (split + w0 + split - w0) / (Delta**2 - w0**2), rel=1e-12)


def test_quantum_stark_preconditions():
    with pytest.raises(ValueError):
        quantum_ac_stark(Delta=0.2, omega0=0.3)
    with pytest.raises(ValueError):
        quantum_ac_stark(eta=0.3)


def test_ms_chi_value():
    chi = ms_chi(0.02, 0.1, 1.1, 1.0)
    assert chi == pytest.approx((0.01 * 0.0004 / 4) * (2 / (0.1 * 2.1)), rel=1e-14)


def test_ms_static_on_low_levels():
    e = ms_gate(0.02, 0.1, 1.1, 1.0, 6)
    S = static_part(engine_effective(e)).matrix
    jy = collective_spin(e.space, [0, 1], "y").matrix
    want = ms_chi(0.02, 0.1, 1.1, 1.0) * jy @ jy
    idx = e.sector
    assert np.linalg.norm(S[np.ix_(idx, idx)] - want[np.ix_(idx, idx)]) <= 1e-12 * np.linalg.norm(want[np.ix_(idx, idx)])


def test_ms_no_motion_coupling():
    e = ms_gate(eta=0.0)
    assert engine_effective(e).terms == []


def test_ms_rejects_small_detuning():
    with pytest.raises(ValueError, match="delta > omega0"):
        ms_gate(delta=0.9, omega0=1.0)


def _spin_only_oracle(chi):
    # two spins only: Jy = (S+ - S-)/2i per qubit, |1> is level 0
    sp = np.array([[0, 0], [1, 0]], complex)
    sy = (sp - sp.conj().T) / 2j
    jy = np.kron(sy, np.eye(2)) + np.kron(np.eye(2), sy)
    psi0 = np.zeros(4, complex)
    psi0[0] = 1

    def state(t):
        return expm(-1j * chi * t * jy @ jy) @ psi0

    def purity(t):
        m = state(t).reshape(2, 2)
        rho = m @ m.conj().T
        return float(np.real(np.trace(rho @ rho)))

    res = minimize_scalar(purity, bounds=(0.1 / chi, 0.9 * math.pi / chi), method="bounded", options={"xatol": 1e-6 / chi})
    return res.x, state(res.x), res.fun


def test_ms_gate_time_and_target_state():
    e = ms_gate()
    chi = ms_chi(**{k: e.params[k] for k in ("Omega", "eta", "delta", "omega0")})
    t_gate, target, pur = _spin_only_oracle(chi)
    assert pur == pytest.approx(0.5, abs=1e-9)
    assert t_gate == pytest.approx(math.pi / (2 * chi), rel=1e-4)
    assert e.simulation["t1"] == pytest.approx(t_gate, rel=1e-4)
    got = ms_target_state(e, t_gate).reshape(4, 6)
    assert np.allclose(got[:, 1:], 0)
    assert abs(np.vdot(target, got[:, 0])) ** 2 >= 0.999
    # propagating the engine output on |11, n=0> gives the same state
    res = propagate(static_part(engine_effective(e)), 0.0, t_gate, 1.0)
    psi = res.final.matrix[:, 0].reshape(4, 6)[:, 0]
    assert abs(np.vdot(target, psi)) ** 2 >= 0.999
