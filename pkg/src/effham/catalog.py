"""Worked example systems with closed-form effective Hamiltonians.

Each builder returns a :class:`CatalogEntry` carrying the interaction
Hamiltonian, the expected effective Hamiltonian, and the bookkeeping needed
to compare the two: the secular cutoff under which the expectation holds,
whether an identity offset must be removed, and the basis sector on which the
comparison is exact (ladder-operator truncation spoils the top Fock levels).

Two-level factors use level 0 for the state labelled |1> and level 1
for |2>.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .effective import (
    EffectiveHamiltonian,
    compact_effective,
    remove_identity_offset,
    secular_filter,
)
from .model import InteractionHamiltonian, normalize_term
from .opalg import (
    HilbertSpace,
    collective_spin,
    identity,
    ketbra,
    ladder,
    number,
)

__all__ = [
    "CatalogEntry",
    "ENTRIES",
    "ac_stark",
    "bloch_siegert",
    "raman",
    "quantum_ac_stark",
    "ms_gate",
    "build",
    "ms_chi",
    "ms_target_state",
    "static_diagonal",
    "engine_effective",
    "compare_to_expected",
]


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    params: dict
    interaction: InteractionHamiltonian
    expected_effective: EffectiveHamiltonian
    secular_cutoff: float
    sector: np.ndarray | None = None
    remove_offset: bool = False
    simulation: dict = field(default_factory=dict)
    notes: str = ""

    @property
    def space(self) -> HilbertSpace:
        return self.interaction.space


def _fock_sector(space: HilbertSpace, boson_factor: int, n_max: int) -> np.ndarray:
    levels = np.indices(space.dims).reshape(len(space.dims), -1)[boson_factor]
    return np.flatnonzero(levels <= n_max)


def engine_effective(entry: CatalogEntry) -> EffectiveHamiltonian:
    """Compact-formula output after the entry's secular filter and offset policy."""
    E = secular_filter(compact_effective(entry.interaction), entry.secular_cutoff)
    if entry.remove_offset:
        E = remove_identity_offset(E, entry.sector)
    return E


def compare_to_expected(entry: CatalogEntry, E: EffectiveHamiltonian | None = None) -> float:
    """Largest relative Frobenius mismatch over beat frequencies, restricted to the entry's sector."""
    E = engine_effective(entry) if E is None else E
    idx = np.arange(entry.space.total_dim) if entry.sector is None else entry.sector
    tol = max(E.beat_tol, entry.expected_effective.beat_tol)
    got = [(t.freq, t.coeff.matrix[np.ix_(idx, idx)]) for t in E.terms]
    want = [(t.freq, t.coeff.matrix[np.ix_(idx, idx)]) for t in entry.expected_effective.terms]
    freqs: list[float] = []
    for f, _ in sorted(got + want, key=lambda p: p[0]):
        if not freqs or abs(f - freqs[-1]) > tol:
            freqs.append(f)
    scale = max([np.linalg.norm(m) for _, m in got + want], default=0.0)
    if scale == 0.0:
        return 0.0
    worst = 0.0
    for f in freqs:
        a = sum((m for g, m in got if abs(g - f) <= tol), np.zeros((idx.size, idx.size), complex))
        b = sum((m for g, m in want if abs(g - f) <= tol), np.zeros((idx.size, idx.size), complex))
        worst = max(worst, float(np.linalg.norm(a - b)) / scale)
    return worst


def ac_stark(Omega: float = 0.1, Delta: float = 1.0) -> CatalogEntry:
    """Far-detuned drive on a two-level system.

    A negative detuning is handled by taking the adjoint coefficient, which
    flips the sign of the shift.
    """
    if Delta == 0:
        raise ValueError("ac_stark needs a nonzero detuning")
    space = HilbertSpace.of(("qudit", 2))
    s21 = ketbra(space, 0, 1, 0)
    H = InteractionHamiltonian(space, (normalize_term(s21 * (Omega / 2), Delta),))
    p1, p2 = ketbra(space, 0, 0, 0), ketbra(space, 0, 1, 1)
    expected = (p2 - p1) * (-(Omega**2) / (4 * Delta))
    return CatalogEntry(
        name="ac_stark",
        params={"Omega": Omega, "Delta": Delta},
        interaction=H,
        expected_effective=EffectiveHamiltonian.from_terms(space, [(expected, 0.0)]),
        secular_cutoff=0.0,
        simulation={
            "t1": 400.0 / abs(Delta),
            "dt": 0.01 / abs(Delta),
            "psi0": 0,
            "phase_levels": (1, 0),
            "phase_tol": 0.01,
            "min_fidelity": 0.999,
        },
        notes="static shift -(Omega^2/4 Delta)(|2><2| - |1><1|)",
    )


def bloch_siegert(Omega: float = 0.1, omega_carrier: float = 5.0, Delta: float = 1.0) -> CatalogEntry:
    """Two-level system with both co- and counter-rotating drive terms.

    ``omega_carrier`` is the transition frequency; the co-rotating term sits
    at the detuning ``Delta`` and the counter-rotating term at
    ``2*omega_carrier + Delta``.  ``Delta = 0`` keeps only the
    counter-rotating term.  The expected value is derived, not tabulated.
    """
    if not omega_carrier > 0:
        raise ValueError("omega_carrier must be > 0")
    counter = 2 * omega_carrier + Delta
    if not counter > 0:
        raise ValueError("counter-rotating frequency 2*omega_carrier + Delta must be > 0")
    space = HilbertSpace.of(("qudit", 2))
    s21 = ketbra(space, 0, 1, 0) * (Omega / 2)
    p1, p2 = ketbra(space, 0, 0, 0), ketbra(space, 0, 1, 1)
    terms = [normalize_term(s21, -counter)]
    shift = (Omega**2 / 4) / counter
    if Delta != 0:
        terms.append(normalize_term(s21, Delta))
        shift -= Omega**2 / (4 * Delta)
    H = InteractionHamiltonian(space, tuple(terms))
    # for Delta < 0 the two coefficients stop commuting and beat at counter - |Delta|;
    # the zero cutoff drops that beat
    expected = [((p2 - p1) * shift, 0.0)]
    return CatalogEntry(
        name="bloch_siegert",
        params={"Omega": Omega, "omega_carrier": omega_carrier, "Delta": Delta},
        interaction=H,
        expected_effective=EffectiveHamiltonian.from_terms(space, expected),
        secular_cutoff=0.0,
        simulation={
            "t1": 400.0,
            "dt": 0.02 / counter,
            "psi0": 0,
            "phase_levels": (1, 0),
            "phase_tol": 0.02,
            "min_fidelity": 0.99,
        },
        notes="co-rotating Stark shift plus counter-rotating (Omega^2/4)/(2 omega + Delta)",
    )


def raman(Omega1: float = 0.05, Omega2: float = 0.05, Delta1: float = 1.0, Delta2: float = 1.0) -> CatalogEntry:
    """Three-level lambda system: |1> and |2> both coupled to |3>."""
    if not (Delta1 > 0 and Delta2 > 0):
        raise ValueError("raman needs positive detunings")
    space = HilbertSpace.of(("qudit", 3))
    s31, s32 = ketbra(space, 0, 2, 0), ketbra(space, 0, 2, 1)
    H = InteractionHamiltonian(
        space,
        (normalize_term(s31 * (Omega1 / 2), Delta1), normalize_term(s32 * (Omega2 / 2), Delta2)),
    )
    p = [ketbra(space, 0, k, k) for k in range(3)]
    stark = (p[2] - p[0]) * (-(Omega1**2) / (4 * Delta1)) + (p[2] - p[1]) * (-(Omega2**2) / (4 * Delta2))
    dbar = 2.0 / (1.0 / Delta1 + 1.0 / Delta2)
    kappa = Omega1 * Omega2 / (4 * dbar)
    beat = Delta1 - Delta2
    expected = EffectiveHamiltonian.from_terms(
        space,
        [
            (stark, 0.0),
            (ketbra(space, 0, 0, 1) * kappa, beat),
            (ketbra(space, 0, 1, 0) * kappa, -beat),
        ],
        beat_tol=1e-9 * min(Delta1, Delta2),
    )
    sim = {"dt": 0.05 / max(Delta1, Delta2), "psi0": 0, "burn_in": 200.0 / min(Delta1, Delta2), "min_fidelity": 0.99}
    sim["t1"] = math.pi / (2 * kappa) if kappa > 0 else 400.0 / min(Delta1, Delta2)
    return CatalogEntry(
        name="raman",
        params={"Omega1": Omega1, "Omega2": Omega2, "Delta1": Delta1, "Delta2": Delta2},
        interaction=H,
        expected_effective=expected,
        secular_cutoff=math.inf,
        simulation=sim,
        notes="both beat terms carry a + sign; a minus on the |2><1| term would break Hermiticity",
    )


def quantum_ac_stark(
    Omega: float = 0.02, Delta: float = 1.0, eta: float = 0.1, omega0: float = 0.3, fock_dim: int = 8
) -> CatalogEntry:
    """Trapped two-level ion with first-order motional sidebands.

    Comparison holds after dropping beats at ``omega0`` and ``2*omega0``
    and removing the identity offset ``(eta^2 Omega^2/4) omega0/(Delta^2 - omega0^2)``,
    on Fock levels ``n <= fock_dim - 3``.
    """
    if not Delta > omega0 > 0:
        raise ValueError("quantum_ac_stark needs Delta > omega0 > 0")
    if eta > 0.2:
        raise ValueError("quantum_ac_stark needs eta <= 0.2 (Lamb-Dicke regime)")
    if fock_dim < 3:
        raise ValueError("fock_dim must leave a guard band of 3 levels")
    space = HilbertSpace.of(("qudit", 2), ("boson", fock_dim))
    s21 = ketbra(space, 0, 1, 0)
    a, ad = ladder(space, 1, "lower"), ladder(space, 1, "raise")
    side = 1j * eta * Omega / 2
    H = InteractionHamiltonian(
        space,
        (
            normalize_term((s21 @ ad) * side, Delta - omega0),
            normalize_term(s21 * (Omega / 2), Delta),
            normalize_term((s21 @ a) * side, Delta + omega0),
        ),
    )
    n_op = number(space, 1)
    sz = ketbra(space, 0, 1, 1) - ketbra(space, 0, 0, 0)
    factor = identity(space) + (n_op + identity(space) * 0.5) * (2 * eta**2 * Delta**2 / (Delta**2 - omega0**2))
    expected = (factor @ sz) * (-(Omega**2) / (4 * Delta))
    return CatalogEntry(
        name="quantum_ac_stark",
        params={"Omega": Omega, "Delta": Delta, "eta": eta, "omega0": omega0, "fock_dim": fock_dim},
        interaction=H,
        expected_effective=EffectiveHamiltonian.from_terms(space, [(expected, 0.0)]),
        secular_cutoff=omega0 / 2,
        sector=_fock_sector(space, 1, fock_dim - 3),
        remove_offset=True,
        simulation={
            "t1": 400.0 / Delta,
            "dt": 0.03 / (Delta + omega0),
            "psi0": 0,
            "phase_levels": (fock_dim, 0),
            "phase_tol": 0.02,
            "min_fidelity": 0.99,
        },
        notes=(
            "compact formula also yields an identity offset (eta^2 Omega^2/4) omega0/(Delta^2-omega0^2) "
            "and beats at +-omega0, +-2 omega0, both dropped here"
        ),
    )


def ms_gate(
    Omega: float = 0.02, eta: float = 0.1, delta: float = 1.1, omega0: float = 1.0, fock_dim: int = 6
) -> CatalogEntry:
    """Bichromatic two-ion gate: expected effective Hamiltonian ``chi * Jy^2``.

    ``chi = (eta^2 Omega^2 / 4) * 2 omega0 / ((delta - omega0)(delta + omega0))``.
    The carrier coefficient ``(Omega/2) Jx`` is Hermitian and contributes
    nothing.  ``chi Jy^2`` holds on Fock levels below the truncation edge.
    """
    if not delta > omega0 > 0:
        raise ValueError("ms_gate needs delta > omega0 > 0")
    if fock_dim < 2:
        raise ValueError("fock_dim must be >= 2")
    space = HilbertSpace.of(("qudit", 2), ("qudit", 2), ("boson", fock_dim))
    jx = collective_spin(space, [0, 1], "x")
    jy = collective_spin(space, [0, 1], "y")
    a, ad = ladder(space, 2, "lower"), ladder(space, 2, "raise")
    side = -eta * Omega / 2
    H = InteractionHamiltonian(
        space,
        (
            normalize_term(jx * (Omega / 2), delta),
            normalize_term((a @ jy) * side, delta + omega0),
            normalize_term((jy @ ad) * side, delta - omega0),
        ),
    )
    chi = ms_chi(Omega, eta, delta, omega0)
    expected = (jy @ jy) * chi
    return CatalogEntry(
        name="ms_gate",
        params={"Omega": Omega, "eta": eta, "delta": delta, "omega0": omega0, "fock_dim": fock_dim},
        interaction=H,
        expected_effective=EffectiveHamiltonian.from_terms(space, [(expected, 0.0)]),
        secular_cutoff=omega0 / 2,
        sector=_fock_sector(space, 2, fock_dim - 2),
        simulation={
            "t1": math.pi / (2 * chi) if chi else 100.0,
            "dt": 0.05 / (delta + omega0),
            "psi0": 0,
            "method": "periodic",
            "min_fidelity": 0.98,
        },
        notes="chi Jy^2 exact below the top Fock level where [a, a^dagger] = 1",
    )


def ms_chi(Omega: float, eta: float, delta: float, omega0: float) -> float:
    return (eta**2 * Omega**2 / 4) * (2 * omega0 / ((delta - omega0) * (delta + omega0)))


def ms_target_state(entry: CatalogEntry, t: float) -> np.ndarray:
    """``exp(-i chi Jy^2 t)`` applied to the entry's initial basis state."""
    h = sum((term.coeff.matrix for term in entry.expected_effective.terms), np.zeros((entry.space.total_dim,) * 2, complex))
    lam, vec = np.linalg.eigh(h)
    psi0 = np.zeros(entry.space.total_dim, complex)
    psi0[entry.simulation.get("psi0", 0)] = 1.0
    return vec @ (np.exp(-1j * lam * t) * (vec.conj().T @ psi0))


def static_diagonal(entry: CatalogEntry) -> np.ndarray:
    """Diagonal of the expected time-independent part."""
    d = entry.space.total_dim
    static = sum((t.coeff.matrix for t in entry.expected_effective.terms if t.freq == 0.0), np.zeros((d, d), complex))
    return np.real(np.diag(static))


ENTRIES = {
    "ac_stark": ac_stark,
    "bloch_siegert": bloch_siegert,
    "raman": raman,
    "quantum_ac_stark": quantum_ac_stark,
    "ms_gate": ms_gate,
}


def build(name: str, **overrides) -> CatalogEntry:
    try:
        builder = ENTRIES[name]
    except KeyError:
        raise KeyError(f"unknown catalog entry {name!r}; valid names: {', '.join(ENTRIES)}") from None
    return builder(**overrides)
