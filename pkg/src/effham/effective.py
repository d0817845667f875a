"""Second-order time-averaged effective Hamiltonian of a harmonic interaction.

For ``H(t) = sum_n h_n exp(-i w_n t) + h.c.`` the effective Hamiltonian is

    H_eff(t) = sum_{m,n} (1/wbar_mn) [h_m^dagger, h_n] exp(i (w_m - w_n) t),

where ``1/wbar_mn = (1/w_m + 1/w_n) / 2`` is the inverse harmonic mean of the
two carrier frequencies.  Every ``(m, n)`` contribution is kept, including
beats that a secular (rotating-wave style) treatment would discard; use
:func:`secular_filter` to drop them explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import InteractionHamiltonian
from .opalg import HilbertSpace, Operator, commutator, identity, zero

__all__ = [
    "EffectiveTerm",
    "EffectiveHamiltonian",
    "compact_effective",
    "harmonic_mean",
    "secular_filter",
    "static_part",
    "evaluate",
    "remove_identity_offset",
]

BEAT_REL_TOL = 1e-9


def harmonic_mean(a: float, b: float) -> float:
    return 2.0 / (1.0 / a + 1.0 / b)


@dataclass(frozen=True)
class EffectiveTerm:
    """Coefficient oscillating as ``exp(i * freq * t)``.

    ``pair`` records the ``(m, n)`` carrier indices that produced the term;
    it is ``None`` for grouped or hand-built terms.
    """

    coeff: Operator
    freq: float
    pair: tuple[int, int] | None = None


@dataclass(frozen=True)
class EffectiveHamiltonian:
    space: HilbertSpace
    raw_terms: tuple[EffectiveTerm, ...] = field(default_factory=tuple)
    beat_tol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "raw_terms", tuple(self.raw_terms))
        for term in self.raw_terms:
            if term.coeff.space != self.space:
                raise ValueError("effective term lives on a different space")

    @classmethod
    def from_terms(cls, space: HilbertSpace, pairs: Iterable[tuple[Operator, float]], beat_tol: float = 1e-12):
        return cls(space, tuple(EffectiveTerm(c, float(f)) for c, f in pairs), beat_tol)

    @property
    def terms(self) -> list[EffectiveTerm]:
        """Terms grouped by beat frequency (ascending), zero coefficients dropped."""
        groups: list[list] = []
        for term in sorted(self.raw_terms, key=lambda t: t.freq):
            if groups and abs(term.freq - groups[-1][0]) <= self.beat_tol:
                groups[-1][1] = groups[-1][1] + term.coeff.matrix
            else:
                groups.append([term.freq, term.coeff.matrix.copy()])
        out = []
        for freq, mat in groups:
            if abs(freq) <= self.beat_tol:
                freq = 0.0
            if np.any(mat):
                out.append(EffectiveTerm(Operator(self.space, mat), float(freq)))
        return out

    @property
    def is_static(self) -> bool:
        return all(abs(t.freq) <= self.beat_tol for t in self.raw_terms)

    def frequencies(self) -> np.ndarray:
        return np.array([t.freq for t in self.terms])

    def max_frequency(self) -> float:
        return max((abs(t.freq) for t in self.raw_terms), default=0.0)

    def evaluate(self, t: float) -> Operator:
        return evaluate(self, t)

    def evaluate_many(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        d = self.space.total_dim
        terms = self.terms
        if not terms:
            return np.zeros((times.size, d, d), dtype=complex)
        coeffs = np.stack([t.coeff.matrix for t in terms])
        freqs = np.array([t.freq for t in terms])
        phases = np.exp(1j * np.outer(times, freqs))
        return np.einsum("kn,nij->kij", phases, coeffs)


def compact_effective(H: InteractionHamiltonian) -> EffectiveHamiltonian:
    """Apply the compact second-order formula to every ordered pair ``(m, n)``.

    Raw terms are produced in lexicographic ``(m, n)`` order; grouping by beat
    frequency happens lazily in :attr:`EffectiveHamiltonian.terms`.
    """
    terms = H.terms
    raw = []
    for m, tm in enumerate(terms):
        for n, tn in enumerate(terms):
            inv_mean = 0.5 * (1.0 / tm.omega + 1.0 / tn.omega)
            coeff = commutator(tm.h.dag, tn.h) * inv_mean
            freq = 0.0 if m == n else tm.omega - tn.omega
            raw.append(EffectiveTerm(coeff, freq, (m, n)))
    floor = terms[0].omega if terms else 1.0
    return EffectiveHamiltonian(H.space, tuple(raw), beat_tol=BEAT_REL_TOL * floor)


def secular_filter(E: EffectiveHamiltonian, cutoff: float) -> EffectiveHamiltonian:
    """Keep only terms with ``|freq| <= cutoff``; conjugate pairs stay together."""
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    kept = tuple(t for t in E.raw_terms if abs(t.freq) <= cutoff + E.beat_tol)
    return EffectiveHamiltonian(E.space, kept, E.beat_tol)


def static_part(E: EffectiveHamiltonian) -> Operator:
    total = zero(E.space)
    for t in E.raw_terms:
        if abs(t.freq) <= E.beat_tol:
            total = total + t.coeff
    return total


def evaluate(E: EffectiveHamiltonian, t: float) -> Operator:
    return Operator(E.space, E.evaluate_many([t])[0])


def remove_identity_offset(E: EffectiveHamiltonian, sector: Sequence[int] | np.ndarray | None = None) -> EffectiveHamiltonian:
    """Subtract the identity component from every static coefficient.

    The offset is ``tr(P C P) / dim(P)`` with ``P`` the projector onto
    ``sector`` (basis indices or a boolean mask; default the whole space).
    Commutators are traceless on a truncated space, so for operators
    containing truncated ladder operators the offset is only visible when
    the top Fock levels are excluded from ``sector``.
    """
    idx = _sector_indices(E.space.total_dim, sector)
    if idx.size == 0:
        raise ValueError("sector is empty")
    eye = identity(E.space)
    out = []
    for t in E.raw_terms:
        if abs(t.freq) <= E.beat_tol:
            offset = np.trace(t.coeff.matrix[np.ix_(idx, idx)]) / idx.size
            out.append(EffectiveTerm(t.coeff - eye * offset.real, t.freq, t.pair))
        else:
            out.append(t)
    return EffectiveHamiltonian(E.space, tuple(out), E.beat_tol)


def _sector_indices(d: int, sector) -> np.ndarray:
    if sector is None:
        return np.arange(d)
    sector = np.asarray(sector)
    if sector.dtype == bool:
        return np.flatnonzero(sector)
    return sector.astype(int)
