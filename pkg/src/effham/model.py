"""Interaction Hamiltonians built from harmonic terms.

An interaction-picture Hamiltonian is written as

    H(t) = sum_n  h_n exp(-i w_n t) + h_n^dagger exp(+i w_n t),   w_n > 0,

with operator coefficients ``h_n`` in angular-frequency units (hbar = 1).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .opalg import HilbertSpace, Operator, is_hermitian

__all__ = [
    "StaticTermError",
    "HarmonicTerm",
    "InteractionHamiltonian",
    "BandwidthReport",
    "normalize_term",
    "merge_terms",
    "evaluate",
    "v1",
    "bandwidth_report",
]

DEFAULT_BANDWIDTH_THRESHOLD = 1.0 / 3.0


class StaticTermError(ValueError):
    """A zero-frequency term was given where only harmonic terms are allowed."""


@dataclass(frozen=True)
class HarmonicTerm:
    h: Operator
    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"harmonic term frequency must be > 0, got {self.omega!r}")


def normalize_term(h: Operator | HarmonicTerm, omega_signed: float | None = None) -> HarmonicTerm:
    """Return the term with a positive frequency.

    A term ``h exp(+i|w|t) + h^dagger exp(-i|w|t)`` is the same Hamiltonian
    as ``h^dagger exp(-i|w|t) + h.c.``, so a negative frequency is absorbed by
    swapping ``h`` for its adjoint.  A :class:`HarmonicTerm` is returned unchanged.
    """
    if isinstance(h, HarmonicTerm):
        h, omega_signed = h.h, h.omega
    if omega_signed == 0:
        raise StaticTermError("static term not harmonic: zero-frequency terms belong in H0")
    if omega_signed > 0:
        return HarmonicTerm(h, float(omega_signed))
    return HarmonicTerm(h.dag, -float(omega_signed))


def merge_terms(terms: Iterable[HarmonicTerm], rel_tol: float = 1e-12) -> list[HarmonicTerm]:
    """Sum coefficients of equal-frequency terms and sort ascending by frequency."""
    merged: list[HarmonicTerm] = []
    for term in sorted(terms, key=lambda t: t.omega):
        if merged and abs(term.omega - merged[-1].omega) <= rel_tol * merged[-1].omega:
            last = merged[-1]
            merged[-1] = HarmonicTerm(last.h + term.h, last.omega)
        else:
            merged.append(term)
    return merged


@dataclass(frozen=True)
class InteractionHamiltonian:
    """Sorted, merged list of harmonic terms on one space."""

    space: HilbertSpace
    terms: tuple[HarmonicTerm, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for term in self.terms:
            if term.h.space != self.space:
                raise ValueError("all harmonic terms must live on the Hamiltonian's space")
        object.__setattr__(self, "terms", tuple(merge_terms(self.terms)))

    @classmethod
    def from_signed(cls, space: HilbertSpace, pairs: Iterable[tuple[Operator, float]]):
        """Build from ``(h, signed_omega)`` pairs, normalizing negative frequencies."""
        return cls(space, tuple(normalize_term(h, w) for h, w in pairs))

    def __len__(self):
        return len(self.terms)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([t.omega for t in self.terms])

    @property
    def coefficient_stack(self) -> np.ndarray:
        d = self.space.total_dim
        if not self.terms:
            return np.zeros((0, d, d), dtype=complex)
        return np.stack([t.h.matrix for t in self.terms])

    @property
    def is_static(self) -> bool:
        return not self.terms

    def max_frequency(self) -> float:
        return float(self.omegas.max()) if self.terms else 0.0

    def frequencies(self) -> np.ndarray:
        return self.omegas

    def scaled(self, s: float) -> "InteractionHamiltonian":
        return InteractionHamiltonian(self.space, tuple(HarmonicTerm(t.h * s, t.omega) for t in self.terms))

    def evaluate(self, t: float) -> Operator:
        return evaluate(self, t)

    def evaluate_many(self, times) -> np.ndarray:
        """``H(t)`` for each time in ``times``, stacked as an array of shape (K, d, d)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        d = self.space.total_dim
        if not self.terms:
            return np.zeros((times.size, d, d), dtype=complex)
        phases = np.exp(-1j * np.outer(times, self.omegas))
        half = np.einsum("kn,nij->kij", phases, self.coefficient_stack)
        return half + np.conj(np.swapaxes(half, 1, 2))

    def v1_many(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        d = self.space.total_dim
        if not self.terms:
            return np.zeros((times.size, d, d), dtype=complex)
        phases = np.exp(-1j * np.outer(times, self.omegas)) / self.omegas
        half = np.einsum("kn,nij->kij", phases, self.coefficient_stack)
        return half - np.conj(np.swapaxes(half, 1, 2))


def evaluate(H: InteractionHamiltonian, t: float) -> Operator:
    return Operator(H.space, H.evaluate_many([t])[0])


def v1(H: InteractionHamiltonian, t: float) -> Operator:
    """Antiderivative of ``-i H(t)`` with no constant part.

    ``V1(t) = sum_n (h_n exp(-i w_n t) - h_n^dagger exp(i w_n t)) / w_n``.
    """
    return Operator(H.space, H.v1_many([t])[0])


@dataclass(frozen=True)
class BandwidthReport:
    spread: float
    floor: float
    ratio: float
    ok: bool


def bandwidth_report(H: InteractionHamiltonian, threshold: float = DEFAULT_BANDWIDTH_THRESHOLD) -> BandwidthReport:
    """Compare the frequency spread with the lowest carrier.

    The compact formula is derived for spreads small against the lowest
    frequency; ``ok`` is only advisory.
    """
    if not H.terms:
        raise ValueError("bandwidth_report needs at least one harmonic term")
    w = H.omegas
    spread = float(w[-1] - w[0])
    ratio = spread / float(w[0])
    return BandwidthReport(spread=spread, floor=float(w[0]), ratio=ratio, ok=ratio <= threshold)


def check_hermitian(H: InteractionHamiltonian, times: Sequence[float], tol: float = 1e-12) -> bool:
    return all(is_hermitian(m, tol) for m in H.evaluate_many(times))
