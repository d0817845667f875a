"""Explicit low-pass time averaging and the kernel route to the effective Hamiltonian.

These routines do not use the compact harmonic formula; they average
sampled operators with a Gaussian kernel and serve as an independent check
on :mod:`effham.effective`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import InteractionHamiltonian
from .opalg import HilbertSpace, Operator, frobenius_norm, hermitian_part

__all__ = [
    "Kernel",
    "OperatorSeries",
    "FeasibilityReport",
    "DiagnosticResult",
    "KernelFeasibilityWarning",
    "WindowTooShortError",
    "IllConditionedAverageError",
    "auto_kernel",
    "kernel_feasibility",
    "average_series",
    "heff_general",
    "heff_general_static",
    "heff_nonhermitian_diagnostic",
]

HALF_WIDTH = 5.0  # kernel support in units of tau; mass outside is ~5.7e-7
STOP_BAND = 1e-3
PASS_BAND = 0.98
MAX_CONDITION = 1e6


class KernelFeasibilityWarning(UserWarning):
    pass


class WindowTooShortError(ValueError):
    pass


class IllConditionedAverageError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Kernel:
    """Unit-area Gaussian ``exp(-t^2 / 2 tau^2) / (tau sqrt(2 pi))``."""

    tau: float
    shape: str = "gaussian"

    def __post_init__(self):
        if self.shape != "gaussian":
            raise ValueError("only the gaussian kernel is supported")
        if not self.tau > 0:
            raise ValueError("kernel width tau must be > 0")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-0.5 * (t / self.tau) ** 2) / (self.tau * math.sqrt(2 * math.pi))

    def transfer(self, omega):
        return np.exp(-0.5 * (np.asarray(omega, dtype=float) * self.tau) ** 2)

    def half_width_samples(self, dt: float) -> int:
        return int(math.ceil(HALF_WIDTH * self.tau / dt))

    def weights(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Offsets ``j`` and normalized quadrature weights for ``t + j*dt``."""
        m = self.half_width_samples(dt)
        j = np.arange(-m, m + 1)
        w = self(j * dt)
        # trapezoid end weights; renormalize the truncated kernel to unit mass
        w[0] *= 0.5
        w[-1] *= 0.5
        return j, w / w.sum()

    def derivative_weights(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Weights ``w'`` with ``d/dt avg(O)(t) ~= sum_j w'_j O(t + j dt)``."""
        j, w = self.weights(dt)
        s = j * dt
        wd = s / self.tau**2 * w
        return j, wd / np.sum(wd * s)


@dataclass(frozen=True)
class OperatorSeries:
    """Operators sampled on a uniform grid ``t0 + k*dt``; ``samples`` has shape (K, d, d)."""

    space: HilbertSpace
    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        d = self.space.total_dim
        if s.ndim != 3 or s.shape[1:] != (d, d):
            raise ValueError(f"samples must have shape (K, {d}, {d}), got {s.shape}")
        if s.shape[0] < 2:
            raise ValueError("an operator series needs at least 2 samples")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_function(cls, space, fn, t0: float, dt: float, n: int) -> "OperatorSeries":
        times = t0 + dt * np.arange(n)
        return cls(space, t0, dt, np.stack([np.asarray(fn(t), dtype=complex) for t in times]))

    def __len__(self):
        return self.samples.shape[0]

    def __getitem__(self, k) -> Operator:
        return Operator(self.space, self.samples[k])

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def t1(self) -> float:
        return self.t0 + self.dt * (len(self) - 1)

    def index_of(self, t: float) -> int:
        k = int(round((t - self.t0) / self.dt))
        if not 0 <= k < len(self) or abs(self.t0 + k * self.dt - t) > 1e-6 * self.dt:
            raise ValueError(f"time {t} is not on the series grid")
        return k


@dataclass(frozen=True)
class FeasibilityReport:
    max_carrier: float
    max_sum: float
    min_beat: float
    ok: bool


def auto_kernel(H: InteractionHamiltonian, stop_factor: float = 5.0) -> Kernel:
    """Kernel with ``w_1 * tau = stop_factor``; check the pass band with :func:`kernel_feasibility`."""
    if not H.terms:
        raise ValueError("cannot choose a kernel for a Hamiltonian without terms")
    return Kernel(tau=stop_factor / H.terms[0].omega)


def kernel_feasibility(H: InteractionHamiltonian, k: Kernel) -> FeasibilityReport:
    """Check that carriers and sum frequencies are filtered while beats pass."""
    w = H.omegas
    if w.size == 0:
        return FeasibilityReport(0.0, 0.0, 1.0, True)
    carrier = float(np.max(k.transfer(w)))
    sums = float(np.max(k.transfer(w[:, None] + w[None, :])))
    beats = float(np.min(k.transfer(w[:, None] - w[None, :])))
    ok = carrier <= STOP_BAND and sums <= STOP_BAND and beats >= PASS_BAND
    return FeasibilityReport(carrier, sums, beats, ok)


def average_series(s: OperatorSeries, k: Kernel) -> OperatorSeries:
    """Gaussian-weighted moving average, trimmed by ``5*tau`` at each end."""
    j, w = k.weights(s.dt)
    m = int(j[-1])
    n = len(s)
    if n < 2 * m + 2:
        raise WindowTooShortError(
            f"series has {n} samples but the kernel window needs at least {2 * m + 2} "
            f"(tau={k.tau}, dt={s.dt})"
        )
    out = np.zeros((n - 2 * m,) + s.samples.shape[1:], dtype=complex)
    for off, wj in zip(j, w):
        out += wj * s.samples[m + off : n - m + off]
    return OperatorSeries(s.space, s.t0 + m * s.dt, s.dt, out)


def _default_dt(H: InteractionHamiltonian, k: Kernel) -> float:
    return min(0.05 / H.max_frequency(), k.tau / 20.0)


def heff_general(H: InteractionHamiltonian, k: Kernel, t: float, dt: float | None = None) -> Operator:
    """Second-order effective Hamiltonian from explicit kernel averages at time ``t``.

    Computes ``avg(H) + (avg([H, V1]) - [avg(H), avg(V1)]) / 2`` by quadrature
    over ``t +- 5 tau``.  A :class:`KernelFeasibilityWarning` is issued when the
    kernel does not separate carriers from beats.
    """
    if not H.terms:
        return Operator(H.space, np.zeros((H.space.total_dim,) * 2))
    if not kernel_feasibility(H, k).ok:
        warnings.warn(f"kernel tau={k.tau} does not satisfy the low-pass assumptions", KernelFeasibilityWarning, stacklevel=2)
    dt = _default_dt(H, k) if dt is None else dt
    j, w = k.weights(dt)
    ts = t + j * dt
    hs = H.evaluate_many(ts)
    vs = H.v1_many(ts)
    h_bar = np.einsum("k,kij->ij", w, hs)
    v_bar = np.einsum("k,kij->ij", w, vs)
    comm_bar = np.einsum("k,kij->ij", w, hs @ vs - vs @ hs)
    heff = h_bar + 0.5 * (comm_bar - (h_bar @ v_bar - v_bar @ h_bar))
    return Operator(H.space, heff)


def heff_general_static(H: InteractionHamiltonian, k: Kernel, dt: float | None = None) -> Operator:
    """Time-independent part of :func:`heff_general`.

    Averages over one period of the smallest nonzero beat frequency with
    enough equally spaced samples to cancel every beat that is an integer
    multiple of it.
    """
    w = H.omegas
    beats = np.abs(w[:, None] - w[None, :]).ravel()
    tol = 1e-9 * (w[0] if w.size else 1.0)
    beats = beats[beats > tol]
    if beats.size == 0:
        return heff_general(H, k, 0.0, dt)
    base = beats.min()
    n = int(math.ceil(beats.max() / base)) + 2
    period = 2 * math.pi / base
    mats = [heff_general(H, k, i * period / n, dt).matrix for i in range(n)]
    return Operator(H.space, np.mean(mats, axis=0))


@dataclass(frozen=True)
class DiagnosticResult:
    calH: Operator
    herm: Operator
    antiherm_norm: float
    condition: float


def heff_nonhermitian_diagnostic(U: OperatorSeries, k: Kernel, t: float) -> DiagnosticResult:
    """Effective generator of the averaged propagator at ``t``.

    ``calH = i (d/dt avg U) (avg U)^-1``; its Hermitian part is the effective
    Hamiltonian and the anti-Hermitian norm measures how far the averaged
    evolution is from unitary.
    """
    idx = U.index_of(t)
    j, w = k.weights(U.dt)
    _, wd = k.derivative_weights(U.dt)
    lo, hi = idx + j[0], idx + j[-1]
    if lo < 0 or hi >= len(U):
        raise WindowTooShortError(
            f"time {t} needs samples {lo}..{hi} but the series has 0..{len(U) - 1}"
        )
    window = U.samples[lo : hi + 1]
    avg = np.einsum("k,kij->ij", w, window)
    davg = np.einsum("k,kij->ij", wd, window)
    cond = float(np.linalg.cond(avg))
    if not cond <= MAX_CONDITION:
        raise IllConditionedAverageError(f"averaged propagator is ill-conditioned (condition number {cond:.3g})")
    # calH = i * davg @ inv(avg), via a solve on the transposed system
    calH = 1j * np.linalg.solve(avg.T, davg.T).T
    op = Operator(U.space, calH)
    herm = hermitian_part(op)
    return DiagnosticResult(op, herm, frobenius_norm(op - herm), cond)
