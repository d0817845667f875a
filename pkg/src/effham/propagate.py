"""Numerical propagation of ``i dU/dt = H(t) U`` and simple figures of merit.

The integrator is the exponential midpoint rule (second-order Magnus):
``U <- exp(-i H(t + dt/2) dt) U``, each factor computed exactly from a
Hermitian eigendecomposition, so every step is unitary to rounding error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .averaging import OperatorSeries
from .effective import EffectiveHamiltonian
from .model import InteractionHamiltonian
from .opalg import Operator

__all__ = [
    "StepSizeError",
    "NonHermitianError",
    "PropagationResult",
    "Populations",
    "MAX_PHASE_PER_STEP",
    "propagate",
    "common_period",
    "fidelity",
    "state_populations",
    "phase_difference_series",
    "phase_accumulation",
    "unitarity_defect",
]

Source = Union[InteractionHamiltonian, EffectiveHamiltonian, Operator]

MAX_PHASE_PER_STEP = 0.05
CHUNK = 1024


class StepSizeError(ValueError):
    def __init__(self, dt: float, required: float):
        super().__init__(f"time step {dt:g} too large: need dt <= {required:.6g} (omega_max * dt <= {MAX_PHASE_PER_STEP})")
        self.dt = dt
        self.required = required


class NonHermitianError(ValueError):
    pass


def _as_source(source: Source):
    if isinstance(source, Operator):
        return EffectiveHamiltonian.from_terms(source.space, [(source, 0.0)])
    return source


def unitarity_defect(u: np.ndarray) -> float:
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))


def _polar(u: np.ndarray) -> np.ndarray:
    w, _, vh = np.linalg.svd(u)
    return w @ vh


def _step_exponentials(source, times: np.ndarray, dt: float, envelope=None) -> np.ndarray:
    hs = source.evaluate_many(times)
    if envelope is not None:
        hs = hs * envelope[:, None, None]
    skew = np.linalg.norm(hs - np.conj(np.swapaxes(hs, 1, 2)), axis=(1, 2))
    size = np.maximum(1.0, np.linalg.norm(hs, axis=(1, 2)))
    if np.any(skew > 1e-10 * size):
        raise NonHermitianError("Hamiltonian evaluated to a non-Hermitian matrix")
    lam, vec = np.linalg.eigh(hs)
    return (vec * np.exp(-1j * dt * lam)[:, None, :]) @ np.conj(np.swapaxes(vec, 1, 2))


@dataclass(frozen=True)
class PropagationResult:
    """Propagator samples ``U(t, t0)`` on a uniform grid.

    ``unitaries`` holds every ``store_every``-th step; ``final`` is always
    ``U(t0 + steps*dt, t0)``.  With a burn-in window, ``preparation`` is the
    propagator across the switch-on ramp that precedes ``t0``.
    """

    t0: float
    dt: float
    steps: int
    store_every: int
    unitaries: OperatorSeries
    final: Operator
    method: str
    max_unitarity_defect: float
    preparation: Operator | None = None

    @property
    def t1(self) -> float:
        return self.t0 + self.steps * self.dt

    @property
    def space(self):
        return self.final.space

    def stored(self) -> tuple[np.ndarray, np.ndarray]:
        """Stored times and matrices, with the final step appended if off-stride."""
        times = self.unitaries.times
        mats = self.unitaries.samples
        if self.steps % self.store_every:
            times = np.append(times, self.t1)
            mats = np.concatenate([mats, self.final.matrix[None]])
        return times, mats


def common_period(freqs, max_denominator: int = 1000, rel_tol: float = 1e-9) -> float | None:
    """Smallest common period of the nonzero frequencies, or ``None`` if incommensurate."""
    freqs = np.abs(np.asarray(freqs, dtype=float))
    freqs = freqs[freqs > 0]
    if freqs.size == 0:
        return None
    base = freqs.min()
    ratios = []
    for f in freqs:
        r = Fraction(f / base).limit_denominator(max_denominator)
        if abs(float(r) - f / base) > rel_tol * f / base:
            return None
        ratios.append(r)
    denom = math.lcm(*(r.denominator for r in ratios))
    ints = [int(r * denom) for r in ratios]
    fundamental = base / denom * math.gcd(*ints)
    return 2 * math.pi / fundamental


def propagate(
    source: Source,
    t0: float,
    t1: float,
    dt: float,
    *,
    store_every: int = 1,
    method: str = "auto",
    burn_in: float = 0.0,
    period: float | None = None,
    reunitarize_every: int = 1000,
) -> PropagationResult:
    """Propagate from ``t0`` to ``t1`` with steps no larger than ``dt``.

    Methods
    -------
    ``"step"``
        Exponential midpoint rule with ``dt`` shrunk so the grid ends exactly at ``t1``.
    ``"static"``
        Exact exponential for time-independent sources (``auto`` picks it).
    ``"periodic"``
        For sources with a common period ``P`` (given or detected): ``dt`` is
        shrunk to ``P / M``, the ``M`` steps of one period are composed once
        and the one-period propagator is reused.  The grid ends at the grid
        point nearest ``t1``.

    ``burn_in`` > 0 switches the source on smoothly over ``[t0 - burn_in, t0]``
    (``sin^2`` ramp on the amplitude, squared for effective Hamiltonians)
    and records that propagator as ``preparation``.
    """
    source = _as_source(source)
    if not t1 > t0:
        raise ValueError("t1 must be greater than t0")
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if store_every < 1:
        raise ValueError("store_every must be >= 1")
    w_max = source.max_frequency()
    if w_max * dt > MAX_PHASE_PER_STEP * (1 + 1e-12):
        raise StepSizeError(dt, MAX_PHASE_PER_STEP / w_max)
    if method == "auto":
        method = "static" if source.is_static else "step"

    preparation = None
    if burn_in > 0:
        preparation = Operator(source.space, _ramp(source, t0, burn_in, dt))

    if method == "step":
        n = max(1, int(math.ceil((t1 - t0) / dt - 1e-9)))
        h = (t1 - t0) / n
        mats, final, defect = _run_steps(source, t0, h, n, store_every, reunitarize_every)
    elif method == "static":
        if not source.is_static:
            raise ValueError("static method requires a time-independent source")
        n = max(1, int(math.ceil((t1 - t0) / dt - 1e-9)))
        h = (t1 - t0) / n
        mats, final, defect = _run_static(source, h, n, store_every)
    elif method == "periodic":
        P = period if period is not None else common_period(source.frequencies())
        if P is None:
            raise ValueError("periodic method needs commensurate frequencies or an explicit period")
        M = max(1, int(math.ceil(P / dt - 1e-9)))
        h = P / M
        n = max(1, int(round((t1 - t0) / h)))
        mats, final, defect = _run_periodic(source, t0, h, n, M, store_every, reunitarize_every)
    else:
        raise ValueError(f"unknown propagation method {method!r}")

    series = OperatorSeries(source.space, t0, h * store_every, mats) if len(mats) >= 2 else OperatorSeries(
        source.space, t0, h * n, np.stack([mats[0], final])
    )
    return PropagationResult(
        t0=t0,
        dt=h,
        steps=n,
        store_every=store_every if len(mats) >= 2 else n,
        unitaries=series,
        final=Operator(source.space, final),
        method=method,
        max_unitarity_defect=defect,
        preparation=preparation,
    )


def _run_steps(source, t0, h, n, store_every, reunitarize_every, envelope=None):
    d = source.space.total_dim
    u = np.eye(d, dtype=complex)
    stored = [u.copy()]
    defect = 0.0
    for start in range(0, n, CHUNK):
        ks = np.arange(start, min(n, start + CHUNK))
        env = envelope(ks) if envelope is not None else None
        exps = _step_exponentials(source, t0 + (ks + 0.5) * h, h, env)
        for k, e in zip(ks, exps):
            u = e @ u
            step = k + 1
            if step % reunitarize_every == 0:
                u = _polar(u)
            if step % store_every == 0:
                stored.append(u.copy())
                defect = max(defect, unitarity_defect(u))
    defect = max(defect, unitarity_defect(u))
    return np.stack(stored), u, defect


def _run_static(source, h, n, store_every):
    hmat = source.evaluate_many([0.0])[0]
    lam, vec = np.linalg.eigh(hmat)

    def at(t):
        return (vec * np.exp(-1j * t * lam)) @ vec.conj().T

    stored = [at(k * h) for k in range(0, n + 1, store_every)]
    final = at(n * h)
    defect = max(unitarity_defect(u) for u in stored + [final])
    return np.stack(stored), final, defect


def _run_periodic(source, t0, h, n, M, store_every, reunitarize_every):
    # partial[r] = U(t0 + r h, t0) for r = 0..M; U(t0 + (jM + r) h) = partial[r] @ partial[M]^j
    partial, _, _ = _run_steps(source, t0, h, min(M, n), 1, reunitarize_every)
    if M > n:
        partial = np.concatenate([partial, np.zeros((M - n,) + partial.shape[1:], complex)])
    one_period = _polar(partial[M]) if n >= M else None
    power = np.eye(source.space.total_dim, dtype=complex)
    j_have = 0
    count = 0

    def at(step):
        nonlocal power, j_have, count
        j, r = divmod(step, M)
        while j_have < j:
            power = one_period @ power
            j_have += 1
            count += 1
            if count % reunitarize_every == 0:
                power = _polar(power)
        return partial[r] @ power

    stored = [at(s) for s in range(0, n + 1, store_every)]
    final = at(n)
    defect = max(unitarity_defect(u) for u in stored + [final])
    return np.stack(stored), final, defect


def _ramp(source, t0, burn_in, dt):
    n = max(1, int(math.ceil(burn_in / dt - 1e-9)))
    h = burn_in / n
    power = 2 if isinstance(source, EffectiveHamiltonian) else 1
    start = t0 - burn_in

    def envelope(ks):
        s = (ks + 0.5) / n
        return np.sin(0.5 * np.pi * s) ** (2 * power)

    _, u, _ = _run_steps(source, start, h, n, n, 1000, envelope)
    return u


def fidelity(a, b) -> float:
    """Global-phase-insensitive overlap ``|tr(A^dagger B)| / d``."""
    a = a.matrix if isinstance(a, Operator) else np.asarray(a)
    b = b.matrix if isinstance(b, Operator) else np.asarray(b)
    return float(abs(np.trace(a.conj().T @ b)) / a.shape[0])


@dataclass(frozen=True)
class Populations:
    times: np.ndarray
    labels: list[str]
    values: np.ndarray  # shape (K, d)


def _stored(U) -> tuple[np.ndarray, np.ndarray, Operator | None]:
    if isinstance(U, PropagationResult):
        times, mats = U.stored()
        return times, mats, U.preparation
    if isinstance(U, OperatorSeries):
        return U.times, U.samples, None
    raise TypeError("expected a PropagationResult or OperatorSeries")


def state_populations(U, psi0, basis_labels=None) -> Populations:
    """Basis-state populations of ``U(t) psi0`` along the stored grid.

    ``psi0`` may be a state vector or a basis index.  For a result with a
    burn-in window the state is first carried through the switch-on ramp.
    """
    times, mats, prep = _stored(U)
    d = mats.shape[1]
    if np.isscalar(psi0):
        vec = np.zeros(d, dtype=complex)
        vec[int(psi0)] = 1.0
    else:
        vec = np.asarray(psi0, dtype=complex)
        vec = vec / np.linalg.norm(vec)
    if prep is not None:
        vec = prep.matrix @ vec
    amps = mats @ vec
    pops = np.abs(amps) ** 2
    if not np.allclose(pops.sum(axis=1), 1.0, atol=1e-9, rtol=0):
        raise FloatingPointError("populations do not sum to one; propagator lost unitarity")
    if basis_labels is None:
        basis_labels = [str(i) for i in range(d)]
    return Populations(times, list(basis_labels), pops)


def phase_difference_series(U, level_i: int, level_j: int) -> tuple[np.ndarray, np.ndarray]:
    """Unwrapped ``arg<i|U|i> - arg<j|U|j>`` along the stored grid."""
    times, mats, _ = _stored(U)
    diff = np.angle(mats[:, level_i, level_i]) - np.angle(mats[:, level_j, level_j])
    return times, np.unwrap(diff)


def phase_accumulation(U, level_i: int, level_j: int) -> float:
    """Differential phase ``arg<i|U|i> - arg<j|U|j>`` at the last stored time.

    For ``H = diag(E_0, E_1, ...)`` this is ``(E_j - E_i) * (t - t0)``.
    """
    _, phase = phase_difference_series(U, level_i, level_j)
    return float(phase[-1])
