"""Dense operator algebra on composite Hilbert spaces.

A :class:`HilbertSpace` is an ordered tensor product of qudit and truncated
bosonic factors.  Composite basis states are ordered lexicographically over
the factor indices with the leftmost factor varying slowest, which is the
ordering produced by ``np.kron``.

All matrices are stored dense; the systems of interest are small (a couple
of qubits times a few tens of Fock levels).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Factor",
    "HilbertSpace",
    "Operator",
    "SpaceMismatchError",
    "identity",
    "zero",
    "embed",
    "ketbra",
    "ladder",
    "number",
    "collective_spin",
    "add",
    "scale",
    "matmul",
    "adjoint",
    "commutator",
    "hermitian_part",
    "frobenius_norm",
    "is_hermitian",
    "sum_operators",
]

QUDIT = "qudit"
BOSON = "boson"


class SpaceMismatchError(ValueError):
    """Raised when operators on incompatible spaces are combined."""


@dataclass(frozen=True)
class Factor:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in (QUDIT, BOSON):
            raise ValueError(f"factor kind must be 'qudit' or 'boson', got {self.kind!r}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"factor dim must be an integer >= 2, got {self.dim!r}")


@dataclass(frozen=True)
class HilbertSpace:
    factors: tuple[Factor, ...]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("a Hilbert space needs at least one factor")
        object.__setattr__(self, "factors", tuple(self.factors))

    @classmethod
    def of(cls, *specs: tuple[str, int] | Factor) -> "HilbertSpace":
        """Build a space from ``(kind, dim)`` pairs, e.g. ``of(("qudit", 2), ("boson", 8))``."""
        return cls(tuple(s if isinstance(s, Factor) else Factor(*s) for s in specs))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def check_factor(self, factor: int, kind: str | None = None) -> Factor:
        if not 0 <= factor < len(self.factors):
            raise IndexError(f"factor {factor} out of range for space with {len(self.factors)} factors")
        f = self.factors[factor]
        if kind is not None and f.kind != kind:
            raise ValueError(f"factor {factor} is a {f.kind}, expected a {kind}")
        return f

    def basis_labels(self) -> list[str]:
        """Labels for the composite basis, e.g. ``"1_0"`` for factor levels (1, 0)."""
        grids = np.indices(self.dims).reshape(len(self.dims), -1).T
        return ["_".join(str(i) for i in idx) for idx in grids]


class Operator:
    """Immutable dense operator on a :class:`HilbertSpace`.

    Supports ``+``, ``-``, ``@`` (operator product), scalar ``*`` and ``/``.
    """

    __slots__ = ("space", "matrix")

    def __init__(self, space: HilbertSpace, matrix):
        m = np.array(matrix, dtype=complex)
        d = space.total_dim
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match space dimension {d}")
        m.flags.writeable = False
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "matrix", m)

    def __setattr__(self, name, value):
        raise AttributeError("Operator is immutable")

    def __repr__(self):
        return f"Operator(dims={self.space.dims}, norm={frobenius_norm(self):.3g})"

    def _check(self, other: "Operator"):
        if not isinstance(other, Operator):
            return NotImplemented
        if other.space != self.space:
            raise SpaceMismatchError(f"space mismatch: {self.space.dims} vs {other.space.dims}")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix - other.matrix)

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __mul__(self, c):
        if isinstance(c, Operator) or not np.isscalar(c):
            return NotImplemented
        return Operator(self.space, c * self.matrix)

    __rmul__ = __mul__

    def __truediv__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return Operator(self.space, self.matrix / c)

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix @ other.matrix)

    @property
    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def allclose(self, other: "Operator", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.matrix, other.matrix, rtol=0.0, atol=atol))


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.total_dim))


def zero(space: HilbertSpace) -> Operator:
    return Operator(space, np.zeros((space.total_dim, space.total_dim)))


def embed(space: HilbertSpace, factor: int, local) -> Operator:
    """Place a single-factor matrix at position ``factor``, identity elsewhere."""
    f = space.check_factor(factor)
    local = np.asarray(local, dtype=complex)
    if local.shape != (f.dim, f.dim):
        raise ValueError(f"local matrix shape {local.shape} does not match factor dim {f.dim}")
    mats = [local if k == factor else np.eye(g.dim) for k, g in enumerate(space.factors)]
    return Operator(space, reduce(np.kron, mats))


def ketbra(space: HilbertSpace, factor: int, i: int, j: int) -> Operator:
    """|i><j| on one factor (levels are 0-based), identity on the others."""
    f = space.check_factor(factor)
    for name, lvl in (("i", i), ("j", j)):
        if not 0 <= lvl < f.dim:
            raise IndexError(f"level {name}={lvl} out of range for factor {factor} (dim {f.dim})")
    local = np.zeros((f.dim, f.dim))
    local[i, j] = 1.0
    return embed(space, factor, local)


def ladder(space: HilbertSpace, factor: int, kind: str = "lower") -> Operator:
    """Truncated annihilation (``"lower"``) or creation (``"raise"``) operator.

    The truncation makes ``[a, a^dagger]`` equal to the identity on Fock
    levels ``0..N-2`` and ``1 - N`` on the top level.
    """
    f = space.check_factor(factor, BOSON)
    lower = np.diag(np.sqrt(np.arange(1, f.dim)), k=1)
    if kind == "lower":
        return embed(space, factor, lower)
    if kind == "raise":
        return embed(space, factor, lower.T)
    raise ValueError(f"ladder kind must be 'lower' or 'raise', got {kind!r}")


def number(space: HilbertSpace, factor: int) -> Operator:
    f = space.check_factor(factor, BOSON)
    return embed(space, factor, np.diag(np.arange(f.dim, dtype=float)))


def collective_spin(space: HilbertSpace, qubit_factors: Sequence[int], axis: str) -> Operator:
    """Collective spin operator summed over two-level factors.

    ``plus`` is the sum of embedded ``|2><1|`` (level 0 -> level 1),
    ``x = (plus + minus)/2``, ``y = (plus - minus)/(2i)`` and
    ``z = sum (|2><2| - |1><1|)/2``, so that ``plus = x + i y``.
    """
    qubit_factors = list(qubit_factors)
    if not qubit_factors:
        raise ValueError("collective_spin needs at least one factor")
    for q in qubit_factors:
        f = space.check_factor(q)
        if f.kind != QUDIT or f.dim != 2:
            raise ValueError(f"factor {q} is not a qubit (kind={f.kind}, dim={f.dim})")
    plus = np.zeros((space.total_dim,) * 2, dtype=complex)
    z = np.zeros_like(plus)
    for q in qubit_factors:
        plus += embed(space, q, [[0, 0], [1, 0]]).matrix
        z += embed(space, q, [[-0.5, 0], [0, 0.5]]).matrix
    minus = plus.conj().T
    mats = {
        "plus": plus,
        "minus": minus,
        "x": (plus + minus) / 2,
        "y": (plus - minus) / 2j,
        "z": z,
    }
    if axis not in mats:
        raise ValueError(f"axis must be one of {sorted(mats)}, got {axis!r}")
    return Operator(space, mats[axis])


def add(*ops: Operator) -> Operator:
    return reduce(lambda a, b: a + b, ops)


def scale(c: complex, a: Operator) -> Operator:
    return a * c


def matmul(*ops: Operator) -> Operator:
    return reduce(lambda a, b: a @ b, ops)


def adjoint(a: Operator) -> Operator:
    return a.dag


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def hermitian_part(a: Operator) -> Operator:
    return Operator(a.space, (a.matrix + a.matrix.conj().T) / 2)


def frobenius_norm(a: Operator | np.ndarray) -> float:
    m = a.matrix if isinstance(a, Operator) else np.asarray(a)
    return float(np.linalg.norm(m))


def is_hermitian(a: Operator | np.ndarray, tol: float = 1e-12) -> bool:
    """``||A - A^dagger||_F <= tol * max(1, ||A||_F)``."""
    m = a.matrix if isinstance(a, Operator) else np.asarray(a)
    return float(np.linalg.norm(m - m.conj().T)) <= tol * max(1.0, float(np.linalg.norm(m)))


def sum_operators(space: HilbertSpace, ops: Iterable[Operator]) -> Operator:
    total = zero(space)
    for op in ops:
        total = total + op
    return total
