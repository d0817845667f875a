"""Effective Hamiltonians for time-averaged dynamics of harmonically driven quantum systems."""
from .opalg import (
    HilbertSpace,
    Operator,
    adjoint,
    collective_spin,
    commutator,
    hermitian_part,
    is_hermitian,
    ketbra,
    ladder,
)
from .model import HarmonicTerm, InteractionHamiltonian, bandwidth_report, normalize_term, v1
from .effective import (
    EffectiveHamiltonian,
    compact_effective,
    remove_identity_offset,
    secular_filter,
    static_part,
)
from .averaging import Kernel, OperatorSeries, average_series, heff_general, kernel_feasibility
from .propagate import fidelity, phase_accumulation, propagate, state_populations

__version__ = "0.1.0"
