import numpy as np
import pytest

from effham.model import HarmonicTerm, InteractionHamiltonian
from effham.opalg import HilbertSpace, Operator

ACCEPTANCE_LINES: list[str] = []


def random_matrix(rng, d, scale=1.0):
    return scale * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2 * d)


def random_system(rng, d=None, n_terms=None, omegas=None, strength=0.1):
    """Random harmonic Hamiltonian with ||h_n||_F <= strength * omega_1."""
    d = d or int(rng.integers(2, 9))
    n_terms = n_terms or int(rng.integers(1, 5))
    space = HilbertSpace.of(("qudit", d))
    if omegas is None:
        omegas = np.sort(rng.uniform(1.0, 3.0, size=n_terms))
    terms = []
    for w in omegas:
        m = random_matrix(rng, d)
        m *= strength * omegas[0] * rng.uniform(0.2, 1.0) / np.linalg.norm(m)
        terms.append(HarmonicTerm(Operator(space, m), float(w)))
    return InteractionHamiltonian(space, tuple(terms))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
