import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from effham.lattice import Interaction, Lattice, Term

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


def random_hermitian(rng, n, complex_entries=True):
    a = rng.normal(size=(n, n))
    if complex_entries:
        a = a + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.conj().T)


def random_nn_chain(rng, n_sites, complex_entries=False, onsite=False):
    terms = [Term(((i,), (i + 1,)), random_hermitian(rng, 4, complex_entries))
             for i in range(1, n_sites)]
    if onsite:
        terms += [Term(((i,),), random_hermitian(rng, 2, complex_entries))
                  for i in range(1, n_sites + 1)]
    return Lattice.chain(n_sites), Interaction(tuple(terms))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: dict = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    """Keep one verdict line per acceptance criterion for the terminal summary."""
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
