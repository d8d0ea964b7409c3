import mpmath
import numpy as np
import pytest

from effham.errors import PreconditionError
from effham.ising import (
    akl_lambda,
    akl_rhs_constant,
    alternating_witness,
    build_instance,
    crossing_N,
    dense_divergence_norm,
    diagonal_divergence_norm,
    divergence_scan,
    odd_range,
    witness_energies,
)
from effham.truncation import build_decomposition

RHS = 11035.142308930182


def test_rhs_constant():
    c = build_instance(5, 10.0).constants
    assert akl_lambda(c) == pytest.approx(1 / 24)
    assert akl_rhs_constant(c) == pytest.approx(RHS, rel=1e-13)
    lam = mpmath.mpf(1) / 24
    assert float(6 * lam ** mpmath.mpf(-1.5) * mpmath.exp(66 * lam)) == pytest.approx(RHS, rel=1e-14)


def test_crossing_by_direct_search():
    n = 1
    while 4 * n - 4 - 10 <= RHS:
        n += 2
    assert n == crossing_N(10.0, RHS) == 2763


def test_witness_small_N():
    assert witness_energies(3) == (8, 0, 8)
    rep = alternating_witness(3)
    assert rep.verified_matrix_free and rep.env_eigenvalue == 8
    assert alternating_witness(7).env_eigenvalue == 24


def test_env_witness_eigenvalue_dense():
    inst = build_instance(3, 10.0)
    dec = build_decomposition(inst.model, inst.split, shift_to_zero=False)
    assert 8.0 in np.round(dec.env_spectrum.eigenvalues, 9)


def test_dense_divergence_at_N5():
    measured, resid = dense_divergence_norm(5, 10.0)
    assert measured >= 6.0 - 1e-8
    assert resid <= 1e-10


def test_diagonal_matches_dense():
    assert diagonal_divergence_norm(5, 10.0) == pytest.approx(dense_divergence_norm(5, 10.0)[0])


def test_scan_rows():
    rows = divergence_scan(odd_range(5, 31), 10.0)
    assert [r.method for r in rows[:3]] == ["dense", "diagonal", "witness"]
    for r in rows:
        assert r.lower_bound == 4 * r.N - 14
        assert r.measured_norm >= r.lower_bound - 1e-8
        assert not r.crossed


def test_parameter_checks():
    with pytest.raises(PreconditionError):
        build_instance(4, 10.0)
    with pytest.raises(PreconditionError):
        build_instance(3, 2.0)
    with pytest.raises(PreconditionError):
        divergence_scan([3], 10.0)
