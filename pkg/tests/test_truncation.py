import numpy as np
import pytest
from hypothesis import given, strategies as st

from effham.corpus import middle_split, random_chain
from effham.errors import PreconditionError
from effham.ising import build_instance
from effham.operators import eig
from effham.truncation import build_decomposition, monotone_gap, truncate, truncation_values


def chain_decomposition(seed, n=6, j=2.0, cplx=False):
    model, _ = random_chain(seed, 0, n, j, cplx)
    return build_decomposition(model, middle_split(model.lattice))


def test_shift_puts_ground_energy_at_zero():
    dec = chain_decomposition(3)
    assert dec.spectrum.eigenvalues[0] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(dec.full.matrix,
                               dec.inner_L.matrix + dec.inner_Lc.matrix + dec.boundary.matrix
                               + dec.shift * np.eye(dec.dim), atol=1e-12)
    raw = build_decomposition(dec.model, dec.split, shift_to_zero=False)
    assert raw.shift == 0.0
    assert raw.spectrum.eigenvalues[0] == pytest.approx(-dec.shift)


def test_boundary_norm_matches_full_space():
    dec = chain_decomposition(5)
    assert dec.boundary_norm == pytest.approx(np.linalg.norm(dec.boundary.matrix, 2))


def test_large_cutoff_is_identity():
    dec = chain_decomposition(1)
    M = dec.env_spectrum.eigenvalues[-1] + 1.0
    tr = truncate(dec, M)
    np.testing.assert_array_equal(tr.H_bar.matrix, dec.full.matrix)
    assert tr.tie_hits == 0


def test_clamp_at_median():
    dec = chain_decomposition(2)
    ev = dec.env_spectrum.eigenvalues
    M = float(np.median(ev))
    if not M > dec.boundary_norm:
        M = dec.boundary_norm + 1.0
    tr = truncate(dec, M)
    np.testing.assert_allclose(tr.truncated_env_spectrum.eigenvalues, np.minimum(ev, M), atol=1e-12)
    got = eig(tr.truncated_env.matrix).eigenvalues
    np.testing.assert_allclose(got, np.sort(np.minimum(ev, M)), atol=1e-9)


def test_ties_snap_to_cutoff():
    S = eig(np.diag([0.0, 5.0 - 1e-13, 7.0]))
    vals, hits = truncation_values(S, 5.0)
    assert hits == 1 and vals.tolist() == [0.0, 5.0, 5.0]


def test_cutoff_must_exceed_boundary_norm():
    inst = build_instance(3, 10.0)
    dec = build_decomposition(inst.model, inst.split)
    with pytest.raises(PreconditionError):
        truncate(dec, 2.0)


@given(st.integers(0, 5000), st.floats(0.05, 1.5))
def test_invariants_hold(seed, frac):
    dec = chain_decomposition(seed, n=6, cplx=bool(seed % 2))
    top = float(dec.env_spectrum.eigenvalues[-1])
    M = dec.boundary_norm + frac * max(top, 1.0)
    tr = truncate(dec, M)
    for name, (value, ok) in tr.invariants().items():
        assert ok, (name, value)


def test_monotone_in_cutoff():
    dec = chain_decomposition(7)
    b = dec.boundary_norm
    lo, hi = truncate(dec, b + 1.0), truncate(dec, b + 3.0)
    assert monotone_gap(lo, hi) >= -1e-9
    assert np.all(lo.spectrum.eigenvalues <= hi.spectrum.eigenvalues + 1e-9)
