import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from effham.errors import DimensionCapError, NotProductStateError
from effham.ising import SIGMA_Z, build_instance, ising_bond
from effham.lattice import Lattice, Term
from effham.operators import (
    HermitianOperator,
    Interval,
    Projector,
    apply_function,
    assemble,
    basis_state,
    conjugate,
    conjugated_norm,
    eig,
    embed,
    opnorm,
    product_norm,
    product_state_apply,
    product_state_vector,
    projector,
)

from conftest import random_hermitian, random_nn_chain


def entry_oracle(terms, lattice, row, col):
    """<row|sum_Z h_Z (x) I|col> from index arithmetic alone."""
    d, n = lattice.local_dim, lattice.n_sites
    digits = lambda k: [(k // d ** (n - 1 - i)) % d for i in range(n)]
    r, c = digits(row), digits(col)
    total = 0j
    for t in terms:
        pos = [lattice.index(s) for s in t.support]
        if any(r[i] != c[i] for i in range(n) if i not in pos):
            continue
        a = sum(r[p] * d ** (len(pos) - 1 - k) for k, p in enumerate(pos))
        b = sum(c[p] * d ** (len(pos) - 1 - k) for k, p in enumerate(pos))
        total += t.matrix[a, b]
    return total


def test_sigma_z_on_first_site():
    lat = Lattice.chain(2)
    np.testing.assert_array_equal(embed(Term(((1,),), SIGMA_Z), lat), np.diag([1, 1, -1, -1]))


def test_assemble_matches_entry_oracle(rng):
    lat, inter = random_nn_chain(rng, 8, complex_entries=True, onsite=True)
    H = assemble(inter.terms, lat)
    for _ in range(3):
        i, j = rng.integers(0, lat.dimension, size=2)
        assert H.matrix[i, j] == pytest.approx(entry_oracle(inter.terms, lat, i, j), abs=1e-12)
    i = int(rng.integers(0, lat.dimension))
    assert H.matrix[i, i] == pytest.approx(entry_oracle(inter.terms, lat, i, i), abs=1e-12)


def test_assemble_non_adjacent_support_matches_kron(rng):
    lat = Lattice.chain(3)
    h = random_hermitian(rng, 4)
    H = assemble([Term(((3,), (1,)), h)], lat).matrix
    for i in range(8):
        for j in range(8):
            assert H[i, j] == pytest.approx(entry_oracle([Term(((3,), (1,)), h)], lat, i, j))


def test_dimension_cap():
    with pytest.raises(DimensionCapError):
        assemble([], Lattice.chain(6), cap=32)


def test_ising_aligned_state_is_ground():
    inst = build_instance(3, 10.0)
    H = assemble(inst.model.interaction.terms, inst.lattice)
    up = product_state_vector(basis_state([0] * 6), inst.lattice)
    assert np.linalg.norm(H.matrix @ up) == 0.0


def test_eig_examples(rng):
    assert eig(SIGMA_Z).eigenvalues.tolist() == [-1.0, 1.0]
    np.testing.assert_allclose(eig(ising_bond()).eigenvalues, [0, 0, 2, 2], atol=1e-14)
    assert opnorm(ising_bond(), hermitian=True) == pytest.approx(2.0)
    assert opnorm(np.zeros((3, 3))) == 0.0


@given(st.integers(0, 10_000))
def test_eigenvalues_match_characteristic_roots(seed):
    a = random_hermitian(np.random.default_rng(seed), 4)
    roots = np.sort(np.roots(np.poly(a)).real)
    np.testing.assert_allclose(eig(a).eigenvalues, roots, atol=1e-8)


@given(st.integers(0, 10_000), st.integers(1, 70), st.integers(1, 70))
def test_opnorm_matches_gram_oracle(seed, m, n):
    r = np.random.default_rng(seed)
    a = r.normal(size=(m, n)) + 1j * r.normal(size=(m, n))
    oracle = math.sqrt(np.linalg.eigvalsh(a.conj().T @ a)[-1])
    assert opnorm(a) == pytest.approx(oracle, rel=1e-12)


def test_projector_examples():
    inst = build_instance(5, 10.0)
    S = eig(assemble(inst.model.interaction.terms, inst.lattice))
    assert projector(S, Interval.real_line()).rank == S.dim
    assert projector(S, Interval.closed(0, 0)).rank == 2


def test_degenerate_block_is_kept_whole():
    S = eig(np.diag([0.0, 1.0, 1.0 + 1e-13, 2.0]))
    assert projector(S, Interval.closed(0.0, 1.0)).rank == 3
    assert projector(S, Interval.below(1.0)).rank == 1
    assert projector(S, Interval.open(1.0, 3.0)).rank == 1


@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(0, 3))
def test_projector_invariants(seed, lo, width):
    a = random_hermitian(np.random.default_rng(seed), 12)
    P = projector(eig(a), Interval.closed(lo, lo + width))
    P.check()
    C = P.complement()
    np.testing.assert_allclose(P.matrix + C.matrix, np.eye(12), atol=1e-12)
    assert product_norm(P, C) < 1e-12


def test_projector_from_basis_and_matrix(rng):
    B = rng.normal(size=(6, 2))
    P = Projector.from_basis(B)
    Q = Projector.from_matrix(P.matrix)
    assert P.rank == Q.rank == 2
    np.testing.assert_allclose(P.matrix, Q.matrix, atol=1e-12)


def test_apply_function_examples(rng):
    S = eig(SIGMA_Z)
    np.testing.assert_allclose(apply_function(S, np.exp).matrix, np.diag([math.e, 1 / math.e]))
    a = random_hermitian(rng, 6)
    Sa = eig(a)
    np.testing.assert_allclose(apply_function(Sa, lambda x: x).matrix, a, atol=1e-12)
    M = float(np.median(Sa.eigenvalues))
    clamped = apply_function(Sa, lambda x: np.minimum(x, M))
    np.testing.assert_allclose(eig(clamped).eigenvalues, np.minimum(Sa.eigenvalues, M), atol=1e-12)
    with pytest.raises(OverflowError, match="eigenvalue"):
        apply_function(eig(np.diag([1.0, 1000.0])), np.exp)


def test_conjugation_matches_expm(rng):
    K = random_hermitian(rng, 5)
    A = rng.normal(size=(5, 5))
    t = 0.3
    ref = scipy.linalg.expm(t * K) @ A @ scipy.linalg.expm(-t * K)
    np.testing.assert_allclose(conjugate(eig(K), A, t), ref, atol=1e-10)
    assert conjugated_norm(eig(K), A, t) == pytest.approx(np.linalg.norm(ref, 2))


def test_hermitian_operator_arithmetic(rng):
    a = HermitianOperator(random_hermitian(rng, 3))
    b = HermitianOperator(random_hermitian(rng, 3))
    np.testing.assert_allclose((a + b - b).matrix, a.matrix)
    np.testing.assert_allclose(a.shifted(2.0).matrix, a.matrix + 2 * np.eye(3))


@given(st.integers(0, 10_000), st.integers(2, 6))
def test_product_state_apply_matches_dense(seed, n):
    r = np.random.default_rng(seed)
    lat, inter = random_nn_chain(r, n, complex_entries=True, onsite=True)
    vecs = []
    for _ in range(n):
        v = r.normal(size=2) + 1j * r.normal(size=2)
        vecs.append(v / np.linalg.norm(v))
    act = product_state_apply(inter.terms, vecs, lat)
    psi = product_state_vector(vecs, lat)
    w = assemble(inter.terms, lat).matrix @ psi
    a = np.vdot(psi, w)
    assert act.eigenvalue == pytest.approx(a, abs=1e-10)
    assert act.residual == pytest.approx(np.linalg.norm(w - a * psi), abs=1e-9)


def test_product_state_eigen_detection():
    inst = build_instance(5, 10.0)
    up = basis_state([0] * 10)
    act = product_state_apply(inst.model.interaction.terms, up, inst.lattice)
    assert act.is_eigen and act.eigenvalue == 0
    with pytest.raises(NotProductStateError):
        product_state_apply(inst.model.interaction.terms, up[:3], inst.lattice)
