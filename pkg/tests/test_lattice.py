import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from effham.errors import NonHermitianError, StraddleError, SupportError
from effham.ising import build_instance
from effham.lattice import (
    Interaction,
    Lattice,
    RegionSplit,
    Term,
    boundary_region,
    decompose,
    derive_constants,
)

from conftest import random_hermitian, random_nn_chain


def brute_constants(interaction, lattice):
    """Recompute (r, j, N) by enumerating all sites and supports."""
    norms = [np.linalg.svd(t.matrix, compute_uv=False)[0] for t in interaction]
    r = 0
    for t, n in zip(interaction, norms):
        for x, y in itertools.combinations(t.support, 2):
            r = max(r, sum(abs(a - b) for a, b in zip(x, y)))
    j = max(sum(n for t, n in zip(interaction, norms) if x in t.support) for x in lattice.sites)
    N = max(sum(1 for y in lattice.sites if sum(abs(a - b) for a, b in zip(x, y)) <= r)
            for x in lattice.sites)
    return r, j, N


def test_ising_constants():
    inst = build_instance(5, 10.0)
    c = inst.constants
    assert (c.range_r, c.strength_j, c.locality_N) == (1, 4.0, 3)


def test_single_site_term_constants():
    lat = Lattice.chain(1)
    c = derive_constants(Interaction((Term(((1,),), np.diag([1.0, -1.0])),)), lat)
    assert (c.range_r, c.strength_j, c.locality_N) == (0, 1.0, 1)


@given(st.integers(0, 10_000), st.integers(3, 7), st.booleans())
def test_constants_match_brute_force(seed, n, onsite):
    rng = np.random.default_rng(seed)
    lat, inter = random_nn_chain(rng, n, complex_entries=True, onsite=onsite)
    c = derive_constants(inter, lat)
    r, j, N = brute_constants(inter, lat)
    assert c.range_r == r and c.locality_N == N
    assert c.strength_j == pytest.approx(j, rel=1e-12)


def test_constants_on_square_lattice(rng):
    sites = [(x, y) for x in range(3) for y in range(3)]
    lat = Lattice(tuple(sites), 2)
    terms = []
    for x, y in sites:
        for dx, dy in ((1, 0), (0, 1)):
            if (x + dx, y + dy) in sites:
                terms.append(Term(((x, y), (x + dx, y + dy)), random_hermitian(rng, 4)))
    inter = Interaction(tuple(terms))
    c = derive_constants(inter, lat)
    assert (c.range_r, c.locality_N) == (1, 5)
    assert c.strength_j == pytest.approx(brute_constants(inter, lat)[1])


def test_boundary_examples():
    lat = Lattice.chain(10)
    assert boundary_region(range(1, 6), lat, 1) == ((5,), (6,))
    lat12 = Lattice.chain(12)
    assert boundary_region(range(1, 7), lat12, 2) == ((5,), (6,), (7,), (8,))
    inst = build_instance(7, 10.0)
    assert inst.split.boundary == ((7,), (8,))


def test_boundary_rejects_trivial_region():
    lat = Lattice.chain(4)
    with pytest.raises(SupportError):
        boundary_region([], lat, 1)
    with pytest.raises(SupportError):
        boundary_region(range(1, 5), lat, 1)


def test_decompose_partitions_terms(rng):
    lat, inter = random_nn_chain(rng, 10, onsite=True)
    split = RegionSplit.minimal(lat, range(1, 6), 1)
    part = decompose(inter, split)
    assert sorted(map(id, part.all_terms())) == sorted(map(id, inter.terms))
    assert {t.support for t in part.boundary} == {((5,), (6,)), ((5,),), ((6,),)}


def test_onsite_terms_go_to_boundary_bucket(rng):
    lat = Lattice.chain(6)
    inter = Interaction(tuple(Term(((i,),), random_hermitian(rng, 2)) for i in range(1, 7)))
    part = decompose(inter, RegionSplit.minimal(lat, range(1, 4), 1))
    assert {t.support for t in part.boundary} == {((3,),), ((4,),)}


def test_straddle_error(rng):
    lat = Lattice.chain(6)
    inter = Interaction((Term(((2,), (5,)), random_hermitian(rng, 4)),))
    with pytest.raises(StraddleError):
        decompose(inter, RegionSplit.minimal(lat, range(1, 4), 1))


def test_term_validation(rng):
    with pytest.raises(NonHermitianError):
        Term(((1,),), np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(SupportError):
        Term(((1,), (1,)), np.eye(4))
    with pytest.raises(SupportError):
        Interaction((Term(((1,), (2,)), np.eye(4)), Term(((2,), (1,)), np.eye(4))))
    lat = Lattice.chain(2)
    with pytest.raises(SupportError):
        Interaction((Term(((1,), (3,)), np.eye(4)),)).check_supports(lat)
    t = Term(((1,),), np.eye(2))
    assert not t.matrix.flags.writeable
