"""Finite lattices, interactions and the boundary decomposition of a region.

Sites are integer coordinate tuples and distances use the l1 metric.  A
one-dimensional site may be given as a bare ``int``; it is normalised to a
1-tuple.  Interactions are explicit maps from ordered supports to Hermitian
matrices, so every model is serialisable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import NonHermitianError, StraddleError, SupportError

Site = tuple

HERMITIAN_RTOL = 1e-12


def as_site(x) -> Site:
    if isinstance(x, (int, np.integer)):
        return (int(x),)
    return tuple(int(c) for c in x)


def distance(x: Site, y: Site) -> int:
    return sum(abs(a - b) for a, b in zip(x, y))


def diameter(sites: Iterable[Site]) -> int:
    sites = list(sites)
    return max((distance(x, y) for x in sites for y in sites), default=0)


def check_hermitian(a: np.ndarray, name: str = "matrix") -> None:
    """Reject ``a`` unless ``max|A - A*| <= 1e-12 (1 + max|A|)``."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonHermitianError(f"{name}: not a square matrix, shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonHermitianError(f"{name}: non-finite entries")
    dev = np.max(np.abs(a - a.conj().T), initial=0.0)
    if dev > HERMITIAN_RTOL * (1.0 + np.max(np.abs(a), initial=0.0)):
        raise NonHermitianError(f"{name}: not Hermitian (max |A - A*| = {dev:.3e})")


@dataclass(frozen=True)
class Lattice:
    """Ordered finite set of sites of dimension ``nu`` with local dimension ``d``."""

    sites: tuple
    local_dim: int = 2

    def __post_init__(self):
        sites = tuple(as_site(s) for s in self.sites)
        object.__setattr__(self, "sites", sites)
        if not sites:
            raise SupportError("lattice has no sites")
        if len(set(sites)) != len(sites):
            raise SupportError("lattice sites are not distinct")
        if len({len(s) for s in sites}) != 1:
            raise SupportError("lattice sites have mixed dimensions")
        if int(self.local_dim) < 2:
            raise ValueError(f"local_dim must be >= 2, got {self.local_dim}")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(sites)})

    @classmethod
    def chain(cls, n: int, start: int = 1, local_dim: int = 2) -> "Lattice":
        return cls(tuple((start + i,) for i in range(n)), local_dim)

    @property
    def nu(self) -> int:
        return len(self.sites[0])

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def dimension(self) -> int:
        return self.local_dim ** self.n_sites

    def index(self, site) -> int:
        try:
            return self._index[as_site(site)]
        except KeyError:
            raise SupportError(f"site {site} is not in the lattice") from None

    def __contains__(self, site) -> bool:
        return as_site(site) in self._index

    def dist(self, x, y) -> int:
        return distance(as_site(x), as_site(y))

    def dist_to_set(self, x, region: Iterable[Site]) -> float:
        x = as_site(x)
        return min((distance(x, y) for y in region), default=np.inf)

    def ball(self, x, radius: int) -> list:
        x = as_site(x)
        return [y for y in self.sites if distance(x, y) <= radius]


@dataclass(frozen=True)
class Term:
    """A local Hermitian term; tensor factors follow the order of ``support``."""

    support: tuple
    matrix: np.ndarray = field(compare=False)

    def __post_init__(self):
        support = tuple(as_site(s) for s in self.support)
        if not support:
            raise SupportError("term has empty support")
        if len(set(support)) != len(support):
            raise SupportError(f"term support {support} has repeated sites")
        object.__setattr__(self, "support", support)
        m = np.array(self.matrix, dtype=complex)
        if np.all(m.imag == 0):
            m = m.real.copy()
        check_hermitian(m, name=f"term {support}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def site_set(self) -> frozenset:
        return frozenset(self.support)

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


@dataclass(frozen=True)
class Interaction:
    """Finite map from site sets to local Hermitian terms."""

    terms: tuple

    def __post_init__(self):
        terms = tuple(t if isinstance(t, Term) else Term(*t) for t in self.terms)
        seen = set()
        for t in terms:
            if t.site_set in seen:
                raise SupportError(f"duplicate term on {sorted(t.support)}")
            seen.add(t.site_set)
        object.__setattr__(self, "terms", terms)

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def check_supports(self, lattice: Lattice) -> None:
        d = lattice.local_dim
        for t in self.terms:
            for s in t.support:
                if s not in lattice:
                    raise SupportError(f"term {t.support}: site {s} outside the lattice")
            if t.matrix.shape != (d ** len(t.support),) * 2:
                raise SupportError(
                    f"term {t.support}: matrix shape {t.matrix.shape} does not match "
                    f"local dimension {d}"
                )


@dataclass(frozen=True)
class Model:
    """A lattice together with an interaction on it."""

    lattice: Lattice
    interaction: Interaction
    name: str = "model"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.interaction.check_supports(self.lattice)


@dataclass(frozen=True)
class InteractionConstants:
    range_r: int
    strength_j: float
    locality_N: int


def derive_constants(interaction: Interaction, lattice: Lattice,
                     zero_tol: float = 0.0) -> InteractionConstants:
    """Range, one-site strength sum and ball cardinality of an interaction.

    Terms with norm ``<= zero_tol`` count as vanishing for the range.
    """
    if len(interaction) == 0:
        raise ValueError("interaction has no terms")
    interaction.check_supports(lattice)
    norms = [t.norm() for t in interaction]
    r = max((diameter(t.support) for t, n in zip(interaction, norms) if n > zero_tol),
            default=0)
    per_site = dict.fromkeys(lattice.sites, 0.0)
    for t, n in zip(interaction, norms):
        for s in t.support:
            per_site[s] += n
    j = max(per_site.values())
    n_ball = max(len(lattice.ball(x, r)) for x in lattice.sites)
    return InteractionConstants(range_r=int(r), strength_j=float(j), locality_N=int(n_ball))


def boundary_region(region_L: Iterable, lattice: Lattice, range_r: int,
                    widen: int = 0) -> tuple:
    """Minimal boundary region of ``region_L`` for interaction range ``range_r``.

    Returns the sites of L within ``range_r`` of its complement together with
    the sites of the complement within ``range_r`` of L, in lattice order.
    ``widen`` enlarges the radius.
    """
    L = {as_site(s) for s in region_L}
    for s in L:
        lattice.index(s)
    if not L or len(L) == lattice.n_sites:
        raise SupportError("region L must be a nonempty proper subset of the lattice")
    Lc = [s for s in lattice.sites if s not in L]
    radius = range_r + widen
    out = []
    for s in lattice.sites:
        other = Lc if s in L else L
        if lattice.dist_to_set(s, other) <= radius:
            out.append(s)
    return tuple(out)


@dataclass(frozen=True)
class RegionSplit:
    lattice: Lattice
    region_L: tuple
    boundary: tuple

    def __post_init__(self):
        L = tuple(s for s in self.lattice.sites if s in {as_site(x) for x in self.region_L})
        B = tuple(s for s in self.lattice.sites if s in {as_site(x) for x in self.boundary})
        if not L or len(L) == self.lattice.n_sites:
            raise SupportError("region L must be a nonempty proper subset of the lattice")
        object.__setattr__(self, "region_L", L)
        object.__setattr__(self, "boundary", B)

    @classmethod
    def minimal(cls, lattice: Lattice, region_L, range_r: int, widen: int = 0) -> "RegionSplit":
        return cls(lattice, tuple(region_L), boundary_region(region_L, lattice, range_r, widen))

    @property
    def complement(self) -> tuple:
        L = set(self.region_L)
        return tuple(s for s in self.lattice.sites if s not in L)

    def covers(self, range_r: int) -> bool:
        """True if the boundary contains the minimal boundary for ``range_r``."""
        need = boundary_region(self.region_L, self.lattice, range_r)
        return set(need) <= set(self.boundary)


@dataclass(frozen=True)
class TermPartition:
    inner_L: tuple
    boundary: tuple
    inner_Lc: tuple

    def all_terms(self) -> tuple:
        return self.inner_L + self.boundary + self.inner_Lc


def decompose(interaction: Interaction, split: RegionSplit) -> TermPartition:
    """Assign every term to exactly one of (inner L, boundary, inner L^c).

    Terms inside the boundary region go to the boundary bucket even when
    they are also inside L or L^c.
    """
    L = set(split.region_L)
    B = set(split.boundary)
    Lc = set(split.complement)
    inner_L, bnd, inner_Lc = [], [], []
    for t in interaction:
        Z = t.site_set
        if Z <= B:
            bnd.append(t)
        elif Z <= L:
            inner_L.append(t)
        elif Z <= Lc:
            inner_Lc.append(t)
        else:
            raise StraddleError(
                f"term on {sorted(Z)} straddles the cut outside the boundary region"
            )
    return TermPartition(tuple(inner_L), tuple(bnd), tuple(inner_Lc))
