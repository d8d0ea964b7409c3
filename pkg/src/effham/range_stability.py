"""Block-wise range truncation of algebraically decaying chains and gap stability.

Around the two edges ``a`` and ``b`` of an interval ``I = [a, b]`` the
boundary region of width ``q l`` is cut into ``2q`` blocks of length ``l``
per edge.  A term is discarded when it meets a block and also leaves that
block's ``l``-neighbourhood.  The discarded sum ``dH`` is bounded in norm
by ``8 q J (1 + l)^(2 - alpha)``, and a gapped Hamiltonian keeps a unique
low-lying state with gap at least ``Delta - 2||dH||`` after removing it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .certify import judge, skipped
from .errors import PreconditionError
from .lattice import Interaction, Lattice, Term, as_site
from .operators import (
    DEFAULT_DIM_CAP,
    HermitianOperator,
    Interval,
    SpectralData,
    assemble,
    eig,
    opnorm,
    projector,
)


class ClippedWindowError(PreconditionError):
    """A discarded term could reach beyond the finite lattice window."""


def batched_norms(mats) -> np.ndarray:
    """Spectral norms of Hermitian matrices, stacked by shape for speed."""
    out = np.empty(len(mats))
    by_shape: dict = {}
    for i, m in enumerate(mats):
        by_shape.setdefault(m.shape, []).append(i)
    for idx in by_shape.values():
        ev = np.linalg.eigvalsh(np.stack([mats[i] for i in idx]))
        out[idx] = np.abs(ev).max(axis=-1) if ev.shape[-1] else 0.0
    return out


@dataclass(frozen=True, eq=False)
class DecayInteraction:
    """Chain interaction with two-point algebraic decay of exponent ``alpha``."""

    lattice: Lattice
    interaction: Interaction
    decay_alpha: float

    def __post_init__(self):
        if not self.decay_alpha > 2:
            raise ValueError(f"alpha must exceed 2, got {self.decay_alpha}")
        if self.lattice.nu != 1:
            raise ValueError("decaying interactions are defined on chains")
        self.interaction.check_supports(self.lattice)

    @cached_property
    def norms(self) -> np.ndarray:
        return batched_norms([t.matrix for t in self.interaction])

    @cached_property
    def coupling_J(self) -> float:
        """``sup_{x,y} sum_{Z contains x,y} ||Phi(Z)|| (1 + |x - y|)^alpha``."""
        acc: dict = {}
        for t, n in zip(self.interaction, self.norms):
            xs = sorted(s[0] for s in t.support)
            for i, x in enumerate(xs):
                for y in xs[i:]:
                    acc[(x, y)] = acc.get((x, y), 0.0) + n * (1.0 + (y - x)) ** self.decay_alpha
        return max(acc.values(), default=0.0)

    @cached_property
    def max_diameter(self) -> int:
        return max((max(s[0] for s in t.support) - min(s[0] for s in t.support)
                    for t in self.interaction), default=0)


@dataclass(frozen=True)
class TruncationGeometry:
    a: int
    b: int
    block_len: int
    block_count: int

    def __post_init__(self):
        l, q = self.block_len, self.block_count
        if l < 1 or q < 1:
            raise PreconditionError(f"need l >= 1 and q >= 1, got l={l}, q={q}")
        if self.a + (q + 1) * l > self.b - (q + 1) * l:
            raise PreconditionError(
                f"[a+(q+1)l, b-(q+1)l] is empty for a={self.a}, b={self.b}, l={l}, q={q}"
            )

    @classmethod
    def minimal(cls, block_len: int, block_count: int, a: int = 0) -> "TruncationGeometry":
        return cls(a, a + 2 * (block_count + 1) * block_len, block_len, block_count)

    def blocks(self) -> list:
        """``(block, neighbourhood)`` closed integer intervals for both edges."""
        l, q = self.block_len, self.block_count
        out = []
        for c in (self.a, self.b):
            for j in range(-q, q):
                out.append(((c + j * l, c + (j + 1) * l), (c + (j - 1) * l, c + (j + 2) * l)))
        return out

    @property
    def boundary_span(self) -> tuple:
        """Outermost sites of the two boundary regions ``[a-ql, a+ql]`` and ``[b-ql, b+ql]``."""
        ql = self.block_len * self.block_count
        return self.a - ql, self.b + ql

    @property
    def padding(self) -> int:
        return 3 * self.block_len * (self.block_count + 2)

    def window(self) -> tuple:
        return self.a - self.padding, self.b + self.padding

    def norm_bound(self, J: float, alpha: float) -> float:
        return 8.0 * self.block_count * J * (1.0 + self.block_len) ** (2.0 - alpha)


def is_discarded(support, geom: TruncationGeometry) -> bool:
    xs = [as_site(s)[0] for s in support]
    lo, hi = min(xs), max(xs)
    for (u, v), (u2, v2) in geom.blocks():
        if any(u <= x <= v for x in xs) and (lo < u2 or hi > v2):
            return True
    return False


def classify_terms(interaction: DecayInteraction, geom: TruncationGeometry) -> tuple:
    kept, discarded = [], []
    for t in interaction.interaction:
        (discarded if is_discarded(t.support, geom) else kept).append(t)
    return tuple(kept), tuple(discarded)


@dataclass(frozen=True, eq=False)
class RangeTruncationResult:
    geometry: TruncationGeometry
    interaction: DecayInteraction
    kept_terms: tuple
    discarded_terms: tuple
    discarded_norm_sum: float
    deltaH: HermitianOperator | None

    @property
    def deltaH_norm_bound(self) -> float:
        return self.geometry.norm_bound(self.interaction.coupling_J, self.interaction.decay_alpha)

    @cached_property
    def deltaH_norm(self) -> float:
        return opnorm(self.deltaH, hermitian=True) if self.deltaH is not None else math.nan


def check_window(interaction: DecayInteraction, geom: TruncationGeometry) -> None:
    """Every site a discarded term could reach must lie inside the lattice window."""
    lo_site = min(s[0] for s in interaction.lattice.sites)
    hi_site = max(s[0] for s in interaction.lattice.sites)
    lo, hi = geom.boundary_span
    reach = interaction.max_diameter
    if lo - reach < lo_site or hi + reach > hi_site:
        raise ClippedWindowError(
            f"window [{lo_site}, {hi_site}] clips terms of diameter {reach} "
            f"around the boundary region [{lo}, {hi}]"
        )


def range_truncate(interaction: DecayInteraction, geom: TruncationGeometry,
                   require_window: bool = True, cap: int = DEFAULT_DIM_CAP) -> RangeTruncationResult:
    """Split the terms and assemble ``dH`` densely when its support fits under ``cap``."""
    if require_window:
        check_window(interaction, geom)
    kept, disc = classify_terms(interaction, geom)
    norms = dict(zip(interaction.interaction.terms, interaction.norms))
    total = float(sum(norms[t] for t in disc))
    support = sorted({s for t in disc for s in t.support})
    dH = None
    lat = interaction.lattice
    if not disc:
        dH = None if lat.dimension > cap else assemble((), lat, cap, "dH")
    elif lat.local_dim ** len(support) <= cap:
        sub = Lattice(tuple(support), lat.local_dim) if lat.dimension > cap else lat
        dH = assemble(disc, sub, cap, "dH")
    return RangeTruncationResult(geom, interaction, kept, disc, total, dH)


def decay_bound_certificate(result: RangeTruncationResult) -> list:
    """Certificates for ``||dH|| <= sum ||Phi(Z)|| <= 8 q J (1 + l)^(2 - alpha)``."""
    g = result.geometry
    params = {"alpha": result.interaction.decay_alpha, "ell": g.block_len, "q": g.block_count,
              "J": result.interaction.coupling_J, "n_discarded": len(result.discarded_terms)}
    out = []
    if result.deltaH is None and result.discarded_terms:
        out.append(skipped("decay-opnorm", params, "support of dH exceeds the dense cap"))
    else:
        out.append(judge("decay-opnorm", params, result.deltaH_norm if result.deltaH is not None
                         else 0.0, result.discarded_norm_sum, vacuous_at=None))
    out.append(judge("decay-sum", params, result.discarded_norm_sum, result.deltaH_norm_bound,
                     vacuous_at=None))
    return out


# --------------------------------------------------------------------------
# gap stability

def gap_stability_certificate(H: SpectralData, deltaH, gap_Delta: float | None = None,
                              params: dict | None = None) -> list:
    """Spectral inclusion, rank one, fidelity, distance and gap after removing ``dH``.

    The spectrum of ``H`` is shifted so that its ground energy is zero.
    Certificates are ``SKIPPED`` when the ground state is degenerate or
    ``Delta <= 2 ||dH||``.
    """
    names = ("gap-inclusion", "gap-rank", "gap-fidelity", "gap-distance", "gap-value")
    ev = H.eigenvalues - H.eigenvalues[0]
    dH = deltaH.matrix if isinstance(deltaH, HermitianOperator) else np.asarray(deltaH)
    n = opnorm(dH, hermitian=True)
    measured_gap = float(ev[1]) if len(ev) > 1 else math.inf
    gap = measured_gap if gap_Delta is None else float(gap_Delta)
    base = dict(params or {})
    base.update({"Delta": gap, "dH_norm": n})
    if measured_gap <= H.tie_tol:
        return [skipped(c, base, "degenerate ground state") for c in names]
    if gap > measured_gap + H.tie_tol:
        return [skipped(c, base, "given gap exceeds the measured gap") for c in names]
    if not gap > 2 * n:
        return [skipped(c, base, "gate Delta > 2||dH|| closed") for c in names]
    v = H.eigenvectors
    h0 = (v * ev) @ v.conj().T
    Ht = eig(0.5 * ((h0 - dH) + (h0 - dH).conj().T), label="H_tilde")
    scale = max(1.0, H.norm)
    tol = 1e-8 * scale
    mu = Ht.eigenvalues
    # distance of each eigenvalue from [-n, n] U [Delta - n, inf)
    dist = np.where(mu <= n, np.maximum(-n - mu, 0.0),
                    np.minimum(mu - n, np.maximum(gap - n - mu, 0.0)))
    out = [judge("gap-inclusion", base, float(dist.max()), 0.0, tol=tol, vacuous_at=None)]
    low = projector(Ht, Interval.closed(-n, n))
    out.append(judge("gap-rank", {**base, "rank": low.rank}, abs(low.rank - 1), 0.0,
                     tol=0.0, vacuous_at=None))
    omega = v[:, 0]
    if low.rank >= 1:
        omega_t = low.basis[:, 0]
        ov = np.vdot(omega, omega_t)
        if abs(ov) > 0:
            omega_t = omega_t * (abs(ov) / ov)
        ov = float(abs(ov))
    else:
        omega_t, ov = np.zeros_like(omega), 0.0
    ratio = n / (gap - n)
    infid = math.sqrt(max(0.0, 1.0 - ov * ov))
    out.append(judge("gap-fidelity", {**base, "overlap": ov}, infid, ratio))
    dist_v = float(np.linalg.norm(omega - omega_t))
    out.append(judge("gap-distance", {**base, "overlap": ov}, dist_v, math.sqrt(2) * ratio,
                     vacuous_at=math.sqrt(2)))
    new_gap = float(mu[1] - mu[0]) if len(mu) > 1 else math.inf
    out.append(judge("gap-value", {**base, "gap_tilde": new_gap}, gap - 2 * n, new_gap,
                     tol=tol, vacuous_at=None))
    return out


def synthetic_gapped_instance(rng: np.random.Generator, dim: int, gap: float,
                              strength: float) -> tuple:
    """``diag(0, Delta, ..., Delta)`` with a random Hermitian ``dH`` of norm ``strength``."""
    H = np.diag(np.r_[0.0, np.full(dim - 1, gap)])
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    a = a + a.conj().T
    a *= strength / opnorm(a, hermitian=True)
    return H, 0.5 * (a + a.conj().T)


# --------------------------------------------------------------------------
# decaying corpus

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])

def random_unit_hermitian(rng: np.random.Generator, dim: int, count: int | None = None) -> np.ndarray:
    """One (or a stack of ``count``) random Hermitian matrices of unit norm."""
    shape = (dim, dim) if count is None else (count, dim, dim)
    a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    a = 0.5 * (a + np.swapaxes(a, -1, -2).conj())
    norms = np.abs(np.linalg.eigvalsh(a)).max(axis=-1)
    return a / norms[..., None, None]


def decaying_chain(sites, alpha: float, seed: int, max_range: int | None = None,
                   g_range: tuple = (0.5, 1.0), field: float = 0.0) -> DecayInteraction:
    """Pair terms ``g / (1 + d)^alpha * U`` on every pair within ``max_range``.

    ``g`` is uniform in ``g_range`` and ``U`` a random unit-norm Hermitian
    operator on two qubits, both drawn per pair in lattice order.  A nonzero
    ``field`` adds ``-field * X`` on every site, which opens a gap.
    """
    sites = [as_site(s) for s in sites]
    rng = np.random.default_rng(seed)
    lat = Lattice(tuple(sites), 2)
    xs = [s[0] for s in sites]
    n = len(xs)
    reach = n if max_range is None else max_range
    pairs = [(i, k) for i in range(n) for k in range(i + 1, n) if abs(xs[k] - xs[i]) <= reach]
    g = rng.uniform(*g_range, size=len(pairs))
    U = random_unit_hermitian(rng, 4, len(pairs))
    terms = []
    for (i, k), gi, u in zip(pairs, g, U):
        d = abs(xs[k] - xs[i])
        terms.append(Term((sites[i], sites[k]), gi / (1.0 + d) ** alpha * u))
    if field:
        terms.extend(Term((s,), -field * SIGMA_X) for s in sites)
    return DecayInteraction(lat, Interaction(tuple(terms)), float(alpha))


def windowed_instance(alpha: float, block_len: int, block_count: int, seed: int) -> tuple:
    """Decaying chain on the padded window of the minimal geometry.

    The pair range is capped so that every term touching the boundary
    region stays inside the window.
    """
    geom = TruncationGeometry.minimal(block_len, block_count)
    lo, hi = geom.window()
    reach = geom.padding - block_count * block_len - block_len
    inter = decaying_chain(range(lo, hi + 1), alpha, seed, max_range=reach)
    return inter, geom
