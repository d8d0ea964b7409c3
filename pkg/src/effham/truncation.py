"""Energy-truncated Hamiltonians.

The environment part ``K = H'_L + H'_{L^c}`` of a decomposed Hamiltonian is
clamped at the cutoff ``M`` through its spectral decomposition,
``K_bar = K E^K(-M, M) + M E^K[M, inf)``, and the boundary term is added
back untouched: ``H_bar = H_bd + K_bar``.  Since ``K >= -||H_bd||`` and
``M > ||H_bd||``, the lower window ``(-M, M)`` is all of ``(-inf, M)`` on
the relevant spectrum, so the clamp is the one-sided ``min(x, M)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import PreconditionError
from .lattice import Lattice, Model, RegionSplit, TermPartition, decompose
from .operators import (
    DEFAULT_DIM_CAP,
    HermitianOperator,
    SpectralData,
    assemble,
    eig,
    opnorm,
)

INVARIANT_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class DecomposedHamiltonian:
    """``H = H'_L + H_bd + H'_{L^c}`` on a fixed tensor-product space.

    ``shift`` is a multiple of the identity folded into the environment so
    that the lowest eigenvalue of ``full`` is zero; it leaves the boundary
    term and every commutator unchanged.
    """

    model: Model
    split: RegionSplit
    partition: TermPartition
    inner_L: HermitianOperator
    boundary: HermitianOperator
    inner_Lc: HermitianOperator
    shift: float
    spectrum: SpectralData
    solver: Callable = field(default=eig, repr=False)

    @cached_property
    def env(self) -> HermitianOperator:
        return (self.inner_L + self.inner_Lc).shifted(self.shift, "env")

    @cached_property
    def full(self) -> HermitianOperator:
        return (self.env + self.boundary)

    @cached_property
    def env_spectrum(self) -> SpectralData:
        return self.solver(self.env, label="env")

    @cached_property
    def boundary_norm(self) -> float:
        # ||A (x) I|| = ||A||, so the boundary sites suffice
        sites = self.split.boundary
        if not self.partition.boundary or len(sites) >= self.model.lattice.n_sites:
            return opnorm(self.boundary, hermitian=True)
        local = Lattice(sites, self.model.lattice.local_dim)
        return opnorm(assemble(self.partition.boundary, local), hermitian=True)

    @property
    def dim(self) -> int:
        return self.boundary.dim


def build_decomposition(model: Model, split: RegionSplit, shift_to_zero: bool = True,
                        cap: int = DEFAULT_DIM_CAP, solver: Callable = eig) -> DecomposedHamiltonian:
    """Assemble the three buckets; ``solver(H, label=...)`` diagonalizes."""
    part = decompose(model.interaction, split)
    lat = model.lattice
    hL = assemble(part.inner_L, lat, cap, "H_L")
    hB = assemble(part.boundary, lat, cap, "H_bd")
    hLc = assemble(part.inner_Lc, lat, cap, "H_Lc")
    raw = solver(hL + hB + hLc, label="H_raw")
    shift = 0.0 - float(raw.eigenvalues[0]) if shift_to_zero else 0.0
    spec = SpectralData(raw.eigenvalues + shift, raw.eigenvectors, "H")
    return DecomposedHamiltonian(model, split, part, hL, hB, hLc, shift, spec, solver)


def truncation_values(env: SpectralData, M: float) -> tuple:
    """Clamped eigenvalues ``min(x, M)`` and the number of ties snapped to ``M``."""
    ev = env.eigenvalues
    near = np.abs(ev - M) <= env.tie_tol
    out = np.minimum(ev, M)
    out[near] = M
    return out, int(np.count_nonzero(near))


def _check_cutoff(env: SpectralData, M: float, boundary_norm: float) -> None:
    if not M > boundary_norm:
        raise PreconditionError(f"cutoff M={M} must exceed ||H_bd||={boundary_norm}")
    floor = env.eigenvalues[0] if env.dim else 0.0
    if floor < -boundary_norm - env.tie_tol:
        raise PreconditionError(
            f"environment spectrum starts at {floor} below -||H_bd|| = {-boundary_norm}"
        )


def truncate_env(env: SpectralData, M: float, boundary_norm: float) -> HermitianOperator:
    """The clamped environment operator."""
    _check_cutoff(env, M, boundary_norm)
    return truncated_spectrum(env, M).as_operator("env_bar")


def truncated_spectrum(env: SpectralData, M: float) -> SpectralData:
    """Spectrum of the clamped environment; clamping keeps the eigenvector order."""
    vals, _ = truncation_values(env, M)
    return SpectralData(vals, env.eigenvectors, "env_bar")


def build_truncated(boundary_H: HermitianOperator, truncated_env: HermitianOperator) -> HermitianOperator:
    if boundary_H.dim != truncated_env.dim:
        raise ValueError(f"dimension mismatch {boundary_H.dim} != {truncated_env.dim}")
    return HermitianOperator(boundary_H.matrix + truncated_env.matrix, "H_bar")


@dataclass(frozen=True, eq=False)
class TruncationResult:
    cutoff_M: float
    decomposition: DecomposedHamiltonian
    truncated_env: HermitianOperator
    truncated_env_spectrum: SpectralData
    H_bar: HermitianOperator
    tie_hits: int
    known_spectrum: SpectralData | None = None

    @property
    def H_full(self) -> HermitianOperator:
        return self.decomposition.full

    @property
    def env_spectrum(self) -> SpectralData:
        return self.decomposition.env_spectrum

    @property
    def boundary_norm(self) -> float:
        return self.decomposition.boundary_norm

    @cached_property
    def spectrum(self) -> SpectralData:
        if self.known_spectrum is not None:
            return self.known_spectrum
        return self.decomposition.solver(self.H_bar, label="H_bar")

    @property
    def scale(self) -> float:
        return max(1.0, self.decomposition.spectrum.norm)

    def invariants(self) -> dict:
        """Measured structural invariants, each with its tolerance and verdict."""
        tol = INVARIANT_RTOL * self.scale
        b = self.boundary_norm
        M = self.cutoff_M
        diff = self.H_full.matrix - self.H_bar.matrix
        dom = float(scipy.linalg.eigvalsh(0.5 * (diff + diff.conj().T))[0])
        hbar_norm = self.spectrum.norm
        env_floor = float(self.env_spectrum.eigenvalues[0])
        tev = self.truncated_env_spectrum.eigenvalues
        out = {
            "domination_min_eig": (dom, dom >= -tol),
            "norm_cap": (hbar_norm - (b + M), hbar_norm <= b + M + tol),
            "env_floor": (env_floor + b, env_floor >= -b - tol),
            "truncated_env_range": (
                float(max(tev[-1] - M, -b - tev[0])),
                bool(tev[0] >= -b - tol and tev[-1] <= M + tol),
            ),
        }
        return out


def truncate(decomp: DecomposedHamiltonian, M: float) -> TruncationResult:
    env = decomp.env_spectrum
    b = decomp.boundary_norm
    _check_cutoff(env, M, b)
    tenv_spec = truncated_spectrum(env, M)
    _, hits = truncation_values(env, M)
    if hits == 0 and env.eigenvalues[-1] < M:
        # nothing is clamped, so H_bar is H itself
        tenv = HermitianOperator(decomp.env.matrix, "env_bar")
        hbar = HermitianOperator(decomp.full.matrix, "H_bar")
        return TruncationResult(M, decomp, tenv, tenv_spec, hbar, 0, decomp.spectrum)
    tenv = truncate_env(env, M, b)
    return TruncationResult(M, decomp, tenv, tenv_spec, build_truncated(decomp.boundary, tenv), hits)


def monotone_gap(lower: TruncationResult, upper: TruncationResult) -> float:
    """Smallest eigenvalue of ``H_bar(upper) - H_bar(lower)``; nonnegative when ordered."""
    d = upper.H_bar.matrix - lower.H_bar.matrix
    return float(scipy.linalg.eigvalsh(0.5 * (d + d.conj().T))[0])
