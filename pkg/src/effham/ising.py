"""Ferromagnetic Ising chain on which the operator-norm bound grows with volume.

On ``2N`` sites (``N`` odd) with bonds ``h_j = I - Z_j Z_{j+1}`` and the cut
between ``N`` and ``N+1``, the product state ``chi (x) chi`` with
``chi = up down up ... up`` violates every bond except the cut bond.  It is
therefore an eigenvector of the environment with eigenvalue ``4N - 4``, is
clamped to ``M`` by the truncation, and gives
``||(H - Hbar) E^Hbar[0, M]|| >= 4N - 4 - M``, which eventually exceeds any
volume-independent constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import PreconditionError
from .lattice import (
    Interaction,
    InteractionConstants,
    Lattice,
    Model,
    RegionSplit,
    Term,
    decompose,
    derive_constants,
)
from .operators import (
    Interval,
    assemble_diagonal,
    opnorm,
    product_state_apply,
    product_state_vector,
    projector,
)
from .truncation import build_decomposition, truncate

SIGMA_Z = np.diag([1.0, -1.0])
UP = np.array([1.0, 0.0])
DOWN = np.array([0.0, 1.0])


def ising_bond() -> np.ndarray:
    return np.eye(4) - np.kron(SIGMA_Z, SIGMA_Z)


@dataclass(frozen=True)
class IsingInstance:
    half_length_N: int
    M: float
    model: Model
    split: RegionSplit
    constants: InteractionConstants

    @property
    def lattice(self) -> Lattice:
        return self.model.lattice


def _check_N(N: int) -> None:
    if N < 1 or N % 2 == 0:
        raise PreconditionError(f"N must be a positive odd integer, got {N}")


def build_instance(N: int, M: float) -> IsingInstance:
    _check_N(N)
    if N < 3:
        raise PreconditionError(f"N must be at least 3, got {N}")
    if not M > 2:
        raise PreconditionError(f"M must exceed ||H_bd|| = 2, got {M}")
    lat = Lattice.chain(2 * N)
    h = ising_bond()
    inter = Interaction(tuple(Term(((j,), (j + 1,)), h) for j in range(1, 2 * N)))
    split = RegionSplit(lat, tuple((i,) for i in range(1, N + 1)), ((N,), (N + 1,)))
    model = Model(lat, inter, name=f"ising-N{N}")
    return IsingInstance(N, float(M), model, split, derive_constants(inter, lat))


def alternating_spins(N: int) -> np.ndarray:
    """``+1/-1`` labels of ``chi (x) chi`` on sites ``1..2N``."""
    _check_N(N)
    half = np.where(np.arange(N) % 2 == 0, 1, -1).astype(np.int8)
    return np.concatenate([half, half])


def witness_state(N: int) -> list:
    return [UP if s > 0 else DOWN for s in alternating_spins(N)]


def bond_energies(spins: np.ndarray) -> np.ndarray:
    """Integer eigenvalue (0 or 2) of each bond on a computational product state."""
    return 2 * (spins[:-1] != spins[1:]).astype(np.int64)


@dataclass(frozen=True)
class WitnessReport:
    N: int
    env_eigenvalue: int
    boundary_eigenvalue: int
    full_eigenvalue: int
    verified_matrix_free: bool
    max_residual: float


def witness_energies(N: int) -> tuple:
    """Exact ``(env, boundary, full)`` eigenvalues of the witness by bond counting."""
    e = bond_energies(alternating_spins(N))
    boundary = int(e[N - 1])
    total = int(e.sum())
    return total - boundary, boundary, total


def alternating_witness(N: int) -> WitnessReport:
    """Verify the witness with :func:`product_state_apply` against each bucket."""
    inst = build_instance(N, 3.0)
    part = decompose(inst.model.interaction, inst.split)
    psi = witness_state(N)
    lat = inst.lattice
    env = product_state_apply(part.inner_L + part.inner_Lc, psi, lat)
    bnd = product_state_apply(part.boundary, psi, lat)
    full = product_state_apply(part.all_terms(), psi, lat)
    exact = witness_energies(N)
    ok = all(a.is_eigen for a in (env, bnd, full)) and all(
        abs(a.eigenvalue - v) == 0 for a, v in zip((env, bnd, full), exact)
    )
    return WitnessReport(N, exact[0], exact[1], exact[2], ok,
                         max(env.residual, bnd.residual, full.residual))


def akl_lambda(constants: InteractionConstants) -> float:
    return 1.0 / (2.0 * constants.strength_j * constants.locality_N)


def akl_rhs_constant(constants: InteractionConstants, boundary_norm: float = 2.0) -> float:
    """Volume-independent right-hand side ``6 lam^{-3/2} exp(33 ||H_bd|| lam)``."""
    lam = akl_lambda(constants)
    return 6.0 / lam ** 1.5 * math.exp(33.0 * boundary_norm * lam)


def crossing_N(M: float, rhs: float) -> int:
    """Smallest odd ``N`` with ``4N - 4 - M > rhs``."""
    n = math.floor((rhs + M + 4.0) / 4.0) + 1
    while 4 * n - 4 - M <= rhs:
        n += 1
    return n if n % 2 else n + 1


@dataclass(frozen=True)
class DivergenceRow:
    N: int
    lower_bound: float
    measured_norm: float
    akl_rhs: float
    crossed: bool
    method: str
    witness_residual: float = 0.0


def dense_divergence_norm(N: int, M: float) -> tuple:
    """``||(H - Hbar) E^Hbar[0, M]||`` and the witness residual, with the dense engine."""
    inst = build_instance(N, M)
    dec = build_decomposition(inst.model, inst.split, shift_to_zero=False)
    tr = truncate(dec, M)
    P = projector(tr.spectrum, Interval.closed(0.0, M))
    D = tr.H_full.matrix - tr.H_bar.matrix
    measured = opnorm(D @ P.basis) if P.rank else 0.0
    psi = product_state_vector(witness_state(N), inst.lattice)
    resid = float(np.linalg.norm(D @ psi - (4 * N - 4 - M) * psi))
    bar_resid = float(np.linalg.norm(tr.H_bar.matrix @ psi - M * psi))
    return measured, max(resid, bar_resid)


def diagonal_divergence_norm(N: int, M: float) -> float:
    """Same norm by enumerating every computational basis state.

    All operators involved are diagonal in the computational basis, so the
    spectral projector of ``Hbar`` is a mask and the norm is a maximum.
    """
    inst = build_instance(N, M)
    part = decompose(inst.model.interaction, inst.split)
    lat = inst.lattice
    env = assemble_diagonal(part.inner_L + part.inner_Lc, lat)
    bnd = assemble_diagonal(part.boundary, lat)
    tol = 1e-9 * (1.0 + float(np.max(np.abs(env + bnd))))
    env_bar = np.minimum(env, M)
    env_bar[np.abs(env - M) <= tol] = M
    hbar = bnd + env_bar
    in_window = (hbar >= -tol) & (hbar <= M + tol)
    diff = env - env_bar
    return float(np.max(np.abs(diff[in_window]), initial=0.0))


def divergence_scan(N_list: Iterable[int], M: float, dense_sites: int = 10,
                    diagonal_sites: int = 14, constants: InteractionConstants | None = None) -> list:
    """One row per ``N``: exact norms where affordable, the witness bound otherwise.

    ``2N <= dense_sites`` uses the general dense engine, ``2N <= diagonal_sites``
    the basis-state enumeration, larger ``N`` the integer witness arithmetic.
    """
    if constants is None:
        constants = InteractionConstants(1, 4.0, 3)
    rhs = akl_rhs_constant(constants)
    rows = []
    for N in N_list:
        N = int(N)
        _check_N(N)
        if not 4 * N - 4 > M:
            raise PreconditionError(f"witness needs 4N - 4 > M, got N={N}, M={M}")
        env_e, bnd_e, _ = witness_energies(N)
        if bnd_e != 0 or env_e != 4 * N - 4:
            raise AssertionError(f"witness arithmetic broken at N={N}")
        lower = env_e - M
        resid = 0.0
        if 2 * N <= dense_sites:
            measured, resid = dense_divergence_norm(N, M)
            method = "dense"
        elif 2 * N <= diagonal_sites:
            measured = diagonal_divergence_norm(N, M)
            method = "diagonal"
        else:
            measured = lower
            method = "witness"
        rows.append(DivergenceRow(N, lower, measured, rhs, lower > rhs, method, resid))
    return rows


def odd_range(N_min: int, N_max: int) -> list:
    start = N_min if N_min % 2 else N_min + 1
    return list(range(start, N_max + 1, 2))
