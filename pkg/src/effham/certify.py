"""Certificates: measured norms against closed-form bounds.

Every check produces a :class:`BoundCertificate` holding the measured
left-hand side, the closed-form right-hand side and a status.  Tolerance is
only ever added on the comparison side, ``lhs <= rhs + tol``; the recorded
right-hand side is the bare formula.  Projector-product claims whose bound
is at least one are reported as ``VACUOUS`` (still a pass).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import PreconditionError
from .operators import (
    HermitianOperator,
    Interval,
    Projector,
    SpectralData,
    _as_matrix,
    conjugated_norm,
    eig,
    opnorm,
    product_norm,
    projector,
    sandwich_norm,
)

SQRT8 = 2.0 * math.sqrt(2.0)
DEFAULT_RTOL = 1e-8


class Status(str, Enum):
    PASS = "PASS"
    VACUOUS = "VACUOUS"
    VACUOUS_BY_STRUCTURE = "VACUOUS-BY-STRUCTURE"
    FAIL = "FAIL"
    SKIPPED = "SKIPPED"
    ERROR = "ERROR"

    def __str__(self):
        return self.value


PASSING = frozenset({Status.PASS, Status.VACUOUS, Status.VACUOUS_BY_STRUCTURE})


@dataclass(frozen=True)
class BoundCertificate:
    claim_id: str
    params: dict
    lhs: float
    rhs: float
    status: Status
    tolerance: float
    note: str = ""
    model_id: str = ""
    seed: int | None = None

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.status in PASSING

    def tagged(self, model_id: str, seed=None) -> "BoundCertificate":
        return replace(self, model_id=model_id, seed=seed)


def judge(claim_id: str, params: dict, lhs: float, rhs: float, *, tol: float | None = None,
          vacuous_at: float | None = 1.0, note: str = "") -> BoundCertificate:
    """Build a certificate; ``PASS`` iff ``lhs <= rhs + tol``.

    ``vacuous_at`` is the trivial bound on ``lhs`` (1 for projector
    products); a passing bound at or above it is marked ``VACUOUS``.
    """
    if tol is None:
        tol = DEFAULT_RTOL * (1.0 + abs(rhs))
    if not (math.isfinite(lhs) and (math.isfinite(rhs) or rhs == math.inf)):
        status = Status.ERROR
    elif lhs <= rhs + tol:
        status = Status.VACUOUS if vacuous_at is not None and rhs >= vacuous_at else Status.PASS
    else:
        status = Status.FAIL
    return BoundCertificate(claim_id, dict(params), float(lhs), float(rhs), status, float(tol), note)


def skipped(claim_id: str, params: dict, reason: str) -> BoundCertificate:
    return BoundCertificate(claim_id, dict(params), math.nan, math.nan, Status.SKIPPED, 0.0, reason)


# --------------------------------------------------------------------------
# constants and closed forms

@dataclass(frozen=True)
class Constants:
    """Decay rate and the scalar inputs shared by the bounds."""

    lam: float
    boundary_norm: float
    cutoff_M: float = math.nan
    strength_j: float = math.nan
    locality_N: int = 0
    boundary_size: int = 0

    @classmethod
    def from_inputs(cls, strength_j: float, locality_N: int, boundary_size: int,
                    boundary_norm: float, cutoff_M: float = math.nan) -> "Constants":
        lam = 1.0 / (4.0 * strength_j * (locality_N + boundary_size))
        return cls(lam, boundary_norm, cutoff_M, strength_j, locality_N, boundary_size)

    @property
    def S_X(self) -> float:
        return 2.0 * self.lam

    def with_cutoff(self, M: float) -> "Constants":
        return replace(self, cutoff_M=float(M))


def delta_pq(p: float, q: float, c: Constants) -> float:
    b, M = c.boundary_norm, c.cutoff_M
    return SQRT8 * (M + 5 * b + q) * math.exp(-c.lam * (M - 2 * p - 18 * b))


def eta_ed(eps: float, delt: float, c: Constants) -> float:
    b, M = c.boundary_norm, c.cutoff_M
    return SQRT8 * (M + b + delt) * math.exp(-c.lam * (M - 2 * eps - 10 * b))


def eta_shifted(eps: float, delt: float, xi: float, c: Constants) -> float:
    """Remainder of the window bound shifted by ``xi``; equals :func:`eta_ed` at ``xi = 0``."""
    b, M = c.boundary_norm, c.cutoff_M
    ax = abs(xi)
    return SQRT8 * (M + b + ax + delt) * math.exp(-c.lam * (M - 2 * eps - 2 * ax - 10 * b))


# --------------------------------------------------------------------------
# spectral-overlap bounds

def overlap_i_rhs(p: float, q: float, c: Constants) -> float:
    b = c.boundary_norm
    return (p + 2 * b + delta_pq(p, q, c)) / (q + 2 * b)


def certify_overlap_i(H: SpectralData, Hbar: SpectralData, p: float, q: float,
                      c: Constants) -> BoundCertificate:
    """``||(I - E^H(-inf, q)) E^Hbar(-inf, p]||`` against its bound."""
    b = c.boundary_norm
    if not (q > p >= -2 * b):
        raise PreconditionError(f"need q > p >= -2||H_bd||, got p={p}, q={q}, b={b}")
    high = projector(H, Interval.below(q)).complement()
    low = projector(Hbar, Interval.at_most(p))
    lhs = product_norm(high, low)
    params = {"p": p, "q": q, "M": c.cutoff_M, "delta_pq": delta_pq(p, q, c)}
    return judge("overlap-i", params, lhs, overlap_i_rhs(p, q, c))


def window_leakage(H: SpectralData, Hbar: SpectralData, eps: float, delt: float,
                   xi: float = 0.0) -> float:
    """``||(I - E^H(xi - delt, xi + delt)) E^Hbar[xi - eps, xi + eps]||``."""
    outside = projector(H, Interval.open(xi - delt, xi + delt)).complement()
    inside = projector(Hbar, Interval.closed(xi - eps, xi + eps))
    return product_norm(outside, inside)


def certify_overlap_ii(H: SpectralData, Hbar: SpectralData, eps: float, delt: float,
                       c: Constants, xi: float = 0.0) -> BoundCertificate:
    """Window bound ``(eps + eta) / delt``; the ``xi != 0`` form is the shifted claim."""
    if not (delt > eps >= 0):
        raise PreconditionError(f"need delta > eps >= 0, got eps={eps}, delta={delt}")
    lhs = window_leakage(H, Hbar, eps, delt, xi)
    eta = eta_shifted(eps, delt, xi, c)
    params = {"eps": eps, "delta": delt, "xi": xi, "M": c.cutoff_M, "eta": eta}
    claim = "overlap-ii" if xi == 0 else "overlap-shifted"
    return judge(claim, params, lhs, (eps + eta) / delt)


def shift_parameters(p: float, q: float, boundary_norm: float) -> tuple:
    """Map ``(p, q)`` to the ``(eps, delta, xi)`` of the shifted window bound."""
    b = boundary_norm
    return p + 2 * b, q + 2 * b, -2 * b


# --------------------------------------------------------------------------
# eigenvalue comparison

def certify_eig_sandwich(H: SpectralData, Hbar: SpectralData, c: Constants,
                         j_max: int | None = None) -> list:
    """Per-level lower bound ``eps_j - 2 delta_j <= epsbar_j`` with the upper check folded in.

    ``lhs = eps_j - 2 delta_j`` and ``rhs = epsbar_j``; the certificate also
    fails if ``epsbar_j > eps_j + 1e-9``.  Levels whose lower bound sits below
    the trivial floor ``-2||H_bd||`` are reported as ``VACUOUS``.
    """
    b = c.boundary_norm
    ev, evb = H.eigenvalues, Hbar.eigenvalues
    n = len(ev) if j_max is None else min(len(ev), j_max + 1)
    out = []
    for j in range(n):
        ej, ebj = float(ev[j]), float(evb[j])
        dj = delta_pq(ej, ej, c)
        lower = ej - 2 * dj
        upper_ok = ebj <= ej + 1e-9
        params = {"j": j, "eps_j": ej, "epsbar_j": ebj, "delta_j": dj, "M": c.cutoff_M}
        cert = judge("eig-sandwich", params, lower, ebj, tol=1e-8, vacuous_at=None)
        if cert.passed and lower <= -2 * b:
            cert = replace(cert, status=Status.VACUOUS)
        if not upper_ok:
            cert = replace(cert, status=Status.FAIL,
                           note=f"upper bound violated: epsbar_j - eps_j = {ebj - ej:.3e}")
        out.append(cert)
    return out


def ground_gate(H: SpectralData, c: Constants) -> tuple:
    """``(Delta, delta_0, eta, open)`` for the ground-state fidelity bound."""
    gap = float(H.eigenvalues[1] - H.eigenvalues[0]) if H.dim > 1 else math.inf
    d0 = delta_pq(0.0, 0.0, c)
    eta = eta_ed(2 * d0, gap, c) if math.isfinite(gap) else math.inf
    return gap, d0, eta, bool(gap > 2 * d0 + eta)


def certify_ground_overlap(H: SpectralData, Hbar: SpectralData, c: Constants) -> BoundCertificate:
    """``sqrt(1 - |<psi_0, psibar_0>|^2) <= (2 delta_0 + eta) / Delta`` behind its gate.

    The overlap is taken for the worst unit vector of the lowest ``Hbar``
    eigenspace, so a degenerate truncated ground space is covered.
    """
    gap, d0, eta, is_open = ground_gate(H, c)
    params = {"Delta": gap, "delta_0": d0, "eta": eta, "M": c.cutoff_M}
    if gap <= H.tie_tol:
        return skipped("ground-overlap", params, "degenerate ground space of H")
    if not is_open:
        return skipped("ground-overlap", params, "gate Delta > 2 delta_0 + eta closed")
    psi0 = H.eigenvectors[:, 0]
    a, b_ = Hbar.clusters[0]
    ground_bar = Hbar.eigenvectors[:, a:b_]
    # a vector of a degenerate block can be chosen orthogonal to psi0
    fid = float(abs(np.vdot(psi0, ground_bar[:, 0]))) if b_ - a == 1 else 0.0
    params["overlap"] = fid
    params["bar_ground_multiplicity"] = b_ - a
    lhs = math.sqrt(max(0.0, 1.0 - fid ** 2))
    return judge("ground-overlap", params, lhs, (2 * d0 + eta) / gap)


# --------------------------------------------------------------------------
# off-diagonal and tail lemmas

OFFDIAG_SLACK = {"plain": 4, "truncated": 8}
TAIL_SLACK = {"plain": 6, "truncated": 10}


def certify_offdiag(projected: SpectralData, conjugating: SpectralData, A, M_cut: float,
                    N_cut: float, c: Constants, variant: str = "plain",
                    roles: str = "", conjugated: float | None = None,
                    A_norm: float | None = None) -> BoundCertificate:
    """``||E[M, inf) A E(-inf, N]|| <= exp(-lam (M - N - k b)) ||e^{lam K} A e^{-lam K}||``.

    Projectors come from ``projected`` and the imaginary-time conjugation
    from ``conjugating``; ``k`` is 4 for the plain pair and 8 for the
    truncated pair.  The conjugated norm is computed exactly unless passed
    in as ``conjugated`` (it depends on neither cut); ``A_norm`` likewise.
    """
    k = OFFDIAG_SLACK[variant]
    hi = projector(projected, Interval.at_least(M_cut))
    lo = projector(projected, Interval.at_most(N_cut))
    lhs = sandwich_norm(hi, A, lo)
    conj = conjugated_norm(conjugating, A, c.lam) if conjugated is None else conjugated
    rhs = math.exp(-c.lam * (M_cut - N_cut - k * c.boundary_norm)) * conj
    params = {"M_cut": M_cut, "N_cut": N_cut, "conjugated_norm": conj, "M": c.cutoff_M}
    a_norm = opnorm(A) if A_norm is None else A_norm
    return judge(f"offdiag-{variant}", params, lhs, rhs, vacuous_at=a_norm, note=roles)


def certify_tail(H: SpectralData, env: SpectralData, eps: float, N_cut: float,
                 c: Constants, variant: str = "plain") -> BoundCertificate:
    """``||(I - E^env(-N, N)) E^H[-eps, eps]|| <= 2 sqrt2 exp(-lam (N - 2 eps - k b))``.

    For the truncated pair (``H = Hbar``, ``env`` clamped at ``M``) and
    ``N > M`` the left projector vanishes identically and the certificate is
    ``VACUOUS-BY-STRUCTURE``.
    """
    if not (N_cut > 0 and eps >= 0):
        raise PreconditionError(f"need N > 0 and eps >= 0, got N={N_cut}, eps={eps}")
    k = TAIL_SLACK[variant]
    outside = projector(env, Interval.open(-N_cut, N_cut)).complement()
    window = projector(H, Interval.closed(-eps, eps))
    lhs = product_norm(outside, window)
    rhs = SQRT8 * math.exp(-c.lam * (N_cut - 2 * eps - k * c.boundary_norm))
    params = {"eps": eps, "N_cut": N_cut, "M": c.cutoff_M}
    cert = judge(f"tail-{variant}", params, lhs, rhs)
    if variant == "truncated" and N_cut > c.cutoff_M + env.tie_tol and cert.passed:
        cert = replace(cert, status=Status.VACUOUS_BY_STRUCTURE,
                       note="clamped spectrum lies inside (-N, N)")
    return cert


# --------------------------------------------------------------------------
# projection overlap lemma

@dataclass(frozen=True)
class OverlapCheck:
    c: float
    applicable: bool
    rank_ok: bool
    norm_ok: bool
    min_ratio: float
    bound: float

    @property
    def ok(self) -> bool:
        return (not self.applicable) or (self.rank_ok and self.norm_ok)


def overlap_lemma_check(P: Projector, Q: Projector, tol: float = 1e-8) -> OverlapCheck:
    """Given ``c = ||(I - Q) P|| < 1``: rank P <= rank Q and ``||Q psi|| >= sqrt(1 - c^2)``."""
    c = product_norm(Q.complement(), P)
    if P.rank == 0:
        return OverlapCheck(c, c < 1.0 - tol, True, True, math.inf, 1.0)
    if Q.rank == 0:
        return OverlapCheck(c, False, False, False, 0.0, math.nan)
    sv = np.linalg.svd(Q.basis.conj().T @ P.basis, compute_uv=False)
    min_ratio = float(sv[-1]) if len(sv) >= P.rank else 0.0
    # c = 1 exactly when rank P > rank Q; roundoff can land just below
    if c >= 1.0 - tol:
        return OverlapCheck(c, False, P.rank <= Q.rank, False, min_ratio, math.nan)
    bound = math.sqrt(1.0 - c * c)
    return OverlapCheck(c, True, P.rank <= Q.rank, min_ratio >= bound - tol, min_ratio, bound)


# --------------------------------------------------------------------------
# nested-commutator series

def hadamard_series_check(H_X: HermitianOperator, generator: HermitianOperator, s: float,
                          n_max: int, c: Constants, x_size: int,
                          generator_spectrum: SpectralData | None = None,
                          kind: str = "full") -> list:
    """Term-wise and partial-sum bounds for ``sum_n s^n/n! ad_G^n(H_X)``.

    ``c.lam`` must be built with ``boundary_size = x_size`` so that the radius
    is ``S_X = 2 lam``.  Returns one ``hadamard-term`` certificate per order,
    one ``hadamard-sum`` certificate covering every partial sum and the exact
    conjugation ``e^{sG} H_X e^{-sG}``, and one ``hadamard-tail`` certificate
    comparing the exact value with the truncated series.
    """
    if not abs(s) < c.S_X:
        raise PreconditionError(f"|s| = {abs(s)} must be below S_X = {c.S_X}")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    spec = generator_spectrum if generator_spectrum is not None else eig(generator)
    # in the eigenbasis of G, ad_G^n(A) is the entrywise product D^n * A with D_ij = g_i - g_j
    v, gv = spec.eigenvectors, spec.eigenvalues
    B = v.conj().T @ _as_matrix(H_X) @ v
    B = 0.5 * (B + B.conj().T)
    D = gv[:, None] - gv[None, :]
    hx_norm = opnorm(B, hermitian=True)
    j, N = c.strength_j, c.locality_N
    ratio = abs(s) / c.S_X
    real_s = not np.iscomplexobj(s)
    outside = kind == "outside"
    out = []
    if not (real_s and np.isrealobj(B)):
        B = B.astype(complex)
    term = B
    partial = term.copy()
    partial_norms = [hx_norm]
    measured_rate = 0.0
    bound_n = hx_norm
    out.append(judge("hadamard-term", {"n": 0, "s": s, "kind_outside": outside},
                     hx_norm, bound_n, vacuous_at=None))
    for n in range(1, n_max + 1):
        term = term * ((s / n) * D)
        partial = partial + term
        partial_norms.append(opnorm(partial))
        bound_n *= 2 * j * abs(s) * (N * n + x_size) / n
        # for real s the even orders are Hermitian
        tn = opnorm(term, hermitian=real_s and n % 2 == 0)
        if hx_norm > 0:
            measured_rate = max(measured_rate, (tn / hx_norm) ** (1.0 / n))
        out.append(judge("hadamard-term", {"n": n, "s": s, "kind_outside": outside},
                         tn, bound_n, vacuous_at=None))
    exact = np.exp(s * D) * B
    exact_norm = opnorm(exact)
    sum_bound = hx_norm / (1.0 - ratio)
    allowance = hx_norm * ratio ** (n_max + 1) / (1.0 - ratio)
    lhs = max(max(partial_norms), exact_norm)
    params = {"s": s, "n_max": n_max, "S_X": c.S_X, "tail_ratio": measured_rate,
              "exact_norm": exact_norm, "allowance": allowance, "kind_outside": outside}
    out.append(judge("hadamard-sum", params, lhs, sum_bound, vacuous_at=None))
    tail = opnorm(exact - partial)
    out.append(judge("hadamard-tail", {"s": s, "n_max": n_max, "kind_outside": outside},
                     tail, allowance, vacuous_at=None, tol=DEFAULT_RTOL * (1.0 + hx_norm)))
    return out
