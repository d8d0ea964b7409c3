"""Dense Hermitian operators on tensor-product spaces and their spectra.

Basis ordering is site-major lexicographic: the first lattice site is the
slowest tensor factor, so ``sigma^Z`` on site 1 of a two-site chain is
``diag(1, 1, -1, -1)``.  Dense eigendecomposition is the single source of
spectral truth; projectors are stored through orthonormal bases of their
range and of its complement so that norms of projector products reduce to
small singular-value problems.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DimensionCapError,
    EigenSolverError,
    NotProductStateError,
    SupportError,
)
from .lattice import Lattice, Term, check_hermitian

DEFAULT_DIM_CAP = 2 ** 14
EIG_RTOL = 1e-10
TIE_RTOL = 1e-9
GRAM_MIN_DIM = 48


def _as_matrix(a) -> np.ndarray:
    return a.matrix if isinstance(a, HermitianOperator) else np.asarray(a)


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Dense Hermitian matrix with an optional label."""

    matrix: np.ndarray
    label: str | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if not np.iscomplexobj(m):
            m = m.astype(float, copy=False)
        check_hermitian(m, name=self.label or "operator")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __add__(self, other):
        return HermitianOperator(self.matrix + _as_matrix(other))

    def __sub__(self, other):
        return HermitianOperator(self.matrix - _as_matrix(other))

    def __neg__(self):
        return HermitianOperator(-self.matrix, self.label)

    def shifted(self, c: float, label: str | None = None) -> "HermitianOperator":
        """Return ``H + c I``."""
        m = self.matrix.copy()
        m[np.diag_indices_from(m)] += c
        return HermitianOperator(m, label or self.label)

    def norm(self) -> float:
        return opnorm(self, hermitian=True)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v


# --------------------------------------------------------------------------
# assembly

def embed(term: Term, lattice: Lattice) -> np.ndarray:
    """Dense matrix of ``term`` tensored with identities on the rest of the lattice."""
    out = np.zeros((lattice.dimension,) * 2, dtype=term.matrix.dtype)
    _add_embedded(out, term, lattice)
    return out


def _add_embedded(out: np.ndarray, term: Term, lattice: Lattice) -> None:
    n, d = lattice.n_sites, lattice.local_dim
    pos = [lattice.index(s) for s in term.support]
    rest = [i for i in range(n) if i not in pos]
    block = np.kron(term.matrix, np.eye(d ** len(rest), dtype=term.matrix.dtype))
    order = pos + rest
    # axis i of the view is the factor of site order[i]
    view = out.reshape((d,) * (2 * n)).transpose(order + [n + o for o in order])
    view += block.reshape((d,) * (2 * n))


def assemble(bucket: Iterable[Term], lattice: Lattice, cap: int = DEFAULT_DIM_CAP,
             label: str | None = None) -> HermitianOperator:
    """Sum of the embedded terms of ``bucket`` on the full lattice."""
    bucket = list(bucket)
    dim = lattice.dimension
    if dim > cap:
        raise DimensionCapError(
            f"dimension {dim} exceeds the dense cap {cap}; use the matrix-free path"
        )
    for t in bucket:
        for s in t.support:
            if s not in lattice:
                raise SupportError(f"term {t.support}: site {s} outside the lattice")
        if t.matrix.shape[0] != lattice.local_dim ** len(t.support):
            raise SupportError(f"term {t.support}: wrong matrix size for local dimension")
    dtype = complex if any(np.iscomplexobj(t.matrix) for t in bucket) else float
    out = np.zeros((dim, dim), dtype=dtype)
    for t in bucket:
        _add_embedded(out, t, lattice)
    return HermitianOperator(out, label)


def assemble_diagonal(bucket: Iterable[Term], lattice: Lattice) -> np.ndarray:
    """Diagonal of the assembled operator when every term is diagonal.

    Only the diagonal of each local term is embedded, so memory is linear
    in the Hilbert-space dimension.
    """
    n, d = lattice.n_sites, lattice.local_dim
    out = np.zeros(lattice.dimension)
    for t in bucket:
        m = t.matrix
        if np.count_nonzero(m - np.diag(np.diag(m))):
            raise ValueError(f"term {t.support} is not diagonal")
        if np.iscomplexobj(m) and np.any(np.diag(m).imag):
            raise ValueError(f"term {t.support} has a complex diagonal")
        pos = [lattice.index(s) for s in t.support]
        local = np.real(np.diag(m)).reshape((d,) * len(pos))
        shape = [1] * n
        for p in pos:
            shape[p] = d
        # move local axes into lattice order, then broadcast over the rest
        order = np.argsort(pos)
        local = local.transpose(order).reshape(shape)
        out += np.broadcast_to(local, (d,) * n).reshape(-1)
    return out


# --------------------------------------------------------------------------
# spectra and projectors

@dataclass(frozen=True)
class Interval:
    """Real interval with explicit endpoint closure; infinite ends are open."""

    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = False
    hi_closed: bool = False

    @classmethod
    def closed(cls, a, b):
        return cls(a, b, True, True)

    @classmethod
    def open(cls, a, b):
        return cls(a, b, False, False)

    @classmethod
    def at_most(cls, p):
        return cls(-math.inf, p, False, True)

    @classmethod
    def below(cls, q):
        return cls(-math.inf, q, False, False)

    @classmethod
    def at_least(cls, m):
        return cls(m, math.inf, True, False)

    @classmethod
    def real_line(cls):
        return cls()

    def contains(self, x: np.ndarray, tol: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if math.isinf(self.lo):
            ok = np.ones(x.shape, bool)
        elif self.lo_closed:
            ok = x >= self.lo - tol
        else:
            ok = x > self.lo + tol
        if not math.isinf(self.hi):
            ok &= (x <= self.hi + tol) if self.hi_closed else (x < self.hi - tol)
        return ok

    def __str__(self):
        return f"{'[' if self.lo_closed else '('}{self.lo:g},{self.hi:g}{']' if self.hi_closed else ')'}"


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Ascending eigenvalues and matching orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    label: str | None = None

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def norm(self) -> float:
        ev = self.eigenvalues
        return float(max(abs(ev[0]), abs(ev[-1]))) if len(ev) else 0.0

    @property
    def tie_tol(self) -> float:
        return TIE_RTOL * (1.0 + self.norm)

    @cached_property
    def clusters(self) -> list:
        """Index ranges ``(start, stop)`` of degenerate blocks (gaps below ``tie_tol``)."""
        ev = self.eigenvalues
        if len(ev) == 0:
            return []
        cuts = np.flatnonzero(np.diff(ev) >= self.tie_tol) + 1
        bounds = [0, *cuts.tolist(), len(ev)]
        return list(zip(bounds[:-1], bounds[1:]))

    @cached_property
    def _cluster_layout(self) -> tuple:
        """Block means and the block label of every eigen-index."""
        bounds = np.array([a for a, _ in self.clusters] + [self.dim], dtype=np.intp)
        sizes = np.diff(bounds)
        means = np.add.reduceat(self.eigenvalues, bounds[:-1]) / sizes if len(sizes) else sizes
        return means, np.repeat(np.arange(len(sizes)), sizes)

    def indices(self, interval: Interval) -> np.ndarray:
        """Eigen-indices whose whole degenerate block lies in ``interval``.

        A block is judged by its mean eigenvalue.
        """
        if self.dim == 0:
            return np.zeros(0, dtype=np.intp)
        means, label = self._cluster_layout
        return np.flatnonzero(interval.contains(means, self.tie_tol)[label])

    def boundary_hits(self, value: float) -> int:
        """Number of eigenvalues within ``tie_tol`` of ``value``."""
        return int(np.count_nonzero(np.abs(self.eigenvalues - value) <= self.tie_tol))

    def matrix(self) -> np.ndarray:
        v = self.eigenvectors
        return _herm((v * self.eigenvalues) @ v.conj().T)

    def as_operator(self, label: str | None = None) -> "HermitianOperator":
        return HermitianOperator(self.matrix(), label or self.label)

    def check(self, H=None) -> dict:
        """Residual and orthonormality diagnostics; raises if out of tolerance."""
        v = self.eigenvectors
        gram = np.max(np.abs(v.conj().T @ v - np.eye(self.dim)), initial=0.0)
        out = {"gram": float(gram)}
        if H is not None:
            h = _as_matrix(H)
            scale = max(opnorm(h, hermitian=True), np.finfo(float).tiny)
            res = np.linalg.norm(h @ v - v * self.eigenvalues, axis=0)
            out["residual"] = float(res.max(initial=0.0) / scale)
            if out["residual"] > EIG_RTOL:
                raise EigenSolverError(f"eigen-residual {out['residual']:.2e} too large")
        if gram > EIG_RTOL:
            raise EigenSolverError(f"eigenvectors not orthonormal (gram error {gram:.2e})")
        return out


def _herm(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def eig(H, check: bool = True, label: str | None = None) -> SpectralData:
    """Full Hermitian eigendecomposition with ascending eigenvalues."""
    h = _as_matrix(H)
    if label is None and isinstance(H, HermitianOperator):
        label = H.label
    try:
        w, v = scipy.linalg.eigh(h, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        diag = {
            "dim": h.shape[0],
            "max_abs": float(np.max(np.abs(h), initial=0.0)),
            "finite": bool(np.all(np.isfinite(h))),
        }
        raise EigenSolverError(f"eigensolver failed: {exc}; diagnostics {diag}") from exc
    s = SpectralData(w, v, label)
    if check:
        s.check(h)
    return s


def diagonal_spectrum(diag: np.ndarray, label: str | None = None) -> "DiagonalSpectrum":
    return DiagonalSpectrum(np.asarray(diag, float), label)


@dataclass(frozen=True, eq=False)
class DiagonalSpectrum:
    """Spectrum of an operator diagonal in the computational basis.

    Eigenvectors are basis states, so spectral projectors are index masks.
    """

    diagonal: np.ndarray
    label: str | None = None

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.diagonal), initial=0.0))

    @property
    def tie_tol(self) -> float:
        return TIE_RTOL * (1.0 + self.norm)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.sort(self.diagonal)

    def mask(self, interval: Interval) -> np.ndarray:
        return interval.contains(self.diagonal, self.tie_tol)


@dataclass(frozen=True, eq=False)
class Projector:
    """Orthogonal projector given by orthonormal bases of its range and kernel."""

    basis: np.ndarray
    co_basis: np.ndarray
    interval: Interval | None = None

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @cached_property
    def matrix(self) -> np.ndarray:
        b = self.basis
        return _herm(b @ b.conj().T)

    def complement(self) -> "Projector":
        return Projector(self.co_basis, self.basis, None)

    @classmethod
    def from_matrix(cls, P: np.ndarray, tol: float = 1e-8) -> "Projector":
        w, v = np.linalg.eigh(_herm(np.asarray(P)))
        if np.any((np.abs(w) > tol) & (np.abs(w - 1) > tol)):
            raise ValueError("matrix is not an orthogonal projector")
        on = w > 0.5
        return cls(v[:, on], v[:, ~on])

    @classmethod
    def from_basis(cls, B: np.ndarray) -> "Projector":
        """Projector onto the column span of ``B`` (need not be orthonormal)."""
        B = np.asarray(B)
        if B.shape[1] == 0:
            return cls(B, np.eye(B.shape[0], dtype=B.dtype))
        q, _ = np.linalg.qr(B, mode="complete")
        k = np.linalg.matrix_rank(B)
        return cls(q[:, :k], q[:, k:])

    def check(self) -> dict:
        P = self.matrix
        idem = opnorm(P @ P - P)
        herm = float(np.max(np.abs(P - P.conj().T), initial=0.0))
        tr = float(np.real(np.trace(P)))
        if idem > 1e-9 or herm > 1e-12 or abs(tr - self.rank) > 1e-8:
            raise ValueError(f"projector invariants violated: {idem=}, {herm=}, {tr=}")
        return {"idempotency": idem, "hermiticity": herm, "trace": tr}


def projector(S: SpectralData, interval: Interval) -> Projector:
    """Spectral projector ``E^H(interval)``; closed ends include ties within ``tie_tol``."""
    idx = S.indices(interval)
    mask = np.zeros(S.dim, bool)
    mask[idx] = True
    v = S.eigenvectors
    return Projector(v[:, mask], v[:, ~mask], interval)


def product_norm(P: Projector, Q: Projector) -> float:
    """``||P Q||`` for orthogonal projectors, via their range bases."""
    if P.rank == 0 or Q.rank == 0:
        return 0.0
    return opnorm(P.basis.conj().T @ Q.basis)


def sandwich_norm(P: Projector, A, Q: Projector) -> float:
    """``||P A Q||``."""
    if P.rank == 0 or Q.rank == 0:
        return 0.0
    return opnorm(P.basis.conj().T @ _as_matrix(A) @ Q.basis)


# --------------------------------------------------------------------------
# functional calculus and norms

def _eval(f: Callable, x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            y = np.asarray(f(x), dtype=float)
            if y.shape != x.shape:
                raise TypeError
        except (TypeError, ValueError):
            y = np.array([f(float(t)) for t in x], dtype=float)
    return y


def apply_function(S: SpectralData, f: Callable, label: str | None = None) -> HermitianOperator:
    """``sum_k f(lambda_k) |psi_k><psi_k|``."""
    fv = _eval(f, S.eigenvalues)
    bad = np.flatnonzero(~np.isfinite(fv))
    if len(bad):
        raise OverflowError(
            f"function not finite at eigenvalue {S.eigenvalues[bad[0]]!r} (index {bad[0]})"
        )
    v = S.eigenvectors
    return HermitianOperator(_herm((v * fv) @ v.conj().T), label)


def conjugated_norm(S: SpectralData, A, t: float) -> float:
    """``||exp(tK) A exp(-tK)||`` where ``S`` is the spectrum of ``K``.

    Computed in the eigenbasis of ``K`` with entrywise factors
    ``exp(t (k_i - k_j))``, which avoids overflow of the two exponentials.
    """
    v = S.eigenvectors
    k = S.eigenvalues
    B = v.conj().T @ _as_matrix(A) @ v
    return opnorm(np.exp(t * (k[:, None] - k[None, :])) * B)


def conjugate(S: SpectralData, A, t: float) -> np.ndarray:
    """``exp(tK) A exp(-tK)`` as a dense matrix."""
    v = S.eigenvectors
    k = S.eigenvalues
    B = v.conj().T @ _as_matrix(A) @ v
    return v @ (np.exp(t * (k[:, None] - k[None, :])) * B) @ v.conj().T


def opnorm(A, hermitian: bool = False) -> float:
    """Largest singular value; for Hermitian input the spectral radius."""
    a = _as_matrix(A)
    if a.size == 0:
        return 0.0
    if not np.all(np.isfinite(a)):
        raise ValueError("opnorm: non-finite entries")
    if a.ndim == 1:
        return float(np.linalg.norm(a))
    if hermitian:
        w = scipy.linalg.eigvalsh(a)
        return float(max(abs(w[0]), abs(w[-1])))
    if min(a.shape) <= GRAM_MIN_DIM:
        return float(scipy.linalg.svdvals(a)[0])
    # top eigenvalue of the smaller Gram matrix; relative accuracy is kept
    g = a.conj().T @ a if a.shape[0] >= a.shape[1] else a @ a.conj().T
    n = g.shape[0]
    top = scipy.linalg.eigvalsh(_herm(g), subset_by_index=[n - 1, n - 1])[0]
    return float(math.sqrt(max(top, 0.0)))


# --------------------------------------------------------------------------
# product states

@dataclass(frozen=True)
class ProductStateAction:
    is_eigen: bool
    eigenvalue: complex
    residual: float


def _local_vector(state: dict, sites: Sequence) -> np.ndarray:
    v = np.ones(1, dtype=complex)
    for s in sites:
        v = np.kron(v, state[s])
    return v


def _check_product_state(state, lattice: Lattice) -> dict:
    if isinstance(state, dict):
        vecs = {lattice.sites[lattice.index(k)]: np.asarray(v, complex) for k, v in state.items()}
    else:
        state = list(state)
        if len(state) != lattice.n_sites:
            raise NotProductStateError(
                f"expected {lattice.n_sites} site vectors, got {len(state)}"
            )
        vecs = {s: np.asarray(v, complex) for s, v in zip(lattice.sites, state)}
    if set(vecs) != set(lattice.sites):
        raise NotProductStateError("state does not cover every lattice site")
    for s, v in vecs.items():
        if v.shape != (lattice.local_dim,):
            raise NotProductStateError(f"site {s}: vector of shape {v.shape}")
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise NotProductStateError(f"site {s}: vector not normalised")
    return vecs


def product_state_apply(bucket: Iterable[Term], state, lattice: Lattice,
                        tol: float = 1e-10) -> ProductStateAction:
    """Act with a sum of local terms on a product state without the global matrix.

    Each term gives ``w_Z = h_Z v_Z = a_Z v_Z + r_Z`` with ``r_Z`` orthogonal to
    ``v_Z``.  The bucket acts as the scalar ``sum a_Z`` on the state iff the
    residual ``sum_Z r_Z (x) v_rest`` vanishes; its squared norm only has
    cross terms between overlapping supports.
    """
    vecs = _check_product_state(state, lattice)
    bucket = list(bucket)
    coeff = 0j
    rs = []
    for t in bucket:
        vz = _local_vector(vecs, t.support)
        w = t.matrix @ vz
        a = np.vdot(vz, w)
        coeff += a
        rs.append(w - a * vz)
    by_site: dict = {}
    for i, t in enumerate(bucket):
        for s in t.support:
            by_site.setdefault(s, []).append(i)
    res2 = 0.0
    for i, t in enumerate(bucket):
        res2 += float(np.vdot(rs[i], rs[i]).real)
        partners = {j for s in t.support for j in by_site[s] if j > i}
        for j in partners:
            res2 += 2.0 * _cross(bucket[i], rs[i], bucket[j], rs[j], vecs).real
    residual = math.sqrt(max(res2, 0.0))
    return ProductStateAction(residual <= tol, coeff, residual)


def _cross(ti: Term, ri: np.ndarray, tj: Term, rj: np.ndarray, vecs: dict) -> complex:
    """``<r_i (x) v_{Zj minus Zi}, r_j (x) v_{Zi minus Zj}>`` on the union of supports."""
    union = list(ti.support) + [s for s in tj.support if s not in ti.support]
    left = _on_union(ri, ti.support, union, vecs)
    right = _on_union(rj, tj.support, union, vecs)
    return np.vdot(left, right)


def _on_union(r: np.ndarray, support: Sequence, union: Sequence, vecs: dict) -> np.ndarray:
    extra = [s for s in union if s not in support]
    full = np.kron(r, _local_vector(vecs, extra))
    d = len(next(iter(vecs.values())))
    order = list(support) + extra
    t = full.reshape((d,) * len(order))
    return t.transpose([order.index(s) for s in union]).reshape(-1)


def product_state_vector(state, lattice: Lattice) -> np.ndarray:
    """Dense vector of a product state in the global basis ordering."""
    vecs = _check_product_state(state, lattice)
    return _local_vector(vecs, lattice.sites)


def basis_state(spins: Sequence[int], d: int = 2) -> list:
    """Per-site computational basis vectors for integer labels."""
    out = []
    for s in spins:
        v = np.zeros(d)
        v[s] = 1.0
        out.append(v)
    return out
