"""Experiment orchestration: configs, suites, CSV output and run manifests.

A run evaluates one suite over a set of models (a seeded corpus, the Ising
chain, or a model file) and a parameter grid, writes one CSV row per
certificate and a JSON manifest with tallies.  Rows are emitted in a fixed
order, so the same config always produces the same CSV bytes.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import __version__, certify
from .certify import (
    BoundCertificate,
    Constants,
    Status,
    certify_eig_sandwich,
    certify_ground_overlap,
    certify_offdiag,
    certify_overlap_i,
    certify_overlap_ii,
    certify_tail,
    hadamard_series_check,
    judge,
    shift_parameters,
)
from .corpus import CorpusSpec, generate_corpus
from .errors import ConfigError, EffHamError
from .ising import build_instance, divergence_scan, odd_range
from .lattice import Model, RegionSplit, derive_constants
from .operators import DEFAULT_DIM_CAP, Interval, assemble, conjugated_norm, eig, opnorm, projector
from .range_stability import (
    TruncationGeometry,
    decay_bound_certificate,
    decaying_chain,
    gap_stability_certificate,
    range_truncate,
    synthetic_gapped_instance,
    windowed_instance,
)
from .serialize import SpectralCache, read_model, write_model
from .truncation import DecomposedHamiltonian, build_decomposition, monotone_gap, truncate

MODEL_SUITES = ("overlap-i", "overlap-ii", "sandwich", "ground-overlap", "offdiag", "tail",
                "hadamard", "invariants")
SUITES = MODEL_SUITES + ("counterexample", "range-trunc")
CSV_COLUMNS = ("claim_id", "model_id", "seed", "params", "lhs", "rhs", "status", "margin",
               "tolerance", "note")
INVARIANT_RTOL = 1e-8


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a run.  ``None`` grids are derived per model."""

    suite: str
    source: str = "corpus"
    seed: int = 0
    count: int = 10
    site_counts: tuple = (8, 9, 10)
    model_file: str | None = None
    ising_N: int = 5
    M_grid: tuple | None = None
    pq_grid: tuple | None = None
    ed_grid: tuple | None = None
    xi_grid: tuple = (0.0,)
    cut_grid: tuple | None = None
    tail_grid: tuple | None = None
    s_fractions: tuple = (0.5,)
    n_max: int = 20
    observables: int = 2
    rtol: float | None = None
    # counterexample
    cutoff_M: float = 10.0
    N_min: int = 5
    N_max: int = 101
    # range truncation
    alphas: tuple = (3.0,)
    ells: tuple = (4,)
    qs: tuple = (2,)
    window: int | None = None
    decay_seeds: int = 1
    synthetic: int = 0
    # plumbing, not part of the config hash
    out_dir: str = "runs"
    cache_dir: str | None = None
    workers: int = 1
    halt_on_fail: bool = True

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ConfigError(f"suite: unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")
        if self.source not in ("corpus", "ising", "file"):
            raise ConfigError(f"source: unknown model source {self.source!r}")
        if self.source == "file" and not self.model_file:
            raise ConfigError("model_file: required when source is 'file'")
        if self.count < 0:
            raise ConfigError(f"count: must be nonnegative, got {self.count}")
        for name in ("M_grid", "pq_grid", "ed_grid", "cut_grid", "tail_grid"):
            val = getattr(self, name)
            if val is not None and len(val) == 0:
                raise ConfigError(f"{name}: grid is empty")
        for name in ("xi_grid", "s_fractions", "alphas", "ells", "qs", "site_counts"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name}: grid is empty")
        if self.n_max < 1:
            raise ConfigError(f"n_max: must be >= 1, got {self.n_max}")
        if self.workers < 1:
            raise ConfigError(f"workers: must be >= 1, got {self.workers}")
        if self.rtol is not None and not self.rtol >= 0:
            raise ConfigError(f"rtol: must be nonnegative, got {self.rtol}")
        if any(not 0 < abs(f) < 1 for f in self.s_fractions):
            raise ConfigError("s_fractions: need 0 < |s|/S_X < 1")
        if self.suite in MODEL_SUITES and self.source == "corpus":
            if any(2 ** n > DEFAULT_DIM_CAP for n in self.site_counts):
                raise ConfigError("site_counts: dimension exceeds the dense cap")

    def hash_fields(self) -> dict:
        skip = {"out_dir", "cache_dir", "workers", "halt_on_fail"}
        return {k: v for k, v in dataclasses.asdict(self).items() if k not in skip}

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.hash_fields(), sort_keys=True, default=list)
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    engine_version: str
    suite: str
    row_counts: dict = field(default_factory=dict)
    tallies: dict = field(default_factory=dict)
    rows: int = 0
    informative_passes: int = 0
    wall_time: float = 0.0
    halted: bool = False
    csv_path: str = ""
    repro_dir: str = ""

    @property
    def any_fail(self) -> bool:
        return self.tallies.get("FAIL", 0) > 0

    @property
    def exit_code(self) -> int:
        return 1 if self.any_fail else 0

    def add(self, cert: BoundCertificate) -> None:
        self.rows += 1
        self.row_counts[cert.claim_id] = self.row_counts.get(cert.claim_id, 0) + 1
        key = str(cert.status)
        self.tallies[key] = self.tallies.get(key, 0) + 1
        if cert.status is Status.PASS:
            self.informative_passes += 1

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=1, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# CSV and plot data

def _num(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return repr(x) if math.isfinite(x) else str(x)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def params_json(params: dict) -> str:
    return json.dumps({k: _jsonable(v) for k, v in params.items()}, sort_keys=True)


def certificate_row(cert: BoundCertificate) -> list:
    return [cert.claim_id, cert.model_id, "" if cert.seed is None else str(cert.seed),
            params_json(cert.params), _num(cert.lhs), _num(cert.rhs), str(cert.status),
            _num(cert.margin), _num(cert.tolerance), cert.note]


def write_csv(path, rows: Iterable[list], header=CSV_COLUMNS) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_certificates(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def write_plot_data(path, triples: Iterable[tuple]) -> None:
    """``(x, y, series)`` rows for external plotting."""
    write_csv(path, ([_num(x), _num(y), s] for x, y, s in triples), header=("x", "y", "series"))


# --------------------------------------------------------------------------
# model contexts

@dataclass(frozen=True, eq=False)
class ModelSource:
    model_id: str
    seed: int | None
    model: Model
    split: RegionSplit


@dataclass(eq=False)
class ModelContext:
    source: ModelSource
    decomposition: DecomposedHamiltonian
    constants: Constants
    truncations: dict = field(default_factory=dict)
    memo: dict = field(default_factory=dict)

    @property
    def model_id(self) -> str:
        return self.source.model_id

    @property
    def E(self) -> float:
        return float(self.decomposition.spectrum.eigenvalues[-1])

    @property
    def b(self) -> float:
        return self.decomposition.boundary_norm

    def truncation(self, M: float):
        if M not in self.truncations:
            self.truncations[M] = truncate(self.decomposition, M)
        return self.truncations[M]

    def at(self, M: float) -> Constants:
        return self.constants.with_cutoff(M)


def model_sources(cfg: ExperimentConfig) -> list:
    if cfg.source == "corpus":
        spec = CorpusSpec(cfg.seed, cfg.count, tuple(cfg.site_counts))
        return [ModelSource(cm.model_id, cm.seed, cm.model, cm.split)
                for cm in generate_corpus(spec)]
    if cfg.source == "ising":
        inst = build_instance(cfg.ising_N, max(cfg.cutoff_M, 3.0))
        return [ModelSource(inst.model.name, None, inst.model, inst.split)]
    model, stored = read_model(cfg.model_file)
    r = (stored or derive_constants(model.interaction, model.lattice)).range_r
    half = model.lattice.n_sites // 2
    split = RegionSplit.minimal(model.lattice, model.lattice.sites[:half], r)
    return [ModelSource(model.name, None, model, split)]


def build_context(src: ModelSource, solver=eig) -> ModelContext:
    dec = build_decomposition(src.model, src.split, shift_to_zero=True, solver=solver)
    ic = derive_constants(src.model.interaction, src.model.lattice)
    consts = Constants.from_inputs(ic.strength_j, ic.locality_N, len(src.split.boundary),
                                   dec.boundary_norm)
    return ModelContext(src, dec, consts)


# --------------------------------------------------------------------------
# default grids

def _step(ctx: ModelContext) -> float:
    return ctx.E / 8.0 if ctx.E > 0 else 1.0


def default_M_grid(ctx: ModelContext) -> tuple:
    """Two cutoffs inside the spectrum, one at its top, two in the decaying regime."""
    E, b, lam = ctx.E, ctx.b, ctx.constants.lam
    far = 18 * b + 2 * E
    return (b + E / 4, b + E / 2, b + E, far + 10 / lam, far + 20 / lam)


def default_pq_grid(ctx: ModelContext) -> tuple:
    s, b = _step(ctx), ctx.b
    return tuple((-2 * b + i * s, -2 * b + i * s + f * s)
                 for i in range(5) for f in (0.5, 1, 2, 4, 8))


def default_ed_grid(ctx: ModelContext) -> tuple:
    s = _step(ctx)
    return tuple((i * s / 2, i * s / 2 + f * s) for i in range(5) for f in (0.5, 1, 2, 4, 8))


def default_cut_grid(ctx: ModelContext) -> tuple:
    s, b, lam = _step(ctx), ctx.b, ctx.constants.lam
    return tuple((N + gap, N) for N in (0.0, 2 * s)
                 for gap in (2 * s, 4 * s, 4 * b + 2 / lam))


def default_tail_grid(ctx: ModelContext) -> tuple:
    s, b, lam = _step(ctx), ctx.b, ctx.constants.lam
    return tuple((eps, N) for eps in (0.0, s)
                 for N in (b + 2 * s, b + 8 * s, 6 * b + 2 * eps + 3 / lam))


def _grid(cfg_val, ctx, default):
    return tuple(cfg_val) if cfg_val is not None else default(ctx)


# --------------------------------------------------------------------------
# suites over models

def suite_overlap_i(ctx: ModelContext, cfg: ExperimentConfig) -> Iterator[BoundCertificate]:
    H = ctx.decomposition.spectrum
    for M in _grid(cfg.M_grid, ctx, default_M_grid):
        tr = ctx.truncation(M)
        for p, q in _grid(cfg.pq_grid, ctx, default_pq_grid):
            yield certify_overlap_i(H, tr.spectrum, p, q, ctx.at(M))


def suite_overlap_ii(ctx: ModelContext, cfg: ExperimentConfig) -> Iterator[BoundCertificate]:
    """Window bound on the (eps, delta) and xi grids, plus the shifted form of each (p, q)."""
    H = ctx.decomposition.spectrum
    for M in _grid(cfg.M_grid, ctx, default_M_grid):
        tr, c = ctx.truncation(M), ctx.at(M)
        for xi in cfg.xi_grid:
            for eps, delt in _grid(cfg.ed_grid, ctx, default_ed_grid):
                yield certify_overlap_ii(H, tr.spectrum, eps, delt, c, xi)
        for p, q in _grid(cfg.pq_grid, ctx, default_pq_grid)[::5]:
            eps, delt, xi = shift_parameters(p, q, ctx.b)
            yield certify_overlap_ii(H, tr.spectrum, eps, delt, c, xi)


def suite_sandwich(ctx: ModelContext, cfg: ExperimentConfig) -> Iterator[BoundCertificate]:
    H = ctx.decomposition.spectrum
    for M in _grid(cfg.M_grid, ctx, default_M_grid):
        yield from certify_eig_sandwich(H, ctx.truncation(M).spectrum, ctx.at(M))


def suite_ground_overlap(ctx: ModelContext, cfg: ExperimentConfig) -> Iterator[BoundCertificate]:
    H = ctx.decomposition.spectrum
    for M in _grid(cfg.M_grid, ctx, default_M_grid):
        yield certify_ground_overlap(H, ctx.truncation(M).spectrum, ctx.at(M))


def _observables(ctx: ModelContext, cfg: ExperimentConfig) -> list:
    """Random unit-norm observables and spectral projections of ``H`` and the environment."""
    if "observables" in ctx.memo:
        return ctx.memo["observables"]
    H, env = ctx.decomposition.spectrum, ctx.decomposition.env_spectrum
    dim = ctx.decomposition.dim
    rng = np.random.default_rng([cfg.seed, ctx.source.model.lattice.n_sites, dim])
    out = []
    for k in range(cfg.observables):
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        out.append((f"random{k}", a / opnorm(a), 1.0))
    s = _step(ctx)
    for label, P in (("proj_env_window", projector(env, Interval.closed(-s, s))),
                     ("proj_H_low", projector(H, Interval.at_most(2 * s)))):
        out.append((label, P.matrix, 1.0 if P.rank else 0.0))
    ctx.memo["observables"] = out
    return out


def _conjugated(ctx: ModelContext, S, label: str, A, lam: float) -> float:
    """Memoized conjugated norm; identical spectra share one entry."""
    key = ("conj", id(S.eigenvectors), hashlib.sha1(S.eigenvalues.tobytes()).hexdigest(), label, lam)
    if key not in ctx.memo:
        ctx.memo[key] = conjugated_norm(S, A, lam)
    return ctx.memo[key]


def _offdiag_pair(ctx, cfg, c, first, second, names, variant) -> Iterator[BoundCertificate]:
    cuts = _grid(cfg.cut_grid, ctx, default_cut_grid)
    for projected, conjugating, roles in ((first, second, names[0]), (second, first, names[1])):
        for label, A, a_norm in _observables(ctx, cfg):
            conj = _conjugated(ctx, conjugating, label, A, c.lam)
            for M_cut, N_cut in cuts:
                cert = certify_offdiag(projected, conjugating, A, M_cut, N_cut, c, variant,
                                       roles=roles, conjugated=conj, A_norm=a_norm)
                cert.params["observable"] = label
                yield cert


def suite_offdiag(ctx: ModelContext, cfg: ExperimentConfig) -> Iterator[BoundCertificate]:
    dec = ctx.decomposition
    yield from _offdiag_pair(ctx, cfg, ctx.constants, dec.spectrum, dec.env_spectrum,
                             ("H|env", "env|H"), "plain")
    for M in _grid(cfg.M_grid, ctx, default_M_grid):
        tr = ctx.truncation(M)
        yield from _offdiag_pair(ctx, cfg, ctx.at(M), tr.spectrum, tr.truncated_env_spectrum,
                                 ("Hbar|envbar", "envbar|Hbar"), "truncated")


def suite_tail(ctx: ModelContext, cfg: ExperimentConfig) -> Iterator[BoundCertificate]:
    dec = ctx.decomposition
    grid = _grid(cfg.tail_grid, ctx, default_tail_grid)
    for eps, N in grid:
        yield certify_tail(dec.spectrum, dec.env_spectrum, eps, N, ctx.constants, "plain")
    for M in _grid(cfg.M_grid, ctx, default_M_grid):
        tr, c = ctx.truncation(M), ctx.at(M)
        for eps, N in grid + tuple((eps, M + 1.0) for eps in sorted({e for e, _ in grid})):
            yield certify_tail(tr.spectrum, tr.truncated_env_spectrum, eps, N, c, "truncated")
        for eps in sorted({e for e, _ in grid}):
            cert = certify_tail(tr.spectrum, dec.env_spectrum, eps, M, c, "truncated")
            yield dataclasses.replace(cert, claim_id="tail-at-cutoff")


def suite_hadamard(ctx: ModelContext, cfg: ExperimentConfig) -> Iterator[BoundCertificate]:
    dec, c = ctx.decomposition, ctx.constants
    x_size = len(ctx.source.split.boundary)
    for frac in cfg.s_fractions:
        s = frac * c.S_X
        for gen, spec, kind in ((dec.full, dec.spectrum, "full"),
                                (dec.env, dec.env_spectrum, "outside")):
            yield from hadamard_series_check(dec.boundary, gen, s, cfg.n_max, c, x_size,
                                             generator_spectrum=spec, kind=kind)


def suite_invariants(ctx: ModelContext, cfg: ExperimentConfig) -> Iterator[BoundCertificate]:
    """Domination, norm cap, environment floor and monotonicity in ``M``."""
    grid = sorted(_grid(cfg.M_grid, ctx, default_M_grid))
    prev = None
    for M in grid:
        tr = ctx.truncation(M)
        tol = INVARIANT_RTOL * tr.scale
        inv = tr.invariants()
        params = {"M": M}
        dom = inv["domination_min_eig"][0]
        yield judge("inv-domination", params, -dom, 0.0, tol=tol, vacuous_at=None)
        yield judge("inv-norm-cap", params, tr.spectrum.norm, ctx.b + M, tol=tol, vacuous_at=None)
        floor = float(tr.env_spectrum.eigenvalues[0])
        yield judge("inv-env-floor", params, -floor, ctx.b, tol=tol, vacuous_at=None)
        tev = tr.truncated_env_spectrum.eigenvalues
        yield judge("inv-truncated-env-range", params, float(tev[-1]), M, tol=tol, vacuous_at=None)
        if prev is not None:
            g = monotone_gap(prev, tr)
            yield judge("inv-monotone", {"M_lo": prev.cutoff_M, "M_hi": M}, -g, 0.0, tol=tol,
                        vacuous_at=None)
        prev = tr


MODEL_SUITE_FUNCS = {
    "overlap-i": suite_overlap_i,
    "overlap-ii": suite_overlap_ii,
    "sandwich": suite_sandwich,
    "ground-overlap": suite_ground_overlap,
    "offdiag": suite_offdiag,
    "tail": suite_tail,
    "hadamard": suite_hadamard,
    "invariants": suite_invariants,
}


def _error_row(claim: str, params: dict, exc: Exception) -> BoundCertificate:
    return BoundCertificate(claim, dict(params), math.nan, math.nan, Status.ERROR, 0.0,
                            f"{type(exc).__name__}: {exc}")


def certificates_for_model(src: ModelSource, cfg: ExperimentConfig,
                           cache: SpectralCache | None = None,
                           suites: tuple | None = None) -> list:
    """Certificates of ``cfg.suite`` (or of each of ``suites``) for one model.

    The spectra are computed once and shared by all suites; errors become
    ``ERROR`` rows.
    """
    solver = eig if cache is None else cache.solver
    out = []
    names = suites or (cfg.suite,)
    try:
        ctx = build_context(src, solver)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return [_error_row(names[0], {}, exc).tagged(src.model_id, src.seed)]
    for name in names:
        try:
            with tolerance_override(cfg.rtol):
                for cert in MODEL_SUITE_FUNCS[name](ctx, cfg):
                    out.append(cert.tagged(src.model_id, src.seed))
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            out.append(_error_row(name, {}, exc).tagged(src.model_id, src.seed))
    return out


@contextmanager
def tolerance_override(rtol: float | None):
    """Temporarily replace the default relative tolerance of :func:`judge`."""
    if rtol is None:
        yield
        return
    old = certify.DEFAULT_RTOL
    certify.DEFAULT_RTOL = rtol
    try:
        yield
    finally:
        certify.DEFAULT_RTOL = old


def _worker(args) -> list:
    src, cfg = args
    cache = SpectralCache(cfg.cache_dir) if cfg.cache_dir else None
    return certificates_for_model(src, cfg, cache)


# --------------------------------------------------------------------------
# non-model suites

def counterexample_rows(cfg: ExperimentConfig) -> tuple:
    """Divergence rows, their certificates and plot triples."""
    if cfg.N_max < cfg.N_min:
        raise ConfigError(f"N_max: must be >= N_min = {cfg.N_min}")
    rows = divergence_scan(odd_range(cfg.N_min, cfg.N_max), cfg.cutoff_M)
    certs, plot = [], []
    for r in rows:
        params = {"N": r.N, "M": cfg.cutoff_M, "method": r.method}
        # the measured norm must reach the witness value
        cert = judge("divergence-lower", params, r.lower_bound, r.measured_norm,
                     tol=1e-8, vacuous_at=None)
        certs.append(cert.tagged(f"ising-N{r.N}"))
        plot += [(r.N, r.lower_bound, "lower_bound"), (r.N, r.measured_norm, "measured_norm"),
                 (r.N, r.akl_rhs, "akl_constant")]
    return rows, certs, plot


def range_trunc_certificates(cfg: ExperimentConfig) -> list:
    out = []
    for alpha in cfg.alphas:
        for ell in cfg.ells:
            for q in cfg.qs:
                for k in range(cfg.decay_seeds):
                    seed = cfg.seed + k
                    mid = f"decay-a{alpha}-l{ell}-q{q}-s{seed}"
                    try:
                        inter, geom = windowed_decay(alpha, ell, q, seed, cfg.window)
                        res = range_truncate(inter, geom)
                        certs = decay_bound_certificate(res)
                    except EffHamError as exc:
                        certs = [_error_row("decay-sum", {"alpha": alpha, "ell": ell, "q": q}, exc)]
                    out += [c.tagged(mid, seed) for c in certs]
    for alpha in cfg.alphas:
        for k in range(cfg.decay_seeds):
            seed = cfg.seed + k
            mid = f"decay10-a{alpha}-s{seed}"
            out += [c.tagged(mid, seed) for c in small_gapped_decay(alpha, seed)]
    for k in range(cfg.synthetic):
        seed = cfg.seed + k
        rng = np.random.default_rng([seed, 7])
        dim = int(rng.integers(8, 33))
        gap = float(rng.uniform(0.5, 4.0))
        H, dH = synthetic_gapped_instance(rng, dim, gap, float(rng.uniform(0.0, 0.49)) * gap)
        certs = gap_stability_certificate(eig(H), dH, gap, {"dim": dim})
        out += [c.tagged(f"synthetic-{seed}", seed) for c in certs]
    return out


def windowed_decay(alpha: float, ell: int, q: int, seed: int, window: int | None = None):
    """Windowed decaying instance; ``window`` overrides the default padding."""
    if window is None:
        return windowed_instance(alpha, ell, q, seed)
    geom = TruncationGeometry.minimal(ell, q)
    reach = window - q * ell - ell
    if reach < 1:
        raise ConfigError(f"window: padding {window} leaves no room beyond q*l + l = {q * ell + ell}")
    inter = decaying_chain(range(geom.a - window, geom.b + window + 1), alpha, seed, max_range=reach)
    return inter, geom


def small_gapped_decay(alpha: float, seed: int, n_sites: int = 10, field: float = 2.0) -> list:
    """Decaying chain on ``n_sites`` qubits with a gap-opening field, truncated densely."""
    inter = decaying_chain(range(n_sites), alpha, seed, field=field)
    geom = TruncationGeometry(2, n_sites - 3, 1, 1)
    res = range_truncate(inter, geom, require_window=False)
    H = eig(assemble(inter.interaction.terms, inter.lattice), label="H")
    out = decay_bound_certificate(res)
    out += gap_stability_certificate(H, res.deltaH, None, {"alpha": alpha, "field": field})
    return out


# --------------------------------------------------------------------------
# driver

def _dump_bundle(root: Path, cfg: ExperimentConfig, cert: BoundCertificate,
                 src: ModelSource | None) -> Path:
    d = root / "repro" / (cert.model_id or "run")
    d.mkdir(parents=True, exist_ok=True)
    if src is not None:
        write_model(d / "model.json", src.model)
    bundle = {"config": cfg.hash_fields(), "certificate": {
        "claim_id": cert.claim_id, "params": {k: _jsonable(v) for k, v in cert.params.items()},
        "lhs": cert.lhs, "rhs": cert.rhs, "tolerance": cert.tolerance, "note": cert.note,
        "model_id": cert.model_id, "seed": cert.seed}}
    (d / "failure.json").write_text(json.dumps(bundle, indent=1, sort_keys=True, default=str) + "\n")
    return d


def run_suite(cfg: ExperimentConfig) -> RunManifest:
    """Run a suite, write ``certificates.csv`` and ``manifest.json`` under ``cfg.out_dir``."""
    t0 = time.perf_counter()
    out = Path(cfg.out_dir)
    man = RunManifest(cfg.config_hash, __version__, cfg.suite)
    extra = {}
    if cfg.suite in MODEL_SUITES:
        sources = model_sources(cfg)
        batches = _model_batches(sources, cfg)
    elif cfg.suite == "counterexample":
        rows, certs, plot = counterexample_rows(cfg)
        extra["plot"] = plot
        extra["divergence"] = rows
        batches = iter([(None, certs)])
    else:
        batches = iter([(None, range_trunc_certificates(cfg))])
    out.mkdir(parents=True, exist_ok=True)
    csv_rows = []
    for src, certs in batches:
        for cert in certs:
            man.add(cert)
            csv_rows.append(certificate_row(cert))
            if cert.status is Status.FAIL and cfg.halt_on_fail:
                man.halted = True
                man.repro_dir = str(_dump_bundle(out, cfg, cert, src))
                break
        if man.halted:
            break
    csv_path = out / "certificates.csv"
    write_csv(csv_path, csv_rows)
    man.csv_path = str(csv_path)
    if "plot" in extra:
        write_plot_data(out / "plot_data.csv", extra["plot"])
        write_divergence_csv(out / "divergence.csv", extra["divergence"])
    man.wall_time = time.perf_counter() - t0
    (out / "manifest.json").write_text(man.to_json(), encoding="utf-8")
    return man


def _model_batches(sources: list, cfg: ExperimentConfig):
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            for src, certs in zip(sources, ex.map(_worker, [(s, cfg) for s in sources])):
                yield src, certs
        return
    cache = SpectralCache(cfg.cache_dir) if cfg.cache_dir else None
    for src in sources:
        yield src, certificates_for_model(src, cfg, cache)


def write_divergence_csv(path, rows) -> None:
    header = ("N", "lower_bound", "measured_norm", "akl_rhs", "crossed", "method",
              "witness_residual")
    write_csv(path, ([r.N, _num(r.lower_bound), _num(r.measured_norm), _num(r.akl_rhs),
                      str(r.crossed).lower(), r.method, _num(r.witness_residual)] for r in rows),
              header=header)


def summarize(rows: list) -> dict:
    """Tallies by claim and status from parsed CSV rows."""
    by_claim: dict = {}
    total: dict = {}
    for r in rows:
        c = by_claim.setdefault(r["claim_id"], {})
        c[r["status"]] = c.get(r["status"], 0) + 1
        total[r["status"]] = total.get(r["status"], 0) + 1
    n = len(rows)
    return {"rows": n, "by_claim": by_claim, "total": total,
            "informative_fraction": total.get("PASS", 0) / n if n else 0.0}
