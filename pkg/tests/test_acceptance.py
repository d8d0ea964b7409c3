"""Acceptance criteria 1-9 at their stated tolerances.

Each test records one verdict line, printed in the ``acceptance`` section of
the pytest terminal summary.
"""
import math
import time
from collections import Counter

import numpy as np
import pytest

from effham.certify import Status, overlap_lemma_check
from effham.corpus import CorpusSpec, generate_corpus
from effham.ising import (
    akl_rhs_constant,
    build_instance,
    crossing_N,
    dense_divergence_norm,
    divergence_scan,
    ising_bond,
    odd_range,
)
from effham.lattice import Interaction, Lattice, Model, RegionSplit, Term
from effham.operators import Interval, eig, projector
from effham.runner import (
    MODEL_SUITE_FUNCS,
    ExperimentConfig,
    ModelSource,
    build_context,
    range_trunc_certificates,
)

from conftest import random_hermitian, record

pytestmark = pytest.mark.slow

CORPUS_SEED = 2024
CORPUS_SIZE = 100
SHARED_SUITES = ("overlap-i", "overlap-ii", "sandwich", "ground-overlap", "invariants", "tail")
OVERLAP_SUITES = ("overlap-i", "overlap-ii")


def tally(certs):
    return Counter(str(c.status) for c in certs)


def fmt(counts):
    return ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(CorpusSpec(CORPUS_SEED, CORPUS_SIZE))


@pytest.fixture(scope="module")
def corpus_run(corpus):
    """One pass of the model suites over the full corpus, sharing each model's spectra."""
    cfg = ExperimentConfig(suite="overlap-i", seed=CORPUS_SEED, count=CORPUS_SIZE)
    by_suite = {name: [] for name in SHARED_SUITES}
    overlap_time = 0.0
    for cm in corpus:
        src = ModelSource(cm.model_id, cm.seed, cm.model, cm.split)
        t0 = time.perf_counter()
        ctx = build_context(src)
        overlap_time += time.perf_counter() - t0
        for name in SHARED_SUITES:
            t0 = time.perf_counter()
            certs = [c.tagged(cm.model_id, cm.seed) for c in MODEL_SUITE_FUNCS[name](ctx, cfg)]
            if name in OVERLAP_SUITES:
                overlap_time += time.perf_counter() - t0
            by_suite[name] += certs
    return by_suite, overlap_time


def test_criterion_1_dense_reproduction():
    t0 = time.perf_counter()
    measured, resid = dense_divergence_norm(5, 10.0)
    elapsed = time.perf_counter() - t0
    ok = measured >= 6.0 - 1e-8 and resid <= 1e-10 and elapsed <= 10.0
    record(1, ok, f"norm={measured:.12g} (>= 6), residual={resid:.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_2_divergence_crossing():
    M = 10.0
    Ns = odd_range(5, 10_000)
    t0 = time.perf_counter()
    rows = divergence_scan(Ns, M, dense_sites=0, diagonal_sites=0)
    elapsed = time.perf_counter() - t0
    lows = [r.lower_bound for r in rows]
    exact = all(r.lower_bound == 4 * r.N - 4 - M for r in rows)
    slope = all(b - a == 8 for a, b in zip(lows, lows[1:]))  # N steps by 2
    first = next(r.N for r in rows if r.crossed)
    pinned = crossing_N(M, akl_rhs_constant(build_instance(5, M).constants))
    checks = divergence_scan([5, 7], M)
    agree = all(abs(r.measured_norm - r.lower_bound) <= 1e-9 and r.witness_residual <= 1e-10
                for r in checks)
    ok = exact and slope and first == pinned == 2763 and agree and elapsed <= 1.0
    record(2, ok, f"{len(rows)} odd N to {Ns[-1]} in {elapsed:.3f}s, slope 4, N*={first}, "
                  f"cross-checks {[(r.N, r.method, r.measured_norm) for r in checks]}")
    assert ok


def test_criterion_3_overlap_bounds(corpus_run):
    by_suite, elapsed = corpus_run
    certs = by_suite["overlap-i"] + by_suite["overlap-ii"]
    counts = tally(certs)
    models = {c.model_id for c in certs}
    points = Counter((c.model_id, c.claim_id, c.params["M"]) for c in certs
                     if c.claim_id in ("overlap-i", "overlap-ii"))
    informative = counts.get("PASS", 0) / len(certs)
    ok = (counts.get("FAIL", 0) == 0 and counts.get("ERROR", 0) == 0 and len(models) >= 100
          and min(points.values()) >= 25 and min(Counter(k[0] for k in points).values()) >= 10
          and informative >= 0.10 and elapsed <= 600)
    record(3, ok, f"{len(models)} models, {len(certs)} certificates ({fmt(counts)}), "
                  f"informative {informative:.1%}, {elapsed:.0f}s")
    assert ok


def test_criterion_4_eigenvalues_and_ground_state(corpus_run):
    by_suite, _ = corpus_run
    sand = by_suite["sandwich"]
    upper = all(c.params["epsbar_j"] <= c.params["eps_j"] + 1e-9 for c in sand)
    lower = all(c.lhs <= c.rhs + 1e-8 for c in sand)
    ground = by_suite["ground-overlap"]
    gs, gg = tally(sand), tally(ground)
    ok = (upper and lower and gs.get("FAIL", 0) == 0 and gg.get("FAIL", 0) == 0
          and gg.get("ERROR", 0) == 0 and gg.get("PASS", 0) + gg.get("VACUOUS", 0) > 0)
    record(4, ok, f"sandwich {len(sand)} levels ({fmt(gs)}); ground overlap ({fmt(gg)})")
    assert ok


def test_criterion_5_lemma_suite(corpus, corpus_run):
    by_suite, _ = corpus_run
    cfg = ExperimentConfig(suite="offdiag", seed=CORPUS_SEED)
    eights = [cm for cm in corpus if cm.model.lattice.n_sites == 8]
    picked = eights + [next(cm for cm in corpus if cm.model.lattice.n_sites == n) for n in (9, 10)]
    off = []
    for cm in picked:
        ctx = build_context(ModelSource(cm.model_id, cm.seed, cm.model, cm.split))
        off += list(MODEL_SUITE_FUNCS["offdiag"](ctx, cfg))
    tail = by_suite["tail"]
    kinds = {c.params["observable"] for c in off}
    claims = {c.claim_id for c in off + tail}
    co, ct = tally(off), tally(tail)
    ok = (co.get("FAIL", 0) + ct.get("FAIL", 0) + co.get("ERROR", 0) + ct.get("ERROR", 0) == 0
          and {"random0", "proj_env_window", "proj_H_low"} <= kinds
          and {"offdiag-plain", "offdiag-truncated", "tail-plain", "tail-truncated"} <= claims
          and ct.get("VACUOUS-BY-STRUCTURE", 0) > 0)
    record(5, ok, f"offdiag on {len(picked)} models ({fmt(co)}); tail on {CORPUS_SIZE} models "
                  f"({fmt(ct)})")
    assert ok


def test_criterion_6_overlap_lemma():
    rng = np.random.default_rng(6)
    applicable = agree = 0
    bad = []
    for k in range(1000):
        n = int(rng.integers(8, 65))
        if k % 4 == 0:
            # unrelated random subspaces
            P = projector(eig(random_hermitian(rng, n)), Interval.at_most(rng.normal()))
            Q = projector(eig(random_hermitian(rng, n)), Interval.at_most(rng.normal()))
        else:
            # spectral projections of nearby operators, mostly with c < 1
            H = random_hermitian(rng, n)
            Hp = H + rng.uniform(0.01, 0.5) * random_hermitian(rng, n)
            p = float(rng.normal())
            P = projector(eig(Hp), Interval.at_most(p))
            Q = projector(eig(H), Interval.below(p + rng.uniform(0.2, 4.0)))
        chk = overlap_lemma_check(P, Q)
        c_svd = np.linalg.svd(P.matrix - Q.matrix @ P.matrix, compute_uv=False)[0]
        if P.rank and Q.rank:
            sv = np.linalg.svd(Q.matrix @ P.basis, compute_uv=False)
            s_min = sv[-1] if Q.rank >= P.rank else 0.0
            same = abs(c_svd - chk.c) <= 1e-10 and abs(s_min - chk.min_ratio) <= 1e-10
        else:
            same = abs(c_svd - chk.c) <= 1e-10
        agree += same
        if chk.applicable:
            applicable += 1
            if not (P.rank <= Q.rank and chk.min_ratio >= math.sqrt(1 - chk.c ** 2) - 1e-8):
                bad.append(k)
        elif chk.c < 1 - 1e-8:
            bad.append(k)
    ok = not bad and agree == 1000 and applicable > 0
    record(6, ok, f"1000 pairs, {applicable} with c < 1, SVD agreement {agree}/1000, "
                  f"violations {len(bad)}")
    assert ok


def ising_chain_source(n_sites):
    lat = Lattice.chain(n_sites)
    inter = Interaction(tuple(Term(((i,), (i + 1,)), ising_bond()) for i in range(1, n_sites)))
    split = RegionSplit.minimal(lat, lat.sites[: n_sites // 2], 1)
    return ModelSource(f"ising-{n_sites}", None, Model(lat, inter, name=f"ising-{n_sites}"), split)


def test_criterion_7_hadamard(corpus):
    cfg = ExperimentConfig(suite="hadamard", s_fractions=(0.5,), n_max=20)
    sources = [ising_chain_source(8), ising_chain_source(10)]
    for n in (8, 9):
        cm = next(cm for cm in corpus if cm.model.lattice.n_sites == n)
        sources.append(ModelSource(cm.model_id, cm.seed, cm.model, cm.split))
    certs = []
    for src in sources:
        certs += list(MODEL_SUITE_FUNCS["hadamard"](build_context(src), cfg))
    counts = tally(certs)
    sums = [c for c in certs if c.claim_id == "hadamard-sum"]
    ratio = max(c.params["tail_ratio"] for c in sums)
    orders = max(c.params["n"] for c in certs if c.claim_id == "hadamard-term")
    ok = (counts.get("FAIL", 0) == 0 and counts.get("ERROR", 0) == 0 and orders == 20
          and ratio <= 0.5 + 1e-6 and all(c.params["s"] == c.params["S_X"] / 2 for c in sums))
    record(7, ok, f"{len(sources)} models, {len(certs)} certificates ({fmt(counts)}), "
                  f"max tail ratio {ratio:.4f}")
    assert ok


def test_criterion_8_range_truncation():
    cfg = ExperimentConfig(suite="range-trunc", alphas=(2.5, 3.0, 4.0), ells=(2, 4, 8),
                           qs=(1, 2, 3), decay_seeds=2, synthetic=1000, seed=0)
    t0 = time.perf_counter()
    certs = range_trunc_certificates(cfg)
    elapsed = time.perf_counter() - t0
    chain = [c for c in certs if c.claim_id.startswith("decay-")]
    gaps = [c for c in certs if c.model_id.startswith("synthetic-")]
    cc, cg = tally(chain), tally(gaps)
    sums = [c for c in chain if c.claim_id == "decay-sum"]
    gap_models = {c.model_id for c in gaps}
    bundle = {"gap-inclusion", "gap-rank", "gap-fidelity", "gap-distance"}
    all_bundle = all(any(c.claim_id == b and c.model_id == m and c.passed for c in gaps)
                     for m in list(gap_models)[:50] for b in bundle)
    opnorm_rows = [c for c in chain if c.claim_id == "decay-opnorm" and c.status is Status.PASS]
    ok = (cc.get("FAIL", 0) + cg.get("FAIL", 0) + cc.get("ERROR", 0) + cg.get("ERROR", 0) == 0
          and len(sums) >= 27 * 2 and all(c.status is Status.PASS for c in sums)
          and len(gap_models) == 1000 and cg.get("SKIPPED", 0) == 0 and all_bundle
          and opnorm_rows and elapsed <= 300)
    record(8, ok, f"decay chain {len(chain)} rows ({fmt(cc)}); gap bundle on "
                  f"{len(gap_models)} instances ({fmt(cg)}); {elapsed:.0f}s")
    assert ok


def test_criterion_9_invariants(corpus_run):
    by_suite, _ = corpus_run
    certs = by_suite["invariants"]
    counts = tally(certs)
    claims = {c.claim_id for c in certs}
    ok = (counts.get("FAIL", 0) == 0 and counts.get("ERROR", 0) == 0
          and len({c.model_id for c in certs}) == CORPUS_SIZE
          and {"inv-domination", "inv-norm-cap", "inv-env-floor", "inv-monotone"} <= claims)
    record(9, ok, f"{len(certs)} invariant checks over {CORPUS_SIZE} models ({fmt(counts)})")
    assert ok
