"""Seeded random nearest-neighbour chains used as the certification corpus.

Each model is a qubit chain with one random Hermitian two-site term per
bond, rescaled so that the one-site strength sum ``j`` equals a target
drawn uniformly from ``[j_min, j_max]``.  The cut sits in the middle of the
chain with the minimal two-site boundary region.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import (
    Interaction,
    InteractionConstants,
    Lattice,
    Model,
    RegionSplit,
    Term,
    derive_constants,
)
from .serialize import dumps_model, write_model


@dataclass(frozen=True)
class CorpusSpec:
    seed: int
    count: int
    site_counts: tuple = (8, 9, 10)
    j_range: tuple = (1.0, 4.0)
    complex_max_sites: int = 9

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"count must be nonnegative, got {self.count}")
        lo, hi = self.j_range
        if not 0 < lo <= hi:
            raise ValueError(f"bad j_range {self.j_range}")


@dataclass(frozen=True)
class CorpusModel:
    model_id: str
    seed: int
    index: int
    model: Model
    constants: InteractionConstants

    @property
    def split(self) -> RegionSplit:
        return middle_split(self.model.lattice)


def middle_split(lat: Lattice) -> RegionSplit:
    half = lat.n_sites // 2
    return RegionSplit.minimal(lat, lat.sites[:half], 1)


def random_bond(rng: np.random.Generator, complex_entries: bool) -> np.ndarray:
    a = rng.normal(size=(4, 4))
    if complex_entries:
        a = a + 1j * rng.normal(size=(4, 4))
    return 0.5 * (a + a.conj().T)


def random_chain(seed: int, index: int, n_sites: int, j_target: float,
                 complex_entries: bool) -> tuple:
    """Chain model and its constants; all randomness comes from ``(seed, index)``."""
    rng = np.random.default_rng([seed, index])
    lat = Lattice.chain(n_sites)
    bonds = [random_bond(rng, complex_entries) for _ in range(n_sites - 1)]
    raw = derive_constants(
        Interaction(tuple(Term(((i + 1,), (i + 2,)), b) for i, b in enumerate(bonds))), lat)
    scale = j_target / raw.strength_j
    inter = Interaction(tuple(Term(((i + 1,), (i + 2,)), scale * b) for i, b in enumerate(bonds)))
    model = Model(lat, inter, name=f"nn-s{seed}-i{index}",
                  meta={"seed": seed, "index": index, "j_target": j_target,
                        "complex": complex_entries})
    return model, derive_constants(inter, lat)


def generate_corpus(spec: CorpusSpec, out_dir=None) -> list:
    """Build ``spec.count`` models; with ``out_dir`` also write one model file each."""
    meta_rng = np.random.default_rng(spec.seed)
    out = []
    for i in range(spec.count):
        n = int(spec.site_counts[i % len(spec.site_counts)])
        j_target = float(meta_rng.uniform(*spec.j_range))
        cplx = bool(meta_rng.random() < 0.5) and n <= spec.complex_max_sites
        model, consts = random_chain(spec.seed, i, n, j_target, cplx)
        cm = CorpusModel(model.name, spec.seed, i, model, consts)
        if out_dir is not None:
            write_model(Path(out_dir) / f"{cm.model_id}.json", model, consts)
        out.append(cm)
    return out


def model_checksum(cm: CorpusModel) -> str:
    return hashlib.sha256(dumps_model(cm.model, cm.constants).encode()).hexdigest()
