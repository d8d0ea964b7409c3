"""Model files and binary operator containers.

Model files are JSON documents::

    {
      "format": "effham-model",
      "version": 1,
      "name": <string>,
      "nu": <int>,                      # lattice dimension
      "local_dim": <int>,
      "sites": [[x1, ..., x_nu], ...],  # lattice order defines the basis order
      "terms": [
        {"support": [[...], ...],       # sites of the term, tensor order
         "entries": [[re, im], ...]}    # row-major, d^|support| squared pairs
      ],
      "meta": {...},                    # optional, free-form
      "constants": {"range_r": <int>, "strength_j": <float>, "locality_N": <int>}
    }

Floats are written with ``repr`` precision, so a write-read cycle returns
bit-identical matrices.  ``constants`` is optional on input and, when
present, must match the constants derived from the terms.

Binary containers hold one operator or one spectrum::

    magic   4 bytes   b"EFHM"
    version uint16
    kind    uint8     0 = operator, 1 = spectrum
    endian  1 byte    b"<" or b">"
    dim     uint64
    payload           operator: dim*dim complex128, row-major
                      spectrum: dim float64 eigenvalues, then the
                      eigenvector matrix as dim*dim complex128, row-major
    digest  32 bytes  sha256 of everything before it
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from pathlib import Path

import numpy as np

from .errors import CacheCorruptionError, ConfigError
from .lattice import Interaction, InteractionConstants, Lattice, Model, Term, derive_constants
from .operators import HermitianOperator, SpectralData, eig

MODEL_FORMAT = "effham-model"
MODEL_VERSION = 1
MAGIC = b"EFHM"
CONTAINER_VERSION = 1
KIND_OPERATOR, KIND_SPECTRUM = 0, 1
_HEADER = "4sHBcQ"


def constants_dict(c: InteractionConstants) -> dict:
    return {"range_r": c.range_r, "strength_j": c.strength_j, "locality_N": c.locality_N}


def model_to_dict(model: Model, constants: InteractionConstants | None = None) -> dict:
    lat = model.lattice
    terms = []
    for t in model.interaction:
        m = np.asarray(t.matrix, dtype=complex).ravel()
        terms.append({"support": [list(s) for s in t.support],
                      "entries": [[float(z.real), float(z.imag)] for z in m]})
    doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "name": model.name,
           "nu": lat.nu, "local_dim": lat.local_dim,
           "sites": [list(s) for s in lat.sites], "terms": terms, "meta": dict(model.meta)}
    if constants is not None:
        doc["constants"] = constants_dict(constants)
    return doc


def dumps_model(model: Model, constants: InteractionConstants | None = None) -> str:
    return json.dumps(model_to_dict(model, constants), indent=1, sort_keys=True) + "\n"


def _field(doc: dict, key: str, kind):
    if key not in doc:
        raise ConfigError(f"model file: missing field {key!r}")
    val = doc[key]
    if not isinstance(val, kind) or isinstance(val, bool):
        raise ConfigError(f"model file: field {key!r} has type {type(val).__name__}")
    return val


def model_from_dict(doc: dict) -> tuple:
    """Parse a model document into ``(model, stored_constants_or_None)``."""
    if doc.get("format") != MODEL_FORMAT:
        raise ConfigError(f"model file: format must be {MODEL_FORMAT!r}")
    if doc.get("version") != MODEL_VERSION:
        raise ConfigError(f"model file: unsupported version {doc.get('version')!r}")
    nu = _field(doc, "nu", int)
    d = _field(doc, "local_dim", int)
    sites = [tuple(s) for s in _field(doc, "sites", list)]
    if any(len(s) != nu for s in sites):
        raise ConfigError(f"model file: every site needs {nu} coordinates")
    lat = Lattice(tuple(sites), d)
    terms = []
    for k, t in enumerate(_field(doc, "terms", list)):
        support = [tuple(s) for s in t["support"]]
        n = d ** len(support)
        entries = t["entries"]
        if len(entries) != n * n:
            raise ConfigError(f"model file: term {k} has {len(entries)} entries, expected {n * n}")
        m = np.array([complex(re, im) for re, im in entries]).reshape(n, n)
        terms.append(Term(tuple(support), m))
    model = Model(lat, Interaction(tuple(terms)), name=doc.get("name", "model"),
                  meta=dict(doc.get("meta", {})))
    stored = None
    if "constants" in doc:
        c = doc["constants"]
        stored = InteractionConstants(int(c["range_r"]), float(c["strength_j"]), int(c["locality_N"]))
    return model, stored


def loads_model(text: str, check_constants: bool = True) -> tuple:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model file: invalid JSON ({exc})") from None
    model, stored = model_from_dict(doc)
    if check_constants and stored is not None:
        derived = derive_constants(model.interaction, model.lattice)
        if (stored.range_r != derived.range_r or stored.locality_N != derived.locality_N
                or not math.isclose(stored.strength_j, derived.strength_j, rel_tol=1e-12)):
            raise ConfigError(f"model file: stored constants {stored} differ from derived {derived}")
    return model, stored


def write_model(path, model: Model, constants: InteractionConstants | None = None) -> Path:
    path = Path(path)
    path.write_text(dumps_model(model, constants), encoding="utf-8", newline="\n")
    return path


def read_model(path, check_constants: bool = True) -> tuple:
    return loads_model(Path(path).read_text(encoding="utf-8"), check_constants)


# --------------------------------------------------------------------------
# binary container

def _pack(kind: int, dim: int, payload: bytes) -> bytes:
    head = struct.pack("<" + _HEADER, MAGIC, CONTAINER_VERSION, kind, b"<", dim)
    body = head + payload
    return body + hashlib.sha256(body).digest()


def pack_operator(op) -> bytes:
    m = np.ascontiguousarray(op.matrix if isinstance(op, HermitianOperator) else op,
                             dtype="<c16")
    return _pack(KIND_OPERATOR, m.shape[0], m.tobytes())


def pack_spectrum(S: SpectralData) -> bytes:
    ev = np.ascontiguousarray(S.eigenvalues, dtype="<f8")
    vec = np.ascontiguousarray(S.eigenvectors, dtype="<c16")
    return _pack(KIND_SPECTRUM, S.dim, ev.tobytes() + vec.tobytes())


def _unpack(blob: bytes, kind: int) -> tuple:
    hsize = struct.calcsize("<" + _HEADER)
    if len(blob) < hsize + 32:
        raise CacheCorruptionError("container truncated")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CacheCorruptionError("container checksum mismatch")
    endian = body[7:8]
    if endian not in (b"<", b">"):
        raise CacheCorruptionError(f"bad endianness tag {endian!r}")
    magic, version, got_kind, _, dim = struct.unpack(endian.decode() + _HEADER, body[:hsize])
    if magic != MAGIC:
        raise CacheCorruptionError("bad magic")
    if version != CONTAINER_VERSION:
        raise CacheCorruptionError(f"unsupported container version {version}")
    if got_kind != kind:
        raise CacheCorruptionError(f"container holds kind {got_kind}, expected {kind}")
    return endian.decode(), dim, body[hsize:]


def _real_if_exact(m: np.ndarray) -> np.ndarray:
    m = m.astype(complex)
    return m.real.copy() if not np.any(m.imag) else m


def unpack_operator(blob: bytes, label: str | None = None) -> HermitianOperator:
    e, dim, payload = _unpack(blob, KIND_OPERATOR)
    if len(payload) != 16 * dim * dim:
        raise CacheCorruptionError("operator payload has the wrong size")
    m = _real_if_exact(np.frombuffer(payload, dtype=e + "c16").reshape(dim, dim))
    return HermitianOperator(m, label)


def unpack_spectrum(blob: bytes, label: str | None = None) -> SpectralData:
    e, dim, payload = _unpack(blob, KIND_SPECTRUM)
    if len(payload) != 8 * dim + 16 * dim * dim:
        raise CacheCorruptionError("spectrum payload has the wrong size")
    ev = np.frombuffer(payload[:8 * dim], dtype=e + "f8").astype(float)
    vec = _real_if_exact(np.frombuffer(payload[8 * dim:], dtype=e + "c16").reshape(dim, dim))
    return SpectralData(ev, vec, label)


def content_key(matrix: np.ndarray, extra: str = "") -> str:
    """Hash of the operator bytes (as little-endian complex128) and a tag."""
    m = np.ascontiguousarray(matrix, dtype="<c16")
    h = hashlib.sha256(struct.pack("<Q", m.shape[0]) + m.tobytes())
    h.update(extra.encode())
    return h.hexdigest()


class SpectralCache:
    """Spectra keyed by operator content hash, in memory and optionally on disk."""

    def __init__(self, root=None):
        self.root = None if root is None else Path(root)
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
        self._memo: dict = {}
        self.hits = 0
        self.misses = 0

    def path(self, key: str) -> Path:
        return self.root / f"{key}.spec"

    def get_or_compute(self, op: HermitianOperator, compute, extra: str = "") -> SpectralData:
        key = content_key(op.matrix, extra)
        if key in self._memo:
            self.hits += 1
            return self._memo[key]
        if self.root is not None and self.path(key).exists():
            self.hits += 1
            S = unpack_spectrum(self.path(key).read_bytes(), op.label)
        else:
            self.misses += 1
            S = compute(op)
            if self.root is not None:
                tmp = self.path(key).with_suffix(".tmp")
                tmp.write_bytes(pack_spectrum(S))
                tmp.replace(self.path(key))
        self._memo[key] = S
        return S

    def solver(self, H, label: str | None = None) -> SpectralData:
        """Drop-in replacement for :func:`effham.operators.eig`."""
        op = H if isinstance(H, HermitianOperator) else HermitianOperator(H, label)
        return self.get_or_compute(op, lambda o: eig(o, label=label))
