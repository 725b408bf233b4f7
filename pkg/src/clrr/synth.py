"""Seeded synthetic data: unions of linear subspaces with sample corruption.

Random numbers come from ``numpy.random.Generator(PCG64(seed))``.  Draws
happen in a fixed order so a dataset is fully determined by its
:class:`SynthSpec`:

1. for each class in order, a ``d x r_c`` Gaussian matrix whose QR factor
   gives the orthonormal basis, then the ``r_c x n_c`` standard normal
   coefficients (shifted by ``coefficient_mean``);
2. the ``d x n`` additive noise (drawn even when ``noise_sigma == 0``);
3. the corrupted column indices (a sorted sample without replacement);
4. the corruption values, ``corruption_scale`` times standard normal.

:func:`gen_regression` then draws the ``d x k`` planted map and the
``k x n`` target noise from the same stream.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .regularizers import LabelVector

GENERATOR = "numpy.PCG64"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class SynthSpec:
    ambient_dim: int
    subspace_dims: tuple[int, ...]
    samples_per_class: tuple[int, ...]
    noise_sigma: float = 0.0
    corruption_fraction: float = 0.0
    corruption_scale: float = 1.0
    seed: int = 0
    # "column" replaces whole samples; "entry" replaces individual entries
    corruption: str = "column"
    # offset added to every subspace coefficient; nonzero values give the
    # classes distinct means
    coefficient_mean: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "subspace_dims", tuple(int(r) for r in self.subspace_dims))
        object.__setattr__(
            self, "samples_per_class", tuple(int(c) for c in self.samples_per_class)
        )
        if len(self.subspace_dims) != len(self.samples_per_class):
            raise ValueError("subspace_dims and samples_per_class differ in length")
        if not self.subspace_dims:
            raise ValueError("need at least one class")
        if self.ambient_dim < 1:
            raise ValueError("ambient_dim must be positive")
        if any(r < 1 or r > self.ambient_dim for r in self.subspace_dims):
            raise ValueError("subspace dimensions must lie in [1, ambient_dim]")
        if any(c < 1 for c in self.samples_per_class):
            raise ValueError("every class needs at least one sample")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if not 0 <= self.corruption_fraction <= 1:
            raise ValueError("corruption_fraction must lie in [0, 1]")
        if not self.corruption_scale > 0:
            raise ValueError("corruption_scale must be positive")
        if self.corruption not in ("column", "entry"):
            raise ValueError(f"unknown corruption model {self.corruption!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit value")

    @property
    def n(self):
        return sum(self.samples_per_class)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["subspace_dims"] = list(self.subspace_dims)
        d["samples_per_class"] = list(self.samples_per_class)
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown synth keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class SynthData:
    x: np.ndarray
    clean_x: np.ndarray
    labels: LabelVector
    corrupted_columns: np.ndarray
    bases: tuple = field(repr=False)
    spec: SynthSpec | None = None

    def digest(self):
        return dataset_hash(self.x, self.labels.index)


@dataclass(frozen=True)
class RegressionData:
    x: np.ndarray
    clean_x: np.ndarray
    targets: np.ndarray
    planted_map: np.ndarray
    labels: LabelVector
    corrupted_columns: np.ndarray
    spec: SynthSpec | None = None


def dataset_hash(*arrays):
    """SHA-256 over the little-endian bytes and shapes of `arrays`."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(json.dumps([a.dtype.str, list(a.shape)]).encode())
        h.update(a.astype(a.dtype.newbyteorder("<"), copy=False).tobytes())
    return h.hexdigest()


def _draw(spec, rng):
    d = spec.ambient_dim
    blocks, bases, labels = [], [], []
    for c, (r, nc) in enumerate(zip(spec.subspace_dims, spec.samples_per_class)):
        q, _ = np.linalg.qr(rng.standard_normal((d, r)))
        bases.append(q)
        blocks.append(q @ (spec.coefficient_mean + rng.standard_normal((r, nc))))
        labels.extend([c] * nc)
    clean = np.hstack(blocks)
    n = clean.shape[1]
    x = clean + spec.noise_sigma * rng.standard_normal((d, n))
    if spec.corruption == "column":
        count = int(round(spec.corruption_fraction * n))
        cols = np.sort(rng.choice(n, size=count, replace=False))
        x[:, cols] = spec.corruption_scale * rng.standard_normal((d, count))
    else:
        count = int(round(spec.corruption_fraction * d * n))
        flat = np.sort(rng.choice(d * n, size=count, replace=False))
        rows, cols_all = np.unravel_index(flat, (d, n))
        x[rows, cols_all] = spec.corruption_scale * rng.standard_normal(count)
        cols = np.unique(cols_all)
    labels = LabelVector(np.array(labels, dtype=np.int64))
    return x, clean, labels, cols.astype(np.int64), tuple(bases)


def gen_union_subspaces(spec):
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    x, clean, labels, cols, bases = _draw(spec, rng)
    return SynthData(x, clean, labels, cols, bases, spec)


def gen_regression(spec, target_dim):
    """Union-of-subspaces inputs with linear targets ``W^T clean_x + noise``."""
    if target_dim < 1:
        raise ValueError("target_dim must be positive")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    x, clean, labels, cols, _ = _draw(spec, rng)
    w = rng.standard_normal((spec.ambient_dim, target_dim))
    targets = w.T @ clean + spec.noise_sigma * rng.standard_normal((target_dim, clean.shape[1]))
    return RegressionData(x, clean, targets, w, labels, cols, spec)
