"""Graph and scatter Laplacians used as the constraint matrix ``L``.

All builders return a :class:`ConstraintMatrix`, which checks symmetry and
positive semidefiniteness on construction.  The solver's default is the
between-class Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .matrix import as_matrix

KINDS = ("within", "between", "knn", "centering", "custom")


class NotPsdError(ValueError):
    """A constraint matrix failed the symmetry or semidefiniteness check."""


@dataclass(frozen=True)
class LabelVector:
    """Class labels of ``n`` samples mapped onto indices ``0..k-1``.

    ``classes`` keeps the original identifiers in sorted order, so
    ``classes[index[i]]`` is the label of sample ``i``.
    """

    index: np.ndarray
    classes: tuple = field(default=())

    def __post_init__(self):
        idx = np.asarray(self.index, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("labels must be a non-empty 1-D sequence")
        k = len(self.classes) if self.classes else int(idx.max()) + 1
        if idx.min() < 0 or idx.max() >= k:
            raise ValueError(f"label indices must lie in [0, {k})")
        if np.any(np.bincount(idx, minlength=k) == 0):
            raise ValueError("every class needs at least one sample")
        object.__setattr__(self, "index", idx)
        if not self.classes:
            object.__setattr__(self, "classes", tuple(range(k)))

    @classmethod
    def from_labels(cls, labels):
        """Build from arbitrary hashable, sortable class identifiers."""
        labels = list(labels)
        classes = tuple(sorted(set(labels)))
        lookup = {c: i for i, c in enumerate(classes)}
        return cls(np.array([lookup[c] for c in labels], dtype=np.int64), classes)

    @property
    def n(self):
        return int(self.index.size)

    @property
    def class_count(self):
        return len(self.classes)

    @property
    def class_sizes(self):
        return np.bincount(self.index, minlength=self.class_count)

    def labels(self):
        return [self.classes[i] for i in self.index]

    def indicator(self):
        """``k x n`` one-hot matrix with ``Y[c, i] = 1`` for sample ``i`` in class ``c``."""
        y = np.zeros((self.class_count, self.n))
        y[self.index, np.arange(self.n)] = 1.0
        return y


def _as_label_vector(y):
    return y if isinstance(y, LabelVector) else LabelVector.from_labels(y)


@dataclass(frozen=True)
class ConstraintMatrix:
    l: np.ndarray
    kind: str = "custom"
    psd_rtol: float = 1e-8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        l = as_matrix(self.l, "constraint matrix")
        n = l.shape[0]
        if l.shape != (n, n):
            raise NotPsdError(f"constraint matrix must be square, got {l.shape}")
        scale = max(np.max(np.abs(l), initial=0.0), 1.0)
        if np.max(np.abs(l - l.T), initial=0.0) > 1e-12 * scale:
            raise NotPsdError(f"{self.kind} constraint matrix is not symmetric")
        ev = np.linalg.eigvalsh(l) if n else np.zeros(1)
        if ev[0] < -self.psd_rtol * max(ev[-1], 0.0) - 1e-14 * scale:
            raise NotPsdError(
                f"{self.kind} constraint matrix is not positive semidefinite: "
                f"eigenvalues span [{ev[0]:.3g}, {ev[-1]:.3g}]"
            )
        object.__setattr__(self, "l", l)

    @property
    def n(self):
        return self.l.shape[0]


def laplacian(w):
    """``D - W`` with ``D`` the diagonal of row sums."""
    return np.diag(w.sum(axis=1)) - w


def within_weights(y):
    y = _as_label_vector(y)
    size = y.class_sizes[y.index]
    same = y.index[:, None] == y.index[None, :]
    return np.where(same, 1.0 / size[:, None], 0.0)


def between_weights(y):
    y = _as_label_vector(y)
    n = y.n
    size = y.class_sizes[y.index]
    same = y.index[:, None] == y.index[None, :]
    return np.where(same, 1.0 / n - 1.0 / size[:, None], 1.0 / n)


def within_laplacian(y):
    return ConstraintMatrix(laplacian(within_weights(y)), "within")


def between_laplacian(y):
    """Between-class Laplacian ``D_b - W_b``.

    The diagonal of ``W_b`` is negative and every row sums to zero, so
    ``D_b`` vanishes and the result equals ``-W_b``.
    """
    return ConstraintMatrix(laplacian(between_weights(y)), "between")


def knn_adjacency(x, k_neighbors):
    """Symmetric 0/1 k-nearest-neighbour adjacency over the columns of `x`.

    An edge joins ``i`` and ``j`` if either lists the other among its
    `k_neighbors` closest columns (Euclidean).  Ties go to the lower index.
    """
    x = as_matrix(x, "x")
    n = x.shape[1]
    if not 1 <= k_neighbors < n:
        raise ValueError(f"k_neighbors must lie in [1, {n}), got {k_neighbors}")
    dist = cdist(x.T, x.T, "sqeuclidean")
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k_neighbors]
    w = np.zeros((n, n))
    w[np.repeat(np.arange(n), k_neighbors), order.ravel()] = 1.0
    return np.maximum(w, w.T)


def knn_laplacian(x, k_neighbors):
    return ConstraintMatrix(laplacian(knn_adjacency(x, k_neighbors)), "knn")


def centering_laplacian(n):
    if n < 1:
        raise ValueError("n must be at least 1")
    return ConstraintMatrix(np.eye(n) - np.full((n, n), 1.0 / n), "centering")


def custom_constraint(l):
    return ConstraintMatrix(l, "custom")
