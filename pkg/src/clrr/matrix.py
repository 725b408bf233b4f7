"""Dense matrix kernels used by the CLRR solver.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 with shape
``(rows, cols)``.  Entries are stored in numpy's default row-major (C) order;
column-major only appears in the on-disk binary format (see :mod:`clrr.io`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg


class SvdError(ArithmeticError):
    """The SVD driver failed to converge."""

    def __init__(self, shape, driver, detail):
        self.shape = shape
        self.driver = driver
        self.detail = detail
        super().__init__(
            f"SVD of {shape[0]}x{shape[1]} matrix did not converge "
            f"(driver {driver!r}): {detail}"
        )


class NotPositiveDefiniteError(ArithmeticError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, index, pivot):
        self.index = index
        self.pivot = pivot
        super().__init__(
            f"matrix is not positive definite: pivot {index} equals {pivot:.6g}"
        )


def as_matrix(a, name="matrix"):
    """Validate `a` as a finite 2-D float64 array and return it."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return m


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``m = u @ diag(sigma) @ v.T``.

    ``rank`` counts singular values above ``rank_tol``, which defaults to
    ``1e-10 * max(rows, cols) * sigma_max``.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    rank: int
    rank_tol: float

    def reconstruct(self):
        return (self.u * self.sigma) @ self.v.T


def _fix_signs(u, vt):
    # first nonzero entry of every left singular vector made nonnegative
    nz = np.abs(u) > 0
    first = np.argmax(nz, axis=0)
    lead = u[first, np.arange(u.shape[1])]
    signs = np.where(lead < 0, -1.0, 1.0)
    return u * signs, vt * signs[:, None]


def svd(m, rank_rtol=1e-10):
    """Thin singular value decomposition with a deterministic sign convention.

    Parameters
    ----------
    m : array_like
        Finite ``rows x cols`` matrix.
    rank_rtol : float
        Relative tolerance for the effective rank; singular values at or
        below ``rank_rtol * max(rows, cols) * sigma_max`` are not counted.

    Returns
    -------
    SvdFactors
    """
    m = as_matrix(m)
    try:
        u, s, vt = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError as exc:
        # gesdd occasionally fails where the slower QR-iteration driver succeeds
        try:
            u, s, vt = scipy.linalg.svd(
                m, full_matrices=False, lapack_driver="gesvd"
            )
        except np.linalg.LinAlgError as exc2:
            raise SvdError(m.shape, "gesvd", f"{exc}; retry: {exc2}") from exc2
    u, vt = _fix_signs(u, vt)
    smax = s[0] if s.size else 0.0
    tol = rank_rtol * max(m.shape) * smax
    rank = int(np.count_nonzero(s > tol))
    return SvdFactors(u=u, sigma=s, v=vt.T, rank=rank, rank_tol=float(tol))


def svt(m, tau):
    """Singular value thresholding: the prox of ``tau * ||.||_*`` at `m`."""
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    f = svd(m)
    s = np.maximum(f.sigma - tau, 0.0)
    keep = s > 0
    if not keep.any():
        return np.zeros((f.u.shape[0], f.v.shape[0]))
    return (f.u[:, keep] * s[keep]) @ f.v[:, keep].T


def prox_l21(q, tau):
    """Column-wise group shrinkage, the prox of ``tau * ||.||_{2,1}``.

    Each column ``q_i`` is scaled by ``(||q_i|| - tau) / ||q_i||`` when its norm
    exceeds `tau` and set to zero otherwise.
    """
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    q = as_matrix(q)
    norms = np.linalg.norm(q, axis=0)
    scale = np.zeros_like(norms)
    live = norms > tau
    scale[live] = (norms[live] - tau) / norms[live]
    return q * scale


def solve_spd(a, b, ridge=0.0, refine=0):
    """Solve ``(a + ridge * I) x = b`` for symmetric positive definite `a`.

    With ``refine > 0`` that many steps of iterative refinement against the
    unshifted system ``a x = b`` follow, reusing the same factor.  Each step
    shrinks the ridge bias along an eigenvector of `a` with eigenvalue ``s``
    by ``ridge / (s + ridge)``, so a tiny stabilising ridge costs no accuracy
    where `a` is well conditioned and stays bounded where it is singular.

    Raises
    ------
    NotPositiveDefiniteError
        If the Cholesky factorization meets a non-positive pivot.  The error
        carries the pivot index and the Schur-complement value found there.
    """
    if ridge < 0:
        raise ValueError(f"ridge must be nonnegative, got {ridge}")
    a = as_matrix(a, "a")
    b = np.asarray(b, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"a must be square, got shape {a.shape}")
    if b.shape[0] != n:
        raise ValueError(f"b has {b.shape[0]} rows, expected {n}")
    shifted = a + ridge * np.eye(n) if ridge else a
    c, info = scipy.linalg.lapack.dpotrf(shifted, lower=1, clean=1)
    if info > 0:
        k = info - 1
        w = np.zeros(0)
        if k:
            w = scipy.linalg.solve_triangular(c[:k, :k], shifted[:k, k], lower=True)
        raise NotPositiveDefiniteError(k, float(shifted[k, k] - w @ w))
    if info < 0:
        raise ValueError(f"dpotrf rejected argument {-info}")
    x = scipy.linalg.cho_solve((c, True), b)
    if ridge:
        for _ in range(refine):
            x = x + scipy.linalg.cho_solve((c, True), b - a @ x)
    return x


class Norms(NamedTuple):
    nuclear: float
    frobenius: float
    l21: float
    linf: float


def nuclear_norm(m):
    return float(np.sum(scipy.linalg.svdvals(m)))


def l21_norm(m):
    return float(np.sum(np.linalg.norm(m, axis=0)))


def linf_norm(m):
    """Entrywise max-abs norm (0 for an empty matrix)."""
    return float(np.max(np.abs(m), initial=0.0))


def norms(m):
    m = as_matrix(m)
    return Norms(
        nuclear=nuclear_norm(m) if m.size else 0.0,
        frobenius=float(np.linalg.norm(m)),
        l21=l21_norm(m),
        linf=linf_norm(m),
    )
