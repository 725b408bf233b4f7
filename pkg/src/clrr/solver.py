"""Inexact augmented Lagrangian solver for constrained low-rank representation.

The problem solved is::

    min  ||Z||_* + lam ||E||_{2,1}
         + alpha tr(P^T X L X^T P) + beta ||P^T X Z - Y||_F^2
    s.t. X = XZ + E,  1^T Z = 1^T

with the data matrix as its own dictionary.  A splitting variable ``J = Z``
carries the nuclear norm, and each iteration updates P, J, Z and E in that
order, followed by dual ascent on the three constraint multipliers and a
geometric increase of the penalty ``mu``.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import matrix as mx
from .regularizers import ConstraintMatrix

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """A numerical kernel failed inside the ALM loop."""

    def __init__(self, iteration, step, cause):
        self.iteration = iteration
        self.step = step
        self.cause = cause
        super().__init__(f"iteration {iteration}, {step} update: {cause}")


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 2.0**-4
    beta: float = 1.0
    lam: float = 0.5
    mu0: float = 0.01
    mu_max: float = 1e6
    rho: float = 1.3
    eps: float = 1e-7
    max_iter: int = 500
    # relative ridge on the P system; scaled by trace / d at each solve
    ridge: float = 1e-8

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not 0 < self.mu0 <= self.mu_max:
            raise ValueError("need 0 < mu0 <= mu_max")
        if not self.rho > 1:
            raise ValueError("rho must exceed 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")

    @property
    def degenerate(self):
        """True when both supervised terms are switched off."""
        return self.alpha == 0 and self.beta == 0

    def mu_at(self, iteration):
        """Penalty after `iteration` multiplier updates."""
        return min(self.mu0 * self.rho**iteration, self.mu_max)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown solver keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class SolverState:
    z: np.ndarray
    j: np.ndarray
    e: np.ndarray
    p: np.ndarray
    psi_a: np.ndarray
    psi_b: np.ndarray
    psi_c: np.ndarray
    mu: float
    iter: int = 0

    @classmethod
    def zeros(cls, d, n, k, mu):
        return cls(
            z=np.zeros((n, n)),
            j=np.zeros((n, n)),
            e=np.zeros((d, n)),
            p=np.zeros((d, k)),
            psi_a=np.zeros((d, n)),
            psi_b=np.zeros((n, n)),
            psi_c=np.zeros((1, n)),
            mu=mu,
            iter=0,
        )

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def is_finite(self):
        arrays = (self.z, self.j, self.e, self.p, self.psi_a, self.psi_b, self.psi_c)
        return all(np.all(np.isfinite(a)) for a in arrays) and np.isfinite(self.mu)


@dataclass(frozen=True)
class LinearSystem:
    """The Z-update normal equations ``u_a Z = u_b + u_c``."""

    u_a: np.ndarray
    u_b: np.ndarray
    u_c: np.ndarray


class Residuals(NamedTuple):
    reconstruction: float  # ||X - XZ - E||_inf
    splitting: float  # ||Z - J||_inf
    affine: float  # ||1^T Z - 1^T||_inf


class Convergence(NamedTuple):
    converged: bool
    residuals: Residuals


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    residual_history: np.ndarray
    objective_history: np.ndarray
    final_state: SolverState
    config: SolverConfig = field(default_factory=SolverConfig)

    @property
    def final_residuals(self):
        return Residuals(*self.residual_history[-1])


def _constraint_array(l, n):
    if l is None:
        return None
    arr = l.l if isinstance(l, ConstraintMatrix) else mx.as_matrix(l, "L")
    if arr.shape != (n, n):
        raise ValueError(f"L must be {n}x{n}, got {arr.shape}")
    return arr


@dataclass
class _Problem:
    """Inputs of one solve plus the products that stay fixed across iterations."""

    x: np.ndarray
    y: np.ndarray | None
    l: np.ndarray | None
    cfg: SolverConfig
    xtx: np.ndarray = field(init=False)
    xlx: np.ndarray | None = field(init=False)

    def __post_init__(self):
        self.xtx = self.x.T @ self.x
        self.xlx = None
        if self.cfg.alpha != 0:
            self.xlx = self.x @ self.l @ self.x.T

    @classmethod
    def build(cls, x, y, l, cfg):
        x = mx.as_matrix(x, "X")
        n = x.shape[1]
        if not cfg.degenerate and cfg.beta != 0:
            if y is None:
                raise ValueError("Y is required when beta > 0")
        if y is not None:
            y = mx.as_matrix(y, "Y")
            if y.shape[1] != n:
                raise ValueError(f"Y has {y.shape[1]} columns, X has {n}")
        if cfg.alpha != 0 and l is None:
            raise ValueError("L is required when alpha > 0")
        larr = _constraint_array(l, n) if cfg.alpha != 0 else None
        return cls(x, y, larr, cfg)

    @property
    def k(self):
        return 0 if self.y is None else self.y.shape[0]


# -- block updates ----------------------------------------------------------


def _p_system(prob, z):
    cfg = prob.cfg
    x = prob.x
    d = x.shape[0]
    xz = x @ z
    m = np.zeros((d, d))
    if cfg.alpha != 0:
        m += cfg.alpha * prob.xlx
    if cfg.beta != 0:
        m += cfg.beta * (xz @ xz.T)
        rhs = cfg.beta * (xz @ prob.y.T)
    else:
        rhs = np.zeros((d, prob.k))
    return 0.5 * (m + m.T), rhs


def _update_p(prob, state):
    cfg = prob.cfg
    d = prob.x.shape[0]
    if cfg.degenerate:
        return np.zeros((d, prob.k))
    m, rhs = _p_system(prob, state.z)
    if not np.any(rhs):
        return np.zeros_like(rhs)
    scale = np.trace(m) / d
    ridge = cfg.ridge * scale if scale > 0 else cfg.ridge
    return mx.solve_spd(m, rhs, ridge, refine=1)


def _z_system(prob, state):
    cfg = prob.cfg
    x, mu = prob.x, state.mu
    n = x.shape[1]
    ones = np.ones((n, n))
    u_a = mu * (prob.xtx + ones + np.eye(n))
    u_b = mu * (prob.xtx - x.T @ state.e + state.j + ones)
    if cfg.beta != 0:
        xtp = x.T @ state.p
        u_a += 2 * cfg.beta * (xtp @ xtp.T)
        u_b += 2 * cfg.beta * (xtp @ prob.y)
    u_c = x.T @ state.psi_a - state.psi_b - np.ones((n, 1)) @ state.psi_c
    return LinearSystem(u_a=u_a, u_b=u_b, u_c=u_c)


def _update_e(prob, state):
    x = prob.x
    q = x - x @ state.z + state.psi_a / state.mu
    return mx.prox_l21(q, prob.cfg.lam / state.mu)


def _residual_mats(x, state):
    n = x.shape[1]
    return (
        x - x @ state.z - state.e,
        state.z - state.j,
        state.z.sum(axis=0, keepdims=True) - np.ones((1, n)),
    )


def _update_multipliers(x, state, cfg):
    ra, rb, rc = _residual_mats(x, state)
    mu = state.mu
    it = state.iter + 1
    return state.replace(
        psi_a=state.psi_a + mu * ra,
        psi_b=state.psi_b + mu * rb,
        psi_c=state.psi_c + mu * rc,
        mu=cfg.mu_at(it),
        iter=it,
    )


def _residuals(x, state):
    return Residuals(*(mx.linf_norm(r) for r in _residual_mats(x, state)))


# -- public single-step API -------------------------------------------------


def update_p(x, y, l, state, cfg):
    """Closed-form projection update.

    Solves ``[X (alpha L + beta Z Z^T) X^T + r I] P = beta X Z Y^T`` with a
    small ridge ``r = cfg.ridge * trace / d``; the system is singular at
    ``Z = 0`` and whenever X is rank deficient.  One refinement step against
    the unshifted system then removes the ridge bias to first order.
    """
    return _update_p(_Problem.build(x, y, l, cfg), state)


def update_j(state):
    """Nuclear-norm prox of ``Z + Psi_b / mu`` at threshold ``1 / mu``."""
    return mx.svt(state.z + state.psi_b / state.mu, 1.0 / state.mu)


def build_z_system(x, y, l, state, cfg):
    return _z_system(_Problem.build(x, y, l, cfg), state)


def update_z(sys):
    return mx.solve_spd(sys.u_a, sys.u_b + sys.u_c)


def update_e(x, state, cfg):
    x = mx.as_matrix(x, "X")
    return mx.prox_l21(x - x @ state.z + state.psi_a / state.mu, cfg.lam / state.mu)


def update_multipliers(x, state, cfg):
    """Dual ascent at the current ``mu``, then advance the penalty schedule.

    The new penalty is ``min(mu0 * rho**iter, mu_max)`` evaluated at the
    incremented iteration counter, which equals the running product
    ``min(rho * mu, mu_max)`` without its accumulated rounding.
    """
    return _update_multipliers(mx.as_matrix(x, "X"), state, cfg)


def check_convergence(x, state, cfg):
    res = _residuals(mx.as_matrix(x, "X"), state)
    return Convergence(all(r < cfg.eps for r in res), res)


# -- objectives and gradients -------------------------------------------------


def constraint_term(x, y, l, z, p, cfg):
    """``alpha tr(P^T X L X^T P) + beta ||P^T X Z - Y||_F^2``."""
    value = 0.0
    if cfg.alpha != 0:
        xtp = x.T @ p
        value += cfg.alpha * float(np.sum(xtp * (_constraint_array(l, x.shape[1]) @ xtp)))
    if cfg.beta != 0:
        value += cfg.beta * float(np.sum((p.T @ x @ z - y) ** 2))
    return value


def grad_constraint_p(x, y, l, z, p, cfg):
    g = np.zeros_like(p)
    if cfg.alpha != 0:
        g += 2 * cfg.alpha * (x @ (_constraint_array(l, x.shape[1]) @ (x.T @ p)))
    if cfg.beta != 0:
        xz = x @ z
        g += 2 * cfg.beta * (xz @ (xz.T @ p - y.T))
    return g


def z_subproblem(x, y, state, cfg, z=None):
    """Augmented Lagrangian as a function of Z with P, J, E and multipliers held."""
    z = state.z if z is None else z
    s = state.replace(z=z)
    ra, rb, rc = _residual_mats(x, s)
    value = 0.0
    if cfg.beta != 0:
        value += cfg.beta * float(np.sum((state.p.T @ x @ z - y) ** 2))
    value += float(np.sum(state.psi_a * ra) + np.sum(state.psi_b * rb) + np.sum(state.psi_c * rc))
    value += 0.5 * state.mu * float(np.sum(ra**2) + np.sum(rb**2) + np.sum(rc**2))
    return value


def grad_z_subproblem(x, y, state, cfg, z=None):
    z = state.z if z is None else z
    s = state.replace(z=z)
    n = x.shape[1]
    ra, rb, rc = _residual_mats(x, s)
    ones = np.ones((n, 1))
    g = -x.T @ state.psi_a + state.psi_b + ones @ state.psi_c
    g += state.mu * (-x.T @ ra + rb + ones @ rc)
    if cfg.beta != 0:
        g += 2 * cfg.beta * (x.T @ state.p @ (state.p.T @ x @ z - y))
    return g


def augmented_lagrangian(x, y, l, state, cfg):
    ra, rb, rc = _residual_mats(x, state)
    value = mx.nuclear_norm(state.j) + cfg.lam * mx.l21_norm(state.e)
    value += constraint_term(x, y, l, state.z, state.p, cfg)
    value += float(np.sum(state.psi_a * ra) + np.sum(state.psi_b * rb) + np.sum(state.psi_c * rc))
    value += 0.5 * state.mu * float(np.sum(ra**2) + np.sum(rb**2) + np.sum(rc**2))
    return value


def objective_value(x, y, l, state, cfg):
    """Primal objective evaluated at ``(Z, E, P)``."""
    x = mx.as_matrix(x, "X")
    value = mx.nuclear_norm(state.z) + cfg.lam * mx.l21_norm(state.e)
    return value + constraint_term(x, y, l, state.z, state.p, cfg)


# -- driver -------------------------------------------------------------------


def iterate(x, y, l, state, cfg):
    """One full ALM sweep: P, J, Z, E, multipliers and penalty."""
    prob = _Problem.build(x, y, l, cfg)
    return _sweep(prob, state)


def _sweep(prob, state):
    it = state.iter + 1
    steps = (
        ("P", lambda s: s.replace(p=_update_p(prob, s))),
        ("J", lambda s: s.replace(j=update_j(s))),
        ("Z", lambda s: s.replace(z=update_z(_z_system(prob, s)))),
        ("E", lambda s: s.replace(e=_update_e(prob, s))),
    )
    for name, step in steps:
        try:
            state = step(state)
        except (ArithmeticError, np.linalg.LinAlgError) as exc:
            raise SolverError(it, name, exc) from exc
    new = _update_multipliers(prob.x, state, prob.cfg)
    if not new.is_finite():
        raise SolverError(it, "multiplier", "non-finite iterate")
    return new


def solve(x, y, l, cfg=None, *, callback=None):
    """Run the inexact ALM loop from the all-zero state.

    Parameters
    ----------
    x : (d, n) array
        Data matrix, also used as the dictionary.
    y : (k, n) array or None
        Label indicator or regression targets.  May be None when
        ``cfg.beta == 0``.
    l : ConstraintMatrix, (n, n) array or None
        Constraint matrix; unused (and may be None) when ``cfg.alpha == 0``.
    cfg : SolverConfig
    callback : callable, optional
        Called as ``callback(state, residuals)`` after every iteration.

    Returns
    -------
    SolveReport
        Reaching ``max_iter`` returns ``converged=False``; it does not raise.
    """
    cfg = cfg or SolverConfig()
    prob = _Problem.build(x, y, l, cfg)
    d, n = prob.x.shape
    state = SolverState.zeros(d, n, prob.k, cfg.mu0)
    residuals, objectives = [], []
    converged = False
    while state.iter < cfg.max_iter:
        state = _sweep(prob, state)
        res = _residuals(prob.x, state)
        residuals.append(res)
        objectives.append(objective_value(prob.x, prob.y, prob.l, state, cfg))
        if callback is not None:
            callback(state, res)
        if all(r < cfg.eps for r in res):
            converged = True
            break
    log.debug("solve stopped after %d iterations (converged=%s)", state.iter, converged)
    return SolveReport(
        iterations=state.iter,
        converged=converged,
        residual_history=np.array(residuals),
        objective_history=np.array(objectives),
        final_state=state,
        config=cfg,
    )
