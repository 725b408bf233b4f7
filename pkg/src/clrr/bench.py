"""Per-iteration timing sweep and the cubic cost-model check."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .regularizers import between_laplacian
from .solver import SolverConfig, solve
from .synth import SynthSpec, gen_union_subspaces


def cost_model(n, d, k, r=None):
    """Operation count ``n^3 + n^2 (r + d) + r^2 n + d^2 + n d k`` of one sweep.

    `r` is the rank seen by the SVT step and defaults to ``n``.
    """
    r = n if r is None else r
    return n**3 + n**2 * (r + d) + r**2 * n + d**2 + n * d * k


@dataclass
class BenchPoint:
    n: int
    seconds_per_iter: float
    predicted_cost: float


@dataclass
class BenchResult:
    points: list
    scale: float  # seconds per unit of cost_model
    band: float

    @property
    def ratios(self):
        """Measured time over fitted prediction at each n."""
        return [p.seconds_per_iter / (self.scale * p.predicted_cost) for p in self.points]

    @property
    def consistent(self):
        return all(1 / self.band <= r <= self.band for r in self.ratios)

    def to_dict(self):
        return {
            "points": [vars(p) for p in self.points],
            "scale": self.scale,
            "band": self.band,
            "ratios": self.ratios,
            "consistent": self.consistent,
        }


def time_per_iteration(n, d=50, classes=3, iterations=10, repeats=3, seed=0):
    """Best-of-`repeats` wall time of one ALM sweep at sample count `n`."""
    per = [n // classes] * classes
    per[-1] += n - sum(per)
    spec = SynthSpec(d, (4,) * classes, tuple(per), 0.0, 0.1, 10.0, seed)
    data = gen_union_subspaces(spec)
    x = data.x / np.linalg.norm(data.x, axis=0)
    y = data.labels.indicator()
    l = between_laplacian(data.labels)
    # eps far below reachable residuals: every run does exactly `iterations` sweeps
    cfg = SolverConfig(eps=1e-300, max_iter=iterations)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        rep = solve(x, y, l, cfg)
        best = min(best, (time.perf_counter() - t0) / rep.iterations)
    return best


def scaling_sweep(ns=(100, 200, 400), d=50, classes=3, band=2.0, **kw):
    """Time the solver at each n and fit one scale factor to :func:`cost_model`.

    The fit is the geometric mean of measured / predicted; the sweep is
    consistent when every point lies within a factor `band` of the fit.
    """
    points = []
    for n in ns:
        t = time_per_iteration(n, d=d, classes=classes, **kw)
        points.append(BenchPoint(int(n), t, float(cost_model(n, d, classes))))
    logs = [np.log(p.seconds_per_iter / p.predicted_cost) for p in points]
    return BenchResult(points, float(np.exp(np.mean(logs))), band)
