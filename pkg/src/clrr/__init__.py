"""Constrained low-rank representation: solver, regularizers and pipelines."""

from .matrix import nuclear_norm, l21_norm, linf_norm, prox_l21, solve_spd, svd, svt
from .regularizers import (
    ConstraintMatrix,
    LabelVector,
    between_laplacian,
    centering_laplacian,
    custom_constraint,
    knn_laplacian,
    within_laplacian,
)
from .solver import SolveReport, SolverConfig, SolverError, SolverState, solve
from .synth import SynthSpec, gen_regression, gen_union_subspaces
from .tasks import classify, pose_estimate, recover

__version__ = "0.1.0"

__all__ = [
    "ConstraintMatrix",
    "LabelVector",
    "SolveReport",
    "SolverConfig",
    "SolverError",
    "SolverState",
    "SynthSpec",
    "between_laplacian",
    "centering_laplacian",
    "classify",
    "custom_constraint",
    "gen_regression",
    "gen_union_subspaces",
    "knn_laplacian",
    "l21_norm",
    "linf_norm",
    "nuclear_norm",
    "pose_estimate",
    "prox_l21",
    "recover",
    "solve",
    "solve_spd",
    "svd",
    "svt",
    "within_laplacian",
]
