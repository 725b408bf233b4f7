"""Application pipelines built on the solver: classification, regression and
robust recovery, plus the classifiers and metrics they use.

The pipelines rescale every training column to unit Euclidean norm before
solving.  The l2,1 penalty charges ``lam * ||e_i||`` for an error column but
the nuclear norm charges roughly one unit per outlying column whatever its
scale, so without this step large corruptions are absorbed into ``Z``
instead of ``E``.  Each pipeline maps its outputs back to the input scale
where that is meaningful (see the individual functions).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.covariance import ledoit_wolf_shrinkage

from . import matrix as mx
from .regularizers import (
    LabelVector,
    between_laplacian,
    knn_laplacian,
)
from .solver import SolveReport, SolverConfig, solve


def column_norms(x):
    """Euclidean column norms with zero columns mapped to 1."""
    norms = np.linalg.norm(x, axis=0)
    return np.where(norms > 0, norms, 1.0)


def normalize_columns(x):
    norms = column_norms(x)
    return x / norms, norms


def _labels(y):
    return y if isinstance(y, LabelVector) else LabelVector.from_labels(y)


# -- classifiers ----------------------------------------------------------------


def classify_nn(train_feats, train_labels, test_feats):
    """1-nearest-neighbour labels (Euclidean; ties to the lower training index)."""
    train_labels = _labels(train_labels)
    train_feats = mx.as_matrix(train_feats, "train features")
    test_feats = mx.as_matrix(test_feats, "test features")
    if train_feats.shape[0] != test_feats.shape[0]:
        raise ValueError("train and test features differ in dimension")
    dist = cdist(test_feats.T, train_feats.T, "sqeuclidean")
    nearest = np.argmin(dist, axis=1)
    return np.asarray(train_labels.classes, dtype=object)[train_labels.index[nearest]]


def mmd_model(train_feats, train_labels, shrinkage=None):
    """Class means, pooled within-class covariance and the shrinkage used.

    The covariance is normalised by the total sample count.  By default
    the shrinkage is the Ledoit-Wolf estimate: with weight ``delta`` on
    ``(trace(S) / dim) I``, the shrunk covariance is proportional to
    ``S + delta / (1 - delta) * trace(S) / dim * I``, and only that ratio
    matters for the argmin.  Recovered features are low rank, so a tiny
    fixed ridge leaves ``S`` too ill-conditioned to separate the classes.
    """
    labels = _labels(train_labels)
    f = mx.as_matrix(train_feats, "train features")
    dim = f.shape[0]
    k = labels.class_count
    means = np.zeros((dim, k))
    for c in range(k):
        means[:, c] = f[:, labels.index == c].mean(axis=1)
    centred = f - means[:, labels.index]
    s = centred @ centred.T / f.shape[1]
    if shrinkage is None:
        scale = np.trace(s) / dim
        if scale == 0:
            shrinkage = 1.0
        else:
            delta = min(ledoit_wolf_shrinkage(centred.T, assume_centered=True), 1 - 1e-12)
            shrinkage = max(delta / (1 - delta) * scale, 1e-12 * scale)
    if shrinkage < 0:
        raise ValueError("shrinkage must be nonnegative")
    return means, s, float(shrinkage)


def classify_mmd(train_feats, train_labels, test_feats, shrinkage=None):
    """Minimum Mahalanobis distance to the class means.

    Distances use the pooled within-class covariance plus ``shrinkage * I``;
    ties go to the lower class index.
    """
    labels = _labels(train_labels)
    test_feats = mx.as_matrix(test_feats, "test features")
    means, s, shrinkage = mmd_model(train_feats, labels, shrinkage)
    if means.shape[0] != test_feats.shape[0]:
        raise ValueError("train and test features differ in dimension")
    dist = np.empty((test_feats.shape[1], labels.class_count))
    for c in range(labels.class_count):
        diff = test_feats - means[:, [c]]
        dist[:, c] = np.sum(diff * mx.solve_spd(s, diff, shrinkage), axis=0)
    best = np.argmin(dist, axis=1)
    return np.asarray(labels.classes, dtype=object)[best]


CLASSIFIERS = {
    "nn": lambda tr, lab, te, **kw: classify_nn(tr, lab, te),
    "mmd": lambda tr, lab, te, **kw: classify_mmd(tr, lab, te, kw.get("shrinkage")),
}


def error_rate(predictions, truth):
    predictions = np.asarray(predictions, dtype=object)
    truth = np.asarray(list(truth), dtype=object)
    if predictions.shape != truth.shape:
        raise ValueError("predictions and truth differ in length")
    return float(np.mean(predictions != truth))


def angle_error(estimates, truth):
    """Mean absolute angular deviation in degrees, wrapped into [0, 180].

    Averages ``min(|a - b| mod 360, 360 - |a - b| mod 360)`` over every
    coordinate of every sample.
    """
    est = np.asarray(estimates, dtype=np.float64)
    ref = np.asarray(truth, dtype=np.float64)
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {ref.shape}")
    dev = np.abs(est - ref) % 360.0
    return float(np.mean(np.minimum(dev, 360.0 - dev)))


# -- pipelines ------------------------------------------------------------------


@dataclass
class ClassificationRun:
    train_x: np.ndarray
    test_x: np.ndarray
    train_labels: LabelVector
    recovered_train: np.ndarray
    recovered_test: np.ndarray
    predictions: np.ndarray
    error_rate: float | None
    classifier: str
    features: str
    train_report: SolveReport
    test_report: SolveReport

    def summary(self):
        return {
            "classifier": self.classifier,
            "features": self.features,
            "n_train": int(self.train_x.shape[1]),
            "n_test": int(self.test_x.shape[1]),
            "error_rate": self.error_rate,
            "predictions": [_jsonable(p) for p in self.predictions],
            "train_iterations": self.train_report.iterations,
            "train_converged": self.train_report.converged,
            "test_iterations": self.test_report.iterations,
            "test_converged": self.test_report.converged,
        }


def _jsonable(v):
    return v.item() if isinstance(v, np.generic) else v


def degenerate(cfg):
    """Copy of `cfg` with both supervised terms switched off."""
    return dataclasses.replace(cfg, alpha=0.0, beta=0.0)


def recover_unsupervised(x, cfg=None, normalize=True):
    """Self-expressive solve with ``alpha = beta = 0``; labels are never read."""
    cfg = degenerate(cfg or SolverConfig())
    x = mx.as_matrix(x, "X")
    xs = normalize_columns(x)[0] if normalize else x
    return xs, solve(xs, None, None, cfg)


def classify(
    train_x,
    train_labels,
    test_x,
    cfg=None,
    classifier="nn",
    *,
    test_labels=None,
    l=None,
    features="recovered",
    truncate=None,
    normalize=True,
    shrinkage=None,
):
    """Train-side supervised solve, test-side degenerate solve, then classify.

    Parameters
    ----------
    features : {"recovered", "projected"}
        ``"recovered"`` feeds ``XZ`` and ``X_t Z_t`` to the classifier;
        ``"projected"`` feeds ``P^T XZ`` and ``P^T X_t Z_t``.
    truncate : int, optional
        Keep only the leading `truncate` feature coordinates (rows).
    normalize : bool
        Rescale columns of both data sets to unit norm first.  All matrices
        in the returned run live in that rescaled space.
    l : ConstraintMatrix, optional
        Defaults to the between-class Laplacian of `train_labels`.
    """
    cfg = cfg or SolverConfig()
    labels = _labels(train_labels)
    if labels.class_count < 2:
        raise ValueError("classification needs at least two classes")
    if classifier not in CLASSIFIERS:
        raise ValueError(f"unknown classifier {classifier!r}")
    if features not in ("recovered", "projected"):
        raise ValueError(f"unknown feature kind {features!r}")
    train_x = mx.as_matrix(train_x, "train X")
    test_x = mx.as_matrix(test_x, "test X")
    if train_x.shape[0] != test_x.shape[0]:
        raise ValueError("train and test data differ in dimension")
    if labels.n != train_x.shape[1]:
        raise ValueError(f"{labels.n} labels for {train_x.shape[1]} training columns")
    if normalize:
        train_x = normalize_columns(train_x)[0]
        test_x = normalize_columns(test_x)[0]
    if l is None:
        l = between_laplacian(labels)

    train_report = solve(train_x, labels.indicator(), l, cfg)
    _, test_report = recover_unsupervised(test_x, cfg, normalize=False)
    rec_train = train_x @ train_report.final_state.z
    rec_test = test_x @ test_report.final_state.z

    if features == "projected":
        p = train_report.final_state.p
        f_train, f_test = p.T @ rec_train, p.T @ rec_test
    else:
        f_train, f_test = rec_train, rec_test
    if truncate is not None:
        f_train, f_test = f_train[:truncate], f_test[:truncate]

    preds = CLASSIFIERS[classifier](f_train, labels, f_test, shrinkage=shrinkage)
    err = None if test_labels is None else error_rate(preds, test_labels)
    return ClassificationRun(
        train_x=train_x,
        test_x=test_x,
        train_labels=labels,
        recovered_train=rec_train,
        recovered_test=rec_test,
        predictions=preds,
        error_rate=err,
        classifier=classifier,
        features=features,
        train_report=train_report,
        test_report=test_report,
    )


@dataclass
class RegressionRun:
    train_x: np.ndarray
    test_x: np.ndarray
    train_targets: np.ndarray
    projection: np.ndarray
    estimates: np.ndarray
    angle_error: float | None
    report: SolveReport

    def summary(self):
        return {
            "n_train": int(self.train_x.shape[1]),
            "n_test": int(self.test_x.shape[1]),
            "target_dim": int(self.train_targets.shape[0]),
            "angle_error": self.angle_error,
            "iterations": self.report.iterations,
            "converged": self.report.converged,
        }


def pose_estimate(
    train_x,
    train_targets,
    test_x,
    l=None,
    cfg=None,
    *,
    test_targets=None,
    normalize=True,
    k_neighbors=5,
):
    """Learn the projection with continuous targets and apply it to `test_x`.

    With `normalize`, each training pair ``(x_i, y_i)`` is divided by
    ``||x_i||``.  A linear map ``y = P^T x`` is invariant under that
    rescaling, so the learned ``P`` applies to raw test columns directly.
    The default constraint is the kNN Laplacian of the rescaled inputs.
    """
    cfg = cfg or SolverConfig()
    train_x = mx.as_matrix(train_x, "train X")
    test_x = mx.as_matrix(test_x, "test X")
    y = mx.as_matrix(train_targets, "targets")
    if y.shape[1] != train_x.shape[1]:
        raise ValueError("targets and training data differ in sample count")
    xs, ys = train_x, y
    if normalize:
        norms = column_norms(train_x)
        xs, ys = train_x / norms, y / norms
    if l is None and cfg.alpha != 0:
        l = knn_laplacian(xs, min(k_neighbors, xs.shape[1] - 1))
    report = solve(xs, ys, l, cfg)
    p = report.final_state.p
    est = p.T @ test_x
    err = None if test_targets is None else angle_error(est, test_targets)
    return RegressionRun(
        train_x=train_x,
        test_x=test_x,
        train_targets=y,
        projection=p,
        estimates=est,
        angle_error=err,
        report=report,
    )


@dataclass
class RecoveryRun:
    x: np.ndarray
    recovered: np.ndarray
    error_component: np.ndarray
    column_error_norms: np.ndarray
    report: SolveReport

    def summary(self):
        return {
            "shape": list(self.x.shape),
            "iterations": self.report.iterations,
            "converged": self.report.converged,
            "column_error_norms": self.column_error_norms.tolist(),
        }


def recover(x, labels, l=None, cfg=None, *, normalize=True):
    """Supervised clean/error split of `x`.

    With `normalize` the solve runs on unit-norm columns and both parts are
    scaled back, so ``recovered + error_component`` reproduces `x` to within
    the solver's feasibility residual times the column norms.
    """
    cfg = cfg or SolverConfig()
    labels = _labels(labels)
    x = mx.as_matrix(x, "X")
    if labels.n != x.shape[1]:
        raise ValueError(f"{labels.n} labels for {x.shape[1]} columns")
    norms = column_norms(x) if normalize else np.ones(x.shape[1])
    xs = x / norms
    if l is None:
        l = between_laplacian(labels)
    report = solve(xs, labels.indicator(), l, cfg)
    st = report.final_state
    rec = (xs @ st.z) * norms
    err = st.e * norms
    return RecoveryRun(
        x=x,
        recovered=rec,
        error_component=err,
        column_error_norms=np.linalg.norm(err, axis=0),
        report=report,
    )


def least_squares_map(x, y, rcond=None):
    """Minimum-norm least-squares ``P`` with ``P^T x ~ y`` (baseline)."""
    return np.linalg.lstsq(x.T, y.T, rcond=rcond)[0]
