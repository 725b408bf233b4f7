import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import minimize_scalar

from clrr import matrix as mx


def _rng(seed=0):
    return np.random.default_rng(seed)


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def small_matrices(max_side=6):
    shapes = st.tuples(st.integers(1, max_side), st.integers(1, max_side))
    return shapes.flatmap(lambda s: arrays(np.float64, s, elements=finite))


# -- svd ------------------------------------------------------------------------


def test_svd_identity():
    f = mx.svd(np.eye(3))
    np.testing.assert_allclose(f.sigma, [1, 1, 1])
    assert f.rank == 3


def test_svd_diagonal():
    f = mx.svd(np.diag([3.0, 1.0, 0.2]))
    np.testing.assert_allclose(f.sigma, [3, 1, 0.2], rtol=1e-14)


def test_svd_random_reconstruction():
    m = _rng().standard_normal((8, 5))
    f = mx.svd(m)
    assert np.linalg.norm(f.reconstruct() - m) < 1e-10


def test_svd_rank_tolerance():
    rng = _rng(1)
    m = rng.standard_normal((10, 3)) @ rng.standard_normal((3, 7))
    f = mx.svd(m)
    assert f.rank == 3
    assert f.rank_tol == pytest.approx(1e-10 * 10 * f.sigma[0])


def test_svd_sign_convention_and_determinism():
    m = _rng(2).standard_normal((6, 4))
    a, b = mx.svd(m), mx.svd(m.copy())
    assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
    for col in a.u.T:
        first = col[np.flatnonzero(np.abs(col) > 0)[0]]
        assert first >= 0
    # negating the input flips V, not U
    c = mx.svd(-m)
    np.testing.assert_allclose(c.u, a.u, atol=1e-12)


def test_svd_rejects_nonfinite():
    with pytest.raises(ValueError):
        mx.svd(np.array([[1.0, np.nan]]))


@settings(max_examples=60, deadline=None)
@given(small_matrices())
def test_svd_invariants(m):
    f = mx.svd(m)
    k = f.sigma.size
    np.testing.assert_allclose(f.u.T @ f.u, np.eye(k), atol=1e-10)
    np.testing.assert_allclose(f.v.T @ f.v, np.eye(k), atol=1e-10)
    assert np.all(np.diff(f.sigma) <= 0) and np.all(f.sigma >= 0)
    scale = max(np.linalg.norm(m), 1e-300)
    assert np.linalg.norm(f.reconstruct() - m) <= 1e-8 * scale


# -- svt ------------------------------------------------------------------------


def _svt_objective(j, m, tau):
    return tau * mx.nuclear_norm(j) + 0.5 * np.sum((j - m) ** 2)


def test_svt_zero_input():
    assert np.array_equal(mx.svt(np.zeros((3, 3)), 0.5), np.zeros((3, 3)))


def test_svt_diagonal_shrinkage():
    np.testing.assert_allclose(
        mx.svt(np.diag([3.0, 1.0, 0.2]), 1.0), np.diag([2.0, 0, 0]), atol=1e-15
    )


def test_svt_tau_zero_is_identity():
    m = _rng(3).standard_normal((5, 4))
    np.testing.assert_allclose(mx.svt(m, 0.0), m, atol=1e-13)


def test_svt_rejects_negative_tau():
    with pytest.raises(ValueError):
        mx.svt(np.eye(2), -1.0)


@pytest.mark.parametrize("side", [6, 20])
def test_svt_beats_random_perturbations(side):
    rng = _rng(side)
    m = rng.standard_normal((side, side))
    tau = 0.3
    j = mx.svt(m, tau)
    base = _svt_objective(j, m, tau)
    deltas = rng.standard_normal((10_000, side, side))
    deltas *= 1e-3 / np.linalg.norm(deltas, axis=(1, 2), keepdims=True)
    # nuclear norm of each perturbed matrix through batched singular values
    nuc = np.linalg.svd(j + deltas, compute_uv=False).sum(axis=1)
    vals = tau * nuc + 0.5 * np.sum((j + deltas - m) ** 2, axis=(1, 2))
    assert np.all(vals > base)


# -- prox_l21 -------------------------------------------------------------------


def test_prox_l21_scales_column():
    q = np.array([[2.0], [0.0]])
    np.testing.assert_allclose(mx.prox_l21(q, 0.5), 0.75 * q)


def test_prox_l21_zeroes_small_column():
    q = np.array([[0.4], [0.0]])
    assert np.array_equal(mx.prox_l21(q, 0.5), np.zeros((2, 1)))


def test_prox_l21_zero_column_stays_zero():
    q = np.zeros((3, 2))
    assert np.array_equal(mx.prox_l21(q, 0.1), q)


def test_prox_l21_tau_zero_is_identity():
    q = _rng(4).standard_normal((4, 5))
    assert np.array_equal(mx.prox_l21(q, 0.0), q)


def test_prox_l21_matches_scalar_line_search():
    rng = _rng(5)
    q = rng.standard_normal((10, 6))
    tau = 0.2
    out = mx.prox_l21(q, tau)
    for i in range(q.shape[1]):
        r = np.linalg.norm(q[:, i])
        s = minimize_scalar(
            lambda s: tau * s + 0.5 * (s - r) ** 2,
            bounds=(0.0, r),
            method="bounded",
            options={"xatol": 1e-12},
        ).x
        np.testing.assert_allclose(out[:, i], s * q[:, i] / r, atol=1e-8)


@settings(max_examples=80, deadline=None)
@given(
    st.integers(1, 5).flatmap(
        lambda d: st.tuples(
            arrays(np.float64, (d, 4), elements=finite),
            arrays(np.float64, (d, 4), elements=finite),
        )
    ),
    st.floats(0, 50),
)
def test_prox_l21_firmly_nonexpansive(pair, tau):
    q1, q2 = pair
    p1, p2 = mx.prox_l21(q1, tau), mx.prox_l21(q2, tau)
    diff = np.linalg.norm(p1 - p2)
    assert diff <= np.linalg.norm(q1 - q2) * (1 + 1e-12) + 1e-9
    # firm nonexpansiveness: ||p1 - p2||^2 <= <p1 - p2, q1 - q2>
    assert diff**2 <= np.sum((p1 - p2) * (q1 - q2)) + 1e-6 * (1 + np.sum((q1 - q2) ** 2))


# -- solve_spd ------------------------------------------------------------------


def test_solve_spd_identity():
    b = _rng(6).standard_normal((4, 2))
    np.testing.assert_allclose(mx.solve_spd(np.eye(4), b), b)


def test_solve_spd_scalar_system():
    np.testing.assert_allclose(mx.solve_spd(2 * np.eye(3), np.eye(3)), 0.5 * np.eye(3))


def test_solve_spd_random_residual():
    rng = _rng(7)
    g = rng.standard_normal((12, 12))
    a = g @ g.T + 0.1 * np.eye(12)
    b = rng.standard_normal((12, 3))
    x = mx.solve_spd(a, b)
    assert np.linalg.norm(a @ x - b) <= 1e-8 * np.linalg.norm(b)


def test_solve_spd_ridge():
    a = np.diag([1.0, 0.0])
    x = mx.solve_spd(a, np.ones((2, 1)), ridge=1.0)
    np.testing.assert_allclose(x.ravel(), [0.5, 1.0])


def test_solve_spd_reports_pivot():
    a = np.diag([1.0, -2.0, 3.0])
    with pytest.raises(mx.NotPositiveDefiniteError) as info:
        mx.solve_spd(a, np.ones((3, 1)))
    assert info.value.index == 1
    assert info.value.pivot == pytest.approx(-2.0)


def test_solve_spd_rejects_bad_shapes():
    with pytest.raises(ValueError):
        mx.solve_spd(np.ones((2, 3)), np.ones((2, 1)))
    with pytest.raises(ValueError):
        mx.solve_spd(np.eye(2), np.ones((3, 1)))
    with pytest.raises(ValueError):
        mx.solve_spd(np.eye(2), np.ones((2, 1)), ridge=-1)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_solve_spd_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    a = g @ g.T + np.eye(n)
    b = rng.standard_normal((n, 2))
    x = mx.solve_spd(a, b)
    assert np.linalg.norm(a @ x - b) <= 1e-8 * np.linalg.norm(b)


# -- norms ----------------------------------------------------------------------


def test_norms_identity():
    n = mx.norms(np.eye(3))
    assert n.nuclear == pytest.approx(3)
    assert n.frobenius == pytest.approx(np.sqrt(3))
    assert n.l21 == pytest.approx(3)
    assert n.linf == 1


def test_norms_zero():
    assert tuple(mx.norms(np.zeros((3, 2)))) == (0, 0, 0, 0)


def test_norms_ordering_random():
    m = _rng(8).standard_normal((5, 5))
    n = mx.norms(m)
    assert n.nuclear >= n.frobenius >= n.linf
    assert n.l21 == pytest.approx(np.linalg.norm(m, axis=0).sum())


@settings(max_examples=60, deadline=None)
@given(small_matrices())
def test_norm_ordering_property(m):
    n = mx.norms(m)
    assert n.nuclear >= n.frobenius * (1 - 1e-12) >= n.linf * (1 - 1e-12) - 1e-12
