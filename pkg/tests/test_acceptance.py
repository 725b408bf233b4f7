"""Acceptance criteria 1 to 9 at their stated tolerances.

Each test wraps its checks in ``acceptance(n, title)`` so that the terminal
summary prints one PASS or FAIL line per criterion.  Seeded baselines were
recorded on the first run of this implementation and are pinned below.
"""

import time

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from clrr import matrix as mx
from clrr import solver as sv
from clrr import tasks
from clrr.bench import scaling_sweep
from clrr.regularizers import LabelVector, between_laplacian, centering_laplacian, within_laplacian
from clrr.solver import SolverConfig
from clrr.synth import SynthSpec, gen_regression, gen_union_subspaces

# criterion 3 / 5 instance
RECOVERY_SPEC = SynthSpec(50, (4, 4, 4), (20, 20, 20), 0.0, 0.1, 10.0, seed=0)
RECOVERY_CFG = SolverConfig(alpha=2.0**-4, beta=1.0, lam=0.5)
BASELINE_ITERATIONS = 59
BASELINE_RECOVERED_ERROR = 4.124178599
BASELINE_RAW_ERROR = 11.253359877

# criterion 6 instance: 300 samples split 200 / 100 by a seeded permutation
CLASSIFY_SPEC = SynthSpec(50, (4, 4, 4), (100, 100, 100), 0.0, 0.1, 10.0, seed=0, coefficient_mean=1.0)
SPLIT_SEED = 1000
BASELINE_ERRORS = {"nn": (0.05, 0.06), "mmd": (0.09, 0.09)}  # (recovered, raw)

# criterion 7 instance: 120 samples split 84 / 36
REGRESSION_SPEC = SynthSpec(10, (4, 4, 4), (40, 40, 40), 0.01, 0.1, 10.0, seed=0)
BASELINE_ANGLE = (0.78531984, 1.34390131)  # (clrr, least squares)


def _split(n, n_train, seed):
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def _central_diff(f, at, h=1e-5):
    g = np.zeros_like(at)
    for idx in np.ndindex(at.shape):
        e = np.zeros_like(at)
        e[idx] = h
        g[idx] = (f(at + e) - f(at - e)) / (2 * h)
    return g


def test_criterion_1_proximal_oracles(acceptance):
    with acceptance(1, "svt and prox_l21 beat 1e4 perturbations and match scalar oracles, < 10 s"):
        t0 = time.perf_counter()
        rng = np.random.default_rng(1)
        tau = 0.3
        for side in (6, 20):
            m = rng.standard_normal((side, side))
            j = mx.svt(m, tau)
            base = tau * mx.nuclear_norm(j) + 0.5 * np.sum((j - m) ** 2)
            for chunk in range(10):
                d = rng.standard_normal((1000, side, side))
                d *= 1e-3 / np.linalg.norm(d, axis=(1, 2), keepdims=True)
                nuc = np.linalg.svd(j + d, compute_uv=False).sum(axis=1)
                vals = tau * nuc + 0.5 * np.sum((j + d - m) ** 2, axis=(1, 2))
                assert np.all(vals > base), f"svt beaten at {side}x{side}"
        q = rng.standard_normal((10, 6))
        tau = 0.2
        out = mx.prox_l21(q, tau)
        e = out.copy()
        for i in range(6):
            r = np.linalg.norm(q[:, i])
            s = minimize_scalar(lambda s: tau * s + 0.5 * (s - r) ** 2, bounds=(0, r),
                                method="bounded", options={"xatol": 1e-12}).x
            e[:, i] = s * q[:, i] / r
        assert np.max(np.abs(out - e)) <= 1e-8
        # the l21 objective also beats random perturbations
        base = tau * mx.l21_norm(out) + 0.5 * np.sum((out - q) ** 2)
        d = rng.standard_normal((10_000, 10, 6))
        d *= 1e-3 / np.linalg.norm(d, axis=(1, 2), keepdims=True)
        vals = tau * np.linalg.norm(out + d, axis=1).sum(axis=1) + 0.5 * np.sum((out + d - q) ** 2, axis=(1, 2))
        assert np.all(vals > base)
        elapsed = time.perf_counter() - t0
        print(f"criterion 1 runtime {elapsed:.2f} s")
        assert elapsed < 10


def test_criterion_2_stationarity(acceptance):
    with acceptance(2, "update_p and update_z zero their gradients, FD agreement 1e-4, < 30 s"):
        t0 = time.perf_counter()
        d, n, k = 6, 8, 3
        labels = LabelVector(np.arange(n) % k)
        l = between_laplacian(labels)
        worst = 0.0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            x = rng.standard_normal((d, n))
            y = rng.standard_normal((k, n))
            cfg = SolverConfig(alpha=0.3, beta=1.2)
            state = sv.SolverState(
                z=rng.standard_normal((n, n)), j=rng.standard_normal((n, n)),
                e=rng.standard_normal((d, n)), p=rng.standard_normal((d, k)),
                psi_a=rng.standard_normal((d, n)), psi_b=rng.standard_normal((n, n)),
                psi_c=rng.standard_normal((1, n)), mu=0.7, iter=3,
            )

            def fp(p):
                return sv.constraint_term(x, y, l, state.z, p, cfg)

            p_pt = rng.standard_normal((d, k))
            g = sv.grad_constraint_p(x, y, l, state.z, p_pt, cfg)
            rel = np.linalg.norm(g - _central_diff(fp, p_pt)) / np.linalg.norm(g)
            worst = max(worst, rel)
            assert rel <= 1e-4
            p = sv.update_p(x, y, l, state, cfg)
            assert np.linalg.norm(sv.grad_constraint_p(x, y, l, state.z, p, cfg)) <= 1e-6 * (1 + np.linalg.norm(p))

            def fz(z):
                return sv.z_subproblem(x, y, state, cfg, z)

            z_pt = rng.standard_normal((n, n))
            g = sv.grad_z_subproblem(x, y, state, cfg, z_pt)
            rel = np.linalg.norm(g - _central_diff(fz, z_pt)) / np.linalg.norm(g)
            worst = max(worst, rel)
            assert rel <= 1e-4
            z = sv.update_z(sv.build_z_system(x, y, l, state, cfg))
            assert np.linalg.norm(sv.grad_z_subproblem(x, y, state, cfg, z)) <= 1e-6 * (1 + np.linalg.norm(z))
        elapsed = time.perf_counter() - t0
        print(f"criterion 2 worst FD relative error {worst:.2e}, runtime {elapsed:.2f} s")
        assert elapsed < 30


@pytest.fixture(scope="module")
def recovery_run():
    data = gen_union_subspaces(RECOVERY_SPEC)
    t0 = time.perf_counter()
    run = tasks.recover(data.x, data.labels, cfg=RECOVERY_CFG)
    return data, run, time.perf_counter() - t0


def test_criterion_3_convergence(acceptance, recovery_run):
    with acceptance(3, "seeded instance converges, residuals < 1e-7, < 60 s, iterations 59 +-20%"):
        _, run, elapsed = recovery_run
        rep = run.report
        assert rep.config.mu0 == 0.01 and rep.config.rho == 1.3
        assert rep.config.mu_max == 1e6 and rep.config.eps == 1e-7
        print(f"criterion 3 iterations {rep.iterations}, residuals {tuple(rep.final_residuals)}, "
              f"runtime {elapsed:.2f} s")
        assert rep.converged and rep.iterations <= 500
        assert all(r < 1e-7 for r in rep.final_residuals)
        assert elapsed < 60
        assert 0.8 * BASELINE_ITERATIONS <= rep.iterations <= 1.2 * BASELINE_ITERATIONS


def test_criterion_4_laplacian_identity(acceptance):
    with acceptance(4, "L_w + L_b = I - 11^T/n to 1e-12 for 100 random label assignments"):
        rng = np.random.default_rng(4)
        for _ in range(100):
            n = int(rng.integers(1, 40))
            raw = rng.integers(0, int(rng.integers(1, 8)), n)
            y = LabelVector.from_labels(raw.tolist())
            total = within_laplacian(y).l + between_laplacian(y).l
            assert np.max(np.abs(total - centering_laplacian(n).l)) <= 1e-12


def test_criterion_5_recovery_quality(acceptance, recovery_run):
    with acceptance(5, "XZ closer to clean data than X; top-k error columns precision >= 0.9"):
        data, run, _ = recovery_run
        clean = np.linalg.norm(data.clean_x)
        rec_err = np.linalg.norm(run.recovered - data.clean_x) / clean
        raw_err = np.linalg.norm(data.x - data.clean_x) / clean
        k = data.corrupted_columns.size
        top = np.argsort(-run.column_error_norms, kind="stable")[:k]
        precision = np.intersect1d(top, data.corrupted_columns).size / k
        print(f"criterion 5 relative error XZ {rec_err:.4f} vs X {raw_err:.4f}, precision {precision:.2f}")
        assert rec_err < raw_err
        assert precision >= 0.9
        assert rec_err == pytest.approx(BASELINE_RECOVERED_ERROR, rel=1e-4)
        assert raw_err == pytest.approx(BASELINE_RAW_ERROR, rel=1e-9)


def test_criterion_6_classification(acceptance):
    with acceptance(6, "NN and MMD error on recovered features <= error on raw features"):
        data = gen_union_subspaces(CLASSIFY_SPEC)
        tr, te = _split(300, 200, SPLIT_SEED)
        lab = data.labels.index
        xtr, xte = data.x[:, tr], data.x[:, te]
        found = {}
        for name in ("nn", "mmd"):
            run = tasks.classify(xtr, lab[tr], xte, classifier=name, test_labels=lab[te])
            raw_preds = tasks.CLASSIFIERS[name](
                tasks.normalize_columns(xtr)[0], lab[tr], tasks.normalize_columns(xte)[0]
            )
            found[name] = (run.error_rate, tasks.error_rate(raw_preds, lab[te]))
            print(f"criterion 6 {name}: recovered {found[name][0]:.2f} vs raw {found[name][1]:.2f}")
        for name, (rec, raw) in found.items():
            assert rec <= raw, name
        for name, pinned in BASELINE_ERRORS.items():
            assert found[name] == pytest.approx(pinned, abs=1e-12), name


def test_criterion_7_regression(acceptance):
    with acceptance(7, "CLRR angle error <= least squares; planted map recovered to 1e-4"):
        data = gen_regression(REGRESSION_SPEC, 3)
        tr, te = _split(120, 84, SPLIT_SEED)
        # held-out samples that were themselves replaced carry no signal for either method
        good = np.setdiff1d(te, data.corrupted_columns)
        run = tasks.pose_estimate(data.x[:, tr], data.targets[:, tr], data.x[:, good],
                                  test_targets=data.targets[:, good])
        p_ls = tasks.least_squares_map(data.x[:, tr], data.targets[:, tr])
        ls = tasks.angle_error(p_ls.T @ data.x[:, good], data.targets[:, good])
        print(f"criterion 7 angle error CLRR {run.angle_error:.4f} vs least squares {ls:.4f}")
        assert run.angle_error <= ls
        assert (run.angle_error, ls) == pytest.approx(BASELINE_ANGLE, rel=1e-4)

        clean = gen_regression(SynthSpec(10, (4, 4, 4), (40, 40, 40), seed=0), 3)
        planted = tasks.pose_estimate(clean.x, clean.targets, clean.x, cfg=SolverConfig(alpha=0.0))
        rel = np.linalg.norm(planted.projection - clean.planted_map) / np.linalg.norm(clean.planted_map)
        print(f"criterion 7 planted map relative error {rel:.2e}")
        assert planted.report.converged
        assert rel <= 1e-4


def test_criterion_8_degeneracy(acceptance):
    with acceptance(8, "alpha = beta = 0 is bitwise invariant to Y and gives E ~ 0 on clean data"):
        cfg = SolverConfig(alpha=0.0, beta=0.0)
        data = gen_union_subspaces(SynthSpec(50, (4, 4, 4), (20, 20, 20), seed=0))
        x = data.x / np.linalg.norm(data.x, axis=0)
        rng = np.random.default_rng(8)
        a = sv.solve(x, rng.standard_normal((3, 60)), None, cfg)
        b = sv.solve(x, rng.standard_normal((3, 60)), None, cfg)
        for name in ("z", "e", "j"):
            assert np.array_equal(getattr(a.final_state, name), getattr(b.final_state, name))
        assert a.converged
        ratio = np.linalg.norm(a.final_state.e) / np.linalg.norm(x)
        ident = np.repeat(rng.standard_normal((20, 3)), 6, axis=1)
        c = sv.solve(ident, None, None, cfg)
        ratio_ident = np.linalg.norm(c.final_state.e) / np.linalg.norm(ident)
        print(f"criterion 8 ||E||/||X|| union {ratio:.1e}, identical columns {ratio_ident:.1e}")
        assert ratio <= 1e-5 and ratio_ident <= 1e-5 and c.converged


def test_criterion_9_scaling(acceptance):
    with acceptance(9, "per-iteration time at n = 100, 200, 400 within 2x of the cubic cost model"):
        res = scaling_sweep(ns=(100, 200, 400), d=50, iterations=10, repeats=3)
        for p, r in zip(res.points, res.ratios):
            print(f"criterion 9 n={p.n} {p.seconds_per_iter * 1e3:.2f} ms/iter, ratio to fit {r:.2f}")
        assert res.consistent
