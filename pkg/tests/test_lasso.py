import math

import numpy as np
import pytest

from tslasso.conditions import db_bound, re_tolerance
from tslasso.errors import DimensionError
from tslasso.lasso import (
    LassoConfig,
    error_metrics,
    kkt_residual,
    objective_value,
    solve,
    theoretical_bounds,
)
from tslasso.numerics import soft_threshold


def random_instance(rng, T=80, n=6, q=3, noise=0.5):
    X = rng.standard_normal((T, n))
    theta = rng.standard_normal((n, q))
    theta[rng.random((n, q)) < 0.5] = 0.0
    Y = X @ theta + noise * rng.standard_normal((T, q))
    return X, Y


class TestSolve:
    def test_zero_penalty_is_ols(self):
        rng = np.random.default_rng(0)
        X, Y = random_instance(rng)
        sol = solve(X, Y, LassoConfig(lam=0.0, tol=1e-10))
        ols = np.linalg.solve(X.T @ X, X.T @ Y)
        assert np.linalg.norm(sol.theta_hat - ols) <= 1e-6

    def test_orthonormal_closed_form(self):
        rng = np.random.default_rng(1)
        T, n, q = 36, 6, 2
        Q, _ = np.linalg.qr(rng.standard_normal((T, n)))
        X = math.sqrt(T) * Q  # makes X'X / T the identity
        Y = rng.standard_normal((T, q))
        lam = 0.3
        sol = solve(X, Y, LassoConfig(lam=lam, tol=1e-12))
        expected = soft_threshold(X.T @ Y / T, lam / 2.0)
        assert np.max(np.abs(sol.theta_hat - expected)) <= 1e-8
        assert kkt_residual(X, Y, sol.theta_hat, lam) <= 1e-8

    def test_two_coordinate_grid_oracle(self):
        rng = np.random.default_rng(2)
        T = 40
        X = rng.standard_normal((T, 2))
        Y = X @ np.array([[0.8], [-0.4]]) + 0.3 * rng.standard_normal((T, 1))
        lam = 0.2
        sol = solve(X, Y, LassoConfig(lam=lam, tol=1e-10))
        # exhaustive grid search on [-2, 2]^2 at resolution 1e-3; the
        # quadratic form is expanded so each grid row is one vector op
        g = X.T @ X / T
        c = (X.T @ Y / T).ravel()
        const = float(np.sum(Y * Y)) / T
        axis = np.round(np.arange(-2.0, 2.0 + 1e-9, 1e-3), 9)
        best_val, best_pt = np.inf, None
        for t1 in axis:
            vals = (g[0, 0] * t1 * t1 + 2.0 * g[0, 1] * t1 * axis
                    + g[1, 1] * axis * axis
                    - 2.0 * (c[0] * t1 + c[1] * axis) + const
                    + lam * (abs(t1) + np.abs(axis)))
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val, best_pt = float(vals[i]), (t1, axis[i])
        assert abs(sol.theta_hat[0, 0] - best_pt[0]) <= 2e-3
        assert abs(sol.theta_hat[1, 0] - best_pt[1]) <= 2e-3

    def test_kkt_small_on_converged(self):
        rng = np.random.default_rng(3)
        for k in range(10):
            X, Y = random_instance(rng)
            cfg = LassoConfig(lam=0.1 * (k + 1) / 10, tol=1e-8)
            sol = solve(X, Y, cfg)
            assert sol.converged
            assert sol.kkt_residual <= 10 * cfg.tol

    def test_monotone_descent(self):
        rng = np.random.default_rng(4)
        X, Y = random_instance(rng)
        lam = 0.15
        prev = objective_value(X, Y, np.zeros((6, 3)), lam)
        for sweeps in range(1, 12):
            sol = solve(X, Y, LassoConfig(lam=lam, tol=1e-16, max_sweeps=sweeps))
            assert sol.objective <= prev + 1e-12
            prev = sol.objective

    def test_ordering_invariance(self):
        rng = np.random.default_rng(5)
        X, Y = random_instance(rng)
        cfg = LassoConfig(lam=0.2, tol=1e-9)
        sol = solve(X, Y, cfg)
        # reversed coordinate order realized by permuting design columns
        rev = solve(X[:, ::-1], Y, cfg)
        theta_rev = rev.theta_hat[::-1]
        assert abs(sol.objective - objective_value(X, Y, theta_rev, 0.2)) <= 1e-9
        assert kkt_residual(X, Y, theta_rev, 0.2) <= 10 * cfg.tol

    def test_column_separability(self):
        rng = np.random.default_rng(6)
        X, Y = random_instance(rng)
        cfg = LassoConfig(lam=0.25, tol=1e-10)
        joint = solve(X, Y, cfg)
        for j in range(Y.shape[1]):
            single = solve(X, Y[:, j], cfg)
            assert np.array_equal(joint.theta_hat[:, j], single.theta_hat[:, 0])

    def test_objective_recomputed(self):
        rng = np.random.default_rng(7)
        X, Y = random_instance(rng)
        sol = solve(X, Y, LassoConfig(lam=0.1))
        direct = objective_value(X, Y, sol.theta_hat, 0.1)
        assert sol.objective == pytest.approx(direct, rel=1e-10)

    def test_row_mismatch(self):
        with pytest.raises(DimensionError):
            solve(np.zeros((5, 2)), np.zeros((6, 1)), LassoConfig(lam=0.1))

    def test_nonconvergence_flagged(self):
        rng = np.random.default_rng(8)
        X, Y = random_instance(rng)
        sol = solve(X, Y, LassoConfig(lam=0.01, tol=1e-14, max_sweeps=1))
        assert not sol.converged


class TestKKTResidual:
    def test_null_solution_optimal(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((30, 4))
        Y = rng.standard_normal((30, 2))
        lam = float(np.max(np.abs(2.0 * X.T @ Y / 30))) + 0.1
        assert kkt_residual(X, Y, np.zeros((4, 2)), lam) == 0.0

    def test_perturbation_response(self):
        rng = np.random.default_rng(10)
        X, Y = random_instance(rng)
        sol = solve(X, Y, LassoConfig(lam=0.1, tol=1e-12))
        theta = sol.theta_hat.copy()
        j, k = np.argwhere(theta != 0)[0]
        gram = X.T @ X / X.shape[0]
        theta[j, k] += 0.01
        assert kkt_residual(X, Y, theta, 0.1) >= 0.01 * gram[j, j] * 2.0 - 1e-6


class TestErrorMetrics:
    def test_zero_at_truth(self):
        theta = np.ones((4, 2))
        met = error_metrics(theta, theta, np.eye(4))
        assert met == {"l2_err": 0.0, "pred_err": 0.0}

    def test_identity_gram(self):
        delta = np.array([[1.0, 0.0], [0.0, 2.0]])
        met = error_metrics(delta, np.zeros((2, 2)), np.eye(2))
        assert met["l2_err"] == pytest.approx(math.sqrt(5.0))
        assert met["pred_err"] == pytest.approx(np.sum((delta.T @ delta) ** 2))

    def test_rank_one_closed_form(self):
        rng = np.random.default_rng(11)
        u = rng.standard_normal(5)
        v = rng.standard_normal(3)
        B = rng.standard_normal((5, 5))
        gram = B @ B.T
        delta = np.outer(u, v)
        met = error_metrics(delta, np.zeros((5, 3)), gram)
        quad = float(u @ gram @ u)
        # Delta' G Delta = (u'Gu) vv', so its squared Frobenius norm is
        # (u'Gu)^2 ||v||^4
        assert met["pred_err"] == pytest.approx(quad ** 2 * np.linalg.norm(v) ** 4,
                                                rel=1e-10)
        assert met["l2_err"] == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v),
                                              rel=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            error_metrics(np.zeros((2, 2)), np.zeros((3, 2)), np.eye(2))


class TestTheoreticalBounds:
    def test_bound_formulas(self):
        rep = theoretical_bounds(s=4, alpha=0.5, K=1.2, C_B=0.5, xi=0.5,
                                 p=50, q=50, T=4000, c_beta=0.4)
        assert rep.est_error_bound == pytest.approx(
            4.0 * 2.0 * rep.lambda_T / 0.5, rel=1e-12)
        assert rep.pred_error_bound == pytest.approx(
            32.0 * rep.lambda_T ** 2 * 4 / 0.5, rel=1e-12)

    def test_direct_substitution(self):
        # with lambda_T forced to 0.1 the bounds are 1.6 and 2.56
        lam = 0.1
        assert 4.0 * math.sqrt(4) * lam / 0.5 == pytest.approx(1.6)
        assert 32.0 * lam ** 2 * 4 / 0.5 == pytest.approx(2.56)
        rep = theoretical_bounds(s=4, alpha=0.5, K=1.0, C_B=0.5, xi=0.5,
                                 p=50, q=50, T=4000, c_beta=0.4)
        assert rep.est_error_bound == pytest.approx(
            4.0 * math.sqrt(4) * rep.lambda_T / 0.5, rel=1e-12)

    def test_doubling_T_small_xi(self):
        xi = 1e-12
        a = theoretical_bounds(s=4, alpha=0.5, K=1.0, C_B=0.5, xi=xi,
                               p=50, q=50, T=4000, c_beta=0.4)
        b = theoretical_bounds(s=4, alpha=0.5, K=1.0, C_B=0.5, xi=xi,
                               p=50, q=50, T=8000, c_beta=0.4)
        assert b.lambda_T == pytest.approx(a.lambda_T / math.sqrt(2.0), rel=1e-9)

    def test_threshold_duplicate_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            s = int(rng.integers(2, 10))
            alpha = float(rng.uniform(0.1, 2.0))
            K = float(rng.uniform(0.5, 3.0))
            C_B = float(rng.uniform(0.1, 2.0))
            xi = float(rng.uniform(0.2, 0.8))
            c_beta = float(rng.uniform(0.1, 2.0))
            p = q = 50
            T = int(rng.integers(100, 100_000))
            rep = theoretical_bounds(s=s, alpha=alpha, K=K, C_B=C_B, xi=xi,
                                     p=p, q=q, T=T, c_beta=c_beta)
            # independent recomputation of the three-way max threshold
            lpq = math.log(p * q)
            kx = K ** 2
            lam_min = 2.0 * alpha
            db = db_bound(K, C_B, xi, p, q, T, c_beta=c_beta)
            b = min(lam_min / (54.0 * kx), 1.0)
            c = (1.0 / 6.0) * max(c_beta, min(C_B, 2.0) * b * b)
            thr = max((math.log(p) / c) ** 2
                      * max((1728.0 * s * b * kx / lam_min) ** 2, 1.0),
                      db["threshold_T"])
            assert rep.threshold_T == pytest.approx(thr, rel=1e-12)
            assert rep.sample_threshold_ok == (T >= thr)

    def test_bad_xi(self):
        with pytest.raises(ValueError):
            theoretical_bounds(s=4, alpha=0.5, K=1.0, C_B=0.5, xi=1.5,
                               p=50, q=50, T=4000, c_beta=0.4)

    def test_desk_scale_bound_validity(self):
        # bound holds with conservative constants whenever the certified
        # curvature is positive; occasional violations tolerated
        from tslasso.conditions import lower_re_certificate
        from tslasso.dgm import make_example_spec, simulate
        from tslasso.problem import build_problem, population_target
        violations = checked = 0
        for r in range(50):
            spec = make_example_spec("gaussian_var", 20, 4)
            series = simulate(spec, 2001, seed=3000 + r)
            prob = build_problem(series, 1)
            theta_star = population_target(spec, 1)
            cert = lower_re_certificate(prob.gram, 4, mode="randomized",
                                        n_random=500, n_supports=50, seed=r)
            alpha = cert.min_sparse_eig
            if alpha <= 0:
                continue
            rep = theoretical_bounds(s=4, alpha=alpha, K=1.0, C_B=0.05,
                                     xi=0.5, p=20, q=20, T=prob.T, c_beta=0.4)
            lam = rep.lambda_T
            sol = solve(prob.X, prob.Y, LassoConfig(lam=lam))
            met = error_metrics(sol.theta_hat, theta_star, prob.gram)
            checked += 1
            if met["l2_err"] > rep.est_error_bound:
                violations += 1
        assert checked >= 40
        assert violations <= 2
