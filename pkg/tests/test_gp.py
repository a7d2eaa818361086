import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from maternkrig.designs import Design, Domain, gen_halton, gen_random
from maternkrig.exceptions import ContractError, IllConditionedError
from maternkrig.gp import (
    ErrorNormSpec,
    GpSample,
    KrigingInterpolator,
    cholesky_spd,
    corr_matrix,
    empirical_error,
    fit_kriging,
    power_function,
    predict,
    quasi_power,
    sample_gp,
)
from maternkrig.kernels import KernelSpec, correlation, matern_corr

M15 = KernelSpec.matern(1.5)


def brute_corr(spec, pts):
    n = len(pts)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = correlation(spec, float(np.linalg.norm(pts[i] - pts[j])), dim=pts.shape[1])
    return out


def mc_squared_error(true, imposed, X, x, draws, seed):
    """Mean and standard error of (Z(x) - I_Phi Z(x))^2 by direct simulation."""
    pts = np.vstack([X, x])
    cov = true.sigma2 * brute_corr(true, pts)
    z = np.random.default_rng(seed).multivariate_normal(np.zeros(len(pts)), cov, size=draws, method="eigh")
    k_phi = brute_corr(imposed, X)
    r_phi = np.array([correlation(imposed, float(np.linalg.norm(x[0] - p)), dim=X.shape[1]) for p in X])
    coef = np.linalg.solve(k_phi, r_phi)
    err2 = (z[:, -1] - z[:, :-1] @ coef) ** 2
    return err2.mean(), err2.std(ddof=1) / math.sqrt(draws)


class TestCorrMatrix:
    def test_single_point(self):
        np.testing.assert_array_equal(corr_matrix(M15, [[0.3]]), [[1.0]])

    def test_two_points(self):
        m = corr_matrix(M15, [0.1, 0.6])
        assert m[0, 1] == m[1, 0] == pytest.approx(matern_corr(M15, 0.5))

    def test_brute_force(self, rng):
        pts = rng.random((5, 2))
        np.testing.assert_allclose(corr_matrix(M15, pts), brute_corr(M15, pts), rtol=1e-14)


class TestCholesky:
    def test_identity(self):
        L, j = cholesky_spd(np.eye(4))
        np.testing.assert_array_equal(L, np.eye(4))
        assert j == 0.0

    def test_two_by_two(self):
        L, j = cholesky_spd(np.array([[1.0, 0.5], [0.5, 1.0]]))
        np.testing.assert_allclose(L, [[1.0, 0.0], [0.5, math.sqrt(0.75)]], rtol=1e-15)
        assert j == 0.0

    def test_clustered_matern(self, rng):
        pts = np.sort(np.concatenate([0.3 + 1e-3 * rng.random(50), 0.7 + 1e-3 * rng.random(50)]))
        m = corr_matrix(KernelSpec.matern(2.8), pts)
        L, j = cholesky_spd(m)
        assert 0.0 < j <= 1e-8
        assert np.max(np.abs(L @ L.T - (m + j * np.eye(100)))) <= 1e-10
        np.testing.assert_array_equal(L, np.tril(L))

    def test_failure_reports_minor(self):
        m = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(IllConditionedError) as info:
            cholesky_spd(m)
        assert info.value.minor == 2 and info.value.jitter == 1e-8

    def test_max_jitter_caps_ladder(self):
        m = np.ones((3, 3))
        with pytest.raises(IllConditionedError) as info:
            cholesky_spd(m, max_jitter=0.0)
        assert info.value.jitter == 0.0


class TestSampleGp:
    def test_deterministic(self):
        a = sample_gp(M15, [0.1, 0.5, 0.9], seed=3)
        b = sample_gp(M15, [0.1, 0.5, 0.9], seed=3)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.seed == 3

    def test_variance_and_correlation(self):
        spec = KernelSpec.matern(1.1, sigma2=2.5)
        r = 0.2
        draws = np.array([sample_gp(spec, [0.0, r], seed=s).values for s in range(10_000)])
        var = draws.var(axis=0)
        assert np.all(np.abs(var / 2.5 - 1) < 0.05)
        assert abs(np.corrcoef(draws.T)[0, 1] - matern_corr(spec, r)) < 0.03

    def test_length_contract(self):
        with pytest.raises(ContractError):
            GpSample(np.zeros((3, 1)), np.zeros(2), M15)


class TestKriging:
    def test_single_point_weight(self):
        model = fit_kriging(Design([0.4]), [2.5], M15)
        assert model.weights_[0] == pytest.approx(2.5)

    def test_interpolates(self, rng):
        X = gen_random(1, 12, seed=5)
        y = rng.standard_normal(12)
        model = fit_kriging(X, y, KernelSpec.matern(2.8))
        np.testing.assert_allclose(model.predict(X.points), y, atol=1e-6)
        assert predict(model, X.points[3]) == pytest.approx(y[3], abs=1e-6)

    def test_factor_identity(self, rng):
        X = gen_random(2, 30, seed=2)
        model = fit_kriging(X, rng.standard_normal(30), KernelSpec.matern(1.3))
        k = corr_matrix(KernelSpec.matern(1.3), X.points)
        L = model.chol_factor_
        assert np.max(np.abs(L @ L.T - (k + model.jitter_used_ * np.eye(30)))) <= 1e-10

    def test_symmetric_pair_midpoint(self):
        c, r = 1.7, 0.6
        spec = KernelSpec.matern(2.8)
        model = fit_kriging(Design([0.2, 0.8]), [c, c], spec)
        expected = c * 2 * matern_corr(spec, r / 2) / (1 + matern_corr(spec, r))
        assert predict(model, 0.5) == pytest.approx(expected, rel=1e-12)

    def test_three_point_dense_solve(self):
        X = np.array([[0.1], [0.35], [0.8]])
        y = np.array([0.3, -1.2, 0.7])
        spec = KernelSpec.matern(1.1, phi=1.4)
        x = 0.52
        K = brute_corr(spec, X)
        r = np.array([matern_corr(spec, abs(x - p[0])) for p in X])
        expected = r @ np.linalg.solve(K, y)
        assert predict(fit_kriging(X, y, spec), x) == pytest.approx(expected, rel=1e-12)

    def test_far_point_reverts_to_zero(self):
        model = fit_kriging(Design([0.1, 0.2], Domain(1, ((0, 100),))), [1.0, 2.0], M15)
        assert abs(predict(model, 99.0)) < 1e-20

    def test_mismatched_lengths(self):
        with pytest.raises(ContractError):
            fit_kriging(Design([0.1, 0.2]), [1.0], M15)

    def test_estimator_api(self, rng):
        est = KrigingInterpolator(KernelSpec.matern(2.1), max_jitter=1e-10)
        assert est.get_params() == {"kernel": KernelSpec.matern(2.1), "max_jitter": 1e-10}
        with pytest.raises(NotFittedError):
            est.predict([[0.5]])
        X = rng.random((15, 2))
        y = np.sin(3 * X[:, 0]) + X[:, 1]
        est.fit(X, y)
        assert est.score(X, y) == pytest.approx(1.0, abs=1e-9)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params() and not hasattr(cloned, "weights_")
        with pytest.raises(ValueError):
            est.predict(rng.random((3, 3)))
        est.set_params(kernel=KernelSpec.matern(0.5))
        assert est.kernel.nu == 0.5

    def test_prediction_weights_match_predict(self, rng):
        X = rng.random(10)
        y = rng.standard_normal(10)
        model = fit_kriging(X, y, M15)
        q = rng.random(7)
        np.testing.assert_allclose(model.prediction_weights(q) @ y, model.predict(q), rtol=1e-10, atol=1e-12)


class TestPowerFunctions:
    def test_power_zero_at_design(self):
        X = gen_random(1, 8, seed=1)
        vals = power_function(M15, X, X.points)
        assert np.all(vals <= 1e-10)

    def test_power_single_point(self):
        spec = KernelSpec.matern(1.1, sigma2=3.0)
        expected = 3.0 * (1 - matern_corr(spec, 0.25) ** 2)
        assert power_function(spec, Design([0.5]), 0.75) == pytest.approx(expected, rel=1e-12)

    def test_quasi_equals_power_when_kernels_match(self, rng):
        X = gen_random(1, 10, seed=4)
        x = rng.random(25)
        np.testing.assert_allclose(quasi_power(M15, M15, X, x), power_function(M15, X, x), atol=1e-12)

    def test_quasi_zero_at_design(self):
        X = gen_random(1, 6, seed=9)
        assert np.all(quasi_power(KernelSpec.matern(1.1), KernelSpec.matern(2.8), X, X.points) <= 1e-10)

    def test_clamp_count(self):
        X = np.linspace(0, 1, 30)
        vals, n_clamped = power_function(KernelSpec.matern(2.8), X, X, return_n_clamped=True)
        assert np.all(vals >= 0) and 0 <= n_clamped <= 30

    def test_power_monte_carlo(self):
        spec = KernelSpec.matern(1.5)
        X = np.array([[0.1], [0.3], [0.55], [0.9]])
        x = np.array([[0.42]])
        mean, se = mc_squared_error(spec, spec, X, x, 100_000, seed=7)
        assert abs(power_function(spec, X, 0.42) - mean) <= 3 * se

    def test_quasi_monte_carlo(self):
        true, imposed = KernelSpec.matern(1.1), KernelSpec.matern(2.8)
        X = np.array([[0.15], [0.5], [0.62]])
        x = np.array([[0.33]])
        mean, se = mc_squared_error(true, imposed, X, x, 100_000, seed=8)
        assert abs(quasi_power(true, imposed, X, 0.33) - mean) <= 3 * se

    def test_blp_inequality(self, rng):
        for _ in range(60):
            n = int(rng.integers(1, 15))
            X = rng.random((n, 1))
            x = rng.random((5, 1))
            true = KernelSpec.matern(rng.uniform(0.3, 3.0), phi=rng.uniform(0.5, 2))
            imposed = KernelSpec.matern(rng.uniform(0.3, 3.5), phi=rng.uniform(0.5, 2))
            assert np.all(quasi_power(true, imposed, X, x) >= power_function(true, X, x) - 1e-10)

    def test_order_invariance(self, rng):
        X = rng.random(9)
        perm = rng.permutation(9)
        x = rng.random(6)
        t, i = KernelSpec.matern(1.1), KernelSpec.matern(2.1)
        np.testing.assert_allclose(power_function(t, X, x), power_function(t, X[perm], x), atol=1e-12)
        np.testing.assert_allclose(quasi_power(t, i, X, x), quasi_power(t, i, X[perm], x), atol=1e-10)

    def test_monotone_information(self, rng):
        for _ in range(30):
            n = int(rng.integers(1, 20))
            X = rng.random((n + 1, 1))
            x = rng.random((10, 1))
            spec = KernelSpec.matern(rng.uniform(0.5, 2.5))
            assert np.all(power_function(spec, X, x) <= power_function(spec, X[:n], x) + 1e-10)


class TestEmpiricalError:
    def test_own_design_is_zero(self):
        X = gen_random(1, 15, seed=2)
        s = sample_gp(M15, X.points, seed=3)
        model = fit_kriging(X, s.values, KernelSpec.matern(2.8))
        for norm in (ErrorNormSpec("sup", eval_set=X), ErrorNormSpec("lp", 2, eval_set=X)):
            assert empirical_error(s, model, norm) <= 1e-6

    def test_zero_sample(self):
        X = gen_random(1, 5, seed=1)
        E = gen_halton(1, 20)
        pts = np.vstack([X.points, E.points])
        s = GpSample(pts, np.zeros(len(pts)), M15)
        model = fit_kriging(X, np.zeros(5), M15)
        assert empirical_error(s, model, ErrorNormSpec("sup", eval_set=E)) == 0.0

    def test_missing_eval_point(self):
        X = gen_random(1, 5, seed=1)
        s = sample_gp(M15, X.points, seed=1)
        model = fit_kriging(X, s.values[:5], M15)
        with pytest.raises(ContractError):
            empirical_error(s, model, ErrorNormSpec("sup", eval_set=gen_halton(1, 3)))

    def test_independent_reimplementation(self):
        X = gen_random(1, 10, seed=21)
        E = gen_halton(1, 200)
        pts = np.vstack([X.points, E.points])
        s = sample_gp(M15, pts, seed=22)
        model = fit_kriging(X, s.values[:10], M15)
        K = brute_corr(M15, X.points)
        residuals = []
        for k, e in enumerate(E.points):
            r = np.array([matern_corr(M15, abs(e[0] - p[0])) for p in X.points])
            residuals.append(s.values[10 + k] - r @ np.linalg.solve(K, s.values[:10]))
        residuals = np.abs(residuals)
        sup = empirical_error(s, model, ErrorNormSpec("sup", eval_set=E))
        l1 = empirical_error(s, model, ErrorNormSpec("lp", 1, eval_set=E))
        l2 = empirical_error(s, model, ErrorNormSpec("lp", 2, eval_set=E))
        assert sup == pytest.approx(residuals.max(), abs=1e-10)
        assert l1 == pytest.approx(residuals.mean(), abs=1e-10)
        assert l2 == pytest.approx(math.sqrt(np.mean(residuals**2)), abs=1e-10)
        assert l1 <= l2 <= sup

    def test_lp_volume_scaling(self):
        norm = ErrorNormSpec("lp", 2)
        assert norm.reduce([1.0, 1.0], volume=4.0) == pytest.approx(2.0)

    def test_invalid_norm(self):
        with pytest.raises(ValueError):
            ErrorNormSpec("lp", 0.5)
        with pytest.raises(ValueError):
            ErrorNormSpec("max")
