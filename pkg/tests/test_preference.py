"""Preference inference against dense-algebra, FD, and grid oracles."""

import numpy as np
import pytest
from conftest import stratified_points
from scipy.stats import norm

from bopt import (
    LaplaceResult,
    MaximizerBudget,
    PreferenceDataset,
    PreferenceGaussianProcess,
    PreferenceOptimizer,
    laplace_map,
    preference_posterior,
    squared_exp_iso,
)
from bopt.kernels import cross_kernel
from bopt.preference import _incidence, latent_log_posterior

KERNEL = squared_exp_iso(length_scale=0.15)
SIGMA = 0.1


def dense_log_posterior(K, pairs, sigma, f):
    """Independent dense-algebra log-posterior for FD oracles."""
    z = np.array([(f[r] - f[c]) for r, c in pairs]) / (np.sqrt(2) * sigma)
    return -0.5 * f @ np.linalg.solve(K, f) + norm.logcdf(z).sum()


def random_instance(rng, t=5, m=6):
    # stratified items keep the latent Gram matrix well-conditioned, so
    # the dense oracles are not polluted by the stabilizing jitter
    items = stratified_points(rng, t, 1)
    pairs = []
    while len(pairs) < m:
        r, c = rng.integers(0, t, size=2)
        if r != c:
            pairs.append((int(r), int(c)))
    data = PreferenceDataset(items, np.array(pairs), np.array([[0.0, 1.0]]))
    K = cross_kernel(KERNEL, data.items, data.items)
    return data, K


class TestIncidence:
    def test_rows_are_plus_minus_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            t = rng.integers(2, 8)
            r = rng.integers(0, t)
            c = (r + rng.integers(1, t)) % t
            h = _incidence(np.array([[r, c]]), t)
            assert h[0, r] == 1.0
            assert h[0, c] == -1.0
            assert np.count_nonzero(h) == 2

    def test_rows_sum_to_zero(self):
        rng = np.random.default_rng(1)
        data, _ = random_instance(rng, t=6, m=10)
        h = _incidence(data.pairs, data.t)
        np.testing.assert_allclose(h.sum(axis=1), 0.0)


class TestLatentLogPosterior:
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            data, K = random_instance(rng)
            f = rng.normal(scale=0.5, size=data.t)
            _, grad, _ = latent_log_posterior(KERNEL, data, SIGMA, f)
            step = 1e-6
            fd = np.empty_like(f)
            for j in range(data.t):
                up, down = f.copy(), f.copy()
                up[j] += step
                down[j] -= step
                fd[j] = (
                    dense_log_posterior(K, data.pairs, SIGMA, up)
                    - dense_log_posterior(K, data.pairs, SIGMA, down)
                ) / (2 * step)
            assert np.linalg.norm(grad - fd) <= 1e-4 * max(np.linalg.norm(fd), 1.0)

    def test_hessian_matches_finite_differences(self):
        # the curvature entries were re-derived by hand; check them
        # against second differences of the independent log-posterior
        rng = np.random.default_rng(3)
        data, K = random_instance(rng, t=4, m=5)
        f = rng.normal(scale=0.4, size=data.t)
        _, _, hessian = latent_log_posterior(KERNEL, data, SIGMA, f)
        step = 1e-4
        fd = np.empty((data.t, data.t))
        for i in range(data.t):
            for j in range(data.t):
                probes = []
                for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    g = f.copy()
                    g[i] += si * step
                    g[j] += sj * step
                    probes.append(dense_log_posterior(K, data.pairs, SIGMA, g))
                fd[i, j] = (probes[0] - probes[1] - probes[2] + probes[3]) / (4 * step**2)
        # hessian is the NEGATED log-posterior curvature
        assert np.abs(-fd - hessian).max() <= 1e-3 * np.abs(hessian).max()

    def test_value_agrees_with_dense(self):
        rng = np.random.default_rng(4)
        data, K = random_instance(rng)
        f = rng.normal(size=data.t)
        value, _, _ = latent_log_posterior(KERNEL, data, SIGMA, f)
        assert value == pytest.approx(dense_log_posterior(K, data.pairs, SIGMA, f), rel=1e-8)


class TestLaplaceMap:
    def test_two_point_brute_force_oracle(self):
        data = PreferenceDataset(
            np.array([[0.3], [0.7]]), np.array([[0, 1]]), np.array([[0.0, 1.0]])
        )
        K = cross_kernel(KERNEL, data.items, data.items)
        grid = np.linspace(-3, 3, 601)
        f1, f2 = np.meshgrid(grid, grid, indexing="ij")
        K_inv = np.linalg.inv(K)
        quad = -0.5 * (
            K_inv[0, 0] * f1**2 + 2 * K_inv[0, 1] * f1 * f2 + K_inv[1, 1] * f2**2
        )
        surface = quad + norm.logcdf((f1 - f2) / (np.sqrt(2) * SIGMA))
        i, j = np.unravel_index(np.argmax(surface), surface.shape)
        result = laplace_map(KERNEL, data, SIGMA)
        assert result.converged
        assert result.f_map[0] == pytest.approx(grid[i], abs=0.02)
        assert result.f_map[1] == pytest.approx(grid[j], abs=0.02)
        assert result.f_map[0] > result.f_map[1]

    def test_gradient_vanishes_at_mode(self):
        rng = np.random.default_rng(5)
        for _ in range(15):
            data, _ = random_instance(rng, t=rng.integers(3, 7), m=rng.integers(2, 9))
            result = laplace_map(KERNEL, data, SIGMA)
            assert result.converged
            assert result.final_gradient_norm <= 1e-6

    def test_hessian_positive_semidefinite(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            data, _ = random_instance(rng)
            result = laplace_map(KERNEL, data, SIGMA)
            _, _, hessian = latent_log_posterior(KERNEL, data, SIGMA, result.f_map)
            assert np.linalg.eigvalsh(hessian).min() >= -1e-8

    def test_mode_beats_start(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            data, K = random_instance(rng)
            result = laplace_map(KERNEL, data, SIGMA)
            start = dense_log_posterior(K, data.pairs, SIGMA, np.zeros(data.t))
            mode = dense_log_posterior(K, data.pairs, SIGMA, result.f_map)
            assert mode >= start

    def test_curvature_rows_sum_to_zero(self):
        rng = np.random.default_rng(8)
        data, _ = random_instance(rng)
        result = laplace_map(KERNEL, data, SIGMA)
        np.testing.assert_allclose(result.c_matrix @ np.ones(data.t), 0.0, atol=1e-12)

    def test_stated_orderings_recovered(self):
        # five comparisons over seven 1D items; the inferred mode must
        # agree with every one of them
        items = np.array([[0.1], [0.2], [0.35], [0.5], [0.6], [0.7], [0.8]])
        comparisons = [(0.2, 0.1), (0.35, 0.5), (0.2, 0.35), (0.2, 0.6), (0.8, 0.7)]
        index = {0.1: 0, 0.2: 1, 0.35: 2, 0.5: 3, 0.6: 4, 0.7: 5, 0.8: 6}
        pairs = np.array([[index[w], index[l]] for w, l in comparisons])
        data = PreferenceDataset(items, pairs, np.array([[0.0, 1.0]]))
        result = laplace_map(KERNEL, data, SIGMA)
        assert result.converged
        for w, l in comparisons:
            assert result.f_map[index[w]] > result.f_map[index[l]]

    def test_symmetric_pair_ties(self):
        data = PreferenceDataset(
            np.array([[0.3], [0.7]]),
            np.array([[0, 1], [1, 0]]),
            np.array([[0.0, 1.0]]),
        )
        result = laplace_map(KERNEL, data, SIGMA)
        assert abs(result.f_map[0] - result.f_map[1]) <= 1e-6

    def test_preconditions(self):
        bounds = np.array([[0.0, 1.0]])
        single = PreferenceDataset(np.array([[0.3], [0.6]]), np.array([[0, 1]]), bounds)
        with pytest.raises(ValueError):
            laplace_map(KERNEL, single, 0.0)
        no_pairs = PreferenceDataset(
            np.array([[0.3], [0.6]]), np.empty((0, 2), dtype=int), bounds
        )
        with pytest.raises(ValueError):
            laplace_map(KERNEL, no_pairs, SIGMA)


class TestPreferencePosterior:
    def make_solved(self, rng=None, **kw):
        rng = rng or np.random.default_rng(9)
        data, _ = random_instance(rng, **kw)
        return data, laplace_map(KERNEL, data, SIGMA)

    def test_mean_interpolates_best_item(self):
        data, result = self.make_solved()
        idx = int(np.argmax(result.f_map))
        post = preference_posterior(KERNEL, data, result, data.items[idx])
        assert post.mean == pytest.approx(result.f_map[idx], abs=1e-6)

    def test_prior_reversion_far_from_items(self):
        data = PreferenceDataset(
            np.array([[0.45], [0.55]]), np.array([[0, 1]]), np.array([[0.0, 2.0]])
        )
        kernel = squared_exp_iso(length_scale=0.05)
        result = laplace_map(kernel, data, SIGMA)
        post = preference_posterior(kernel, data, result, [1.9])
        assert abs(post.mean) < 1e-6
        assert post.variance == pytest.approx(kernel.signal_variance, abs=1e-6)

    def test_variance_identity_on_invertible_curvature(self):
        # the implementation never inverts C; on synthetic instances where
        # C happens to be invertible it must agree with the direct
        # (K + C^-1)^-1 form computed densely
        rng = np.random.default_rng(10)
        for _ in range(8):
            t = int(rng.integers(2, 7))
            items = np.sort(rng.uniform(0, 1, size=t)).reshape(-1, 1)
            data = PreferenceDataset(
                items, np.array([[0, 1]]), np.array([[0.0, 1.0]])
            )
            A = rng.normal(size=(t, t))
            C = A @ A.T + 0.5 * np.eye(t)
            fake = LaplaceResult(
                f_map=rng.normal(size=t), c_matrix=C, b_vector=np.zeros(t),
                converged=True, iterations=0, final_gradient_norm=0.0,
            )
            K = cross_kernel(KERNEL, data.items, data.items)
            queries = rng.uniform(0, 1, size=(5, 1))
            for q in queries:
                post = preference_posterior(KERNEL, data, fake, q)
                k = cross_kernel(KERNEL, data.items, q[None, :])[:, 0]
                middle = np.linalg.inv(K + np.linalg.inv(C))
                direct = KERNEL.signal_variance - k @ middle @ k
                assert post.variance == pytest.approx(max(direct, 0.0), abs=1e-8)

    def test_variance_continuity_at_singular_curvature(self):
        # real curvature matrices are singular; the rewritten form must be
        # the limit of the regularized direct form
        data, result = self.make_solved(rng=np.random.default_rng(11))
        K = cross_kernel(KERNEL, data.items, data.items)
        query = np.array([0.42])
        post = preference_posterior(KERNEL, data, result, query)
        k = cross_kernel(KERNEL, data.items, query[None, :])[:, 0]
        C_reg = result.c_matrix + 1e-10 * np.eye(data.t)
        middle = np.linalg.inv(K + np.linalg.inv(C_reg))
        direct = KERNEL.signal_variance - k @ middle @ k
        assert post.variance == pytest.approx(max(direct, 0.0), abs=1e-6)

    def test_requires_convergence(self):
        data, result = self.make_solved()
        stale = LaplaceResult(
            result.f_map, result.c_matrix, result.b_vector,
            converged=False, iterations=100, final_gradient_norm=1.0,
        )
        with pytest.raises(ValueError, match="converge"):
            preference_posterior(KERNEL, data, stale, [0.5])

    def test_variance_nonnegative_on_grid(self):
        data, result = self.make_solved()
        for q in np.linspace(0, 1, 50):
            assert preference_posterior(KERNEL, data, result, [q]).variance >= 0.0


class TestEstimator:
    def test_fit_predict_round_trip(self):
        X = np.array([[0.2], [0.5], [0.8]])
        model = PreferenceGaussianProcess(kernel=KERNEL).fit(X, [[1, 0], [1, 2]])
        mean = model.predict(X)
        assert mean[1] > mean[0] and mean[1] > mean[2]
        mean2, std = model.predict(X, return_std=True)
        np.testing.assert_array_equal(mean, mean2)
        assert np.all(std >= 0)

    def test_not_fitted_error(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            PreferenceGaussianProcess().predict([[0.5]])

    def test_get_params_clone(self):
        from sklearn.base import clone

        model = PreferenceGaussianProcess(kernel=KERNEL, comparison_noise=0.2)
        copy = clone(model)
        assert copy.get_params()["comparison_noise"] == 0.2


class TestDataset:
    bounds = np.array([[0.0, 1.0]])

    def test_duplicate_items_collapse(self):
        data = PreferenceDataset.empty(self.bounds)
        data = data.with_preference([0.2], [0.6])
        data = data.with_preference([0.2], [0.6])
        assert data.t == 2
        assert data.m == 2

    def test_near_duplicate_within_tolerance_collapses(self):
        data = PreferenceDataset.empty(self.bounds)
        data = data.with_preference([0.2], [0.6])
        data = data.with_preference([0.2 + 1e-12], [0.9])
        assert data.t == 3

    def test_identical_pair_rejected(self):
        data = PreferenceDataset.empty(self.bounds)
        with pytest.raises(ValueError, match="distinct"):
            data.with_preference([0.4], [0.4])

    def test_out_of_bounds_rejected(self):
        data = PreferenceDataset.empty(self.bounds)
        with pytest.raises(ValueError, match="bounds"):
            data.with_preference([1.4], [0.4])

    def test_invalid_pair_indices_rejected(self):
        with pytest.raises(ValueError):
            PreferenceDataset(np.array([[0.1], [0.2]]), np.array([[0, 5]]), self.bounds)
        with pytest.raises(ValueError):
            PreferenceDataset(np.array([[0.1], [0.2]]), np.array([[1, 1]]), self.bounds)

    def test_arrays_read_only(self):
        data = PreferenceDataset(np.array([[0.1], [0.2]]), np.array([[0, 1]]), self.bounds)
        with pytest.raises(ValueError):
            data.items[0, 0] = 0.9


class TestSession:
    bounds = np.array([[0.0, 1.0]])

    def fresh(self, **kw):
        kw.setdefault("kernel", squared_exp_iso(length_scale=0.15))
        kw.setdefault("rng_seed", 3)
        return PreferenceOptimizer(self.bounds, **kw)

    def seeded(self, comparisons):
        session = self.fresh()
        for winner, loser in comparisons:
            session.record_preference([winner], [loser])
        return session

    def test_seed_pair_before_any_preference(self):
        session = self.fresh()
        first, second = session.get_pair()
        assert first[0] == pytest.approx(1 / 3)
        assert second[0] == pytest.approx(2 / 3)

    def test_get_pair_idempotent_until_recorded(self):
        session = self.seeded([(0.3, 0.7)])
        a = session.get_pair()
        b = session.get_pair()
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])
        session.record_preference(a[0], a[1])
        c = session.get_pair()
        assert not (
            np.array_equal(a[0], c[0]) and np.array_equal(a[1], c[1])
        ) or session.iteration == 1

    def test_first_is_incumbent_after_preferences(self):
        session = self.seeded([(0.3, 0.7), (0.3, 0.5)])
        first, _ = session.select_pair(strategy="random")
        np.testing.assert_array_equal(first, session.best().location)

    def test_pair_members_distinct(self):
        session = self.seeded([(0.3, 0.7)])
        for strategy in ("random", "max_variance", "max_ei"):
            first, second = session.select_pair(strategy=strategy)
            assert np.linalg.norm(first - second) > 1e-6

    def test_random_strategy_deterministic_per_seed(self):
        session = self.seeded([(0.3, 0.7)])
        a = session.select_pair(strategy="random", rng_seed=77)
        b = session.select_pair(strategy="random", rng_seed=77)
        np.testing.assert_array_equal(a[1], b[1])
        assert 0.0 <= a[1][0] <= 1.0

    def test_max_variance_matches_grid_argmax(self):
        session = self.seeded([(0.45, 0.55), (0.45, 0.3)])
        _, second = session.select_pair(strategy="max_variance")
        grid = np.linspace(0, 1, 10_001).reshape(-1, 1)
        _, std = session.posterior_at(grid)
        target = grid[int(np.argmax(std)), 0]
        assert second[0] == pytest.approx(target, abs=1e-2)
        # items cluster left of center, so uncertainty peaks at the far edge
        assert second[0] > 0.9

    def test_max_ei_matches_grid_argmax(self):
        session = self.seeded([(0.45, 0.55), (0.45, 0.3)])
        _, second = session.select_pair(strategy="max_ei")
        grid = np.linspace(0, 1, 10_001).reshape(-1, 1)
        mean, std = session.posterior_at(grid)
        best = session.best().value
        xi = 0.01 * session.kernel.signal_variance
        gain = mean - best - xi
        z = np.where(std > 0, gain / np.where(std > 0, std, 1.0), 0.0)
        ei = np.where(std > 0, gain * norm.cdf(z) + std * norm.pdf(z), 0.0)
        target = grid[int(np.argmax(ei)), 0]
        assert second[0] == pytest.approx(target, abs=1e-2)

    def test_recorded_winner_rises_above_loser(self):
        session = self.seeded([(0.35, 0.6)])
        mean, _ = session.posterior_at(np.array([[0.35], [0.6]]))
        assert mean[0] > mean[1]

    def test_iteration_counts_preferences(self):
        session = self.seeded([(0.3, 0.7), (0.5, 0.3)])
        assert session.iteration == 2
        assert len(session.history) == 2

    def test_best_requires_preferences(self):
        with pytest.raises(ValueError):
            self.fresh().best()

    def test_replay_reproduces_latent_mode(self):
        session = self.seeded([(0.3, 0.7), (0.5, 0.3), (0.5, 0.8)])
        doc = session.to_dict()
        loaded = PreferenceOptimizer.from_dict(doc)
        np.testing.assert_allclose(
            loaded.laplace().f_map, session.laplace().f_map, atol=1e-9
        )
        assert loaded.iteration == session.iteration

    def test_persistence_round_trip_with_pending_pair(self, tmp_path):
        session = self.seeded([(0.3, 0.7)])
        pair = session.get_pair()
        path = tmp_path / "pref.json"
        session.save(str(path))
        loaded = PreferenceOptimizer.load(str(path))
        reloaded_pair = loaded.get_pair()
        np.testing.assert_array_equal(pair[0], reloaded_pair[0])
        np.testing.assert_array_equal(pair[1], reloaded_pair[1])
        assert loaded.strategy == session.strategy
        assert loaded.comparison_noise == session.comparison_noise

    def test_round_trip_keeps_maximizer_budget(self):
        session = self.fresh(maximizer_budget=MaximizerBudget(max_evaluations=33))
        session.record_preference([0.2], [0.8])
        loaded = PreferenceOptimizer.from_dict(session.to_dict())
        assert loaded.budget == session.budget

    def test_rejects_noisy_kernel(self):
        with pytest.raises(ValueError, match="noise"):
            PreferenceOptimizer(self.bounds, kernel=squared_exp_iso(noise_variance=0.1))

    def test_rejects_unknown_strategy(self):
        with pytest.raises(ValueError, match="strategy"):
            self.fresh(strategy="thompson")
        session = self.seeded([(0.3, 0.7)])
        with pytest.raises(ValueError, match="strategy"):
            session.select_pair(strategy="nope")

    def test_default_comparison_noise_scales_with_signal(self):
        session = PreferenceOptimizer(
            self.bounds, kernel=squared_exp_iso(signal_variance=4.0)
        )
        assert session.comparison_noise == pytest.approx(0.2)
