"""Global maximizer against grid oracles and budget invariants."""

import numpy as np
import pytest

from bopt import (
    InvalidObjectiveError,
    MaximizerBudget,
    direct_maximize,
    multistart_maximize,
)


def neg_branin(x):
    a, b, c = 1.0, 5.1 / (4 * np.pi**2), 5 / np.pi
    r, s, t = 6.0, 10.0, 1 / (8 * np.pi)
    x1, x2 = x[0], x[1]
    return -(a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1 - t) * np.cos(x1) + s)


BRANIN_BOUNDS = np.array([[-5.0, 10.0], [0.0, 15.0]])


def branin_grid_best(n=400):
    g1 = np.linspace(-5, 10, n)
    g2 = np.linspace(0, 15, n)
    xx, yy = np.meshgrid(g1, g2)
    a, b, c = 1.0, 5.1 / (4 * np.pi**2), 5 / np.pi
    r, s, t = 6.0, 10.0, 1 / (8 * np.pi)
    vals = -(a * (yy - b * xx**2 + c * xx - r) ** 2 + s * (1 - t) * np.cos(xx) + s)
    return float(vals.max())


class TestDirectMaximize:
    def test_quadratic_peak(self):
        res = direct_maximize(
            lambda x: -((x[0] - 0.3) ** 2),
            np.array([[0.0, 1.0]]),
            MaximizerBudget(max_evaluations=500),
        )
        assert res.argmax[0] == pytest.approx(0.3, abs=1e-2)
        assert res.value == pytest.approx(0.0, abs=1e-3)

    def test_constant_returns_center(self):
        bounds = np.array([[2.0, 4.0], [-1.0, 1.0]])
        res = direct_maximize(lambda x: 7.0, bounds, MaximizerBudget(max_evaluations=50))
        np.testing.assert_allclose(res.argmax, [3.0, 0.0])
        assert res.value == 7.0

    def test_branin_matches_grid_oracle(self):
        res = direct_maximize(neg_branin, BRANIN_BOUNDS, MaximizerBudget(max_evaluations=2000))
        assert abs(res.value - branin_grid_best()) <= 1e-2

    def test_deterministic(self):
        runs = [
            direct_maximize(neg_branin, BRANIN_BOUNDS, MaximizerBudget(max_evaluations=800))
            for _ in range(2)
        ]
        np.testing.assert_array_equal(runs[0].argmax, runs[1].argmax)
        assert runs[0].value == runs[1].value
        assert runs[0].evaluations == runs[1].evaluations

    def test_stays_in_bounds_and_counts_evals(self):
        seen = []

        def probe(x):
            seen.append(np.array(x))
            return np.sin(3 * x[0]) * np.cos(2 * x[1])

        bounds = np.array([[-2.0, 1.0], [5.0, 9.0]])
        res = direct_maximize(probe, bounds, MaximizerBudget(max_evaluations=300))
        assert res.evaluations == len(seen)
        assert res.evaluations <= 300
        pts = np.array(seen)
        assert np.all(pts[:, 0] >= -2.0) and np.all(pts[:, 0] <= 1.0)
        assert np.all(pts[:, 1] >= 5.0) and np.all(pts[:, 1] <= 9.0)

    def test_best_never_decreases_with_budget(self):
        values = [
            direct_maximize(
                neg_branin, BRANIN_BOUNDS, MaximizerBudget(max_evaluations=n)
            ).value
            for n in (100, 400, 1600)
        ]
        assert values[0] <= values[1] + 1e-12
        assert values[1] <= values[2] + 1e-12

    def test_diagonal_shrinks_with_budget(self):
        diags = [
            direct_maximize(
                neg_branin, BRANIN_BOUNDS, MaximizerBudget(max_evaluations=n)
            ).max_diagonal
            for n in (100, 1000, 10_000)
        ]
        assert diags[0] >= diags[1] >= diags[2]
        assert diags[2] < diags[0]

    def test_diagonal_floor_stops_division(self):
        budget = MaximizerBudget(max_evaluations=10_000, min_rectangle_diagonal=0.2)
        res = direct_maximize(neg_branin, BRANIN_BOUNDS, budget)
        # once every rectangle is below the floor nothing is divisible,
        # so the run ends well short of the evaluation cap
        assert res.evaluations < 10_000

    def test_non_finite_objective_names_point(self):
        def bad(x):
            return np.nan if x[0] > 0.6 else x[0]

        with pytest.raises(InvalidObjectiveError) as err:
            direct_maximize(bad, np.array([[0.0, 1.0]]), MaximizerBudget(max_evaluations=100))
        assert "[" in str(err.value)

    def test_budget_validation(self):
        with pytest.raises(ValueError):
            MaximizerBudget(max_evaluations=0)
        with pytest.raises(ValueError):
            MaximizerBudget(max_iterations=0)
        with pytest.raises(ValueError):
            MaximizerBudget(min_rectangle_diagonal=-1.0)


class TestMultistart:
    def test_polishes_near_optimum_start(self):
        res = multistart_maximize(
            lambda p: -((p[0] - 0.4) ** 2) - (p[1] - 0.7) ** 2,
            np.array([[0.0, 1.0], [0.0, 1.0]]),
            initial_points=np.array([[0.41, 0.69]]),
            rng_seed=3,
        )
        assert res.argmax[0] == pytest.approx(0.4, abs=1e-4)
        assert res.argmax[1] == pytest.approx(0.7, abs=1e-4)
        assert res.value == pytest.approx(0.0, abs=1e-7)

    def test_agrees_with_grid_on_smooth_objectives(self):
        rng = np.random.default_rng(11)
        grid = np.linspace(0, 1, 2001)
        for trial in range(20):
            freq = rng.uniform(0.5, 4.0)
            phase = rng.uniform(0, 2 * np.pi)

            def f(p):
                return np.sin(freq * 2 * np.pi * p[0] + phase) + 0.3 * p[0]

            gvals = np.sin(freq * 2 * np.pi * grid + phase) + 0.3 * grid
            res = multistart_maximize(f, np.array([[0.0, 1.0]]), rng_seed=trial)
            span = gvals.max() - gvals.min()
            assert res.value >= gvals.max() - 1e-2 * span

    def test_deterministic_per_seed(self):
        def f(p):
            return -np.abs(p[0] - 0.25) + np.cos(5 * p[1])

        bounds = np.array([[0.0, 1.0], [0.0, 2.0]])
        first = multistart_maximize(f, bounds, rng_seed=9)
        second = multistart_maximize(f, bounds, rng_seed=9)
        np.testing.assert_array_equal(first.argmax, second.argmax)
        assert first.value == second.value

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidObjectiveError):
            multistart_maximize(
                lambda p: np.inf, np.array([[0.0, 1.0]]), rng_seed=0
            )
