"""Gaussian process regression with exact inference.

The prior mean is fixed at zero (pre-center your observations). Predictions
follow the standard conditioning identities computed through a Cholesky
factorization of the noisy Gram matrix:

    mean(q)     = k(q)^T (K + nv I)^-1 y
    variance(q) = k(q, q) - k(q)^T (K + nv I)^-1 k(q)

with the observation noise variance added back when a summary is requested
for a noisy measurement rather than the latent function.

Two entry styles are provided: plain functions over a frozen
:class:`ObservationSet` (``posterior``, ``log_marginal_likelihood``,
``sample_prior``, ``fit_hyperparameters``) and the estimator-style
:class:`GaussianProcess` with the usual ``fit``/``predict`` surface.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from ._local_search import compass_search
from .exceptions import ConditioningError, HyperparameterFitWarning
from .kernels import KernelSpec, cross_kernel, jittered_cholesky, squared_exp_iso
from .validation import check_bounds, check_in_bounds, check_point, check_points, check_values

__all__ = [
    "ObservationSet",
    "PosteriorSummary",
    "posterior",
    "log_marginal_likelihood",
    "sample_prior",
    "fit_hyperparameters",
    "GaussianProcess",
]


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Scalar observations over an axis-aligned search box.

    ``points`` is (t, d), ``values`` is (t,), ``bounds`` is (d, 2). Arrays
    are stored read-only; ``append`` returns a new set, preserving the old.
    """

    points: np.ndarray
    values: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        bounds = check_bounds(self.bounds)
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, bounds.shape[0])
        pts = check_points(pts, dim=bounds.shape[0])
        vals = check_values(self.values, n=pts.shape[0])
        if pts.shape[0]:
            if np.any(pts < bounds[:, 0]) or np.any(pts > bounds[:, 1]):
                raise ValueError("observation points must lie inside bounds")
        for arr in (pts, vals, bounds):
            arr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def empty(cls, bounds) -> "ObservationSet":
        bounds = check_bounds(bounds)
        return cls(np.empty((0, bounds.shape[0])), np.empty(0), bounds)

    @property
    def t(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    def append(self, x, y: float) -> "ObservationSet":
        x = check_in_bounds(x, self.bounds)
        y = float(y)
        if not np.isfinite(y):
            raise ValueError(f"observed value must be finite, got {y}")
        return ObservationSet(
            np.vstack([self.points, x[None, :]]),
            np.append(self.values, y),
            self.bounds,
        )


@dataclass(frozen=True)
class PosteriorSummary:
    """Predictive mean and variance at a single query point."""

    mean: float
    variance: float
    includes_observation_noise: bool = False

    def __post_init__(self):
        if np.isnan(self.mean) or np.isnan(self.variance):
            raise ValueError("posterior summary must be finite")
        # tiny negative variances are floating-point artifacts
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "variance", max(0.0, float(self.variance)))

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))


def _noisy_cholesky(spec: KernelSpec, X: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of the noisy, jitter-stabilized Gram matrix."""
    K = cross_kernel(spec, X, X)
    K = 0.5 * (K + K.T)
    K[np.diag_indices_from(K)] += spec.noise_variance
    L, _ = jittered_cholesky(K, spec.signal_variance)
    return L


def _predict_arrays(spec: KernelSpec, X, y, L, queries, include_noise: bool):
    """Vectorized posterior mean/variance at ``queries`` given a factor."""
    Ks = cross_kernel(spec, X, queries)
    alpha = solve_triangular(L, y, lower=True)
    alpha = solve_triangular(L.T, alpha, lower=False)
    mean = Ks.T @ alpha
    V = solve_triangular(L, Ks, lower=True)
    var = spec.signal_variance - np.einsum("ij,ij->j", V, V)
    if include_noise:
        var = var + spec.noise_variance
    return mean, np.maximum(var, 0.0)


def posterior(spec: KernelSpec, data: ObservationSet, query,
              include_observation_noise: bool = False) -> PosteriorSummary:
    """Predictive summary at one query point.

    With no observations this is the prior: mean 0 and variance equal to
    the signal variance (plus noise when requested).
    """
    q = check_point(query, dim=data.dim, name="query")
    if data.t == 0:
        var = spec.signal_variance
        if include_observation_noise:
            var += spec.noise_variance
        return PosteriorSummary(0.0, var, include_observation_noise)
    L = _noisy_cholesky(spec, data.points)
    mean, var = _predict_arrays(
        spec, data.points, data.values, L, q[None, :], include_observation_noise
    )
    return PosteriorSummary(float(mean[0]), float(var[0]), include_observation_noise)


def log_marginal_likelihood(spec: KernelSpec, data: ObservationSet) -> float:
    """log N(y | 0, K + nv I) through the Cholesky factor."""
    if data.t < 1:
        raise ValueError("log_marginal_likelihood needs at least one observation")
    L = _noisy_cholesky(spec, data.points)
    a = solve_triangular(L, data.values, lower=True)
    return float(
        -0.5 * a @ a - np.sum(np.log(np.diag(L))) - 0.5 * data.t * np.log(2.0 * np.pi)
    )


def sample_prior(spec: KernelSpec, points, rng_seed: int = 0) -> np.ndarray:
    """One draw from the zero-mean prior at ``points``; deterministic per seed.

    When the spec carries observation noise the draw includes it, matching
    the covariance produced by ``kernel_matrix``.
    """
    X = check_points(points)
    if X.shape[0] < 1:
        raise ValueError("sample_prior needs at least one point")
    L = _noisy_cholesky(spec, X)
    rng = np.random.default_rng(rng_seed)
    return L @ rng.standard_normal(X.shape[0])


_LOG_SEARCH_DEFAULT = (1e-3, 1e3)


def _lognormal_logpdf(value: float, median: float, sigma: float) -> float:
    z = (np.log(value) - np.log(median)) / sigma
    return float(-np.log(value * sigma) - 0.5 * np.log(2 * np.pi) - 0.5 * z * z)


def fit_hyperparameters(data: ObservationSet, base: KernelSpec | None = None,
                        seeds: int = 8, rng_seed: int = 0,
                        search_space=None, fit_noise: bool = True,
                        hyperprior: dict | None = None) -> KernelSpec:
    """Multi-start maximization of the (hyperprior-weighted) log marginal
    likelihood over length-scales, signal variance, and optionally the
    noise variance.

    The search runs in log-space over ``search_space`` (default
    ``(1e-3, 1e3)`` per hyperparameter, or a dict keyed by
    ``length_scales`` / ``signal_variance`` / ``noise_variance``) with a
    compass pattern search from ``seeds`` random starts. Deterministic
    given ``rng_seed``; the result is never worse than the best start
    evaluated. ``hyperprior`` maps the same keys to ``(median, sigma)`` of
    a log-normal weight.

    If every evaluation fails conditioning, the widest-length-scale spec
    is returned and a :class:`HyperparameterFitWarning` is issued.
    """
    if data.t < 2:
        raise ValueError("fit_hyperparameters needs at least two observations")
    if seeds < 1:
        raise ValueError("seeds must be >= 1")
    base = base if base is not None else squared_exp_iso()

    n_ls = data.dim if base.family == "squared_exp_ard" else len(base.length_scales)
    names = ["length_scales"] * n_ls + ["signal_variance"]
    if fit_noise:
        names.append("noise_variance")

    def space_for(name):
        if isinstance(search_space, dict):
            return search_space.get(name, _LOG_SEARCH_DEFAULT)
        return search_space if search_space is not None else _LOG_SEARCH_DEFAULT

    log_bounds = np.array([
        (np.log(space_for(name)[0]), np.log(space_for(name)[1])) for name in names
    ])

    def build(theta_log: np.ndarray) -> KernelSpec:
        vals = np.exp(theta_log)
        ls = tuple(vals[:n_ls])
        sv = float(vals[n_ls])
        nv = float(vals[n_ls + 1]) if fit_noise else base.noise_variance
        return KernelSpec(base.family, ls, sv, nv, base.smoothness)

    def objective(theta_log: np.ndarray) -> float:
        try:
            spec = build(theta_log)
            score = log_marginal_likelihood(spec, data)
            if hyperprior:
                vals = np.exp(theta_log)
                for name, v in zip(names, vals):
                    if name in hyperprior:
                        med, sig = hyperprior[name]
                        score += _lognormal_logpdf(float(v), med, sig)
            return -score
        except (ConditioningError, np.linalg.LinAlgError):
            return np.inf

    rng = np.random.default_rng(rng_seed)
    best_x, best_f = None, np.inf
    for _ in range(seeds):
        start = rng.uniform(log_bounds[:, 0], log_bounds[:, 1])
        x, f, _ = compass_search(objective, start, log_bounds, max_evals=200)
        if f < best_f:
            best_x, best_f = x, f

    if best_x is None or not np.isfinite(best_f):
        widest = log_bounds[:, 1].copy()
        widest[n_ls] = 0.0  # keep unit signal variance in the fallback
        if fit_noise:
            widest[n_ls + 1] = np.log(max(base.noise_variance, 1e-3))
        warnings.warn(
            "hyperparameter search failed on every start; returning the "
            "widest-length-scale fallback spec",
            HyperparameterFitWarning,
        )
        return build(widest)
    return build(best_x)


class GaussianProcess(RegressorMixin, BaseEstimator):
    """Estimator-style front end over the exact GP equations.

    Parameters
    ----------
    kernel : KernelSpec, optional
        Covariance description; defaults to an isotropic unit
        squared-exponential.
    optimize : bool
        Refit hyperparameters by marginal likelihood during ``fit``.
    seeds : int
        Number of random starts when ``optimize`` is set.
    random_state : int
        Seed for the hyperparameter search.

    Examples
    --------
    >>> gp = GaussianProcess().fit([[0.0]], [1.0])
    >>> mean, std = gp.predict([[0.0]], return_std=True)
    >>> bool(abs(mean[0] - 1.0) < 1e-3)
    True
    """

    def __init__(self, kernel: KernelSpec | None = None, optimize: bool = False,
                 seeds: int = 8, random_state: int = 0):
        self.kernel = kernel
        self.optimize = optimize
        self.seeds = seeds
        self.random_state = random_state

    def fit(self, X, y):
        X = check_points(X, name="X")
        y = check_values(y, n=X.shape[0], name="y")
        if X.shape[0] < 1:
            raise ValueError("fit needs at least one observation")
        kernel = self.kernel if self.kernel is not None else squared_exp_iso()
        if self.optimize and X.shape[0] >= 2:
            lo = X.min(axis=0) - 1.0
            hi = X.max(axis=0) + 1.0
            data = ObservationSet(X, y, np.column_stack([lo, hi]))
            kernel = fit_hyperparameters(
                data, base=kernel, seeds=self.seeds, rng_seed=self.random_state
            )
        self.kernel_ = kernel
        self.X_ = X
        self.y_ = y
        self.n_features_in_ = X.shape[1]
        self.L_ = _noisy_cholesky(kernel, X)
        return self

    def _check_fitted(self):
        if not hasattr(self, "L_"):
            raise NotFittedError("this GaussianProcess is not fitted; call fit first")

    def predict(self, X, return_std: bool = False,
                include_observation_noise: bool = False):
        self._check_fitted()
        Q = check_points(X, dim=self.n_features_in_, name="X")
        mean, var = _predict_arrays(
            self.kernel_, self.X_, self.y_, self.L_, Q, include_observation_noise
        )
        if return_std:
            return mean, np.sqrt(var)
        return mean

    def log_marginal_likelihood(self) -> float:
        self._check_fitted()
        a = solve_triangular(self.L_, self.y_, lower=True)
        return float(
            -0.5 * a @ a
            - np.sum(np.log(np.diag(self.L_)))
            - 0.5 * self.y_.shape[0] * np.log(2.0 * np.pi)
        )
