"""Pairwise preference learning over a latent Gaussian process.

Feedback arrives as ordered comparisons (winner, loser) rather than
scalar scores. A probit likelihood ties each comparison to the latent
utility difference at the two points:

    P(winner beats loser) = ndtr((f(winner) - f(loser)) / (sqrt(2) * sigma))

The latent posterior mode is found by damped Newton iteration (Laplace
approximation), giving a Gaussian predictive distribution that the usual
acquisition rules can consume. The curvature matrix C is always singular
(its rows sum to zero), so the predictive variance uses a rewriting that
never inverts it.

:class:`PreferenceOptimizer` wraps this into a session with the same
propose/record/persist rhythm as the scalar loop, proposing pairs of
candidates instead of single points.
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, lu_factor, lu_solve
from scipy.special import log_ndtr
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .acquisition import Incumbent, _ei_values
from .direct import MaximizerBudget, direct_maximize
from .gp import PosteriorSummary
from .kernels import KernelSpec, cross_kernel, jittered_cholesky, squared_exp_iso
from .optimizer import (
    SCHEMA_VERSION,
    _utc_now,
    _write_json_atomic,
    nudge_off_duplicates,
    space_filling_seeds,
)
from .validation import check_bounds, check_in_bounds, check_points

__all__ = [
    "PreferenceDataset",
    "LaplaceResult",
    "laplace_map",
    "latent_log_posterior",
    "preference_posterior",
    "PreferenceGaussianProcess",
    "PreferenceOptimizer",
    "STRATEGIES",
]

STRATEGIES = ("random", "max_variance", "max_ei")

ITEM_TOLERANCE = 1e-9
PAIR_DISTINCT_TOLERANCE = 1e-6
GRADIENT_TOLERANCE = 1e-6
MAX_NEWTON_ITERATIONS = 100
MAX_STEP_HALVINGS = 20


class PreferenceDataset:
    """Compared items plus the ordered index pairs over them.

    ``pairs[i] = (r, c)`` records that item ``r`` beat item ``c``. Items
    are pairwise distinct within 1e-9; duplicates are collapsed when
    preferences are appended, so the same location compared many times
    stays a single latent variable.
    """

    def __init__(self, items, pairs, bounds):
        self.bounds = check_bounds(bounds)
        items = np.asarray(items, dtype=float).reshape(-1, self.bounds.shape[0])
        self.items = check_points(items, dim=self.bounds.shape[0], name="items") \
            if items.size else items
        pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
        n = self.items.shape[0]
        if pairs.size:
            if pairs.min() < 0 or pairs.max() >= n:
                raise ValueError("pair indices out of range")
            if np.any(pairs[:, 0] == pairs[:, 1]):
                raise ValueError("a pair must reference two distinct items")
        self.pairs = pairs
        if n > 1:
            gaps = np.linalg.norm(self.items[:, None, :] - self.items[None, :, :], axis=2)
            gaps[np.diag_indices(n)] = np.inf
            if gaps.min() <= ITEM_TOLERANCE:
                raise ValueError("items must be pairwise distinct")
        for row in self.items:
            check_in_bounds(row, self.bounds, name="items")
        self.items.setflags(write=False)
        self.pairs.setflags(write=False)

    @classmethod
    def empty(cls, bounds) -> "PreferenceDataset":
        bounds = check_bounds(bounds)
        return cls(np.empty((0, bounds.shape[0])), np.empty((0, 2), dtype=int), bounds)

    @property
    def t(self) -> int:
        return self.items.shape[0]

    @property
    def m(self) -> int:
        return self.pairs.shape[0]

    def _index_of(self, x: np.ndarray) -> int | None:
        if self.t == 0:
            return None
        gaps = np.linalg.norm(self.items - x, axis=1)
        hit = int(np.argmin(gaps))
        return hit if gaps[hit] <= ITEM_TOLERANCE else None

    def with_preference(self, winner, loser) -> "PreferenceDataset":
        """New dataset with the comparison appended (items deduplicated)."""
        winner = check_in_bounds(winner, self.bounds, name="winner")
        loser = check_in_bounds(loser, self.bounds, name="loser")
        if np.linalg.norm(winner - loser) <= ITEM_TOLERANCE:
            raise ValueError("winner and loser must be distinct points")
        items = [row for row in self.items]
        indices = []
        for point in (winner, loser):
            found = self._index_of(point)
            if found is None:
                matches = [i for i, row in enumerate(items)
                           if np.linalg.norm(row - point) <= ITEM_TOLERANCE]
                found = matches[0] if matches else None
            if found is None:
                items.append(point)
                found = len(items) - 1
            indices.append(found)
        pairs = np.vstack([self.pairs, np.array([indices])]) if self.m else np.array([indices])
        return PreferenceDataset(np.asarray(items), pairs, self.bounds)


@dataclass(frozen=True)
class LaplaceResult:
    """Mode and curvature of the latent posterior.

    ``c_matrix`` is the likelihood curvature at the mode; it is positive
    semi-definite and singular by construction (rows sum to zero).
    ``weight_vector`` satisfies ``f_map = K @ weight_vector`` and feeds
    the predictive mean without another solve against the Gram matrix.
    """

    f_map: np.ndarray
    c_matrix: np.ndarray
    b_vector: np.ndarray
    converged: bool
    iterations: int
    final_gradient_norm: float
    weight_vector: np.ndarray | None = None


def _incidence(pairs: np.ndarray, t: int) -> np.ndarray:
    """M x t matrix with +1 at each winner index and -1 at each loser."""
    h = np.zeros((pairs.shape[0], t))
    rows = np.arange(pairs.shape[0])
    h[rows, pairs[:, 0]] = 1.0
    h[rows, pairs[:, 1]] = -1.0
    return h


def _probit_ratio(z: np.ndarray) -> np.ndarray:
    """pdf/cdf of the standard normal, stable far into the left tail."""
    log_pdf = -0.5 * z**2 - 0.5 * np.log(2 * np.pi)
    return np.exp(log_pdf - log_ndtr(z))


class _LatentProblem:
    """Factored kernel matrix plus likelihood terms at any latent vector."""

    def __init__(self, kernel: KernelSpec, data: PreferenceDataset, sigma_noise: float):
        if data.t < 2:
            raise ValueError("preference inference needs at least two items")
        if data.m < 1:
            raise ValueError("preference inference needs at least one comparison")
        if sigma_noise <= 0:
            raise ValueError("sigma_noise must be positive")
        K = cross_kernel(kernel, data.items, data.items)
        self.K = 0.5 * (K + K.T)
        self.chol, _ = jittered_cholesky(self.K.copy(), kernel.signal_variance)
        self.K_inv = cho_solve((self.chol, True), np.eye(data.t))
        self.h = _incidence(data.pairs, data.t)
        self.scale = np.sqrt(2.0) * sigma_noise
        self.sigma = sigma_noise

    def value(self, f: np.ndarray) -> float:
        z = (self.h @ f) / self.scale
        return float(-0.5 * f @ cho_solve((self.chol, True), f) + log_ndtr(z).sum())

    def paired_value(self, f: np.ndarray, u: np.ndarray) -> float:
        """Log-posterior for an (f, u) pair satisfying f = K u.

        The prior term collapses to -u.f/2, so the Gram matrix is never
        inverted; this stays exact when K is singular to rounding.
        """
        z = (self.h @ f) / self.scale
        return float(-0.5 * u @ f + log_ndtr(z).sum())

    def likelihood_terms(self, f: np.ndarray):
        """(b, C): gradient and curvature of the comparison likelihood."""
        z = (self.h @ f) / self.scale
        ratio = _probit_ratio(z)
        b = self.h.T @ ratio / self.scale
        weights = ratio**2 + z * ratio
        C = (self.h.T * weights) @ self.h / (2.0 * self.sigma**2)
        return b, C

    def gradient(self, f: np.ndarray, b: np.ndarray) -> np.ndarray:
        return -cho_solve((self.chol, True), f) + b


def latent_log_posterior(kernel: KernelSpec, data: PreferenceDataset,
                         sigma_noise: float, f):
    """Unnormalized log-posterior with derivatives at a latent vector.

    Returns ``(value, gradient, hessian)`` where the hessian is the
    negated curvature of the log-posterior (positive semi-definite).
    Diagnostic surface; the mode search uses the same terms internally.
    """
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.shape[0] != data.t:
        raise ValueError(f"latent vector has length {f.shape[0]}, expected {data.t}")
    problem = _LatentProblem(kernel, data, sigma_noise)
    b, C = problem.likelihood_terms(f)
    return problem.value(f), problem.gradient(f, b), problem.K_inv + C


def laplace_map(kernel: KernelSpec, data: PreferenceDataset,
                sigma_noise: float) -> LaplaceResult:
    """Newton search for the latent posterior mode.

    Runs the transformed update f' = K (CK + I)^-1 (Cf + b) while
    tracking the weight vector u with f = K u, so the Gram matrix is
    never inverted and the iteration survives K being singular to
    rounding (items separated by the pair-distinctness floor make it
    so). In this pairing the log-posterior gradient is exactly b - u.
    Steps are halved until the log-posterior stops decreasing, up to a
    rounding allowance: near the mode the true improvement of a correct
    step can fall below the value's float resolution, and rejecting it
    would strand the gradient just above tolerance. Convergence is an
    infinity-norm gradient below 1e-6; hitting the iteration cap
    returns ``converged=False`` and leaves the verdict to the caller.
    """
    problem = _LatentProblem(kernel, data, sigma_noise)
    K = problem.K
    f = np.zeros(data.t)
    u = np.zeros(data.t)
    objective = problem.paired_value(f, u)
    b, C = problem.likelihood_terms(f)
    iterations = 0
    for _ in range(MAX_NEWTON_ITERATIONS):
        if np.abs(b - u).max() <= GRADIENT_TOLERANCE:
            break
        system = lu_factor(C @ K + np.eye(data.t))
        u_next = lu_solve(system, C @ f + b)
        du = u_next - u
        df = K @ du
        size = 1.0
        accepted = None
        slack = 1e-10 * max(1.0, abs(objective))
        for _ in range(MAX_STEP_HALVINGS):
            f_next = f + size * df
            value = problem.paired_value(f_next, u + size * du)
            if value >= objective - slack:
                accepted = (f_next, u + size * du, value)
                break
            size *= 0.5
        if accepted is None:
            break
        f, u, objective = accepted
        b, C = problem.likelihood_terms(f)
        iterations += 1
    norm = float(np.abs(b - u).max())
    return LaplaceResult(
        f_map=f,
        c_matrix=C,
        b_vector=b,
        converged=norm <= GRADIENT_TOLERANCE,
        iterations=iterations,
        final_gradient_norm=norm,
        weight_vector=u,
    )


def _posterior_arrays(kernel: KernelSpec, data: PreferenceDataset,
                      laplace: LaplaceResult, queries: np.ndarray):
    """Vectorized predictive mean and variance at many query points."""
    K = cross_kernel(kernel, data.items, data.items)
    K = 0.5 * (K + K.T)
    if laplace.weight_vector is not None:
        alpha = laplace.weight_vector
    else:
        L, _ = jittered_cholesky(K.copy(), kernel.signal_variance)
        alpha = cho_solve((L, True), laplace.f_map)
    Ks = cross_kernel(kernel, data.items, queries)
    mean = Ks.T @ alpha
    C = laplace.c_matrix
    # k** - k^T (CK + I)^-1 C k, equivalent to the (K + C^-1)^-1 form
    # wherever C is invertible but defined for singular C as well
    system = lu_factor(C @ K + np.eye(data.t))
    Z = lu_solve(system, C @ Ks)
    var = kernel.signal_variance - np.einsum("ij,ij->j", Ks, Z)
    return mean, np.maximum(var, 0.0)


def preference_posterior(kernel: KernelSpec, data: PreferenceDataset,
                         laplace: LaplaceResult, query) -> PosteriorSummary:
    """Gaussian predictive summary of the latent utility at one point."""
    if not laplace.converged:
        raise ValueError("laplace result did not converge; refusing to predict")
    q = np.asarray(query, dtype=float).reshape(-1)
    if q.shape[0] != data.items.shape[1]:
        raise ValueError(f"query has dimension {q.shape[0]}, expected {data.items.shape[1]}")
    mean, var = _posterior_arrays(kernel, data, laplace, q[None, :])
    return PosteriorSummary(float(mean[0]), float(var[0]))


class PreferenceGaussianProcess(BaseEstimator):
    """Estimator-style wrapper: fit on (items, pairs), predict latent utility.

    Parameters mirror the functional surface: a latent ``kernel`` and the
    probit ``comparison_noise`` (default one tenth of the latent signal
    standard deviation).
    """

    def __init__(self, kernel: KernelSpec | None = None,
                 comparison_noise: float | None = None):
        self.kernel = kernel
        self.comparison_noise = comparison_noise

    def fit(self, X, pairs):
        X = check_points(X, name="X")
        kernel = self.kernel if self.kernel is not None else squared_exp_iso()
        noise = self.comparison_noise
        if noise is None:
            noise = 0.1 * np.sqrt(kernel.signal_variance)
        lo = X.min(axis=0) - 1.0
        hi = X.max(axis=0) + 1.0
        bounds = np.column_stack([lo, hi])
        self.data_ = PreferenceDataset(X, np.asarray(pairs, dtype=int), bounds)
        self.kernel_ = kernel
        self.noise_ = float(noise)
        self.laplace_ = laplace_map(kernel, self.data_, self.noise_)
        return self

    def predict(self, X, return_std: bool = False):
        if not hasattr(self, "laplace_"):
            raise NotFittedError("fit the model before calling predict")
        X = check_points(X, dim=self.data_.items.shape[1], name="X")
        mean, var = _posterior_arrays(self.kernel_, self.data_, self.laplace_, X)
        if return_std:
            return mean, np.sqrt(var)
        return mean


class PreferenceOptimizer:
    """One comparison-feedback session.

    The session proposes pairs: the current incumbent plus a challenger
    chosen by ``strategy`` (uniform draw, posterior-variance argmax, or
    expected-improvement argmax over the latent posterior). Recorded
    preferences re-solve the Laplace approximation eagerly so failures
    surface at the mutation, not at a later read.
    """

    mode = "preference"

    def __init__(self, bounds, kernel: KernelSpec | None = None,
                 comparison_noise: float | None = None,
                 strategy: str = "max_ei", rng_seed: int = 0,
                 maximizer_budget: MaximizerBudget | None = None,
                 session_id: str | None = None):
        self.bounds = check_bounds(bounds)
        self.kernel = kernel if kernel is not None else squared_exp_iso()
        if self.kernel.noise_variance:
            raise ValueError(
                "preference sessions model noise through comparison_noise; "
                "use a noise-free kernel"
            )
        if comparison_noise is None:
            comparison_noise = 0.1 * float(np.sqrt(self.kernel.signal_variance))
        if comparison_noise <= 0:
            raise ValueError("comparison_noise must be positive")
        self.comparison_noise = float(comparison_noise)
        if strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
        self.strategy = strategy
        self.rng_seed = int(rng_seed)
        self.budget = maximizer_budget or MaximizerBudget()
        self.id = session_id or uuid.uuid4().hex
        self.data = PreferenceDataset.empty(self.bounds)
        self.history: list[dict] = []
        self.pending_pair: tuple[np.ndarray, np.ndarray] | None = None
        self._laplace: LaplaceResult | None = None

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def iteration(self) -> int:
        """Completed preference rounds."""
        return self.data.m

    @property
    def n_seed(self) -> int:
        return max(2, self.dim + 1)

    def laplace(self) -> LaplaceResult | None:
        """Current mode solve; None before the first preference."""
        if self.data.m == 0:
            return None
        if self._laplace is None:
            self._laplace = laplace_map(self.kernel, self.data, self.comparison_noise)
        return self._laplace

    def best(self) -> Incumbent:
        """Item with the highest latent MAP value."""
        laplace = self.laplace()
        if laplace is None:
            raise ValueError("best() needs at least one recorded preference")
        idx = int(np.argmax(laplace.f_map))
        return Incumbent(self.data.items[idx].copy(), float(laplace.f_map[idx]), idx)

    def posterior_at(self, queries):
        """Latent mean and standard deviation at query points."""
        laplace = self.laplace()
        if laplace is None:
            raise ValueError("no preferences recorded yet")
        queries = check_points(queries, dim=self.dim, name="queries")
        mean, var = _posterior_arrays(self.kernel, self.data, laplace, queries)
        return mean, np.sqrt(var)

    def _challenger(self, first: np.ndarray, strategy: str, rng_seed) -> np.ndarray:
        laplace = self.laplace()
        if strategy == "random":
            rng = np.random.default_rng(rng_seed)
            for _ in range(100):
                candidate = rng.uniform(self.bounds[:, 0], self.bounds[:, 1])
                if np.linalg.norm(candidate - first) > PAIR_DISTINCT_TOLERANCE:
                    return candidate
            return nudge_off_duplicates(
                candidate, first[None, :], self.bounds, tolerance=PAIR_DISTINCT_TOLERANCE
            )

        if strategy == "max_variance":
            def score(x):
                _, var = _posterior_arrays(
                    self.kernel, self.data, laplace, np.asarray(x)[None, :]
                )
                return float(var[0])
        else:
            incumbent_value = float(laplace.f_map.max())
            xi = 0.01 * float(self.kernel.signal_variance)

            def score(x):
                mean, var = _posterior_arrays(
                    self.kernel, self.data, laplace, np.asarray(x)[None, :]
                )
                std = np.sqrt(var)
                return float(_ei_values(mean, std, incumbent_value, xi)[0])

        result = direct_maximize(score, self.bounds, self.budget)
        return nudge_off_duplicates(
            result.argmax, first[None, :], self.bounds,
            tolerance=PAIR_DISTINCT_TOLERANCE,
        )

    def select_pair(self, strategy: str | None = None, rng_seed=None):
        """Incumbent plus challenger; seed pair before any preferences.

        Deterministic given session state: the random strategy derives its
        stream from (session seed, round) unless ``rng_seed`` is given.
        """
        strategy = strategy or self.strategy
        if strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
        if self.data.m == 0:
            seeds = space_filling_seeds(self.bounds, self.n_seed)
            return seeds[0], seeds[1]
        if rng_seed is None:
            rng_seed = [self.rng_seed, self.data.m]
        first = self.best().location
        second = self._challenger(first, strategy, rng_seed)
        return first, second

    def get_pair(self):
        """The outstanding pair, creating one if none is pending.

        Repeated calls return the same pair until a preference lands, so
        a client may poll without advancing the session.
        """
        if self.pending_pair is None:
            self.pending_pair = self.select_pair()
        return self.pending_pair

    def record_preference(self, winner, loser) -> "PreferenceOptimizer":
        """Append one comparison and re-solve the latent mode."""
        self.data = self.data.with_preference(winner, loser)
        self._laplace = None
        self.pending_pair = None
        solved = self.laplace()
        if not solved.converged:
            raise RuntimeError(
                f"latent mode search stalled (gradient {solved.final_gradient_norm:.2e})"
            )
        self.history.append({
            "winner": [float(v) for v in np.asarray(winner, dtype=float).reshape(-1)],
            "loser": [float(v) for v in np.asarray(loser, dtype=float).reshape(-1)],
            "timestamp": _utc_now(),
        })
        return self

    # -- persistence ----------------------------------------------------

    def to_dict(self) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "mode": self.mode,
            "bounds": [[float(lo), float(hi)] for lo, hi in self.bounds],
            "kernel": self.kernel.to_dict(),
            "comparison_noise": self.comparison_noise,
            "strategy": self.strategy,
            "rng_seed": self.rng_seed,
            "maximizer_budget": self.budget.to_dict(),
            "history": list(self.history),
        }
        if self.pending_pair is not None:
            doc["pending_pair"] = [
                [float(v) for v in point] for point in self.pending_pair
            ]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PreferenceOptimizer":
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported session schema_version: {version!r}")
        if doc.get("mode") != cls.mode:
            raise ValueError(f"expected a {cls.mode} session, got mode={doc.get('mode')!r}")
        session = cls(
            bounds=np.asarray(doc["bounds"], dtype=float),
            kernel=KernelSpec.from_dict(doc["kernel"]),
            comparison_noise=doc["comparison_noise"],
            strategy=doc["strategy"],
            rng_seed=doc["rng_seed"],
            # older documents predate the stored budget; they ran defaults
            maximizer_budget=MaximizerBudget.from_dict(doc["maximizer_budget"])
            if "maximizer_budget" in doc else None,
            session_id=doc["id"],
        )
        for entry in doc["history"]:
            session.data = session.data.with_preference(
                np.asarray(entry["winner"], dtype=float),
                np.asarray(entry["loser"], dtype=float),
            )
            session.history.append(dict(entry))
        if "pending_pair" in doc:
            first, second = doc["pending_pair"]
            session.pending_pair = (
                np.asarray(first, dtype=float), np.asarray(second, dtype=float)
            )
        return session

    def save(self, path: str) -> None:
        _write_json_atomic(path, self.to_dict())

    @classmethod
    def load(cls, path: str) -> "PreferenceOptimizer":
        with open(path) as handle:
            return cls.from_dict(json.load(handle))
