"""Sequential optimization sessions: propose, observe, refit, persist.

A session owns an observation set, a kernel that may be refit on a
schedule, and an acquisition configuration. Proposals come from a fixed
space-filling seed sequence until ``n_seed = max(2, d+1)`` points exist,
then from the global maximizer applied to the acquisition surface.

Sessions serialize to a versioned JSON document whose history array is
the authority: replaying it reconstructs the observation set exactly,
and the stored kernel floats round-trip through ``repr`` so proposals
after a reload are bit-for-bit identical to the live session's.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
import uuid
from datetime import datetime, timezone

import numpy as np

from .acquisition import AcquisitionSpec, Incumbent, evaluate, select_incumbent
from .direct import MaximizerBudget, direct_maximize
from .gp import ObservationSet, PosteriorSummary, _noisy_cholesky, _predict_arrays, fit_hyperparameters
from .kernels import KernelSpec, squared_exp_iso
from .validation import check_bounds, check_in_bounds, check_points

__all__ = ["BayesianOptimizer", "space_filling_seeds", "nudge_off_duplicates", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

# proposals this close to an existing point would make the Gram matrix
# effectively singular in noise-free mode
DUPLICATE_TOLERANCE = 1e-9
NUDGE_FRACTION = 1e-6


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_json_atomic(path: str, document: dict) -> None:
    """Write through a temp file in the target directory, then rename."""
    payload = json.dumps(document, indent=2)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(payload)
            handle.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def space_filling_seeds(bounds: np.ndarray, count: int) -> np.ndarray:
    """Fixed stratified start points, one stratum per point per dimension.

    Point i takes stratum (i + dimension) mod count in each dimension, at
    the stratum's interior knot (stratum+1)/(count+1) of the box. Every
    dimension sees every stratum exactly once; in 1D with count=2 this is
    the pair {1/3, 2/3}.
    """
    bounds = check_bounds(bounds)
    lo, hi = bounds[:, 0], bounds[:, 1]
    dims = np.arange(bounds.shape[0])
    seeds = np.empty((count, bounds.shape[0]))
    for i in range(count):
        strata = (i + dims) % count
        seeds[i] = lo + (hi - lo) * (strata + 1) / (count + 1)
    return seeds


def nudge_off_duplicates(x: np.ndarray, existing: np.ndarray, bounds: np.ndarray,
                         tolerance: float = DUPLICATE_TOLERANCE) -> np.ndarray:
    """Step a proposal toward the domain center until it clears ``tolerance``.

    Each step moves 1e-6 of the width per dimension toward the center; a
    point already at the center moves along the widest dimension instead.
    """
    if existing.size == 0:
        return x
    x = x.astype(float).copy()
    lo, hi = bounds[:, 0], bounds[:, 1]
    width = hi - lo
    center = 0.5 * (lo + hi)
    for _ in range(1000):
        gaps = np.linalg.norm(existing - x, axis=1)
        if gaps.min() > tolerance:
            return x
        step = NUDGE_FRACTION * width * np.sign(center - x)
        if not np.any(step):
            step = np.zeros_like(x)
            widest = int(np.argmax(width))
            step[widest] = NUDGE_FRACTION * width[widest]
        x = np.clip(x + step, lo, hi)
    return x


class BayesianOptimizer:
    """One scalar-feedback optimization session.

    Parameters
    ----------
    bounds : array-like of shape (d, 2)
        Box constraints, one (lower, upper) row per dimension.
    kernel : KernelSpec, optional
        Initial surrogate kernel; default isotropic squared-exponential.
        ``noise_variance == 0`` puts the session in noise-free mode.
    acquisition : AcquisitionSpec, optional
        Improvement rule for post-seed proposals; default EI.
    refit_period : int
        Refit hyperparameters after every this-many observations (once at
        least two exist). The fit keeps the configured noise level fixed.
    rng_seed : int
        Seed forwarded to the hyperparameter search, making the whole
        session deterministic.
    """

    mode = "scalar"

    def __init__(self, bounds, kernel: KernelSpec | None = None,
                 acquisition: AcquisitionSpec | None = None,
                 refit_period: int = 1, rng_seed: int = 0,
                 maximizer_budget: MaximizerBudget | None = None,
                 session_id: str | None = None):
        self.bounds = check_bounds(bounds)
        self.kernel = kernel if kernel is not None else squared_exp_iso()
        self.acquisition = acquisition if acquisition is not None else AcquisitionSpec()
        if refit_period < 1:
            raise ValueError("refit_period must be a positive integer")
        self.refit_period = int(refit_period)
        self.rng_seed = int(rng_seed)
        self.budget = maximizer_budget or MaximizerBudget()
        self.id = session_id or uuid.uuid4().hex
        self.data = ObservationSet.empty(self.bounds)
        self.history: list[dict] = []

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def iteration(self) -> int:
        """Completed observe calls."""
        return self.data.t

    @property
    def n_seed(self) -> int:
        return max(2, self.dim + 1)

    @property
    def noise_free(self) -> bool:
        return self.kernel.noise_variance == 0.0

    def _acquisition_surface(self):
        """Per-point score function over the current posterior."""
        spec = dataclasses.replace(
            self.acquisition, iteration=self.iteration + 1, dim=self.dim
        )
        inc = select_incumbent(self.data, self.kernel)
        X, y = self.data.points, self.data.values
        L = _noisy_cholesky(self.kernel, X)

        def score(q):
            mean, var = _predict_arrays(self.kernel, X, y, L, np.asarray(q)[None, :], False)
            post = PosteriorSummary(float(mean[0]), float(var[0]))
            return evaluate(spec, post, inc, self.kernel)

        return score

    def posterior_at(self, queries):
        """Surrogate mean and standard deviation at query points.

        Before any observation this is the prior: zero mean, full signal
        standard deviation.
        """
        queries = check_points(queries, dim=self.dim, name="queries")
        if self.data.t == 0:
            sd = np.sqrt(self.kernel.signal_variance)
            return np.zeros(queries.shape[0]), np.full(queries.shape[0], sd)
        X, y = self.data.points, self.data.values
        L = _noisy_cholesky(self.kernel, X)
        mean, var = _predict_arrays(self.kernel, X, y, L, queries, False)
        return mean, np.sqrt(np.maximum(var, 0.0))

    def propose(self) -> np.ndarray:
        """Next point to evaluate. Read-only; deterministic given state."""
        if self.iteration < self.n_seed:
            x = space_filling_seeds(self.bounds, self.n_seed)[self.iteration]
        else:
            result = direct_maximize(self._acquisition_surface(), self.bounds, self.budget)
            x = result.argmax
        if self.noise_free and self.data.t > 0:
            x = nudge_off_duplicates(x, self.data.points, self.bounds)
        return x

    def observe(self, x, y: float) -> "BayesianOptimizer":
        """Record one measurement, append history, refit on schedule."""
        x = check_in_bounds(x, self.bounds, name="x")
        y = float(y)
        if not np.isfinite(y):
            raise ValueError("observation must be finite")
        self.data = self.data.append(x, y)
        self.history.append({
            "proposal": [float(v) for v in x],
            "observation": y,
            "timestamp": _utc_now(),
        })
        t = self.iteration
        if t >= 2 and t % self.refit_period == 0:
            self.kernel = fit_hyperparameters(
                self.data, base=self.kernel, rng_seed=self.rng_seed, fit_noise=False
            )
        return self

    def best(self) -> Incumbent:
        """Current incumbent; requires at least one observation."""
        if self.iteration < 1:
            raise ValueError("best() needs at least one observation")
        return select_incumbent(self.data, self.kernel)

    # -- persistence ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "mode": self.mode,
            "bounds": [[float(lo), float(hi)] for lo, hi in self.bounds],
            "kernel": self.kernel.to_dict(),
            "acquisition": self.acquisition.to_dict(),
            "refit_period": self.refit_period,
            "rng_seed": self.rng_seed,
            "maximizer_budget": self.budget.to_dict(),
            "history": list(self.history),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BayesianOptimizer":
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported session schema_version: {version!r}")
        if doc.get("mode") != cls.mode:
            raise ValueError(f"expected a {cls.mode} session, got mode={doc.get('mode')!r}")
        session = cls(
            bounds=np.asarray(doc["bounds"], dtype=float),
            kernel=KernelSpec.from_dict(doc["kernel"]),
            acquisition=AcquisitionSpec.from_dict(doc["acquisition"]),
            refit_period=doc["refit_period"],
            rng_seed=doc["rng_seed"],
            # older documents predate the stored budget; they ran defaults
            maximizer_budget=MaximizerBudget.from_dict(doc["maximizer_budget"])
            if "maximizer_budget" in doc else None,
            session_id=doc["id"],
        )
        # the stored kernel is already the fitted one; fold history back
        # into the observation set without touching the refit schedule
        for entry in doc["history"]:
            session.data = session.data.append(
                np.asarray(entry["proposal"], dtype=float), float(entry["observation"])
            )
            session.history.append(dict(entry))
        return session

    def save(self, path: str) -> None:
        _write_json_atomic(path, self.to_dict())

    @classmethod
    def load(cls, path: str) -> "BayesianOptimizer":
        with open(path) as handle:
            return cls.from_dict(json.load(handle))
