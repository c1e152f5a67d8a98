"""Acquisition functions and incumbent selection.

Maps a posterior summary to a sampling utility. Three closed forms are
built: probability of improvement, expected improvement, and the GP upper
confidence bound with the dimension-aware confidence schedule

    tau_t = 2 log(t^(d/2 + 2) pi^2 / (3 delta)),   kappa_t = sqrt(nu tau_t).

All three are total functions of their inputs; the degenerate zero-variance
cases follow the sigma -> 0+ limits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .gp import ObservationSet, PosteriorSummary, _noisy_cholesky, _predict_arrays
from .kernels import KernelSpec

__all__ = [
    "AcquisitionSpec",
    "Incumbent",
    "probability_of_improvement",
    "expected_improvement",
    "gp_ucb",
    "ucb_schedule",
    "select_incumbent",
    "default_xi",
    "ACQUISITION_KINDS",
]

ACQUISITION_KINDS = ("pi", "ei", "ucb")


@dataclass(frozen=True)
class AcquisitionSpec:
    """Configuration of an acquisition rule.

    ``xi`` of None means "use the default margin", 0.01 times the kernel's
    signal variance, resolved by the caller that knows the kernel.
    ``iteration`` and ``dim`` only matter for the UCB schedule; the
    optimization loop overrides them with its live round number.
    """

    kind: str = "ei"
    xi: float | None = None
    nu: float = 1.0
    delta: float = 0.1
    iteration: int = 1
    dim: int = 1

    def __post_init__(self):
        if self.kind not in ACQUISITION_KINDS:
            raise ValueError(f"acquisition kind must be one of {ACQUISITION_KINDS}")
        if self.xi is not None and (not np.isfinite(self.xi) or self.xi < 0):
            raise ValueError("xi must be nonnegative")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if int(self.iteration) < 1 or int(self.dim) < 1:
            raise ValueError("iteration and dim must be >= 1")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "xi": self.xi, "nu": self.nu, "delta": self.delta}

    @classmethod
    def from_dict(cls, d: dict) -> "AcquisitionSpec":
        return cls(kind=d.get("kind", "ei"), xi=d.get("xi"), nu=d.get("nu", 1.0),
                   delta=d.get("delta", 0.1))


@dataclass(frozen=True)
class Incumbent:
    """Best point so far: its location, its value, and its sample index.

    Under observation noise the value is the posterior mean at the
    location, not the raw observation.
    """

    location: np.ndarray
    value: float
    index: int


def default_xi(kernel: KernelSpec) -> float:
    """Default improvement margin: 0.01 times the signal variance."""
    return 0.01 * kernel.signal_variance


def _phi(z):
    return np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)


def _pi_values(mean, std, incumbent_value, xi):
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    gain = mean - incumbent_value - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std > 0, gain / np.where(std > 0, std, 1.0), 0.0)
    exact = np.where(gain > 0, 1.0, 0.0)
    return np.where(std > 0, ndtr(z), exact)


def _ei_values(mean, std, incumbent_value, xi):
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    gain = mean - incumbent_value - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std > 0, gain / np.where(std > 0, std, 1.0), 0.0)
    ei = gain * ndtr(z) + std * _phi(z)
    return np.where(std > 0, np.maximum(ei, 0.0), 0.0)


def probability_of_improvement(post: PosteriorSummary, inc: Incumbent | float,
                               xi: float) -> float:
    """Phi((mean - incumbent - xi) / std); the std = 0 limit is a 0/1 step."""
    value = inc.value if isinstance(inc, Incumbent) else float(inc)
    return float(_pi_values(post.mean, post.std, value, xi))


def expected_improvement(post: PosteriorSummary, inc: Incumbent | float,
                         xi: float) -> float:
    """Closed-form expected improvement over the incumbent plus margin.

    Returns (mean - best - xi) Phi(Z) + std phi(Z), zero when std = 0,
    and never negative.
    """
    value = inc.value if isinstance(inc, Incumbent) else float(inc)
    return float(_ei_values(post.mean, post.std, value, xi))


def ucb_schedule(iteration: int, dim: int, delta: float = 0.1) -> float:
    """Confidence multiplier tau_t of the UCB rule, clamped at zero."""
    if iteration < 1:
        raise ValueError("iteration must be >= 1")
    t = float(iteration)
    tau = 2.0 * np.log(t ** (dim / 2.0 + 2.0) * np.pi**2 / (3.0 * delta))
    return float(max(tau, 0.0))


def gp_ucb(post: PosteriorSummary, spec: AcquisitionSpec) -> float:
    """mean + sqrt(nu tau_t) std with tau_t from the schedule."""
    tau = ucb_schedule(spec.iteration, spec.dim, spec.delta)
    return float(post.mean + np.sqrt(spec.nu * tau) * post.std)


def select_incumbent(data: ObservationSet, model: KernelSpec,
                     noisy: bool | None = None) -> Incumbent:
    """Best sampled point.

    Noise-free: the highest raw observation. Noisy: the sampled point with
    the highest posterior mean (observations shrink toward the prior).
    Ties go to the lowest index. ``noisy`` defaults to whether the model
    carries observation noise.
    """
    if data.t < 1:
        raise ValueError("select_incumbent needs at least one observation")
    if noisy is None:
        noisy = model.noise_variance > 0
    if not noisy:
        idx = int(np.argmax(data.values))
        return Incumbent(data.points[idx].copy(), float(data.values[idx]), idx)
    L = _noisy_cholesky(model, data.points)
    mean, _ = _predict_arrays(model, data.points, data.values, L, data.points, False)
    idx = int(np.argmax(mean))
    return Incumbent(data.points[idx].copy(), float(mean[idx]), idx)


def evaluate(spec: AcquisitionSpec, post: PosteriorSummary, inc: Incumbent | float,
             kernel: KernelSpec) -> float:
    """Dispatch on ``spec.kind`` with the default margin resolved."""
    if spec.kind == "ucb":
        return gp_ucb(post, spec)
    xi = spec.xi if spec.xi is not None else default_xi(kernel)
    if spec.kind == "pi":
        return probability_of_improvement(post, inc, xi)
    return expected_improvement(post, inc, xi)
