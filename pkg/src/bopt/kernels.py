"""Covariance kernels and stabilized kernel matrices.

A kernel is described by an immutable :class:`KernelSpec` naming the family,
its length-scales, and the signal/noise variances. Three families are
supported:

- ``squared_exp_iso``:  sv * exp(-||a - b||^2 / (2 l^2))
- ``squared_exp_ard``:  sv * exp(-1/2 (a - b)^T diag(l)^-2 (a - b))
- ``matern``:           sv * c(s) * z^s * K_s(z) with z = 2 sqrt(s) r,
  where r is the length-scale-weighted distance, K_s the modified Bessel
  function of the second kind, and c(s) normalizes to sv at r = 0.
  Only smoothness s in {0.5, 1.5, 2.5} is built, via the closed forms
  exp(-z), (1+z) exp(-z), and (1 + z + z^2/3) exp(-z).

Gram matrices get a diagonal jitter of ``1e-8 * signal_variance``; when the
Cholesky factorization still fails the jitter escalates tenfold at a time up
to ``1e-2 * signal_variance`` before a :class:`ConditioningError` is raised.
That ladder is what lets duplicate points coexist in noise-free data.

Examples
--------
>>> spec = squared_exp_iso(length_scale=1.0)
>>> float(kernel_eval(spec, [0.0], [0.0]))
1.0
>>> round(float(kernel_eval(spec, [0.0], [1.0])), 5)
0.60653
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConditioningError
from .validation import check_point, check_points

__all__ = [
    "KernelSpec",
    "squared_exp_iso",
    "squared_exp_ard",
    "matern",
    "kernel_eval",
    "cross_kernel",
    "kernel_matrix",
    "jittered_cholesky",
    "FAMILIES",
    "MATERN_SMOOTHNESS",
    "JITTER_INITIAL",
    "JITTER_MAX",
]

FAMILIES = ("squared_exp_iso", "squared_exp_ard", "matern")
MATERN_SMOOTHNESS = (0.5, 1.5, 2.5)

# Relative jitter ladder: start, escalation factor, ceiling.
JITTER_INITIAL = 1e-8
JITTER_GROWTH = 10.0
JITTER_MAX = 1e-2


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of a covariance function.

    Parameters
    ----------
    family : str
        One of ``FAMILIES``.
    length_scales : tuple of float
        Length-scales in input units. Length 1 for the isotropic families;
        length d for ``squared_exp_ard`` (one per input dimension). The
        Matérn family accepts length 1 or d.
    signal_variance : float
        Output variance at zero distance, > 0.
    noise_variance : float
        Observation noise variance added on Gram diagonals, >= 0.
    smoothness : float, optional
        Matérn smoothness, one of ``MATERN_SMOOTHNESS``. Must be None for
        the squared-exponential families.
    """

    family: str
    length_scales: tuple[float, ...]
    signal_variance: float = 1.0
    noise_variance: float = 0.0
    smoothness: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        ls = tuple(float(v) for v in np.atleast_1d(np.asarray(self.length_scales, dtype=float)))
        if len(ls) == 0 or any(not np.isfinite(v) or v <= 0 for v in ls):
            raise ValueError("length_scales must be positive and finite")
        object.__setattr__(self, "length_scales", ls)
        if self.family == "squared_exp_iso" and len(ls) != 1:
            raise ValueError("squared_exp_iso takes a single length-scale")
        sv = float(self.signal_variance)
        nv = float(self.noise_variance)
        if not np.isfinite(sv) or sv <= 0:
            raise ValueError("signal_variance must be positive")
        if not np.isfinite(nv) or nv < 0:
            raise ValueError("noise_variance must be nonnegative")
        object.__setattr__(self, "signal_variance", sv)
        object.__setattr__(self, "noise_variance", nv)
        if self.family == "matern":
            if self.smoothness not in MATERN_SMOOTHNESS:
                raise ValueError(
                    f"matern smoothness must be one of {MATERN_SMOOTHNESS}, got {self.smoothness}"
                )
        elif self.smoothness is not None:
            raise ValueError(f"smoothness only applies to the matern family")

    def _scales_for_dim(self, d: int) -> np.ndarray:
        ls = np.asarray(self.length_scales, dtype=float)
        if ls.shape[0] == 1:
            return np.full(d, ls[0])
        if ls.shape[0] != d:
            raise ValueError(
                f"kernel has {ls.shape[0]} length-scales but points have dimension {d}"
            )
        return ls

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "length_scales": list(self.length_scales),
            "signal_variance": self.signal_variance,
            "noise_variance": self.noise_variance,
            "smoothness": self.smoothness,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(
            family=d["family"],
            length_scales=tuple(d["length_scales"]),
            signal_variance=d["signal_variance"],
            noise_variance=d.get("noise_variance", 0.0),
            smoothness=d.get("smoothness"),
        )


def squared_exp_iso(length_scale=1.0, signal_variance=1.0, noise_variance=0.0) -> KernelSpec:
    """Isotropic squared-exponential kernel."""
    return KernelSpec("squared_exp_iso", (float(length_scale),), signal_variance, noise_variance)


def squared_exp_ard(length_scales, signal_variance=1.0, noise_variance=0.0) -> KernelSpec:
    """Squared-exponential kernel with one length-scale per dimension.

    Large length-scales switch their dimension off: the kernel becomes
    insensitive to changes along it.
    """
    return KernelSpec("squared_exp_ard", tuple(length_scales), signal_variance, noise_variance)


def matern(smoothness=2.5, length_scale=1.0, signal_variance=1.0, noise_variance=0.0) -> KernelSpec:
    """Matérn kernel with smoothness 0.5, 1.5, or 2.5."""
    ls = tuple(np.atleast_1d(np.asarray(length_scale, dtype=float)).tolist())
    return KernelSpec("matern", ls, signal_variance, noise_variance, float(smoothness))


def _matern_profile(smoothness: float, r: np.ndarray) -> np.ndarray:
    # Closed forms of c(s) z^s K_s(z) at z = 2 sqrt(s) r, unit value at r=0.
    z = 2.0 * np.sqrt(smoothness) * r
    if smoothness == 0.5:
        return np.exp(-z)
    if smoothness == 1.5:
        return (1.0 + z) * np.exp(-z)
    if smoothness == 2.5:
        return (1.0 + z + z * z / 3.0) * np.exp(-z)
    raise ValueError(f"unsupported smoothness {smoothness}")


def cross_kernel(spec: KernelSpec, A, B) -> np.ndarray:
    """Kernel values between two stacks of points, as an (n, m) matrix.

    Noise and jitter are never added here; this is the bare covariance.
    """
    A = check_points(A, name="A")
    B = check_points(B, dim=A.shape[1], name="B")
    ls = spec._scales_for_dim(A.shape[1])
    diff = A[:, None, :] / ls - B[None, :, :] / ls
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    if spec.family in ("squared_exp_iso", "squared_exp_ard"):
        corr = np.exp(-0.5 * sq)
    else:
        corr = _matern_profile(spec.smoothness, np.sqrt(np.maximum(sq, 0.0)))
    return spec.signal_variance * corr


def kernel_eval(spec: KernelSpec, a, b) -> float:
    """Kernel value between two points.

    Symmetric in its arguments and equal to ``signal_variance`` at a == b.
    """
    a = check_point(a, name="a")
    b = check_point(b, dim=a.shape[0], name="b")
    return float(cross_kernel(spec, a[None, :], b[None, :])[0, 0])


def jittered_cholesky(K: np.ndarray, signal_variance: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K + jitter * I`` under the escalation ladder.

    Returns the factor together with the jitter that was actually used.
    Raises :class:`ConditioningError` when the ceiling is reached.
    """
    jitter = JITTER_INITIAL * signal_variance
    ceiling = JITTER_MAX * signal_variance
    eye = np.eye(K.shape[0])
    while True:
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= JITTER_GROWTH
            if jitter > ceiling * (1 + 1e-12):
                raise ConditioningError(
                    f"kernel matrix is not positive definite even with jitter "
                    f"{ceiling:.3g} on the diagonal"
                ) from None


def kernel_matrix(spec: KernelSpec, points) -> np.ndarray:
    """Gram matrix over ``points`` with noise and stabilizing jitter added.

    The returned matrix is symmetric and positive definite (verified by an
    internal Cholesky under the jitter ladder).
    """
    X = check_points(points, name="points")
    if X.shape[0] < 1:
        raise ValueError("kernel_matrix needs at least one point")
    K = cross_kernel(spec, X, X)
    K = 0.5 * (K + K.T)
    K[np.diag_indices_from(K)] += spec.noise_variance
    _, jitter = jittered_cholesky(K, spec.signal_variance)
    K[np.diag_indices_from(K)] += jitter
    return K
