"""Deterministic global maximization over a box.

``direct_maximize`` implements the classic dividing-rectangles scheme:
normalize the box to the unit cube, keep a pool of rectangles with their
center values, select the potentially optimal ones through the lower-right
convex hull over (diagonal, value) with a small balance parameter, and
trisect each along its longest side(s). Everything is deterministic: ties
in the hull go to the earliest rectangle, ties in side length to the
lowest dimension index. The best-so-far pair is maintained after every
evaluation, so exhausting the budget is a normal exit, not an error.

``multistart_maximize`` is the cross-check: seeded uniform starts refined
with a compass pattern search, clipped to the bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._local_search import compass_search
from .exceptions import InvalidObjectiveError
from .validation import check_bounds

__all__ = ["MaximizerBudget", "MaximizeResult", "direct_maximize", "multistart_maximize"]

# Balance parameter of the potentially-optimal test.
EPSILON = 1e-4


@dataclass(frozen=True)
class MaximizerBudget:
    max_evaluations: int = 2000
    max_iterations: int = 100
    min_rectangle_diagonal: float = 1e-10

    def __post_init__(self):
        if self.max_evaluations < 1 or self.max_iterations < 1:
            raise ValueError("budget counts must be positive")
        if not self.min_rectangle_diagonal > 0:
            raise ValueError("min_rectangle_diagonal must be positive")

    def to_dict(self) -> dict:
        return {
            "max_evaluations": self.max_evaluations,
            "max_iterations": self.max_iterations,
            "min_rectangle_diagonal": self.min_rectangle_diagonal,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MaximizerBudget":
        return cls(**doc)


@dataclass
class MaximizeResult:
    """Best point found, its value, and how much work it took.

    ``max_diagonal`` is the largest half-diagonal among the remaining
    rectangles (unit-cube units), a convergence diagnostic; it is 0.0 for
    the multistart maximizer, which keeps no rectangles.
    """

    argmax: np.ndarray
    value: float
    evaluations: int
    max_diagonal: float = 0.0


class _Rect:
    __slots__ = ("center", "levels", "value", "index", "key", "diag")

    def __init__(self, center, levels, value, index):
        self.center = center      # unit-cube coordinates
        self.levels = levels      # trisection count per dimension
        self.value = value        # objective at center (maximization scale)
        self.index = index        # insertion order, for deterministic ties
        self._refresh()

    def _refresh(self):
        self.key = tuple(sorted(self.levels.tolist()))
        sides = 3.0 ** (-self.levels)
        self.diag = 0.5 * float(np.linalg.norm(sides))


def _check_value(v, point) -> float:
    v = float(v)
    if not np.isfinite(v):
        raise InvalidObjectiveError(
            f"objective returned a non-finite value ({v}) at {np.asarray(point).tolist()}"
        )
    return v


def _potentially_optimal(rects: list[_Rect]) -> list[_Rect]:
    """Hull-based selection, on a minimization scale internally."""
    groups: dict[tuple, _Rect] = {}
    for r in rects:
        cur = groups.get(r.key)
        if cur is None or (-r.value, r.index) < (-cur.value, cur.index):
            groups[r.key] = r
    cands = sorted(groups.values(), key=lambda r: (r.diag, r.index))
    dias = [r.diag for r in cands]
    vals = [-r.value for r in cands]
    best = min(vals)
    selected = []
    n = len(cands)
    for k in range(n):
        dk, vk = dias[k], vals[k]
        dominated = False
        max_left = -np.inf
        for i in range(k):
            if dias[i] < dk:
                slope = (vk - vals[i]) / (dk - dias[i])
                if slope > max_left:
                    max_left = slope
            elif vals[i] < vk:
                dominated = True  # same diagonal, better value
                break
        if dominated:
            continue
        right = [
            (vals[j] - vk) / (dias[j] - dk) for j in range(k + 1, n) if dias[j] > dk
        ]
        if right:
            min_right = min(right)
            if max_left > min_right + 1e-13:
                continue
            if best != 0.0:
                if (best - vk) / abs(best) + (dk / abs(best)) * min_right < EPSILON - 1e-13:
                    continue
            elif vk > dk * min_right:
                continue
        selected.append(cands[k])
    return selected


def direct_maximize(objective, bounds, budget: MaximizerBudget | None = None) -> MaximizeResult:
    """Maximize ``objective`` over the box by dividing rectangles.

    Deterministic for a deterministic objective; never evaluates outside
    the bounds; the returned value is at least the value at the domain
    center (the first point evaluated). A non-finite objective value
    raises :class:`InvalidObjectiveError` naming the offending point.
    """
    bounds = check_bounds(bounds)
    budget = budget or MaximizerBudget()
    lo, width = bounds[:, 0], bounds[:, 1] - bounds[:, 0]
    d = bounds.shape[0]

    def denorm(z):
        return lo + z * width

    def f(z):
        p = denorm(z)
        return _check_value(objective(p), p)

    center = np.full(d, 0.5)
    best_z, best_v = center.copy(), f(center)
    evals = 1
    rects = [_Rect(center, np.zeros(d, dtype=int), best_v, 0)]
    next_index = 1
    iterations = 0
    out_of_budget = False

    while iterations < budget.max_iterations and evals < budget.max_evaluations:
        eligible = [r for r in rects if r.diag >= budget.min_rectangle_diagonal]
        if not eligible:
            break
        for rect in _potentially_optimal(eligible):
            min_level = int(rect.levels.min())
            dims = [i for i in range(d) if rect.levels[i] == min_level]
            if evals + 2 * len(dims) > budget.max_evaluations:
                out_of_budget = True
                break
            delta = 3.0 ** (-(min_level + 1))
            trials = []
            for i in dims:
                pair = []
                for sign in (-1.0, 1.0):
                    z = rect.center.copy()
                    z[i] += sign * delta
                    v = f(z)
                    evals += 1
                    if v > best_v:
                        best_z, best_v = z.copy(), v
                    pair.append((z, v))
                trials.append((max(pair[0][1], pair[1][1]), i, pair))
            # best new value gets the largest child: split its dimension first
            trials.sort(key=lambda tr: (-tr[0], tr[1]))
            levels = rect.levels.copy()
            for _, i, pair in trials:
                levels[i] += 1
                for z, v in pair:
                    rects.append(_Rect(z, levels.copy(), v, next_index))
                    next_index += 1
            rect.levels = levels
            rect._refresh()
        iterations += 1
        if out_of_budget:
            break

    max_diag = max(r.diag for r in rects)
    return MaximizeResult(denorm(best_z), best_v, evals, max_diag)


def multistart_maximize(objective, bounds, starts: int = 8, rng_seed: int = 0,
                        budget: MaximizerBudget | None = None,
                        initial_points=None) -> MaximizeResult:
    """Seeded uniform starts refined by compass search; the fallback maximizer.

    ``initial_points`` are tried before the random starts (handy for
    polishing a known candidate). The budget caps total evaluations across
    all starts. Deterministic per ``rng_seed``.
    """
    bounds = check_bounds(bounds)
    budget = budget or MaximizerBudget()
    if starts < 1:
        raise ValueError("starts must be >= 1")
    rng = np.random.default_rng(rng_seed)
    seeds = [] if initial_points is None else initial_points
    points = [np.asarray(p, dtype=float) for p in seeds]
    points += [rng.uniform(bounds[:, 0], bounds[:, 1]) for _ in range(starts)]

    evals = 0
    best_x, best_v = None, -np.inf

    def g(x):
        return -_check_value(objective(x), x)

    per_start = max(20, budget.max_evaluations // len(points))
    for x0 in points:
        remaining = budget.max_evaluations - evals
        if remaining < 2:
            break
        x, fneg, used = compass_search(g, x0, bounds, max_evals=min(per_start, remaining))
        evals += used
        if -fneg > best_v:
            best_x, best_v = x, -fneg
    return MaximizeResult(np.asarray(best_x), best_v, evals, 0.0)
