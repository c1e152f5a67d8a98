"""Derivative-free pattern search over a box.

Shared by hyperparameter fitting (in log-space) and the multistart
maximizer (in the original space). Minimizes. The incumbent value is
non-increasing by construction; the search is deterministic given its
starting point.
"""

from __future__ import annotations

import numpy as np


def compass_search(fun, x0, bounds, max_evals: int = 200, rel_tol: float = 1e-6,
                   initial_step: float = 0.25):
    """Minimize ``fun`` over the box by axis-aligned steps with halving.

    Steps start at ``initial_step`` times the box width per dimension.
    Stops once the per-sweep relative improvement falls below ``rel_tol``
    with the steps already shrunk small, or after ``max_evals`` evaluations.

    Returns ``(x_best, f_best, evaluations)``. Non-finite objective values
    are treated as worse than any finite one, so a search started in a
    failing region can still walk out of it.
    """
    lo, hi = bounds[:, 0], bounds[:, 1]
    width = hi - lo
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    f = float(fun(x))
    if np.isnan(f):
        f = np.inf
    evals = 1
    step = initial_step * width
    floor = 1e-6 * width
    d = x.shape[0]
    while evals < max_evals:
        f_before = f
        moved = False
        for i in range(d):
            for sign in (1.0, -1.0):
                if evals >= max_evals:
                    break
                xi = np.clip(x[i] + sign * step[i], lo[i], hi[i])
                if xi == x[i]:
                    continue
                cand = x.copy()
                cand[i] = xi
                fc = float(fun(cand))
                if np.isnan(fc):
                    fc = np.inf
                evals += 1
                if fc < f:
                    x, f = cand, fc
                    moved = True
                    break
        small = bool(np.all(step <= floor))
        if not moved:
            if small:
                break
            step *= 0.5
        else:
            gain = (f_before - f) / max(1.0, abs(f_before))
            if gain < rel_tol:
                if small:
                    break
                step *= 0.5
    return x, f, evals
