"""Shared test utilities."""

import numpy as np


def stratified_points(rng, t: int, d: int) -> np.ndarray:
    """t points in the unit box, one per cell of an axis grid, jittered.

    Guarantees separation between points, so noise-free Gram matrices stay
    well conditioned under the fixed diagonal jitter.
    """
    cells = int(np.ceil(t ** (1.0 / d)))
    idx = rng.permutation(cells**d)[:t]
    coords = np.array(np.unravel_index(idx, (cells,) * d)).T
    return (coords + 0.2 + 0.6 * rng.uniform(size=(t, d))) / cells
