"""Separable box filtering on 2-D grids.

Windows are clipped at the array border: an edge pixel averages over the
neighbors that actually exist, so the output is a true mean everywhere
and no data is invented outside the grid.
"""

from __future__ import annotations

import numpy as np


def _box_sum_1d(a: np.ndarray, radius: int, axis: int) -> np.ndarray:
    n = a.shape[axis]
    zero_shape = list(a.shape)
    zero_shape[axis] = 1
    c = np.concatenate([np.zeros(zero_shape), np.cumsum(a, axis=axis, dtype=np.float64)], axis=axis)
    hi = np.minimum(np.arange(n) + radius + 1, n)  # exclusive window end
    lo = np.maximum(np.arange(n) - radius, 0)
    return np.take(c, hi, axis=axis) - np.take(c, lo, axis=axis)


def _window_counts(n: int, radius: int) -> np.ndarray:
    i = np.arange(n)
    return np.minimum(i + radius, n - 1) - np.maximum(i - radius, 0) + 1


def box_mean(a: np.ndarray, radius: int) -> np.ndarray:
    """Mean of each (2*radius+1)^2 window of a 2-D array, clipped in-bounds."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"box_mean expects a 2-D array, got shape {a.shape}")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0 or a.size == 0:
        return a.copy()
    s = _box_sum_1d(_box_sum_1d(a, radius, axis=0), radius, axis=1)
    counts = np.outer(_window_counts(a.shape[0], radius), _window_counts(a.shape[1], radius))
    return s / counts
