"""Central finite differences for checking hand-written gradients."""
from __future__ import annotations

from typing import Callable, Iterable

import numpy as np


def numeric_gradient(loss: Callable[[], float], array: np.ndarray,
                     h: float = 1e-5) -> np.ndarray:
    """dloss/darray by central differences, perturbing ``array`` in place."""
    grad = np.zeros_like(array)
    flat, gflat = array.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss()
        flat[i] = orig - h
        down = loss()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / (||a|| + ||n||), 0 when both vanish."""
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def max_relative_error(loss: Callable[[], float],
                       pairs: Iterable[tuple[np.ndarray, np.ndarray]],
                       h: float = 1e-5) -> float:
    """Worst relative error over (parameter array, analytic gradient) pairs."""
    worst = 0.0
    for array, analytic in pairs:
        worst = max(worst, relative_error(analytic, numeric_gradient(loss, array, h)))
    return worst
