"""Small sampling helpers shared by the dataset and tolerance code."""

from __future__ import annotations

import numpy as np


def truncated_normal(rng: np.random.Generator, mean, sigma, limit_sigmas: float,
                     size) -> np.ndarray:
    """Normal draws redrawn until within +/- limit_sigmas standard deviations."""
    mean = np.broadcast_to(np.asarray(mean, dtype=float), size).copy()
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), size).copy()
    out = rng.normal(mean, sigma)
    bound = limit_sigmas * sigma
    bad = np.abs(out - mean) > bound
    while np.any(bad):
        out[bad] = rng.normal(mean[bad], sigma[bad])
        bad = np.abs(out - mean) > bound
    return out


def quantize_half_up(values: np.ndarray, step: float) -> np.ndarray:
    """Snap to the nearest grid multiple, ties rounding up."""
    values = np.asarray(values, dtype=float)
    return np.floor(values / step + 0.5) * step
