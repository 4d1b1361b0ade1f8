"""Anscombe variance-stabilizing transform and its exact unbiased inverse."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .spectral import as_grid

#: Image of 0 under the Anscombe transform, 2 * sqrt(3/8); also the smallest
#: argument the unbiased inverse maps to a nonnegative intensity.
ANSCOMBE_FLOOR = 2.0 * np.sqrt(3.0 / 8.0)

_C1 = 0.25 * np.sqrt(1.5)
_C2 = 11.0 / 8.0
_C3 = 0.625 * np.sqrt(1.5)


def anscombe(y: np.ndarray) -> np.ndarray:
    """y -> 2 sqrt(y + 3/8); maps Poisson data to ~unit-variance Gaussian."""
    y = as_grid(y, "y")
    bad = np.argwhere(y < -0.375)
    if bad.size:
        i, j = bad[0]
        raise InvalidInputError(f"anscombe: value {y[i, j]!r} < -3/8 at pixel ({i}, {j})")
    return 2.0 * np.sqrt(y + 0.375)


def exact_unbiased_inverse(z: np.ndarray) -> np.ndarray:
    """Closed-form exact unbiased inverse of the Anscombe transform.

    (z/2)^2 - 1/8 + (1/4)sqrt(3/2) z^-1 - (11/8) z^-2 + (5/8)sqrt(3/2) z^-3,
    clamped below at 0 since intensities are nonnegative.
    """
    z = as_grid(z, "z")
    if np.any(z <= 0):
        raise InvalidInputError("exact unbiased inverse: requires z > 0 everywhere")
    out = (z / 2.0) ** 2 - 0.125 + _C1 / z - _C2 / z**2 + _C3 / z**3
    return np.clip(out, 0.0, None)


def exact_unbiased_inverse_derivative(z: np.ndarray) -> np.ndarray:
    """Element-wise derivative of the unbiased inverse (0 where it is clamped)."""
    z = as_grid(z, "z")
    raw = (z / 2.0) ** 2 - 0.125 + _C1 / z - _C2 / z**2 + _C3 / z**3
    deriv = z / 2.0 - _C1 / z**2 + 2.0 * _C2 / z**3 - 3.0 * _C3 / z**4
    return np.where(raw > 0, deriv, 0.0)


def algebraic_inverse(z: np.ndarray) -> np.ndarray:
    """Naive inverse (z/2)^2 - 3/8; biased at low counts, kept for comparison."""
    z = as_grid(z, "z")
    return (z / 2.0) ** 2 - 0.375
