"""Restoration pipelines shared by the trainer, the estimator, and the CLI."""

from __future__ import annotations

import numpy as np

from .spectral import Psf, as_grid
from .vst import ANSCOMBE_FLOOR, anscombe, exact_unbiased_inverse
from .wiener import KernelBank, plan, wiener_solve


def restore(y: np.ndarray, psf: Psf, bank: KernelBank) -> np.ndarray:
    """Closed-form restoration of a single image."""
    y = as_grid(y, "y")
    return wiener_solve(y, plan(psf, bank, *y.shape))


def restore_vst(
    y_counts: np.ndarray, psf: Psf, bank: KernelBank, peak: float | None = None
) -> np.ndarray:
    """Poisson pipeline: variance-stabilize, restore, invert, rescale.

    The restored stabilized image is clamped at the Anscombe image of zero
    before inversion (values below it correspond to zero intensity).  With
    `peak` given the count-domain output is divided by it, returning to the
    [0, 1] scale of the ground truth.
    """
    z = anscombe(y_counts)
    z_hat = np.maximum(restore(z, psf, bank), ANSCOMBE_FLOOR)
    x_hat = exact_unbiased_inverse(z_hat)
    return x_hat / peak if peak else x_hat
