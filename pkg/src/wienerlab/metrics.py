"""PSNR and mean SSIM with periodic window handling."""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidInputError
from .spectral import as_grid, fft2, ifft2, kernel_spectrum

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE); +inf flags identical images."""
    a = as_grid(a, "a")
    b = as_grid(b, "b")
    if a.shape != b.shape:
        raise InvalidInputError(f"psnr: shape mismatch {a.shape} vs {b.shape}")
    if peak <= 0:
        raise InvalidInputError("psnr: peak must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak**2 / mse)


def format_psnr(value: float) -> str:
    return "identical" if math.isinf(value) else f"{value:.2f}"


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    i = np.arange(size) - size // 2
    g = np.exp(-(i**2) / (2.0 * sigma**2))
    window = np.outer(g, g)
    return window / window.sum()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean SSIM: 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03, L=1.

    Local statistics use circular wrap at the borders, consistent with the
    periodic boundary convention used everywhere else in the toolkit.
    """
    a = as_grid(a, "a")
    b = as_grid(b, "b")
    if a.shape != b.shape:
        raise InvalidInputError(f"ssim: shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise InvalidInputError(f"ssim: grid smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    spec = kernel_spectrum(_gaussian_window(SSIM_WINDOW, SSIM_SIGMA), *a.shape)

    def smooth(img):
        return ifft2(spec * fft2(img))

    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    mu_a = smooth(a)
    mu_b = smooth(b)
    var_a = smooth(a * a) - mu_a * mu_a
    var_b = smooth(b * b) - mu_b * mu_b
    cov = smooth(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
