"""Periodic-boundary Fourier machinery.

All computation is double precision.  The forward transform is unnormalized,
the inverse divides by H*W, and every convolution in the toolkit assumes
periodic (circular) image boundaries so that blur and regularization
operators are circulant and diagonal in the Fourier domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericError

IMAG_TOL = 1e-8


def as_grid(a, name: str = "grid") -> np.ndarray:
    """Validate and return a finite 2-D float64 array."""
    g = np.asarray(a, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] == 0 or g.shape[1] == 0:
        raise InvalidInputError(f"{name}: expected a non-empty 2-D array, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise InvalidInputError(f"{name}: contains NaN or Inf")
    return g


@dataclass(frozen=True)
class Psf:
    """A small nonnegative blur kernel with unit sum."""

    taps: np.ndarray

    def __post_init__(self):
        taps = as_grid(self.taps, "psf")
        if np.any(taps < 0):
            raise InvalidInputError("psf: taps must be nonnegative")
        s = taps.sum()
        if abs(s - 1.0) > 1e-9:
            raise InvalidInputError(f"psf: taps must sum to 1, got {s!r}")
        object.__setattr__(self, "taps", taps)

    @property
    def shape(self) -> tuple[int, int]:
        return self.taps.shape

    @staticmethod
    def delta(size: int = 1) -> "Psf":
        taps = np.zeros((size, size))
        taps[size // 2, size // 2] = 1.0
        return Psf(taps)


def fft2(g: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2-D DFT of a real grid."""
    g = as_grid(g)
    return np.fft.fft2(g)


def ifft2(s: np.ndarray, imag_tol: float = IMAG_TOL) -> np.ndarray:
    """Normalized inverse 2-D DFT, asserting the result is real.

    The spectra handled by this toolkit are conjugate symmetric, so the
    inverse transform must be real up to rounding; an imaginary residue
    above `imag_tol` per sample means something upstream is inconsistent.
    """
    s = np.asarray(s, dtype=np.complex128)
    if s.ndim != 2 or s.size == 0:
        raise InvalidInputError(f"spectrum: expected a non-empty 2-D array, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise InvalidInputError("spectrum: contains NaN or Inf")
    g = np.fft.ifft2(s)
    residue = np.abs(g.imag).max()
    if residue > imag_tol:
        raise NumericError(f"inverse transform of a supposedly real spectrum has imaginary residue {residue:g}")
    return g.real


def embed_kernel(taps: np.ndarray, h: int, w: int) -> np.ndarray:
    """Zero-pad a kernel into an h x w grid and roll its center to (0, 0).

    The kernel center is (kh // 2, kw // 2) for both odd and even sizes.
    """
    taps = as_grid(taps, "kernel")
    kh, kw = taps.shape
    if kh > h or kw > w:
        raise InvalidInputError(f"kernel {taps.shape} does not fit in target {(h, w)}")
    grid = np.zeros((h, w))
    grid[:kh, :kw] = taps
    return np.roll(grid, (-(kh // 2), -(kw // 2)), axis=(0, 1))


def embed_kernel_adjoint(grid: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Adjoint of `embed_kernel`: undo the roll, then crop the top-left corner."""
    grid = as_grid(grid)
    return np.roll(grid, (kh // 2, kw // 2), axis=(0, 1))[:kh, :kw]


def kernel_spectrum(taps: np.ndarray, h: int, w: int) -> np.ndarray:
    """Spectrum of the circulant operator built from an arbitrary kernel."""
    return np.fft.fft2(embed_kernel(taps, h, w))


def psf_to_otf(k: Psf, h: int, w: int) -> np.ndarray:
    """Optical transfer function of a PSF on an h x w periodic grid."""
    return kernel_spectrum(k.taps, h, w)


def circular_convolve(g: np.ndarray, k: Psf) -> np.ndarray:
    """Circular convolution of an image with a PSF via the FFT."""
    g = as_grid(g)
    otf = psf_to_otf(k, *g.shape)
    return ifft2(otf * fft2(g))


def circular_convolve_spatial(g: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Direct wrap-around convolution; the slow oracle for the FFT path."""
    g = as_grid(g)
    taps = as_grid(taps, "kernel")
    h, w = g.shape
    kh, kw = taps.shape
    ch, cw = kh // 2, kw // 2
    out = np.zeros_like(g)
    for a in range(kh):
        for b in range(kw):
            out += taps[a, b] * np.roll(g, (a - ch, b - cw), axis=(0, 1))
    return out


def _zigzag(size: int):
    """(row-frequency, column-frequency) pairs in JPEG zigzag order."""
    order = []
    for s in range(2 * size - 1):
        diag = [(s - q, q) for q in range(max(0, s - size + 1), min(s, size - 1) + 1)]
        order.extend(reversed(diag) if s % 2 else diag)
    return order


def dct_basis(size: int, count: int) -> list[np.ndarray]:
    """First `count` non-DC 2-D DCT-II basis kernels in zigzag frequency order.

    Each kernel is l2-normalized; the set is orthonormal and every kernel
    has zero sum (all are orthogonal to the DC mode).
    """
    if size < 1:
        raise InvalidInputError("dct_basis: size must be >= 1")
    if not 0 <= count <= size * size - 1:
        raise InvalidInputError(f"dct_basis: count must be in [0, {size * size - 1}], got {count}")
    m = np.arange(size)
    modes = []
    for p, q in _zigzag(size)[1 : count + 1]:
        row = np.cos(np.pi * (2 * m + 1) * p / (2 * size))
        col = np.cos(np.pi * (2 * m + 1) * q / (2 * size))
        kernel = np.outer(row, col)
        modes.append(kernel / np.linalg.norm(kernel))
    return modes
