"""Analytic backpropagation through the closed-form restoration.

All gradients are vector-Jacobian products: given the upstream gradient
q = dLoss/dx_hat they return the gradient of the loss w.r.t. the trade-off
exponent alpha, the regularization kernel taps, or the input image.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInputError
from .spectral import as_grid, embed_kernel_adjoint, fft2, ifft2
from .wiener import KernelBank, WienerPlan

FD_STEP = 1e-5
REL_FLOOR = 1e-8


@dataclass
class BankGradient:
    """Gradient of a scalar loss w.r.t. a KernelBank."""

    d_alpha: float
    d_kernels: np.ndarray  # (d, k, k), aligned with KernelBank.kernels


def _check_pair(y: np.ndarray, p: WienerPlan, upstream: np.ndarray):
    y = as_grid(y, "y")
    q = as_grid(upstream, "upstream")
    if y.shape != p.shape or q.shape != p.shape:
        raise InvalidInputError(
            f"shape mismatch: y {y.shape}, upstream {q.shape}, plan {p.shape}"
        )
    return y, q


def grad_alpha(y: np.ndarray, p: WienerPlan, upstream: np.ndarray) -> float:
    """d<upstream, x_hat>/d alpha, computed spectrally."""
    y, q = _check_pair(y, p, upstream)
    h, w = p.shape
    num = np.conj(fft2(q)) * p.reg_power * np.conj(p.otf) * fft2(y) / p.denom**2
    return float(-np.exp(p.alpha) * np.sum(num.real) / (h * w))


def grad_bank(
    y: np.ndarray, p: WienerPlan, bank: KernelBank, upstream: np.ndarray
) -> BankGradient:
    """Gradient w.r.t. every kernel tap and alpha.

    Per kernel: z = conj(OTF) * Fy / denom^2 * conj(F q) bin-wise; the tap
    gradient is -2 e^alpha times the embedding adjoint (inverse shift, crop)
    of ifft2(reg_spectrum * Re z).
    """
    y, q = _check_pair(y, p, upstream)
    if bank.d != p.reg_spectra.shape[0]:
        raise InvalidInputError("bank does not match plan: different kernel count")
    z_re = (np.conj(p.otf) * fft2(y) / p.denom**2 * np.conj(fft2(q))).real
    scale = -2.0 * np.exp(p.alpha)
    k = bank.k
    d_kernels = np.stack(
        [
            scale * embed_kernel_adjoint(ifft2(spec * z_re), k, k)
            for spec in p.reg_spectra
        ]
    )
    return BankGradient(d_alpha=grad_alpha(y, p, q), d_kernels=d_kernels)


def grad_input(p: WienerPlan, upstream: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the observed image: ifft2(OTF * F q / denom)."""
    q = as_grid(upstream, "upstream")
    if q.shape != p.shape:
        raise InvalidInputError(f"upstream shape {q.shape} does not match plan {p.shape}")
    return ifft2(p.otf * fft2(q) / p.denom)


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_FLOOR)


@dataclass
class FdReport:
    """Per-coordinate finite-difference comparison against an analytic gradient."""

    errors: np.ndarray          # relative error per coordinate (NaN where loss failed)
    numeric: np.ndarray
    analytic: np.ndarray

    @property
    def max_relative_error(self) -> float:
        finite = self.errors[np.isfinite(self.errors)]
        return float(finite.max()) if finite.size else float("nan")

    @property
    def failed(self) -> np.ndarray:
        return ~np.isfinite(self.errors)


def fd_check(
    loss: Callable[[np.ndarray], float],
    params: Sequence[float] | np.ndarray,
    analytic: Sequence[float] | np.ndarray,
    step: float = FD_STEP,
) -> FdReport:
    """Central-difference check of an analytic gradient, coordinate by coordinate.

    Non-finite loss evaluations are recorded per coordinate, not raised.
    """
    if step <= 0:
        raise InvalidInputError("fd_check: step must be positive")
    params = np.asarray(params, dtype=np.float64).ravel()
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    if params.shape != analytic.shape:
        raise InvalidInputError("fd_check: params and analytic gradient differ in length")
    numeric = np.full_like(params, np.nan)
    errors = np.full_like(params, np.nan)
    for i in range(params.size):
        probe = params.copy()
        probe[i] = params[i] + step
        hi = loss(probe)
        probe[i] = params[i] - step
        lo = loss(probe)
        if np.isfinite(hi) and np.isfinite(lo):
            numeric[i] = (hi - lo) / (2 * step)
            errors[i] = relative_error(analytic[i], numeric[i])
    return FdReport(errors=errors, numeric=numeric, analytic=analytic)
