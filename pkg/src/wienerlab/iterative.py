"""Gradient-descent restoration with a pluggable prior-gradient function.

Each step applies

    x_{k+1} = x_k - beta * [ K^T (K x_k - y) + exp(alpha) * prior(x_k) ]

where `prior` maps an image to the gradient of a regularizer.  Built-in
priors stand in for learned ones: zero, a Tikhonov kernel bank, and a
smoothed total-variation prior.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergedError, InvalidInputError, NumericError
from .spectral import Psf, as_grid, fft2, ifft2, kernel_spectrum, psf_to_otf
from .wiener import KernelBank

PriorGradient = Callable[[np.ndarray], np.ndarray]

TV_EPS = 1e-3
DIVERGE_FACTOR = 1e6


@dataclass(frozen=True)
class IterConfig:
    steps: int = 10
    beta: float = 0.2
    alpha: float = 0.0

    def __post_init__(self):
        if self.steps < 1:
            raise InvalidInputError("iterate: steps must be >= 1")
        if self.beta <= 0:
            raise InvalidInputError("iterate: beta must be positive")


def zero_prior(x: np.ndarray) -> np.ndarray:
    return np.zeros_like(x)


def tikhonov_prior(bank: KernelBank) -> PriorGradient:
    """Gradient of the half-squared kernel-bank penalty: sum_d G_d^T G_d x.

    With this prior the iteration's fixed point coincides with the
    closed-form Wiener solution for the same bank and alpha.
    """

    def gradient(x: np.ndarray) -> np.ndarray:
        x = as_grid(x, "x")
        xf = fft2(x)
        power = sum(
            np.abs(kernel_spectrum(g, *x.shape)) ** 2 for g in bank.kernels
        )
        return ifft2(power * xf)

    return gradient


def tv_prior(x: np.ndarray, eps: float = TV_EPS) -> np.ndarray:
    """Smoothed total-variation gradient: -div(grad x / sqrt(|grad x|^2 + eps^2))."""
    x = as_grid(x, "x")
    dv = np.roll(x, -1, axis=0) - x
    dh = np.roll(x, -1, axis=1) - x
    mag = np.sqrt(dv**2 + dh**2 + eps**2)
    nv = dv / mag
    nh = dh / mag
    div = (nv - np.roll(nv, 1, axis=0)) + (nh - np.roll(nh, 1, axis=1))
    return -div


def builtin_priors() -> dict[str, object]:
    """Catalog of built-in prior gradients selectable by name."""
    return {"none": zero_prior, "tikhonov": tikhonov_prior, "tv": tv_prior}


@dataclass
class IterTrace:
    """Per-step record of the data-fidelity term (and full objective if known)."""

    fidelity: list
    objective: list | None = None


def iterate(
    y: np.ndarray,
    psf: Psf,
    prior: PriorGradient,
    cfg: IterConfig = IterConfig(),
    bank: KernelBank | None = None,
) -> tuple[np.ndarray, IterTrace]:
    """Run the gradient-descent scheme starting from x_0 = y.

    Passing the bank behind a Tikhonov prior adds the full objective to the
    trace; otherwise only the data-fidelity term is logged, since a general
    prior exposes its gradient but not its value.
    """
    y = as_grid(y, "y")
    otf = psf_to_otf(psf, *y.shape)
    weight = float(np.exp(cfg.alpha))
    y_norm = float(np.linalg.norm(y))

    reg_power = None
    if bank is not None:
        reg_power = sum(np.abs(kernel_spectrum(g, *y.shape)) ** 2 for g in bank.kernels)

    def fidelity(xf):
        return 0.5 * float(np.sum((ifft2(otf * xf) - y) ** 2))

    x = y.copy()
    trace = IterTrace(fidelity=[], objective=None if reg_power is None else [])
    for step in range(1, cfg.steps + 1):
        xf = fft2(x)
        residual = ifft2(otf * xf) - y
        grad = ifft2(np.conj(otf) * fft2(residual)) + weight * prior(x)
        x = x - cfg.beta * grad
        if not np.all(np.isfinite(x)):
            raise NumericError(f"iterate: non-finite values at step {step}")
        if np.linalg.norm(x) > DIVERGE_FACTOR * max(y_norm, 1.0):
            raise DivergedError(f"iterate: diverged at step {step}")
        xf = fft2(x)
        fid = fidelity(xf)
        trace.fidelity.append(fid)
        if reg_power is not None:
            reg = float(np.sum(ifft2(reg_power * xf) * x))
            trace.objective.append(fid + 0.5 * weight * reg)
    return x, trace
