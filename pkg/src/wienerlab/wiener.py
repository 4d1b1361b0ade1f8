"""Closed-form Wiener-Kolmogorov restoration with a learnable kernel bank.

The restored image is

    x_hat = ifft2( conj(OTF) * fft2(y) / (|OTF|^2 + exp(alpha) * sum_d |R_d|^2) )

where R_d is the spectrum of the d-th regularization kernel.  This is the
exact minimizer of

    J(x) = 1/2 ||y - K x||^2 + exp(alpha)/2 * sum_d ||G_d x||^2

under periodic boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IllPosedPlanError, InvalidInputError
from .spectral import (
    Psf,
    as_grid,
    circular_convolve,
    dct_basis,
    fft2,
    ifft2,
    kernel_spectrum,
    psf_to_otf,
)


@dataclass
class KernelBank:
    """D regularization kernels of size K x K plus the log trade-off alpha.

    The trade-off weight is exp(alpha), positive by construction.  Kernels
    are free parameters: no sign or normalization constraint.
    """

    kernels: np.ndarray  # (d, k, k)
    alpha: float = 0.0

    def __post_init__(self):
        kernels = np.asarray(self.kernels, dtype=np.float64)
        if kernels.ndim != 3 or kernels.shape[1] != kernels.shape[2]:
            raise InvalidInputError(f"kernel bank: expected shape (d, k, k), got {kernels.shape}")
        if kernels.shape[0] < 1 or kernels.shape[1] < 1:
            raise InvalidInputError("kernel bank: need d >= 1 and k >= 1")
        if not np.all(np.isfinite(kernels)):
            raise InvalidInputError("kernel bank: kernels contain NaN or Inf")
        if not np.isfinite(self.alpha):
            raise InvalidInputError("kernel bank: alpha must be finite")
        self.kernels = kernels
        self.alpha = float(self.alpha)

    @property
    def d(self) -> int:
        return self.kernels.shape[0]

    @property
    def k(self) -> int:
        return self.kernels.shape[1]

    @property
    def weight(self) -> float:
        return float(np.exp(self.alpha))

    def copy(self) -> "KernelBank":
        return KernelBank(self.kernels.copy(), self.alpha)

    @staticmethod
    def dct(d: int = 8, k: int = 3, alpha: float = 0.0) -> "KernelBank":
        """DCT-initialized bank; d=8, k=3 default, d=24, k=5 for the large variant."""
        return KernelBank(np.stack(dct_basis(k, d)), alpha)

    @staticmethod
    def zeros(d: int, k: int, alpha: float = 0.0) -> "KernelBank":
        return KernelBank(np.zeros((d, k, k)), alpha)


def write_bank(bank: KernelBank, path) -> None:
    """Write a bank in the WKBANK text format (shortest-roundtrip decimals)."""
    lines = ["WKBANK 1", f"{bank.d} {bank.k} {bank.alpha!r}"]
    for kernel in bank.kernels:
        for row in kernel:
            lines.append(" ".join(repr(v) for v in row.tolist()))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_bank(path) -> KernelBank:
    """Read a WKBANK text file."""
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines or lines[0] != "WKBANK 1":
        raise InvalidInputError(f"{path}: not a WKBANK 1 file")
    try:
        d_s, k_s, alpha_s = lines[1].split()
        d, k, alpha = int(d_s), int(k_s), float(alpha_s)
        taps = [[float(v) for v in ln.split()] for ln in lines[2 : 2 + d * k]]
        kernels = np.asarray(taps).reshape(d, k, k)
    except (IndexError, ValueError) as e:
        raise InvalidInputError(f"{path}: malformed WKBANK file: {e}") from e
    if len(lines) != 2 + d * k:
        raise InvalidInputError(f"{path}: expected {d * k} kernel rows, got {len(lines) - 2}")
    return KernelBank(kernels, alpha)


@dataclass(frozen=True)
class WienerPlan:
    """Precomputed spectra for repeated restorations with one (psf, bank, size)."""

    otf: np.ndarray               # spectrum of the blur operator
    reg_spectra: np.ndarray       # (d, h, w) spectra of the regularization kernels
    alpha: float
    denom: np.ndarray = field(init=False)  # |otf|^2 + e^alpha * sum_d |reg|^2

    def __post_init__(self):
        reg_power = np.sum(np.abs(self.reg_spectra) ** 2, axis=0)
        denom = np.abs(self.otf) ** 2 + np.exp(self.alpha) * reg_power
        zero = np.argwhere(denom == 0.0)
        if zero.size:
            i, j = zero[0]
            raise IllPosedPlanError(
                f"blur and all regularization spectra vanish at frequency bin ({i}, {j})"
            )
        object.__setattr__(self, "denom", denom)

    @property
    def shape(self) -> tuple[int, int]:
        return self.otf.shape

    @property
    def reg_power(self) -> np.ndarray:
        """sum_d |reg spectrum|^2, the alpha-sensitive part of the denominator."""
        return np.sum(np.abs(self.reg_spectra) ** 2, axis=0)


def plan(psf: Psf, bank: KernelBank, h: int, w: int) -> WienerPlan:
    """Assemble the Wiener denominator for an h x w grid."""
    otf = psf_to_otf(psf, h, w)
    reg = np.stack([kernel_spectrum(g, h, w) for g in bank.kernels])
    return WienerPlan(otf=otf, reg_spectra=reg, alpha=bank.alpha)


def wiener_solve(y: np.ndarray, p: WienerPlan) -> np.ndarray:
    """One-shot FFT restoration of y under the plan."""
    y = as_grid(y, "y")
    if y.shape != p.shape:
        raise InvalidInputError(f"image shape {y.shape} does not match plan {p.shape}")
    return ifft2(np.conj(p.otf) * fft2(y) / p.denom)


def objective(x: np.ndarray, y: np.ndarray, psf: Psf, bank: KernelBank) -> float:
    """Variational objective J(x) minimized by `wiener_solve`.

    J(x) = 1/2 ||y - K x||^2 + exp(alpha)/2 * sum_d ||G_d x||^2.  The 1/2 on
    the regularizer makes the closed form the exact stationary point of J.
    """
    x = as_grid(x, "x")
    y = as_grid(y, "y")
    if x.shape != y.shape:
        raise InvalidInputError(f"shape mismatch: x {x.shape} vs y {y.shape}")
    residual = y - circular_convolve(x, psf)
    data = 0.5 * float(np.sum(residual**2))
    xf = fft2(x)
    reg = 0.0
    for g in bank.kernels:
        gx = ifft2(kernel_spectrum(g, *x.shape) * xf)
        reg += float(np.sum(gx**2))
    return data + 0.5 * bank.weight * reg
