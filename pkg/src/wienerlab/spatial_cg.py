"""Spatially-adaptive restoration via matrix-free conjugate gradient.

A per-pixel kernel field defines a non-circulant operator G (a spatially
varying correlation with circular wrap).  The restored image solves

    (K^T K + exp(alpha) G^T G) x = K^T y

which is symmetric positive semidefinite and handled with plain CG.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NumericError
from .spectral import Psf, as_grid, fft2, ifft2, psf_to_otf

FIELD_MAGIC = b"WKFLD1"


@dataclass(frozen=True)
class PixelKernelField:
    """One K x K regularization kernel per pixel."""

    taps: np.ndarray  # (h, w, k, k)

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 4 or taps.shape[2] != taps.shape[3]:
            raise InvalidInputError(f"kernel field: expected shape (h, w, k, k), got {taps.shape}")
        if not np.all(np.isfinite(taps)):
            raise InvalidInputError("kernel field: taps contain NaN or Inf")
        object.__setattr__(self, "taps", taps)

    @property
    def shape(self) -> tuple[int, int]:
        return self.taps.shape[:2]

    @property
    def k(self) -> int:
        return self.taps.shape[2]

    @staticmethod
    def constant(kernel: np.ndarray, h: int, w: int) -> "PixelKernelField":
        kernel = as_grid(kernel, "kernel")
        return PixelKernelField(np.broadcast_to(kernel, (h, w, *kernel.shape)).copy())


def write_field(f: PixelKernelField, path) -> None:
    """Write the WKFLD1 binary format (little-endian f32 taps, pixel-major)."""
    h, w = f.shape
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(struct.pack("<III", h, w, f.k))
        fh.write(f.taps.astype("<f4").tobytes())


def read_field(path) -> PixelKernelField:
    with open(path, "rb") as fh:
        magic = fh.read(6)
        if magic != FIELD_MAGIC:
            raise InvalidInputError(f"{path}: not a WKFLD1 file")
        h, w, k = struct.unpack("<III", fh.read(12))
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != h * w * k * k:
        raise InvalidInputError(f"{path}: expected {h * w * k * k} taps, got {data.size}")
    return PixelKernelField(data.astype(np.float64).reshape(h, w, k, k))


@dataclass(frozen=True)
class CgConfig:
    max_iter: int = 500
    rel_tol: float = 1e-6
    abs_tol: float = 1e-12

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidInputError("cg: max_iter must be >= 1")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise InvalidInputError("cg: tolerances must be positive")


def apply_G(x: np.ndarray, f: PixelKernelField) -> np.ndarray:
    """Spatially varying correlation: out[i,j] = sum_ab field[i,j,a,b] x[i+a-c, j+b-c]."""
    x = as_grid(x, "x")
    if x.shape != f.shape:
        raise InvalidInputError(f"image shape {x.shape} does not match field {f.shape}")
    k = f.k
    c = k // 2
    out = np.zeros_like(x)
    for a in range(k):
        for b in range(k):
            out += f.taps[:, :, a, b] * np.roll(x, (-(a - c), -(b - c)), axis=(0, 1))
    return out


def apply_G_adjoint(r: np.ndarray, f: PixelKernelField) -> np.ndarray:
    """Exact adjoint of `apply_G`: scatter each weighted pixel back to its offsets."""
    r = as_grid(r, "r")
    if r.shape != f.shape:
        raise InvalidInputError(f"image shape {r.shape} does not match field {f.shape}")
    k = f.k
    c = k // 2
    out = np.zeros_like(r)
    for a in range(k):
        for b in range(k):
            out += np.roll(f.taps[:, :, a, b] * r, (a - c, b - c), axis=(0, 1))
    return out


@dataclass
class CgReport:
    """Solver report.

    `residual_history[i]` is the residual norm of the iterate retained after
    step i (the best seen so far), so the history is non-increasing even
    though raw CG residuals may oscillate.
    """

    iterations: int
    residual_norm: float
    residual_history: list = field(default_factory=list)
    converged: bool = True


def solve_sa(
    y: np.ndarray,
    psf: Psf,
    f: PixelKernelField,
    alpha: float = 0.0,
    cfg: CgConfig = CgConfig(),
) -> tuple[np.ndarray, CgReport]:
    """CG solve of the spatially-adaptive normal equations.

    Returns the solution and an iteration report; a run that hits max_iter
    is returned flagged unconverged rather than raised.
    """
    y = as_grid(y, "y")
    if y.shape != f.shape:
        raise InvalidInputError(f"image shape {y.shape} does not match field {f.shape}")
    otf = psf_to_otf(psf, *y.shape)
    weight = float(np.exp(alpha))

    def blur(v):
        return ifft2(otf * fft2(v))

    def blur_adjoint(v):
        return ifft2(np.conj(otf) * fft2(v))

    def operator(v):
        return blur_adjoint(blur(v)) + weight * apply_G_adjoint(apply_G(v, f), f)

    b = blur_adjoint(y)
    b_norm = float(np.linalg.norm(b))
    target = max(cfg.abs_tol, cfg.rel_tol * b_norm)

    x = np.zeros_like(y)
    r = b.copy()
    p = r.copy()
    rs = float(np.sum(r * r))
    best_x, best_res = x, float(np.sqrt(rs))
    history = [best_res]
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        ap = operator(p)
        denom = float(np.sum(p * ap))
        if not np.isfinite(denom) or denom < 0:
            raise NumericError(f"cg: non-finite or negative curvature at iteration {iterations}")
        if denom == 0.0:
            break  # search direction in the operator null space
        step = rs / denom
        x = x + step * p
        r = r - step * ap
        rs_old, rs = rs, float(np.sum(r * r))
        if not np.isfinite(rs):
            raise NumericError(f"cg: residual became non-finite at iteration {iterations}")
        res = float(np.sqrt(rs))
        if res < best_res:
            best_x, best_res = x, res
        history.append(best_res)
        if res <= target:
            break
        p = r + (rs / rs_old) * p
    report = CgReport(
        iterations=iterations,
        residual_norm=best_res,
        residual_history=history,
        converged=best_res <= target,
    )
    return best_x, report
