"""Degradation simulation: parametric PSFs and seeded Gaussian/Poisson noise.

Reproducibility contract: the bit stream comes from a Philox 4x64 counter
generator keyed by the seed, Gaussian variates use the Box-Muller transform,
and Poisson variates use Knuth multiplication below mean 30 and the PTRS
transformed rejection above.  The generator and sampler names are recorded
in dataset manifests so outputs are bit-reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln, j1

from .errors import InvalidInputError
from .spectral import Psf, as_grid, circular_convolve

PRNG_ID = "philox4x64/box-muller/knuth-ptrs"

GAUSSIAN_STD_SET = (0.001, 0.005, 0.01, 0.05, 0.1)
POISSON_PEAK_SET = (1, 2, 5, 10, 25, 50)

_KNUTH_LIMIT = 30.0


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for a (seed, stream) pair."""
    return np.random.Generator(np.random.Philox(key=seed + (stream << 32)))


def gaussian_samples(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normal samples via Box-Muller (one variate per uniform pair)."""
    u1 = 1.0 - rng.random(shape)  # (0, 1]
    u2 = rng.random(shape)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _poisson_knuth(rng, mean, active):
    """Knuth multiplication; draws full-shape uniforms each round for determinism."""
    out = np.zeros(mean.shape, dtype=np.int64)
    limit = np.where(active, np.exp(-mean), -1.0)
    product = np.ones_like(mean)
    pending = active.copy()
    while np.any(pending):
        product = np.where(pending, product * rng.random(mean.shape), product)
        accept = pending & (product <= limit)
        pending &= ~accept
        out[pending] += 1
    return out


def _poisson_ptrs(rng, mean, active):
    """PTRS transformed rejection (Hormann 1993) for means >= 30."""
    out = np.zeros(mean.shape, dtype=np.int64)
    b = 0.931 + 2.53 * np.sqrt(np.maximum(mean, 1.0))
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    log_mean = np.log(np.maximum(mean, 1.0))
    pending = active.copy()
    while np.any(pending):
        u = rng.random(mean.shape) - 0.5
        v = rng.random(mean.shape)
        us = 0.5 - np.abs(u)
        kf = np.floor((2.0 * a / np.maximum(us, 1e-12) + b) * u + mean + 0.43)
        fast = pending & (us >= 0.07) & (v <= v_r) & (kf >= 0)
        out[fast] = kf[fast].astype(np.int64)
        pending &= ~fast
        usable = pending & (kf >= 0) & ((us >= 0.013) | (v <= us))
        with np.errstate(divide="ignore", invalid="ignore"):
            lhs = np.log(v * inv_alpha / (a / np.maximum(us, 1e-12) ** 2 + b))
            rhs = -mean + kf * log_mean - gammaln(kf + 1.0)
        accept = usable & (lhs <= rhs)
        out[accept] = kf[accept].astype(np.int64)
        pending &= ~accept
    return out


def poisson_samples(rng: np.random.Generator, mean: np.ndarray) -> np.ndarray:
    """Poisson samples with per-pixel means (Knuth below 30, PTRS above)."""
    mean = np.asarray(mean, dtype=np.float64)
    if np.any(mean < 0):
        raise InvalidInputError("poisson: negative mean")
    small = mean < _KNUTH_LIMIT
    out = _poisson_knuth(rng, mean, small)
    if np.any(~small):
        out = out + _poisson_ptrs(rng, mean, ~small)
    return out.astype(np.float64)


@dataclass(frozen=True)
class PsfSpec:
    """Parametric PSF family: gaussian(sigma), airy-like(first-zero radius), box."""

    family: str
    size: int
    param: float = 1.0

    def __post_init__(self):
        if self.family not in ("gaussian", "airy-like", "box"):
            raise InvalidInputError(f"psf family must be gaussian|airy-like|box, got {self.family!r}")
        if self.size < 1 or self.size % 2 == 0:
            raise InvalidInputError(f"psf size must be odd and positive, got {self.size}")
        if self.family != "box" and self.param <= 0:
            raise InvalidInputError("psf shape parameter must be positive")

    def label(self) -> str:
        return f"{self.family}:{self.size}:{self.param:g}"

    @staticmethod
    def parse(text: str) -> "PsfSpec":
        parts = text.split(":")
        if len(parts) == 2:
            family, size = parts
            return PsfSpec(family, int(size))
        if len(parts) == 3:
            family, size, param = parts
            return PsfSpec(family, int(size), float(param))
        raise InvalidInputError(f"psf spec must be family:size[:param], got {text!r}")


def synthesize_psf(spec: PsfSpec) -> Psf:
    """Sample the analytic profile, clamp negatives, normalize to unit sum."""
    c = spec.size // 2
    i = np.arange(spec.size) - c
    r2 = i[:, None] ** 2 + i[None, :] ** 2
    if spec.family == "box":
        taps = np.ones((spec.size, spec.size))
    elif spec.family == "gaussian":
        taps = np.exp(-r2 / (2.0 * spec.param**2))
    else:  # airy-like: jinc^2 profile with first zero at radius `param`
        r = np.sqrt(r2) * 3.8317 / spec.param
        taps = np.where(r == 0, 1.0, (2.0 * j1(r) / np.maximum(r, 1e-300)) ** 2)
    taps = np.clip(taps, 0.0, None)
    return Psf(taps / taps.sum())


@dataclass(frozen=True)
class DegradeConfig:
    psf_spec: PsfSpec
    noise: str  # "gaussian" | "poisson"
    std: Optional[float] = None
    peak: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.noise == "gaussian":
            if self.std is None or not 0 <= self.std <= 1:
                raise InvalidInputError("gaussian noise: std must be in [0, 1]")
        elif self.noise == "poisson":
            if self.peak is None or self.peak <= 0:
                raise InvalidInputError("poisson noise: peak must be positive")
        else:
            raise InvalidInputError(f"noise must be gaussian|poisson, got {self.noise!r}")


def degrade(x: np.ndarray, cfg: DegradeConfig, stream: int = 0) -> np.ndarray:
    """Blur and add noise.

    Gaussian: y = K x + n with i.i.d. noise of the configured std.
    Poisson: x is rescaled so its maximum equals the configured peak, blurred,
    and each pixel is drawn from a Poisson law with that mean; the output is
    in count units (not rescaled back).
    """
    x = as_grid(x, "x")
    psf = synthesize_psf(cfg.psf_spec)
    rng = make_rng(cfg.seed, stream)
    if cfg.noise == "gaussian":
        blurred = circular_convolve(x, psf)
        if cfg.std == 0:
            return blurred
        return blurred + cfg.std * gaussian_samples(rng, x.shape)
    if np.any(x < 0):
        raise InvalidInputError("poisson degradation requires a nonnegative image")
    peak_in = x.max()
    scaled = x * (cfg.peak / peak_in) if peak_in > 0 else x
    mean = np.clip(circular_convolve(scaled, psf), 0.0, None)
    return poisson_samples(rng, mean)
