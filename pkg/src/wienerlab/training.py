"""Supervised training of the kernel bank and alpha with analytic gradients.

The loss is l1 on pixels plus l1 on periodic forward differences; its
subgradient feeds the spectral vector-Jacobian products, and parameters are
updated with a from-scratch Adam.  Runs are deterministic given the seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .degrade import make_rng
from .errors import InvalidInputError
from .gradients import grad_bank
from .metrics import psnr, ssim
from .spectral import Psf, as_grid
from .vst import ANSCOMBE_FLOOR, anscombe, exact_unbiased_inverse, exact_unbiased_inverse_derivative
from .wiener import KernelBank, plan, wiener_solve

ADAM_MAGIC = b"WKADM1"
ALPHA_LIMIT = 50.0


def loss_l1(pred: np.ndarray, truth: np.ndarray, grad_weight: float = 1.0):
    """l1 pixel + gradient loss and its subgradient w.r.t. pred.

    The gradient term uses forward differences with periodic wrap on both
    axes; the l1 subgradient at a tie is 0.
    """
    pred = as_grid(pred, "pred")
    truth = as_grid(truth, "truth")
    if pred.shape != truth.shape:
        raise InvalidInputError(f"loss: shape mismatch {pred.shape} vs {truth.shape}")
    diff = pred - truth
    value = float(np.sum(np.abs(diff)))
    grad = np.sign(diff)
    for axis in (0, 1):
        d = np.roll(diff, -1, axis=axis) - diff
        value += grad_weight * float(np.sum(np.abs(d)))
        s = np.sign(d)
        grad += grad_weight * (np.roll(s, 1, axis=axis) - s)  # adjoint of forward diff
    return value, grad


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 100
    batch: int = 4
    grad_weight: float = 1.0
    seed: int = 0
    vst: bool = False
    patience: Optional[int] = None  # early stop on stalled validation PSNR

    def __post_init__(self):
        if self.lr <= 0:
            raise InvalidInputError("train: lr must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidInputError("train: beta1/beta2 must lie in [0, 1)")
        if self.epochs < 1 or self.batch < 1:
            raise InvalidInputError("train: epochs and batch must be >= 1")


@dataclass
class TrainPair:
    truth: np.ndarray
    degraded: np.ndarray
    psf: Psf
    peak: Optional[float] = None  # count-domain peak, set for the VST pipeline


@dataclass
class AdamState:
    step: int
    m: np.ndarray
    v: np.ndarray

    @staticmethod
    def zeros(n: int) -> "AdamState":
        return AdamState(step=0, m=np.zeros(n), v=np.zeros(n))

    def update(self, params: np.ndarray, grad: np.ndarray, cfg: TrainConfig) -> np.ndarray:
        self.step += 1
        self.m = cfg.beta1 * self.m + (1 - cfg.beta1) * grad
        self.v = cfg.beta2 * self.v + (1 - cfg.beta2) * grad**2
        m_hat = self.m / (1 - cfg.beta1**self.step)
        v_hat = self.v / (1 - cfg.beta2**self.step)
        return params - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


def save_adam_state(state: AdamState, path) -> None:
    """Adam sidecar: magic, u64 step, u32 length, then m and v as f64 LE."""
    n = state.m.size
    blob = ADAM_MAGIC + struct.pack("<QI", state.step, n)
    blob += state.m.astype("<f8").tobytes() + state.v.astype("<f8").tobytes()
    with open(path, "wb") as f:
        f.write(blob)


def load_adam_state(path) -> AdamState:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(ADAM_MAGIC):
        raise InvalidInputError(f"{path}: not a WKADM1 file")
    step, n = struct.unpack("<QI", data[6:18])
    body = np.frombuffer(data, dtype="<f8", offset=18)
    if body.size != 2 * n:
        raise InvalidInputError(f"{path}: expected {2 * n} values, got {body.size}")
    return AdamState(step=step, m=body[:n].copy(), v=body[n:].copy())


def _pack(bank: KernelBank) -> np.ndarray:
    return np.concatenate(([bank.alpha], bank.kernels.ravel()))


def _unpack(params: np.ndarray, d: int, k: int) -> KernelBank:
    alpha = float(np.clip(params[0], -ALPHA_LIMIT, ALPHA_LIMIT))
    return KernelBank(params[1:].reshape(d, k, k), alpha)


def _pair_loss_and_grad(pair: TrainPair, bank: KernelBank, cfg: TrainConfig):
    """Forward restore, l1 loss, and the packed parameter gradient for one pair."""
    if cfg.vst:
        if pair.peak is None:
            raise InvalidInputError("vst training requires the pair's peak intensity")
        y = anscombe(pair.degraded)
    else:
        y = pair.degraded
    p = plan(pair.psf, bank, *y.shape)
    x_hat = wiener_solve(y, p)
    if cfg.vst:
        clamped = np.maximum(x_hat, ANSCOMBE_FLOOR)
        pred = exact_unbiased_inverse(clamped) / pair.peak
        value, upstream = loss_l1(pred, pair.truth, cfg.grad_weight)
        # Chain through the element-wise inverse; zero where the clamp binds.
        upstream = upstream * exact_unbiased_inverse_derivative(clamped) / pair.peak
        upstream = np.where(x_hat >= ANSCOMBE_FLOOR, upstream, 0.0)
    else:
        value, upstream = loss_l1(x_hat, pair.truth, cfg.grad_weight)
    g = grad_bank(y, p, bank, upstream)
    return value, np.concatenate(([g.d_alpha], g.d_kernels.ravel()))


def evaluate(pairs: Sequence[TrainPair], bank: KernelBank, vst: bool = False):
    """Mean PSNR/SSIM of restorations against ground truth."""
    from . import pipeline  # noqa: PLC0415  (avoid import cycle)

    psnrs, ssims = [], []
    for pair in pairs:
        if vst:
            pred = pipeline.restore_vst(pair.degraded, pair.psf, bank, pair.peak)
        else:
            pred = pipeline.restore(pair.degraded, pair.psf, bank)
        psnrs.append(psnr(pred, pair.truth))
        ssims.append(ssim(pred, pair.truth))
    finite = [p for p in psnrs if np.isfinite(p)]
    return (float(np.mean(finite)) if finite else float("inf"), float(np.mean(ssims)))


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)  # dicts: epoch, train_loss, val_psnr, val_ssim
    aborted: bool = False
    adam: Optional[AdamState] = None


def train_wfk(
    pairs: Sequence[TrainPair],
    init: KernelBank,
    cfg: TrainConfig,
    val_pairs: Sequence[TrainPair] = (),
) -> tuple[KernelBank, TrainHistory]:
    """Adam-train the bank on (truth, degraded, psf) pairs.

    A NaN loss aborts the run and returns the last good parameters.  Skips
    pairs whose shapes are inconsistent, failing only if all are skipped.
    """
    usable = [p for p in pairs if p.truth.shape == p.degraded.shape]
    if not usable:
        raise InvalidInputError("train: no usable pairs")
    rng = make_rng(cfg.seed, stream=3)
    params = _pack(init)
    adam = AdamState.zeros(params.size)
    history = TrainHistory()
    bank = _unpack(params, init.d, init.k)

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(usable))
        losses = []
        for start in range(0, len(order), cfg.batch):
            batch = [usable[i] for i in order[start : start + cfg.batch]]
            grads = np.zeros_like(params)
            batch_losses = []
            for pair in batch:
                value, grad = _pair_loss_and_grad(pair, bank, cfg)
                batch_losses.append(value)
                grads += grad
            if not np.all(np.isfinite(grads)) or not np.all(np.isfinite(batch_losses)):
                history.aborted = True
                history.adam = adam
                return bank, history
            losses.extend(batch_losses)
            params = adam.update(params, grads / len(batch), cfg)
            bank = _unpack(params, init.d, init.k)
        entry = {"epoch": epoch, "train_loss": float(np.mean(losses))}
        if val_pairs:
            entry["val_psnr"], entry["val_ssim"] = evaluate(val_pairs, bank, cfg.vst)
        history.epochs.append(entry)
        if cfg.patience and val_pairs and len(history.epochs) > cfg.patience:
            recent = [e["val_psnr"] for e in history.epochs[-cfg.patience :]]
            best_before = max(e["val_psnr"] for e in history.epochs[: -cfg.patience])
            if max(recent) <= best_before:
                break
    history.adam = adam
    return bank, history
