"""Wiener-Kolmogorov deconvolution with learnable regularization kernels."""

from .degrade import DegradeConfig, PsfSpec, degrade, synthesize_psf
from .errors import (
    DivergedError,
    IllPosedPlanError,
    InvalidInputError,
    NumericError,
    WienerlabError,
)
from .estimator import WienerKolmogorovRestorer
from .gradients import BankGradient, fd_check, grad_alpha, grad_bank, grad_input
from .iterative import IterConfig, builtin_priors, iterate
from .metrics import psnr, ssim
from .pipeline import restore, restore_vst
from .spatial_cg import CgConfig, PixelKernelField, apply_G, apply_G_adjoint, solve_sa
from .spectral import Psf, circular_convolve, dct_basis, fft2, ifft2, psf_to_otf
from .training import TrainConfig, TrainPair, loss_l1, train_wfk
from .vst import anscombe, exact_unbiased_inverse
from .wiener import KernelBank, WienerPlan, objective, plan, read_bank, wiener_solve, write_bank

__version__ = "0.1.0"

__all__ = [
    "BankGradient",
    "CgConfig",
    "DegradeConfig",
    "DivergedError",
    "IllPosedPlanError",
    "InvalidInputError",
    "IterConfig",
    "KernelBank",
    "NumericError",
    "PixelKernelField",
    "Psf",
    "PsfSpec",
    "TrainConfig",
    "TrainPair",
    "WienerKolmogorovRestorer",
    "WienerPlan",
    "WienerlabError",
    "anscombe",
    "apply_G",
    "apply_G_adjoint",
    "builtin_priors",
    "circular_convolve",
    "dct_basis",
    "degrade",
    "exact_unbiased_inverse",
    "fd_check",
    "fft2",
    "grad_alpha",
    "grad_bank",
    "grad_input",
    "ifft2",
    "iterate",
    "loss_l1",
    "objective",
    "plan",
    "psf_to_otf",
    "psnr",
    "read_bank",
    "restore",
    "restore_vst",
    "solve_sa",
    "ssim",
    "synthesize_psf",
    "train_wfk",
    "wiener_solve",
    "write_bank",
]
