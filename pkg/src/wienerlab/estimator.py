"""Scikit-learn style front end for the trainable Wiener-Kolmogorov filter.

`WienerKolmogorovRestorer` is a transformer: `fit` learns the kernel bank
and trade-off exponent from (degraded, ground-truth) image pairs, and
`transform` restores degraded images.  It composes with sklearn pipelines
and `get_params`/`set_params` tooling; the heavy lifting lives in the
functional modules.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import pipeline
from .errors import InvalidInputError
from .spectral import Psf, as_grid
from .training import TrainConfig, TrainPair, train_wfk
from .wiener import KernelBank


class WienerKolmogorovRestorer(BaseEstimator, TransformerMixin):
    """Image deconvolver with a learnable Tikhonov kernel bank.

    Parameters mirror the training configuration; `psf` is the blur kernel
    (2-D array with unit sum) shared by all images unless per-image PSFs are
    passed to `fit`/`transform`.
    """

    def __init__(
        self,
        psf=None,
        d: int = 8,
        k: int = 3,
        alpha: float = 0.0,
        lr: float = 1e-3,
        epochs: int = 100,
        batch: int = 4,
        grad_weight: float = 1.0,
        vst: bool = False,
        seed: int = 0,
    ):
        self.psf = psf
        self.d = d
        self.k = k
        self.alpha = alpha
        self.lr = lr
        self.epochs = epochs
        self.batch = batch
        self.grad_weight = grad_weight
        self.vst = vst
        self.seed = seed

    def _psf(self, override=None) -> Psf:
        taps = override if override is not None else self.psf
        if taps is None:
            raise InvalidInputError("no PSF given: set the psf parameter or pass psfs=...")
        return taps if isinstance(taps, Psf) else Psf(np.asarray(taps, dtype=np.float64))

    def _pairs(self, X, y, psfs, peaks) -> list[TrainPair]:
        X = [as_grid(img, "X") for img in X]
        y = [as_grid(img, "y") for img in y]
        if len(X) != len(y):
            raise InvalidInputError(f"got {len(X)} degraded images but {len(y)} ground truths")
        psfs = [self._psf()] * len(X) if psfs is None else [self._psf(p) for p in psfs]
        peaks = [None] * len(X) if peaks is None else list(peaks)
        return [
            TrainPair(truth=t, degraded=d_, psf=p, peak=pk)
            for t, d_, p, pk in zip(y, X, psfs, peaks)
        ]

    def fit(self, X, y, psfs=None, peaks=None):
        """Learn the bank from degraded images X and ground truths y."""
        cfg = TrainConfig(
            lr=self.lr,
            epochs=self.epochs,
            batch=self.batch,
            grad_weight=self.grad_weight,
            seed=self.seed,
            vst=self.vst,
        )
        init = KernelBank.dct(self.d, self.k, self.alpha)
        self.bank_, self.history_ = train_wfk(self._pairs(X, y, psfs, peaks), init, cfg)
        return self

    def transform(self, X, psfs=None, peaks=None):
        """Restore each degraded image; returns a list of arrays."""
        if not hasattr(self, "bank_"):
            raise NotFittedError("call fit before transform")
        X = [as_grid(img, "X") for img in X]
        psfs = [self._psf()] * len(X) if psfs is None else [self._psf(p) for p in psfs]
        peaks = [None] * len(X) if peaks is None else list(peaks)
        out = []
        for img, p, pk in zip(X, psfs, peaks):
            if self.vst:
                out.append(pipeline.restore_vst(img, p, self.bank_, pk))
            else:
                out.append(pipeline.restore(img, p, self.bank_))
        return out

    def fit_transform(self, X, y=None, **kwargs):
        return self.fit(X, y, **kwargs).transform(X, **kwargs)
