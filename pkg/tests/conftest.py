"""Shared synthetic-image helpers for the test suite."""

import numpy as np

from wienerlab.degrade import make_rng


def smooth_image(rng, n=32):
    """Natural-looking texture: 1/f-filtered noise rescaled to [0, 1]."""
    z = rng.random((n, n))
    f = np.fft.fft2(z - z.mean())
    ky = np.fft.fftfreq(n)[:, None]
    kx = np.fft.fftfreq(n)[None, :]
    img = np.real(np.fft.ifft2(f / (0.02 + np.sqrt(ky**2 + kx**2))))
    return (img - img.min()) / (img.max() - img.min())


def blob_image(rng, n=32, blobs=4):
    """Sparse bright spots on a dark background (fluorescence-like)."""
    img = np.zeros((n, n))
    yy, xx = np.mgrid[0:n, 0:n]
    for _ in range(blobs):
        cy, cx = rng.random(2) * n
        s = 0.8 + 1.2 * rng.random()
        a = 0.4 + 0.6 * rng.random()
        d2 = ((yy - cy + n / 2) % n - n / 2) ** 2 + ((xx - cx + n / 2) % n - n / 2) ** 2
        img += a * np.exp(-d2 / (2 * s * s))
    return np.clip(img, 0.0, 1.0)


def rng_for(seed, stream=0):
    return make_rng(seed, stream)
