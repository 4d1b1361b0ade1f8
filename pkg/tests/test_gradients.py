"""Analytic gradients of the closed-form solver against finite differences."""

import numpy as np

from wienerlab import (
    KernelBank,
    Psf,
    fd_check,
    grad_alpha,
    grad_bank,
    grad_input,
    plan,
    wiener_solve,
)

from conftest import rng_for

PSF = Psf(np.full((3, 3), 1.0 / 9.0))


def random_instance(seed, n=12, d=2, k=3, alpha=0.3):
    rng = rng_for(seed)
    y = rng.random((n, n))
    bank = KernelBank(rng.random((d, k, k)) - 0.5, alpha)
    q = rng.random((n, n)) - 0.5
    return y, bank, q


def scalar_loss(y, bank, q, n):
    return float(np.sum(q * wiener_solve(y, plan(PSF, bank, n, n))))


def test_grad_alpha_zero_cases():
    # a zero bank forces a delta PSF so the plan stays well posed
    delta = Psf(np.array([[1.0]]))
    y, _, q = random_instance(0)
    zero_bank = KernelBank.zeros(2, 3, alpha=0.5)
    p = plan(delta, zero_bank, 12, 12)
    assert grad_alpha(y, p, q) == 0.0
    _, bank, _ = random_instance(1)
    p = plan(PSF, bank, 12, 12)
    assert grad_alpha(y, p, np.zeros((12, 12))) == 0.0


def test_grad_alpha_matches_fd():
    y, bank, q = random_instance(2)
    analytic = grad_alpha(y, plan(PSF, bank, 12, 12), q)
    h = 1e-5
    hi = scalar_loss(y, KernelBank(bank.kernels, bank.alpha + h), q, 12)
    lo = scalar_loss(y, KernelBank(bank.kernels, bank.alpha - h), q, 12)
    fd = (hi - lo) / (2 * h)
    assert abs(analytic - fd) < 1e-6 * max(abs(fd), 1e-8)


def test_grad_bank_zero_cases():
    y, bank, q = random_instance(3)
    g = grad_bank(y, plan(PSF, bank, 12, 12), bank, np.zeros((12, 12)))
    assert g.d_alpha == 0.0 and np.abs(g.d_kernels).max() == 0.0
    zero_bank = KernelBank.zeros(2, 3)
    p = plan(Psf(np.array([[1.0]])), zero_bank, 12, 12)
    g = grad_bank(y, p, zero_bank, q)
    assert np.abs(g.d_kernels).max() == 0.0


def test_grad_bank_matches_fd_per_tap():
    y, bank, q = random_instance(4)
    analytic = grad_bank(y, plan(PSF, bank, 12, 12), bank, q)
    h = 1e-5
    for d in range(2):
        for i in range(3):
            for j in range(3):
                for sign, store in ((1, "hi"), (-1, "lo")):
                    taps = bank.kernels.copy()
                    taps[d, i, j] += sign * h
                    val = scalar_loss(y, KernelBank(taps, bank.alpha), q, 12)
                    if store == "hi":
                        hi = val
                    else:
                        lo = val
                fd = (hi - lo) / (2 * h)
                a = analytic.d_kernels[d, i, j]
                assert abs(a - fd) / max(abs(a), abs(fd), 1e-8) < 1e-5


def test_grad_input_identity_case():
    rng = rng_for(5)
    q = rng.random((8, 8))
    p = plan(Psf(np.array([[1.0]])), KernelBank.zeros(1, 3), 8, 8)
    assert np.abs(grad_input(p, q) - q).max() < 1e-10
    assert np.abs(grad_input(p, np.zeros((8, 8)))).max() == 0.0


def test_grad_input_matches_directional_fd():
    y, bank, q = random_instance(6)
    p = plan(PSF, bank, 12, 12)
    g = grad_input(p, q)
    rng = rng_for(7)
    h = 1e-5
    for _ in range(20):
        i, j = int(rng.random() * 12), int(rng.random() * 12)
        yp, ym = y.copy(), y.copy()
        yp[i, j] += h
        ym[i, j] -= h
        fd = (scalar_loss(yp, bank, q, 12) - scalar_loss(ym, bank, q, 12)) / (2 * h)
        assert abs(g[i, j] - fd) / max(abs(g[i, j]), abs(fd), 1e-8) < 1e-6


def test_input_gradient_adjoint_consistency():
    y, bank, q = random_instance(8)
    p = plan(PSF, bank, 12, 12)
    rng = rng_for(9)
    v = rng.random((12, 12)) - 0.5
    h = 1e-6
    jv = (wiener_solve(y + h * v, p) - wiener_solve(y - h * v, p)) / (2 * h)
    lhs = float(np.sum(grad_input(p, q) * v))
    rhs = float(np.sum(q * jv))
    assert abs(lhs - rhs) < 1e-8 * max(abs(lhs), abs(rhs), 1.0)


def test_alpha_lambda_reparametrization():
    # d/d(alpha) = lambda * d/d(lambda) with lambda = e^alpha: scaling the
    # analytic alpha gradient by e^{-alpha} must match the FD in lambda
    y, bank, q = random_instance(10, alpha=0.7)
    analytic = grad_alpha(y, plan(PSF, bank, 12, 12), q)
    lam = np.exp(bank.alpha)
    h = 1e-6 * lam
    hi = scalar_loss(y, KernelBank(bank.kernels, np.log(lam + h)), q, 12)
    lo = scalar_loss(y, KernelBank(bank.kernels, np.log(lam - h)), q, 12)
    d_lambda = (hi - lo) / (2 * h)
    assert abs(analytic - lam * d_lambda) < 1e-8 * max(abs(analytic), 1.0)


def test_fd_check_quadratic():
    rng = rng_for(11)
    p0 = rng.random(6)

    def loss(p):
        return 0.5 * float(np.sum(p * p))

    report = fd_check(loss, p0, p0, step=1e-5)
    assert report.max_relative_error < 1e-9
    assert not report.failed.any()


def test_fd_check_flags_wrong_gradient():
    rng = rng_for(12)
    p0 = rng.random(6) + 0.5

    def loss(p):
        return 0.5 * float(np.sum(p * p))

    report = fd_check(loss, p0, 2.0 * p0, step=1e-5)
    assert abs(report.max_relative_error - 0.5) < 1e-4


def test_fd_check_full_wfk_loss():
    y, bank, q = random_instance(13)
    p = plan(PSF, bank, 12, 12)
    analytic_bank = grad_bank(y, p, bank, q)
    params = np.concatenate(([bank.alpha], bank.kernels.ravel()))
    analytic = np.concatenate(([analytic_bank.d_alpha], analytic_bank.d_kernels.ravel()))

    def loss(pv):
        b = KernelBank(pv[1:].reshape(2, 3, 3), float(pv[0]))
        return scalar_loss(y, b, q, 12)

    report = fd_check(loss, params, analytic, step=1e-5)
    assert report.max_relative_error < 1e-5


def test_gradients_are_real_and_finite():
    for seed in range(5):
        y, bank, q = random_instance(seed + 20, d=3)
        p = plan(PSF, bank, 12, 12)
        g = grad_bank(y, p, bank, q)
        assert np.isfinite(g.d_alpha)
        assert np.all(np.isfinite(g.d_kernels))
        assert np.isrealobj(grad_input(p, q))
