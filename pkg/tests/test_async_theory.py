import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad, IntegrationWarning

from epps.errors import DataError
from epps.kernels import CorrelationModel, ModelPair, sync_covariance, sync_rho
from epps.async_theory import (AsyncKernel, lorentz_kernel, discrete_kernel,
                               async_cross_corr, async_covariance,
                               async_covariance_quad, async_variance,
                               async_autocorr, async_rho)

warnings.filterwarnings("ignore", category=IntegrationWarning)


def test_lorentz_kernel_basics():
    k = AsyncKernel(0.5, 2.0)
    assert lorentz_kernel(k, 0.0) == pytest.approx(1.0)
    w = np.linspace(0.1, 20, 40)
    assert np.all(np.abs(lorentz_kernel(k, w)) <= 1.0)
    # swapping the assets conjugates the kernel
    np.testing.assert_allclose(lorentz_kernel(k.swapped(), w),
                               np.conj(lorentz_kernel(k, w)), rtol=1e-14)


def test_smoothed_cross_corr_has_unit_mass():
    k = AsyncKernel(0.7, 0.15)
    m = CorrelationModel(delta_weight=1.0, lag=2.0)
    mass = quad(lambda t: async_cross_corr(m, k, t), -80, 200, limit=800,
                points=[2.0])[0]
    assert mass == pytest.approx(1.0, rel=1e-8)


def test_cross_corr_asymmetry_direction():
    # the slowly sampled asset appears to trail the fast one: more mass at
    # positive lags when lambda_i > lambda_j
    k = AsyncKernel(1.0, 0.05)
    m = CorrelationModel(delta_weight=0.5)
    pos = quad(lambda t: async_cross_corr(m, k, t), 0, 300, limit=400)[0]
    neg = quad(lambda t: async_cross_corr(m, k, t), -300, 0, limit=400)[0]
    assert pos > 10 * neg > 0


def test_cross_corr_synchronous_limit():
    k = AsyncKernel(math.inf, math.inf)
    m = CorrelationModel(width=4.0, exp_weight=0.8, lag=1.0)
    tau = np.array([-3.0, 0.0, 1.0, 6.0])
    np.testing.assert_allclose(async_cross_corr(m, k, tau),
                               0.8 * np.exp(-np.abs(tau - 1.0) / 4.0) / 8.0)


CASES = [
    # (dt, tau, xi, li, lj)
    (2.0, 1.0, 5.0, 0.3, 0.8),
    (8.0, 3.0, 5.0, 0.2, 0.2),
    (1.0, 4.0, 2.0, 0.5, 1.5),     # dt < tau branch
    (10.0, -6.0, 3.0, 0.4, 0.9),   # negative lag
    (5.0, 2.0, 10.0, 0.1, 0.1),    # lambda xi = 1 exactly
    (5.0, 2.0, 10.0, 0.09, 0.11),  # lambda xi = 0.9 / 1.1
    (20.0, 0.0, 8.0, 2.0, 0.05),
]


@pytest.mark.parametrize("dt,tau,xi,li,lj", CASES)
def test_async_covariance_matches_quadrature(dt, tau, xi, li, lj):
    m = CorrelationModel(lag=tau, width=xi, exp_weight=0.6)
    k = AsyncKernel(li, lj)
    closed = async_covariance(m, k, dt)
    oracle = async_covariance_quad(m, k, dt)
    assert closed == pytest.approx(oracle, rel=2e-7, abs=1e-12)


def test_async_covariance_delta_kernel_against_time_domain_integral():
    # smoothing makes the lagged delta regular, so the increment covariance
    # equals the triangle-windowed integral of the smoothed correlation
    m = CorrelationModel(delta_weight=0.5, lag=3.0)
    k = AsyncKernel(1.0, 0.2)
    for dt in (0.5, 3.0, 12.0):
        pts = [p for p in (0.0, m.lag, -m.lag) if -dt < p < dt]
        oracle = quad(lambda s: (dt - abs(s)) * async_cross_corr(m, k, s),
                      -dt, dt, points=pts or None, limit=400)[0]
        assert async_covariance(m, k, dt) == pytest.approx(oracle, rel=1e-8)


def test_async_covariance_continuous_across_branch_point():
    m = CorrelationModel(lag=4.0, width=3.0, exp_weight=1.0)
    k = AsyncKernel(0.7, 0.3)
    eps = 1e-7
    below = async_covariance(m, k, 4.0 - eps)
    above = async_covariance(m, k, 4.0 + eps)
    assert below == pytest.approx(above, rel=1e-5)


def test_async_covariance_continuous_across_singular_band():
    # the high-precision branch takes over near lambda xi = 1; values must
    # join smoothly with the plain closed form
    xi = 5.0
    k_edge = 1.0 + 1.001e-3   # just outside the band
    k_in = 1.0 + 0.999e-3     # just inside
    m = CorrelationModel(lag=1.0, width=xi, exp_weight=1.0)
    out = async_covariance(m, AsyncKernel(k_edge / xi, 0.4), 6.0)
    inside = async_covariance(m, AsyncKernel(k_in / xi, 0.4), 6.0)
    assert out == pytest.approx(inside, rel=1e-6)


def test_async_covariance_one_infinite_rate():
    m = CorrelationModel(lag=2.0, width=4.0, exp_weight=0.7)
    k = AsyncKernel(math.inf, 0.5)
    for dt in (1.0, 5.0):
        assert async_covariance(m, k, dt) == pytest.approx(
            async_covariance_quad(m, k, dt), rel=1e-6)


def test_async_covariance_suppresses_and_recovers():
    m = CorrelationModel(delta_weight=0.5)
    sync = sync_covariance(m, 10.0)
    sampled = async_covariance(m, AsyncKernel(0.5, 0.5), 10.0)
    nearly_sync = async_covariance(m, AsyncKernel(200.0, 200.0), 10.0)
    assert sampled < sync
    assert nearly_sync == pytest.approx(sync, rel=1e-2)


def test_flat_spectrum_variance_is_unchanged():
    m = CorrelationModel(delta_weight=1.3)
    dt = np.array([0.5, 2.0, 40.0])
    for lam in (0.1, 1.0, 10.0):
        np.testing.assert_allclose(async_variance(m, lam, dt), 1.3 * dt,
                                   rtol=1e-12)


def test_async_variance_consistent_with_autocorr():
    # integrating the sampled autocorrelation against the triangle window
    # must reproduce the sampled variance
    m = CorrelationModel(delta_weight=1.0, width=6.0, exp_weight=0.8)
    lam = 0.4
    delta_w, _ = async_autocorr(m, lam, 0.0)
    for dt in (1.0, 5.0, 20.0):
        reg = quad(lambda s: (dt - abs(s)) * async_autocorr(m, lam, s)[1],
                   -dt, dt, limit=400)[0]
        assert async_variance(m, lam, dt) == pytest.approx(
            delta_w * dt + reg, rel=1e-9)


def test_async_autocorr_regular_part_vanishes_at_zero():
    m = CorrelationModel(delta_weight=1.0, width=6.0, exp_weight=-0.5)
    for lam in (0.2, 1.0 / 6.0):  # includes lambda xi = 1
        delta_w, reg0 = async_autocorr(m, lam, 0.0)
        assert reg0 == 0.0
        assert delta_w == pytest.approx(1.0 - 0.5 / (1.0 + lam * 6.0))


def test_async_rho_monotone_for_brownian_pair():
    pair = ModelPair(cross=CorrelationModel(delta_weight=0.5),
                     auto_i=CorrelationModel(delta_weight=1.0),
                     auto_j=CorrelationModel(delta_weight=1.0))
    k = AsyncKernel(1.0, 1.0)
    dt = np.array([0.5, 1.0, 5.0, 20.0, 200.0])
    rho = async_rho(pair, k, dt)
    assert np.all(np.diff(rho) > 0)
    assert rho[-1] == pytest.approx(0.5, abs=5e-3)
    # printed equal-rate closed form
    lam = 1.0
    expected = 0.5 * (1.0 + np.expm1(-lam * dt) / (lam * dt))
    np.testing.assert_allclose(rho, expected, rtol=1e-12)


def test_async_rho_synchronous_kernel_matches_sync_rho():
    pair = ModelPair(cross=CorrelationModel(width=4.0, exp_weight=0.3),
                     auto_i=CorrelationModel(delta_weight=1.0),
                     auto_j=CorrelationModel(delta_weight=1.0))
    dt = np.array([1.0, 10.0])
    np.testing.assert_allclose(
        async_rho(pair, AsyncKernel(math.inf, math.inf), dt),
        sync_rho(pair, dt), rtol=1e-14)


def test_discrete_kernel_continuum_limit():
    li, lj = 0.3, 0.08
    T = 200000
    n = 40
    omega = 2.0 * math.pi * n / T
    step = 0.01  # rates per step Lambda = lambda * step, frequency scaled too
    approx = discrete_kernel(li * step, lj * step, n, T)
    exact = lorentz_kernel(AsyncKernel(li, lj), omega / step)
    assert approx == pytest.approx(exact, rel=5e-3)


def test_discrete_kernel_unit_at_zero_and_hermitian():
    T = 64
    k = discrete_kernel(0.3, 0.9, np.arange(T), T)
    assert k[0] == pytest.approx(1.0)
    np.testing.assert_allclose(k[1:][::-1], np.conj(k[1:]), rtol=1e-12)


def test_rate_validation():
    with pytest.raises(DataError):
        async_variance(CorrelationModel(delta_weight=1.0), -1.0, 1.0)
    with pytest.raises(DataError):
        discrete_kernel(0.0, 1.0, 0, 16)
    with pytest.raises(DataError):
        async_covariance(CorrelationModel(delta_weight=1.0),
                         AsyncKernel(1.0, 1.0), -2.0)
