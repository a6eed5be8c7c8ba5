"""Closed-form predictions for Poisson-sampled, previous-tick processes.

Exponential waiting times act on the synchronous spectrum as a multiplicative
low-pass factor

    K(omega) = lambda_i lambda_j / ((lambda_i + i omega)(lambda_j - i omega)),

equivalently as a two-sided exponential smoothing of the lagged correlation in
real space.  Covariances of the sampled process follow by residue integration;
variances acquire an additive correction instead.  Rates may be numpy.inf,
which reduces every formula to its synchronous counterpart.

Sign convention (see kernels module): c(tau) = <dX_i(t) dX_j(t + tau)>.  With
this choice the slow decay side of the smoothing kernel sits at positive tau
when asset i is sampled faster than asset j, i.e. the fast asset appears to
lead the slow one.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.integrate import quad

from .errors import DataError, NumericalError
from .kernels import CorrelationModel, sync_covariance, spectrum_eval, _as_models
from ._numutil import expm1_over_x, triangle_onesided_exp_integral

#: relative distance of lambda*xi from 1 below which the residue formulas are
#: evaluated in high precision (the v = lambda*xi - 1 singularity is removable
#: but cancels catastrophically in double precision).
_SINGULAR_BAND = 1e-3


@dataclass(frozen=True)
class AsyncKernel:
    """Pair of Poisson sampling rates (1/seconds); numpy.inf = synchronous."""

    lambda_i: float
    lambda_j: float

    def __post_init__(self):
        for name in ("lambda_i", "lambda_j"):
            lam = getattr(self, name)
            if math.isnan(lam) or lam <= 0:
                raise DataError(f"AsyncKernel.{name} must be > 0")

    @property
    def synchronous(self):
        return math.isinf(self.lambda_i) and math.isinf(self.lambda_j)

    def swapped(self):
        return AsyncKernel(self.lambda_j, self.lambda_i)


def lorentz_kernel(k, omega):
    """Spectral suppression factor K(omega); K(0) = 1 and |K| <= 1."""
    omega = np.asarray(omega, dtype=float)
    fi = 1.0 if math.isinf(k.lambda_i) else 1.0 / (1.0 + 1j * omega / k.lambda_i)
    fj = 1.0 if math.isinf(k.lambda_j) else 1.0 / (1.0 - 1j * omega / k.lambda_j)
    return np.asarray(fi * fj, dtype=complex)


def _rate_prefactor(li, lj):
    # lambda_i lambda_j / (lambda_i + lambda_j), with infinite-rate limits
    if math.isinf(li) and math.isinf(lj):
        return math.inf
    if math.isinf(li):
        return lj
    if math.isinf(lj):
        return li
    return li * lj / (li + lj)


def _smoothing_weight(k, s):
    """Real-space sampling kernel: integrates to 1, decays at rate lambda_j on
    the positive side and lambda_i on the negative side."""
    r = _rate_prefactor(k.lambda_i, k.lambda_j)
    s = np.asarray(s, dtype=float)
    pos = np.zeros_like(s)
    if not math.isinf(k.lambda_j):
        pos = np.where(s >= 0, r * np.exp(-k.lambda_j * np.where(s >= 0, s, 0.0)), 0.0)
    neg = np.zeros_like(s)
    if not math.isinf(k.lambda_i):
        neg = np.where(s < 0, r * np.exp(k.lambda_i * np.where(s < 0, s, 0.0)), 0.0)
    return pos + neg


def _onesided_exp_conv(t, lam, xi):
    """integral_0^inf exp(-lam s) g(t - s) ds with g(u) = exp(-|u|/xi)/(2 xi).

    Stable at lam*xi = 1 (the 1/(1 - lam xi) pole is removable).
    """
    t = np.asarray(t, dtype=float)
    if math.isinf(lam):
        return np.zeros_like(t)
    neg = t <= 0
    out = np.empty_like(t)
    out[neg] = np.exp(t[neg] / xi) / (2.0 * (1.0 + lam * xi))
    tp = t[~neg]
    d = 1.0 / xi - lam
    # (exp(-lam t) - exp(-t/xi)) / (2 (1 - lam xi)) written via expm1 for d -> 0
    mid = np.exp(-tp / xi) * tp * expm1_over_x(d * tp) / (2.0 * xi)
    out[~neg] = np.exp(-lam * tp) / (2.0 * (1.0 + lam * xi)) + mid
    return out


def async_cross_corr(model, k, tau):
    """Lagged correlation density of the sampled pair at lag tau.

    Convolution of the synchronous kernel with the sampling weight; exact
    closed form for delta and exponential components.  Delta components become
    regular (one/two-sided exponential bumps); with both rates infinite the
    synchronous regular part is returned and any delta component stays a delta.
    """
    scalar = np.isscalar(tau)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.zeros_like(tau)
    r = _rate_prefactor(k.lambda_i, k.lambda_j)
    for m in _as_models(model):
        s = tau - m.lag
        if k.synchronous:
            if m.width > 0.0:
                out += m.exp_weight * np.exp(-np.abs(s) / m.width) / (2.0 * m.width)
            continue
        wd = m.total_delta_weight
        if wd != 0.0:
            out += wd * _smoothing_weight(k, s)
        if m.width > 0.0 and m.exp_weight != 0.0:
            out += m.exp_weight * r * (
                _onesided_exp_conv(s, k.lambda_j, m.width)
                + _onesided_exp_conv(-s, k.lambda_i, m.width))
    return out[0] if scalar else out


# -- covariance of the sampled pair --------------------------------------------

def _residue_covariance(dt, tau, xi, li, lj):
    """Residue closed form for the unit-mass lag+exponential cross kernel.

    Split at dt = tau; the coefficients u = 1 + lambda xi and v = -1 + lambda xi
    appear in the denominators (v = 0 is a removable singularity handled by the
    high-precision path below).  Requires tau >= 0 and xi > 0.
    """
    ui, vi = 1.0 + li * xi, -1.0 + li * xi
    uj, vj = 1.0 + lj * xi, -1.0 + lj * xi
    e = math.exp
    if dt >= tau:
        return (dt - tau + 1.0 / li - 1.0 / lj
                + li * lj * xi ** 3 * (e(-(dt - tau) / xi) / (2 * ui * vj)
                                       - e(-tau / xi) / (vi * uj)
                                       + e(-(dt + tau) / xi) / (2 * vi * uj))
                + (lj * e(-li * tau) / (li * (li + lj) * ui * vi))
                * (2.0 - e(-li * dt))
                - li * e(-lj * (dt - tau)) / (lj * (li + lj) * uj * vj))
    # exp(-tau) * (cosh(dt) - 1) expanded so no factor overflows when the
    # decay rate is large (the products are always <= exp(-(tau - dt)))
    return (li * lj * xi ** 3 / (vi * uj)
            * ((e(-(tau - dt) / xi) + e(-(tau + dt) / xi)) / 2.0
               - e(-tau / xi))
            + (2.0 * lj / (li * (li + lj) * ui * vi))
            * (e(-li * tau)
               - (e(-li * (tau - dt)) + e(-li * (tau + dt))) / 2.0))


def _residue_covariance_mp(dt, tau, xi, li, lj):
    """High-precision evaluation near the removable v = 0 singularity."""
    import mpmath as mp

    with mp.workdps(60):
        dt_, tau_, xi_ = mp.mpf(dt), mp.mpf(tau), mp.mpf(xi)
        vals = []
        eps = mp.mpf("1e-18")
        for si in (1, -1):
            for sj in (1, -1):
                li_ = mp.mpf(li) * (1 + si * eps)
                lj_ = mp.mpf(lj) * (1 + sj * eps)
                ui, vi = 1 + li_ * xi_, -1 + li_ * xi_
                uj, vj = 1 + lj_ * xi_, -1 + lj_ * xi_
                if dt >= tau:
                    v = (dt_ - tau_ + 1 / li_ - 1 / lj_
                         + li_ * lj_ * xi_ ** 3 * (
                             mp.e ** (-(dt_ - tau_) / xi_) / (2 * ui * vj)
                             - mp.e ** (-tau_ / xi_) / (vi * uj)
                             + mp.e ** (-(dt_ + tau_) / xi_) / (2 * vi * uj))
                         + (lj_ * mp.e ** (-li_ * tau_)
                            / (li_ * (li_ + lj_) * ui * vi))
                         * (2 - mp.e ** (-li_ * dt_))
                         - li_ * mp.e ** (-lj_ * (dt_ - tau_))
                         / (lj_ * (li_ + lj_) * uj * vj))
                else:
                    v = (li_ * lj_ * xi_ ** 3 * mp.e ** (-tau_ / xi_) / (vi * uj)
                         * (mp.cosh(dt_ / xi_) - 1)
                         + (2 * lj_ * mp.e ** (-li_ * tau_)
                            / (li_ * (li_ + lj_) * ui * vi))
                         * (1 - mp.cosh(li_ * dt_)))
                vals.append(v)
        return float(sum(vals) / len(vals))


_INF_RATE_FACTOR = 1e8  # finite stand-in for a synchronous leg, as lambda*xi


def _exp_component_cov(dt, tau, xi, li, lj):
    if tau < 0:
        tau, li, lj = -tau, lj, li
    if math.isinf(li):
        li = _INF_RATE_FACTOR / xi
    if math.isinf(lj):
        lj = _INF_RATE_FACTOR / xi
    if min(abs(li * xi - 1.0), abs(lj * xi - 1.0)) < _SINGULAR_BAND:
        return _residue_covariance_mp(dt, tau, xi, li, lj)
    return _residue_covariance(dt, tau, xi, li, lj)


def async_covariance(model, k, dt):
    """Covariance of dt-horizon increments of the sampled pair.

    Exact closed forms for the delta and lag+exponential kernel families;
    continuous across dt = |lag| and across lambda*xi = 1.
    """
    scalar = np.isscalar(dt)
    dt = np.atleast_1d(np.asarray(dt, dtype=float))
    if np.any(dt < 0):
        raise DataError("async_covariance requires dt >= 0")
    if k.synchronous:
        out = sync_covariance(model, dt)
        return out if not scalar else float(out)
    out = np.zeros_like(dt)
    r = _rate_prefactor(k.lambda_i, k.lambda_j)
    for m in _as_models(model):
        wd = m.total_delta_weight
        if wd != 0.0:
            out += wd * np.array([
                triangle_onesided_exp_integral(
                    d, m.lag, k.lambda_i, k.lambda_j, r)
                for d in dt])
        if m.width > 0.0 and m.exp_weight != 0.0:
            out += m.exp_weight * np.array([
                _exp_component_cov(d, m.lag, m.width, k.lambda_i, k.lambda_j)
                for d in dt])
    return out[0] if scalar else out


def async_covariance_quad(model, k, dt, omega_max=None):
    """Frequency-domain quadrature of the sampled covariance integral.

    Integrates Re[S(omega) K(omega)] * 2(1 - cos(omega dt)) / omega^2 over
    omega > 0.  Serves as the generic-kernel fallback and as an independent
    cross-check of the residue formulas; the integrand decays like omega^-4
    beyond the cutoff, which defaults to 50 * max(rates, 1/width, 1/dt).
    """
    if dt < 0:
        raise DataError("async_covariance_quad requires dt >= 0")
    if dt == 0.0:
        return 0.0
    scales = [1.0 / dt]
    for m in _as_models(model):
        if m.width > 0:
            scales.append(1.0 / m.width)
    for lam in (k.lambda_i, k.lambda_j):
        if not math.isinf(lam):
            scales.append(lam)
    if omega_max is None:
        omega_max = 50.0 * max(scales)

    def integrand(w):
        sk = spectrum_eval(model, w) * lorentz_kernel(k, w)
        return float(np.real(sk)) * 2.0 * (1.0 - math.cos(w * dt)) / (w * w)

    total = 0.0
    edges = np.geomspace(1e-9 / dt, omega_max, 12)
    lo = 0.0
    for hi in edges:
        val, _ = quad(integrand, lo, hi, limit=400,
                      epsabs=1e-12, epsrel=1e-10)
        total += val
        lo = hi
    return total / math.pi


# -- variance of the sampled process -------------------------------------------

def _damped_kernel(model_a, model_b_weight, xi, lam, t):
    """Fourier antitransform at |t| of S(omega) / (1 + omega^2/lambda^2)."""
    t = np.abs(np.asarray(t, dtype=float))
    out = model_a * (lam / 2.0) * np.exp(-lam * t)
    if xi > 0.0 and model_b_weight != 0.0:
        d = 1.0 / xi - lam
        out = out + (model_b_weight * lam / (2.0 * xi * (1.0 + lam * xi))) * (
            np.exp(-t / xi) * (t * expm1_over_x(d * t) + xi))
    return out


def async_variance(model, lam, dt):
    """Variance of dt-increments of a sampled process with auto kernel `model`.

    Adds to the synchronous variance the correction
    (2/lambda^2) (cbar(dt) - exp(-lambda dt) cbar(0)) where cbar is the
    antitransform of the damped spectrum; the correction vanishes identically
    for a flat spectrum (linear variance is preserved by the sampling).
    """
    scalar = np.isscalar(dt)
    dt = np.atleast_1d(np.asarray(dt, dtype=float))
    if np.any(dt < 0):
        raise DataError("async_variance requires dt >= 0")
    if math.isnan(lam) or lam <= 0:
        raise DataError("sampling rate must be > 0")
    out = sync_covariance(model, dt)
    if not math.isinf(lam):
        for m in _as_models(model):
            if m.lag != 0.0:
                raise DataError("async_variance requires an auto kernel (lag = 0)")
            a = m.total_delta_weight
            b = m.exp_weight if m.width > 0.0 else 0.0
            cbar = _damped_kernel(a, b, m.width, lam, dt)
            cbar0 = _damped_kernel(a, b, m.width, lam, 0.0)
            out = out + (2.0 / lam ** 2) * (cbar - np.exp(-lam * dt) * cbar0)
    return out[0] if scalar else out


def async_autocorr(model, lam, tau):
    """Auto-correlation of the sampled process: (delta weight, regular part).

    The delta mass is a + b/(1 + lambda xi); the regular part vanishes at
    tau = 0 and is stable across lambda*xi = 1.
    """
    scalar = np.isscalar(tau)
    tau = np.abs(np.atleast_1d(np.asarray(tau, dtype=float)))
    if math.isnan(lam) or lam <= 0:
        raise DataError("sampling rate must be > 0")
    delta_w = 0.0
    regular = np.zeros_like(tau)
    for m in _as_models(model):
        if m.lag != 0.0:
            raise DataError("async_autocorr requires an auto kernel (lag = 0)")
        a = m.total_delta_weight
        b = m.exp_weight if m.width > 0.0 else 0.0
        if math.isinf(lam):
            delta_w += a
            if b != 0.0:
                regular += b * np.exp(-tau / m.width) / (2.0 * m.width)
            continue
        delta_w += a + b / (1.0 + lam * m.width)
        if b != 0.0:
            d = lam - 1.0 / m.width
            regular += b * (lam ** 2 * tau / (2.0 * (1.0 + lam * m.width))) * (
                np.exp(-lam * tau) * expm1_over_x(d * tau))
    return (delta_w, regular[0] if scalar else regular)


def async_rho(pair, k, dt):
    """Pearson correlation of dt-increments of the sampled pair."""
    scalar = np.isscalar(dt)
    dt = np.atleast_1d(np.asarray(dt, dtype=float))
    if np.any(dt <= 0):
        raise DataError("async_rho requires dt > 0")
    c12 = async_covariance(pair.cross, k, dt)
    v1 = async_variance(pair.auto_i, k.lambda_i, dt)
    v2 = async_variance(pair.auto_j, k.lambda_j, dt)
    if np.any(v1 <= 0) or np.any(v2 <= 0):
        raise NumericalError("degenerate variance in async_rho")
    rho = c12 / np.sqrt(v1 * v2)
    return rho[0] if scalar else rho


def discrete_kernel(lambda_i_step, lambda_j_step, n, T):
    """Finite-length, discrete-time suppression factor at frequency index n.

    Rates are per grid step; each step contains a tick with probability
    1 - exp(-rate).  Reduces to lorentz_kernel in the continuum limit and to 1
    as the rates grow.
    """
    if T < 2:
        raise DataError("discrete_kernel requires T >= 2")
    n_arr = np.atleast_1d(np.asarray(n))
    if np.any((n_arr < 0) | (n_arr >= T)):
        raise DataError("frequency index out of range [0, T)")
    for lam in (lambda_i_step, lambda_j_step):
        if math.isnan(lam) or lam <= 0:
            raise DataError("discrete_kernel rates must be > 0")
    theta = 2.0 * math.pi * n_arr / T
    if math.isinf(lambda_i_step):
        fi = np.ones_like(theta, dtype=complex)
    else:
        fi = -math.expm1(-lambda_i_step) / (
            1.0 - np.exp(-lambda_i_step - 1j * theta))
    if math.isinf(lambda_j_step):
        fj = np.ones_like(theta, dtype=complex)
    else:
        fj = -math.expm1(-lambda_j_step) / (
            1.0 - np.exp(-lambda_j_step + 1j * theta))
    out = fi * fj
    return out if not np.isscalar(n) else complex(out[0])
