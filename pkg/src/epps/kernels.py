"""Synchronous correlation models.

A model describes the infinitesimal lagged correlation of a pair of
continuous-time increment processes,

    c(tau) = delta_weight * delta(tau - lag)
           + exp_weight * exp(-|tau - lag| / width) / (2 * width),

together with its Fourier transform (the spectrum) and the induced
finite-horizon covariance and Pearson correlation.

Conventions used throughout the package:

* lags:      c(tau) = <dX_i(t) dX_j(t + tau)>, so a cross kernel centered at
             lag > 0 means asset j trails asset i.
* spectra:   S(omega) = integral c(tau) exp(+i omega tau) dtau, with inverse
             c(tau) = (1/2 pi) integral S(omega) exp(-i omega tau) domega.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DataError, NumericalError
from ._numutil import triangle_exp_integral


@dataclass(frozen=True)
class CorrelationModel:
    """Delta plus single-exponential lagged correlation kernel.

    Parameters
    ----------
    delta_weight : float
        Coefficient of the delta component (mass at tau = lag).
    lag : float
        Center of the kernel, in seconds.
    width : float
        Exponential decay constant, in seconds.  ``width == 0`` collapses the
        exponential component onto the delta.
    exp_weight : float
        Coefficient (integrated mass) of the exponential component; sign free.
    """

    delta_weight: float = 0.0
    lag: float = 0.0
    width: float = 0.0
    exp_weight: float = 0.0

    def __post_init__(self):
        for name in ("delta_weight", "lag", "width", "exp_weight"):
            if not math.isfinite(getattr(self, name)):
                raise DataError(f"CorrelationModel.{name} must be finite")
        if self.width < 0:
            raise DataError("CorrelationModel.width must be >= 0")

    @property
    def total_delta_weight(self):
        """Delta mass including a zero-width exponential component."""
        if self.width == 0.0:
            return self.delta_weight + self.exp_weight
        return self.delta_weight

    @property
    def total_mass(self):
        """Integral of the kernel over all lags."""
        return self.delta_weight + self.exp_weight

    def time_scale(self):
        """Characteristic scale used for validation grids."""
        return max(self.width, abs(self.lag), 1.0)


def _as_models(model):
    if isinstance(model, CorrelationModel):
        return (model,)
    return tuple(model)


def kernel_eval(model, tau):
    """Evaluate the kernel, returning the delta and regular parts separately.

    Parameters
    ----------
    model : CorrelationModel or sequence of CorrelationModel
        Superpositions are summed component-wise.
    tau : float or array_like
        Lag(s), in seconds.

    Returns
    -------
    delta_part : ndarray
        Delta mass located at each tau (nonzero only where tau equals the
        kernel center).
    regular_part : ndarray
        Density of the exponential component at tau.
    """
    tau = np.asarray(tau, dtype=float)
    delta = np.zeros_like(tau)
    regular = np.zeros_like(tau)
    for m in _as_models(model):
        delta = delta + np.where(tau == m.lag, m.total_delta_weight, 0.0)
        if m.width > 0.0:
            regular = regular + m.exp_weight * np.exp(
                -np.abs(tau - m.lag) / m.width) / (2.0 * m.width)
    return delta, regular


def spectrum_eval(model, omega):
    """Spectrum S(omega) of the model (Fourier transform of the kernel).

    Returns ``exp(i omega lag) * (delta_weight + exp_weight/(1 + omega^2 width^2))``
    summed over components.  Hermitian pairing holds: S_ji(omega) = S_ij(-omega).
    """
    omega = np.asarray(omega, dtype=float)
    out = np.zeros(omega.shape, dtype=complex)
    for m in _as_models(model):
        flat = m.total_delta_weight
        lorentz = 0.0
        if m.width > 0.0:
            lorentz = m.exp_weight / (1.0 + (omega * m.width) ** 2)
        out = out + np.exp(1j * omega * m.lag) * (flat + lorentz)
    return out


def sync_covariance(model, dt):
    """Synchronous covariance C(dt) of dt-horizon increments.

    Exact closed form: the double integral of the kernel over [0, dt]^2,
    reduced to ``integral (dt - |s|) c(s) ds``.
    """
    scalar = np.isscalar(dt)
    dt = np.atleast_1d(np.asarray(dt, dtype=float))
    if np.any(dt < 0):
        raise DataError("sync_covariance requires dt >= 0")
    out = np.zeros_like(dt)
    for m in _as_models(model):
        out += m.total_delta_weight * np.maximum(dt - abs(m.lag), 0.0)
        if m.width > 0.0:
            out += m.exp_weight * np.array(
                [triangle_exp_integral(d, m.lag, m.width) for d in dt])
    return out[0] if scalar else out


@dataclass(frozen=True)
class ModelPair:
    """Cross kernel plus the two auto kernels of a bivariate model.

    Construction validates positive semidefiniteness of the auto spectra and
    checks |rho(dt)| <= 1 numerically on a log-spaced dt grid.
    """

    cross: CorrelationModel
    auto_i: CorrelationModel
    auto_j: CorrelationModel

    def __post_init__(self):
        for name in ("auto_i", "auto_j"):
            m = getattr(self, name)
            if m.lag != 0.0:
                raise DataError(f"{name} must have lag = 0")
            # min over omega of delta + exp/(1 + (omega width)^2)
            low = m.total_delta_weight + min(0.0, m.exp_weight)
            if m.width > 0.0:
                low = min(low, m.total_delta_weight)
            if low < -1e-12:
                raise DataError(f"{name} spectrum is not nonnegative")
        scale = max(self.cross.time_scale(), self.auto_i.time_scale(),
                    self.auto_j.time_scale())
        grid = np.geomspace(1e-3 * scale, 1e3 * scale, 64)
        rho = sync_rho(self, grid)
        if np.any(np.abs(rho) > 1.0 + 1e-9):
            raise DataError("ModelPair violates |rho| <= 1 on the test grid")


def sync_rho(pair, dt):
    """Pearson correlation C12(dt)/sqrt(C11(dt) C22(dt)) of dt-increments."""
    scalar = np.isscalar(dt)
    dt = np.atleast_1d(np.asarray(dt, dtype=float))
    if np.any(dt <= 0):
        raise DataError("sync_rho requires dt > 0")
    c12 = sync_covariance(pair.cross, dt)
    v1 = sync_covariance(pair.auto_i, dt)
    v2 = sync_covariance(pair.auto_j, dt)
    if np.any(v1 <= 0) or np.any(v2 <= 0):
        raise NumericalError("degenerate variance in sync_rho")
    rho = c12 / np.sqrt(v1 * v2)
    return rho[0] if scalar else rho


# -- model specification files -------------------------------------------------
#
# Flat key-value text, one assignment per line, '#' comments allowed:
#
#     cross.c=0.5        # kernel weight (delta mass if xi == 0, else exp mass)
#     cross.tau=2        # lag center, seconds
#     cross.xi=10        # exponential width, seconds (0 or absent -> delta)
#     auto_i.a=1         # delta weight
#     auto_i.b=0         # exponential weight (signed)
#     auto_i.xi=0        # exponential width
#     auto_j.a=1

def _model_from_keys(keys, prefix):
    vals = {k.split(".", 1)[1]: v for k, v in keys.items()
            if k.startswith(prefix + ".")}
    if prefix == "cross":
        c = vals.get("c", 0.0)
        xi = vals.get("xi", 0.0)
        tau = vals.get("tau", 0.0)
        if xi > 0:
            return CorrelationModel(lag=tau, width=xi, exp_weight=c)
        return CorrelationModel(delta_weight=c, lag=tau)
    return CorrelationModel(delta_weight=vals.get("a", 0.0),
                            width=vals.get("xi", 0.0),
                            exp_weight=vals.get("b", 0.0))


def parse_model_text(text):
    """Parse a flat key-value model specification into a ModelPair."""
    keys = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"model spec line {lineno}: expected key=value")
        k, v = (part.strip() for part in line.split("=", 1))
        try:
            keys[k] = float(v)
        except ValueError as exc:
            raise DataError(f"model spec line {lineno}: bad number {v!r}") from exc
    known = ("cross.", "auto_i.", "auto_j.")
    for k in keys:
        if not k.startswith(known):
            raise DataError(f"model spec: unknown key {k!r}")
    return ModelPair(cross=_model_from_keys(keys, "cross"),
                     auto_i=_model_from_keys(keys, "auto_i"),
                     auto_j=_model_from_keys(keys, "auto_j"))


def load_model_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model_text(fh.read())
