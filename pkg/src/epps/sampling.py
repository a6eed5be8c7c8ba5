"""Path simulation, Poisson tick times, and previous-tick gridding.

Bivariate Gaussian increment paths are synthesized in the frequency domain:
the exact bin-averaged covariances of the target kernels are wrapped into a
circulant, factorized per frequency, and colored onto complex white noise
(circulant embedding).  Tick times are drawn independently of the path and a
previous-tick stepped series assigns to each grid time the path value at the
latest tick at or before it.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DataError, NumericalError
from .kernels import ModelPair, _as_models
from ._numutil import triangle_exp_integral


def rng_stream(seed, *key):
    """Counter-based, seedable generator; distinct keys give independent streams."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed,) + key)))


@dataclass(frozen=True)
class SimulatedPath:
    """Synchronous log-price levels on a uniform grid, two assets."""

    grid_dt: float
    t0: float
    levels: np.ndarray  # (2, n_steps + 1)
    seed: int = 0

    @property
    def n_steps(self):
        return self.levels.shape[1] - 1

    @property
    def t_end(self):
        return self.t0 + self.n_steps * self.grid_dt

    def times(self):
        return self.t0 + np.arange(self.n_steps + 1) * self.grid_dt

    def value_at(self, asset, t):
        """Level at the grid point containing t (grid floor)."""
        idx = np.floor((np.asarray(t, dtype=float) - self.t0) / self.grid_dt
                       + 1e-9).astype(int)
        if np.any(idx < 0) or np.any(idx > self.n_steps):
            raise DataError("time outside simulated range")
        return self.levels[asset, idx]


@dataclass(frozen=True)
class SamplingPlan:
    """Poisson rates per asset, or explicit tick times to replay."""

    rates: tuple = ()
    replay_times: tuple = field(default=())

    def __post_init__(self):
        for lam in self.rates:
            if math.isnan(lam) or lam <= 0:
                raise DataError("sampling rate must be > 0")
        for times in self.replay_times:
            t = np.asarray(times, dtype=float)
            if t.size and np.any(np.diff(t) <= 0):
                raise DataError("replayed tick times must be strictly increasing")


@dataclass(frozen=True)
class SteppedSeries:
    """Previous-tick piecewise-constant levels on a uniform grid."""

    grid_dt: float
    start: float
    levels: np.ndarray
    tick_times: np.ndarray

    @property
    def increments(self):
        return np.diff(self.levels)

    @property
    def n_increments(self):
        return self.levels.size - 1


def _binned_cov(model, grid_dt, k):
    """Covariance of grid increments at integer lag k:
    integral (dt - |s|) c(k dt + s) ds."""
    out = 0.0
    for m in _as_models(model):
        center = m.lag - k * grid_dt
        out += m.total_delta_weight * max(grid_dt - abs(center), 0.0)
        if m.width > 0.0:
            out += m.exp_weight * triangle_exp_integral(grid_dt, center, m.width)
    return out


def _max_lag_steps(pair, grid_dt):
    scale = 0.0
    for model in (pair.cross, pair.auto_i, pair.auto_j):
        for m in _as_models(model):
            scale = max(scale, abs(m.lag) + 40.0 * m.width)
    return int(math.ceil(scale / grid_dt)) + 1


def _circulant_factors(pair, grid_dt, n):
    """Per-frequency lower-triangular factors of the 2x2 increment spectrum."""
    kmax = _max_lag_steps(pair, grid_dt)
    if 2 * kmax + 1 >= n:
        raise DataError("horizon too short for the kernel time scales")
    ks = np.arange(-kmax, kmax + 1)

    def wrapped(model):
        g = np.zeros(n)
        for k in ks:
            g[k % n] += _binned_cov(model, grid_dt, int(k))
        return g

    # positive-exponent transform: M_m = sum_k gamma(k) e^{+2 pi i m k / n}
    m11 = np.fft.fft(wrapped(pair.auto_i)).conj()
    m22 = np.fft.fft(wrapped(pair.auto_j)).conj()
    m12 = np.fft.fft(wrapped(pair.cross)).conj()
    p = np.maximum(m11.real, 0.0)
    r = np.maximum(m22.real, 0.0)
    l11 = np.sqrt(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        l21 = np.where(l11 > 0, np.conj(m12) / np.where(l11 > 0, l11, 1.0), 0.0)
    l22 = np.sqrt(np.maximum(r - np.abs(l21) ** 2, 0.0))
    return l11, l21, l22


def _draw_increment_pairs(l11, l21, l22, rng, n):
    w = rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n))
    z1 = math.sqrt(n) * l11 * w[0]
    z2 = math.sqrt(n) * (l21 * w[0] + l22 * w[1])
    x = np.fft.ifft(np.vstack([z1, z2]), axis=-1)
    return x.real, x.imag  # two independent increment samples, shape (2, n)


def _levels(increments):
    n = increments.shape[1]
    lev = np.zeros((2, n + 1))
    lev[:, 1:] = np.cumsum(increments, axis=1)
    return lev


def simulate_paths(pair, grid_dt, horizon, n_assets=2, seed=0, warmup=0.0):
    """Simulate one synchronous bivariate path with the pair's correlation
    structure on a uniform grid covering [-warmup, horizon]."""
    if n_assets != 2:
        raise DataError("only bivariate simulation is supported")
    if grid_dt <= 0 or horizon <= 0 or warmup < 0:
        raise DataError("grid_dt and horizon must be > 0, warmup >= 0")
    if not isinstance(pair, ModelPair):
        raise DataError("simulate_paths requires a validated ModelPair")
    n = int(round((horizon + warmup) / grid_dt))
    factors = _circulant_factors(pair, grid_dt, n)
    incr, _ = _draw_increment_pairs(*factors, rng_stream(seed, 0), n)
    return SimulatedPath(grid_dt=grid_dt, t0=-warmup, levels=_levels(incr),
                         seed=seed)


def simulate_ensemble(pair, grid_dt, horizon, n_paths, seed=0, warmup=0.0):
    """Independent paths for Monte Carlo; two paths per random draw."""
    if grid_dt <= 0 or horizon <= 0 or warmup < 0:
        raise DataError("grid_dt and horizon must be > 0, warmup >= 0")
    n = int(round((horizon + warmup) / grid_dt))
    factors = _circulant_factors(pair, grid_dt, n)
    paths = []
    for block in range((n_paths + 1) // 2):
        re, im = _draw_increment_pairs(*factors, rng_stream(seed, 1, block), n)
        for incr in (re, im):
            if len(paths) < n_paths:
                paths.append(SimulatedPath(grid_dt=grid_dt, t0=-warmup,
                                           levels=_levels(incr), seed=seed))
    return paths


def draw_poisson_times(lam, horizon, warmup, seed, stream=0):
    """Strictly increasing Poisson tick times on [-warmup, horizon]."""
    if math.isnan(lam) or math.isinf(lam) or lam <= 0:
        raise DataError("Poisson rate must be finite and > 0")
    if warmup < 0:
        raise DataError("warmup must be >= 0")
    rng = rng_stream(seed, 2, stream)
    span = horizon + warmup
    times = []
    t = -warmup
    block = max(int(span * lam * 1.2) + 16, 16)
    while t <= horizon:
        gaps = rng.exponential(1.0 / lam, size=block)
        cum = t + np.cumsum(gaps)
        times.append(cum)
        t = cum[-1]
    times = np.concatenate(times)
    return times[times <= horizon]


def default_warmup(lam):
    """Warmup making the no-prior-tick probability < exp(-10)."""
    return 10.0 / lam


def previous_tick(source, ticks=None, *, grid_dt=None, asset=0,
                  start=0.0, end=None):
    """Previous-tick stepped series on a uniform grid.

    Parameters
    ----------
    source : SimulatedPath, SteppedSeries, or (times, values) pair
        Where tick values come from.  For a path, the value at each tick is
        the path level at that time; for raw tick data, the recorded value.
    ticks : array_like, optional
        Tick times; defaults to the source's own times for tick data.
    grid_dt : float
        Output grid step; defaults to the source grid step when available.
    asset : int
        Asset index for SimulatedPath sources.
    start, end : float
        Output grid span; a tick at or before `start` must exist.
    """
    if isinstance(source, SimulatedPath):
        if ticks is None:
            raise DataError("previous_tick on a path requires tick times")
        ticks = np.asarray(ticks, dtype=float)
        values = source.value_at(asset, ticks)
        grid_dt = source.grid_dt if grid_dt is None else grid_dt
        end = source.t_end if end is None else end
    elif isinstance(source, SteppedSeries):
        if ticks is None:
            ticks = source.tick_times
        ticks = np.asarray(ticks, dtype=float)
        grid = source.start + np.arange(source.levels.size) * source.grid_dt
        idx = np.searchsorted(grid, ticks, side="right") - 1
        if np.any(idx < 0):
            raise DataError("tick before the stepped series start")
        values = source.levels[idx]
        grid_dt = source.grid_dt if grid_dt is None else grid_dt
        end = source.start + (source.levels.size - 1) * source.grid_dt \
            if end is None else end
    else:
        times, values = source
        ticks = np.asarray(times if ticks is None else ticks, dtype=float)
        values = np.asarray(values, dtype=float)
        if ticks.size != values.size:
            raise DataError("tick times and values differ in length")
        if grid_dt is None:
            raise DataError("grid_dt is required for tick-data sources")
        end = float(ticks[-1]) if end is None else end
    if ticks.size == 0:
        raise DataError("no ticks supplied")
    if np.any(np.diff(ticks) <= 0):
        raise DataError("tick times must be strictly increasing")
    n_cells = int(math.floor((end - start) / grid_dt + 1e-9))
    grid = start + np.arange(n_cells + 1) * grid_dt
    idx = np.searchsorted(ticks, grid, side="right") - 1
    if idx[0] < 0:
        raise DataError("no tick at or before the grid start; "
                        "supply warmup or truncate the grid")
    return SteppedSeries(grid_dt=float(grid_dt), start=float(start),
                         levels=np.asarray(values)[idx],
                         tick_times=ticks)


def write_stepped_csv(series, path):
    """Dump a stepped series as `t,level` rows."""
    t = series.start + np.arange(series.levels.size) * series.grid_dt
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,level\n")
        for ti, li in zip(t, series.levels):
            fh.write(f"{ti:.10g},{li:.17g}\n")


def write_ticks_csv(tick_times, path):
    """Dump tick times as a single `tick_time` column."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("tick_time\n")
        for ti in np.asarray(tick_times, dtype=float):
            fh.write(f"{ti:.10g}\n")
