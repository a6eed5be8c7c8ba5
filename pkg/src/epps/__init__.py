"""Correlation of asynchronously sampled processes: simulation, exact
theory, estimation, spectral deconvolution, and model fitting."""

__version__ = "0.1.0"

from .errors import EppsError, DataError, NumericalError, FitConvergenceError
from .kernels import (CorrelationModel, ModelPair, kernel_eval, spectrum_eval,
                      sync_covariance, sync_rho, parse_model_text,
                      load_model_file)
from .async_theory import (AsyncKernel, lorentz_kernel, discrete_kernel,
                           async_cross_corr, async_covariance,
                           async_covariance_quad, async_variance,
                           async_autocorr, async_rho)
from .sampling import (SimulatedPath, SamplingPlan, SteppedSeries, rng_stream,
                       simulate_paths, simulate_ensemble, draw_poisson_times,
                       default_warmup, previous_tick)
from .estimation import (RateEstimate, EppsCurve, Correlogram,
                         SpectrumEstimate, estimate_rate, epps_curve,
                         correlogram, estimate_spectrum)
from .filtering import (FilterSpec, inverse_filter, wiener_filter,
                        apply_filter, auto_filter, estimate_snr,
                        filtered_correlogram, filtered_epps_curve)
from .fitting import (FitResult, fit_cross_raw, fit_cross_async,
                      fit_auto_raw, fit_auto_async, chi2_ratio)
from .pipeline import (SessionSpec, TickSeries, RunConfig, load_ticks,
                       grid_and_normalize, analyze_pair, run_pipeline)
