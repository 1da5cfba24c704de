"""Exact and asymptotic moments of one-sided correlated Gram matrices ``H^* Lambda H``."""

from .apps import NoiseModel, SeriesValue, blue_mse, lmmse_mse_high_snr, lmmse_mse_low_snr
from .asymptotic import (
    AsymptoticState,
    asymptotic_inverse_moment,
    compute_derivatives,
    solve_fixed_point,
)
from .errors import GramMomentsError
from .exact import (
    ExactEngine,
    build_engine,
    inverse_moment,
    mellin,
    mellin_continuation_check,
    moment,
    positive_moment,
)
from .oracle import MomentEstimate, mc_application_metric, mc_empirical_moment, sample_gram
from .scm import LossCurve, ScmConfig, optimize_lambda, scm_loss, weight_spectrum
from .spectra import (
    CorrelationMatrix,
    Spectrum,
    bessel_scattering_matrix,
    scale_spectrum,
    shifted_wishart_matrix,
    spectrum_from_matrix,
)

__version__ = "0.1.0"
