"""Monte Carlo and exact-arithmetic laboratory for total-variation rates in
the Breuer-Major theorem."""

from .bounds import (
    BoundReport,
    BoundVariant,
    regime_exponent,
    regime_rate,
    rhs_kn_opt,
    rhs_main,
    rhs_npy,
    rhs_nz,
    rhs_variance,
    stein_bound,
)
from .covariance import CovarianceModel, parse_model, partial_lp_sum, rho, rho_vector
from .distance import DistanceEstimate, calibration_floor, fit_rate, kolmogorov, tv_hist
from .errors import BMLabError
from .estimators import BreuerMajorTransformer, RateFitter
from .hermite import HermiteSeries, absx_series, hermite_rank, parse_series, project
from .sampler import PathEnsemble, chol_sample, read_ensemble, sample, write_ensemble
from .statistic import (
    FunctionalSample,
    compute_f,
    compute_phi,
    functional_sample,
    sigma_n_sq_exact,
    sigma_sq_limit,
    var_phi,
)

__version__ = "0.1.0"
