"""Total-variation rate bounds evaluated with unit constants.

Every bound is a function of the partial sums ``S_p(n) = sum_{|k|<=n}
|rho(k)|^p``.  Constants are set to one; comparisons against simulation
quote a fitted constant instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .covariance import CovarianceModel, partial_lp_sum
from .errors import AlphaOutOfRange, NegativeVariance


class BoundVariant(str, Enum):
    MAIN = "main_ecu1"
    VARIANCE = "variance_toshow"
    NPY = "npy"
    KN_OPT = "kn_opt"
    NZ_OPTIMAL = "nz_optimal"


@dataclass(frozen=True)
class BoundReport:
    n: int
    term1: float
    term2: float
    variant: BoundVariant

    def __post_init__(self):
        for t in (self.term1, self.term2):
            if not (t >= 0 and math.isfinite(t)):
                raise ValueError("bound terms must be finite and nonnegative")

    @property
    def total(self) -> float:
        return self.term1 + self.term2


def _S(m, p, n):
    return partial_lp_sum(m, p, n)


def rhs_main(m: CovarianceModel, n: int) -> BoundReport:
    """``n^{-1/2} S_1^{1/2} + n^{-1/2} S_{4/3}^{3/2}``."""
    r = n ** -0.5
    return BoundReport(n, r * _S(m, 1.0, n) ** 0.5, r * _S(m, 4.0 / 3.0, n) ** 1.5, BoundVariant.MAIN)


def rhs_variance(m: CovarianceModel, n: int) -> BoundReport:
    """Bound on ``Var(Phi_n)``: ``n^{-1} S_1 + n^{-1} S_{4/3}^3``."""
    return BoundReport(n, _S(m, 1.0, n) / n, _S(m, 4.0 / 3.0, n) ** 3 / n, BoundVariant.VARIANCE)


def rhs_npy(m: CovarianceModel, n: int) -> BoundReport:
    """Even-``g`` bound ``n^{-1/2} S_1``."""
    return BoundReport(n, n ** -0.5 * _S(m, 1.0, n), 0.0, BoundVariant.NPY)


def rhs_kn_opt(m: CovarianceModel, n: int) -> BoundReport:
    """``n^{-1/2} S_1^{1/2} + n^{-1/2} S_{3/2}^2``."""
    r = n ** -0.5
    return BoundReport(n, r * _S(m, 1.0, n) ** 0.5, r * _S(m, 1.5, n) ** 2, BoundVariant.KN_OPT)


def rhs_nz(m: CovarianceModel, n: int) -> BoundReport:
    """Optimal-order bound ``n^{-1/2} S_{3/2}^2``."""
    return BoundReport(n, n ** -0.5 * _S(m, 1.5, n) ** 2, 0.0, BoundVariant.NZ_OPTIMAL)


def regime_rate(alpha: float, n) -> float | np.ndarray:
    """Rate envelope for ``|rho(k)| ~ |k|^-alpha``.

    ``n^{1-2a}`` for ``1/2 < a < 2/3``, ``n^{-a/2}`` for ``2/3 <= a < 1``,
    ``n^{-1/2} sqrt(log n)`` at ``a = 1`` and ``n^{-1/2}`` above.
    """
    if alpha <= 0.5:
        raise AlphaOutOfRange(f"alpha={alpha} must exceed 1/2")
    n = np.asarray(n, dtype=float)
    if alpha < 2.0 / 3.0:
        out = n ** (1.0 - 2.0 * alpha)
    elif alpha < 1.0:
        out = n ** (-alpha / 2.0)
    elif alpha == 1.0:
        out = n ** -0.5 * np.sqrt(np.log(n))
    else:
        out = n ** -0.5
    return float(out) if out.ndim == 0 else out


def regime_exponent(alpha: float) -> float:
    """Power of ``n`` in :func:`regime_rate`, ignoring the log factor at 1."""
    if alpha <= 0.5:
        raise AlphaOutOfRange(f"alpha={alpha} must exceed 1/2")
    if alpha < 2.0 / 3.0:
        return 1.0 - 2.0 * alpha
    if alpha < 1.0:
        return -alpha / 2.0
    return -0.5


class SteinBound(NamedTuple):
    bound: float
    bound_hi: float


def stein_bound(var_phi: float, var_phi_stderr: float, sigma_n_sq: float) -> SteinBound:
    """``(2 / sigma_n^2) sqrt(Var Phi_n)``; ``bound_hi`` inflates the variance
    by three standard errors."""
    if var_phi < 0 or var_phi_stderr < 0:
        raise NegativeVariance("variance and its standard error must be nonnegative")
    if sigma_n_sq <= 0:
        raise ValueError("sigma_n_sq must be positive")
    scale = 2.0 / sigma_n_sq
    return SteinBound(scale * math.sqrt(var_phi), scale * math.sqrt(var_phi + 3.0 * var_phi_stderr))


def loglog_slope(ns, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(ns)``."""
    return float(np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)), 1)[0])


ALL_BOUNDS = {
    BoundVariant.MAIN: rhs_main,
    BoundVariant.VARIANCE: rhs_variance,
    BoundVariant.NPY: rhs_npy,
    BoundVariant.KN_OPT: rhs_kn_opt,
    BoundVariant.NZ_OPTIMAL: rhs_nz,
}
