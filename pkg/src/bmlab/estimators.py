"""scikit-learn style wrappers around the functional and the rate fit.

``BreuerMajorTransformer`` maps a path matrix ``(R, n)`` to the per-replicate
columns ``F_n, Y_n, Phi_n``.  ``RateFitter`` regresses a distance on ``n`` in
log-log scale and predicts the fitted power law.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.metrics import r2_score
from sklearn.utils.validation import check_array, check_is_fitted

from .covariance import CovarianceModel, parse_model
from .distance import fit_rate
from .hermite import HermiteSeries, parse_series
from .sampler import PathEnsemble
from .statistic import compute_f, compute_phi, sigma_n_sq_exact, _centered_quiet


def _as_series(g) -> HermiteSeries:
    return g if isinstance(g, HermiteSeries) else parse_series(str(g))


def _as_model(model) -> CovarianceModel:
    return model if isinstance(model, CovarianceModel) else parse_model(str(model))


class BreuerMajorTransformer(TransformerMixin, BaseEstimator):
    """Per-replicate ``[F_n, Y_n, Phi_n]`` for a fixed ``g`` and covariance.

    Parameters
    ----------
    g : str or HermiteSeries
        Function spec (``h2``, ``absx:p=1``, ...) or a series.
    model : str or CovarianceModel
        Covariance spec (``powerlaw:alpha=0.75``, ...) or a model.
    with_phi : bool
        When false the third column is omitted.

    Attributes
    ----------
    n_features_in_ : int
        Path length ``n`` seen in ``fit``.
    sigma_n_sq_ : float
        Exact ``E F_n^2`` at that ``n``.
    """

    def __init__(self, g="h2", model="white", with_phi=True):
        self.g = g
        self.model = model
        self.with_phi = with_phi

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_features=2)
        self.series_ = _centered_quiet(_as_series(self.g))
        self.model_ = _as_model(self.model)
        self.n_features_in_ = X.shape[1]
        self.sigma_n_sq_ = sigma_n_sq_exact(self.series_, self.model_, self.n_features_in_)
        return self

    def transform(self, X):
        check_is_fitted(self, "sigma_n_sq_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected paths of length {self.n_features_in_}, got {X.shape[1]}")
        paths = PathEnsemble(X)
        f = compute_f(paths, self.series_)
        cols = [f, f / np.sqrt(self.sigma_n_sq_)]
        if self.with_phi:
            cols.append(compute_phi(paths, self.series_, self.model_))
        return np.column_stack(cols)


class RateFitter(RegressorMixin, BaseEstimator):
    """Weighted fit of ``value ~ C n^slope``.

    ``fit(X, y, sample_stderr=None)`` takes ``X`` of shape ``(k, 1)`` holding
    the sizes ``n`` and ``y`` the positive distances.  Without standard
    errors every point gets equal weight in log scale.

    Parameters
    ----------
    floor : float or None
        Calibration noise level; points below twice it are dropped.
    level : float
        Confidence level of ``slope_ci_``.
    """

    def __init__(self, floor=None, level=0.95):
        self.floor = floor
        self.level = level

    def fit(self, X, y, sample_stderr=None):
        X = check_array(X)
        if X.shape[1] != 1:
            raise ValueError("X must have a single column of sizes n")
        y = np.asarray(y, dtype=float).ravel()
        se = np.zeros_like(y) if sample_stderr is None else np.asarray(sample_stderr, float).ravel()
        report = fit_rate(list(zip(X[:, 0].astype(int), y, se)), floor=self.floor, level=self.level)
        self.n_features_in_ = 1
        self.report_ = report
        self.slope_ = report.slope
        self.slope_ci_ = report.slope_ci
        self.intercept_ = report.intercept
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        X = check_array(X)
        return np.exp(self.intercept_) * X[:, 0] ** self.slope_

    def score(self, X, y, sample_weight=None):
        """R^2 of the fit in log scale."""
        return r2_score(np.log(y), np.log(self.predict(X)), sample_weight=sample_weight)
