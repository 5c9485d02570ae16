"""Distances between a Monte Carlo sample and the standard normal law, and
log-log rate fitting across a grid of sample sizes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats
from scipy.special import ndtr

from .errors import NonPositiveValue, TooFewSamples

KOLMOGOROV_SCALE = 0.87


class DistanceMethod(str, Enum):
    TV_HIST = "tv_hist"
    KOLMOGOROV = "kolmogorov"


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    stderr: float
    method: DistanceMethod
    sample_size: int
    bins: int = 0


def default_bins(R: int) -> int:
    """``round(R^(1/3))`` clamped to ``[20, 200]``."""
    return int(min(200, max(20, round(R ** (1.0 / 3.0)))))


def _normal_cells(bins: int, halfwidth: float) -> tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(-halfwidth, halfwidth, bins + 1)
    probs = np.diff(ndtr(edges))
    tail = 2.0 * ndtr(-halfwidth)
    return edges, np.append(probs, tail)


def _binned_tv(freq: np.ndarray, target: np.ndarray) -> np.ndarray:
    return 0.5 * np.sum(np.abs(freq - target), axis=-1)


def _cell_counts(sample: np.ndarray, edges: np.ndarray) -> np.ndarray:
    bins = edges.size - 1
    idx = np.searchsorted(edges, sample, side="right") - 1
    idx[(idx < 0) | (idx >= bins)] = bins  # both tails share the last cell
    return np.bincount(idx, minlength=bins + 1)


def tv_hist(
    sample,
    bins: int | None = None,
    range_halfwidth: float = 5.0,
    n_boot: int = 200,
    seed: int = 0,
) -> DistanceEstimate:
    """Total variation to ``N(0, 1)`` restricted to the sigma-algebra of
    ``bins`` equal cells on ``[-L, L]`` plus one tail cell.

    The standard error comes from ``n_boot`` bootstrap resamples, drawn as
    multinomial counts from the empirical cell frequencies (equivalent to
    resampling the data).  It is floored at ``1/(2R)``, the resolution of
    the estimator.
    """
    x = np.asarray(sample, dtype=float).ravel()
    R = x.size
    if R < 1000:
        raise TooFewSamples(f"tv_hist needs at least 1000 values, got {R}")
    bins = bins or default_bins(R)
    edges, target = _normal_cells(bins, range_halfwidth)
    freq = _cell_counts(x, edges) / R
    value = float(_binned_tv(freq, target))
    rng = np.random.default_rng(seed)
    boot = rng.multinomial(R, freq, size=n_boot) / R
    stderr = max(float(np.std(_binned_tv(boot, target), ddof=1)), 0.5 / R)
    return DistanceEstimate(value, stderr, DistanceMethod.TV_HIST, R, bins)


def calibration_floor(
    R: int, bins: int | None = None, range_halfwidth: float = 5.0, reps: int = 64, seed: int = 0
) -> float:
    """Mean :func:`tv_hist` value for ``R`` exact standard normal draws.

    The histogram of exact draws is multinomial with the normal cell
    masses, so the calibration samples counts directly.
    """
    bins = bins or default_bins(R)
    _, target = _normal_cells(bins, range_halfwidth)
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(R, target, size=reps) / R
    return float(np.mean(_binned_tv(counts, target)))


def kolmogorov(sample) -> DistanceEstimate:
    """One-sample Kolmogorov distance to ``N(0, 1)``."""
    x = np.asarray(sample, dtype=float).ravel()
    R = x.size
    if R < 100:
        raise TooFewSamples(f"kolmogorov needs at least 100 values, got {R}")
    d = float(stats.kstest(x, "norm").statistic)
    return DistanceEstimate(d, KOLMOGOROV_SCALE / math.sqrt(R), DistanceMethod.KOLMOGOROV, R)


@dataclass(frozen=True)
class RateReport:
    """Weighted log-log fit ``log value = intercept + slope log n``."""

    grid: list
    slope: float
    slope_ci: tuple[float, float]
    intercept: float
    dropped: list = field(default_factory=list)

    @property
    def fitted_constant(self) -> float:
        return math.exp(self.intercept)


def _as_triple(point):
    if len(point) == 2 and isinstance(point[1], DistanceEstimate):
        return int(point[0]), point[1].value, point[1].stderr
    n, v, s = point
    return int(n), float(v), float(s)


def fit_rate(points, floor: float | None = None, level: float = 0.95) -> RateReport:
    """Fit the decay exponent of ``value`` in ``n``.

    ``points`` holds ``(n, value, stderr)`` triples or ``(n,
    DistanceEstimate)`` pairs.  With a ``floor`` (the calibration noise
    level), points below twice the floor are dropped before fitting.
    Weights are ``(value / stderr)^2``, the inverse variance of
    ``log value``; the covariance is inflated by the reduced chi-square when
    the scatter exceeds the quoted errors.
    """
    pts = sorted(_as_triple(p) for p in points)
    ns = [p[0] for p in pts]
    if len(set(ns)) != len(ns):
        raise ValueError("grid must be strictly increasing in n")
    dropped = []
    if floor is not None:
        dropped = [p for p in pts if p[1] < 2.0 * floor]
        pts = [p for p in pts if p[1] >= 2.0 * floor]
    if len(pts) < 4:
        raise TooFewSamples(f"rate fit needs at least 4 grid points, got {len(pts)}")
    n, v, s = (np.array(c, dtype=float) for c in zip(*pts))
    if np.any(v <= 0):
        raise NonPositiveValue("rate fit needs strictly positive values")
    rel = s / v
    if np.all(rel > 0):
        w = 1.0 / rel
    else:
        w = np.ones_like(v)
    x, y = np.log(n), np.log(v)
    coef, cov = np.polyfit(x, y, 1, w=w, cov="unscaled")
    resid = (y - np.polyval(coef, x)) * w
    chi2 = float(resid @ resid) / (len(pts) - 2)
    cov = cov * max(1.0, chi2)
    half = stats.norm.ppf(0.5 + level / 2.0) * math.sqrt(cov[0, 0])
    slope = float(coef[0])
    return RateReport(pts, slope, (slope - half, slope + half), float(coef[1]), dropped)
