"""Functionals of a Gaussian-subordinated path ensemble.

For a centered Hermite series ``g`` and paths ``X`` with covariance ``rho``:

* ``F_n = n^{-1/2} sum_i g(X_i)``
* ``sigma_n^2 = E F_n^2``, computed exactly from the coefficients
* ``Y_n = F_n / sigma_n``
* ``Phi_n = n^{-1} sum_{i,j} g'(X_i) g_1(X_j) rho(i - j)``, where ``g_1`` is
  ``g`` with every Hermite index lowered by one.  ``E Phi_n = sigma_n^2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
from scipy.linalg import toeplitz
from scipy.special import zeta

from .covariance import CovarianceModel, rho, rho_vector, summability_check
from .errors import InvalidSize, NotSummable, TooFewReplicates
from .hermite import (
    HermiteSeries,
    centered,
    cross_covariance,
    derivative,
    evaluate,
    hermite_rank,
    shift,
)
from .sampler import PathEnsemble


def _centered_quiet(s: HermiteSeries) -> HermiteSeries:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return centered(s)[0]


def compute_f(paths: PathEnsemble, s: HermiteSeries) -> np.ndarray:
    """``F_n`` for every replicate.  A nonzero constant term is removed
    (with a warning) before summing."""
    s, _ = centered(s)
    return evaluate(s, paths.data).sum(axis=1) / math.sqrt(paths.n)


def _lag_weights(n: int) -> np.ndarray:
    k = np.arange(n, dtype=float)
    w = 2.0 * (1.0 - k / n)
    w[0] = 1.0
    return w


def sigma_n_sq_exact(s: HermiteSeries, m: CovarianceModel, n: int) -> float:
    """``sum_q q! c_q^2 sum_{|k|<n} (1 - |k|/n) rho(k)^q``."""
    if n < 1:
        raise InvalidSize("n must be >= 1")
    a = _centered_quiet(s).scaled ** 2
    r = rho_vector(m, n - 1)
    w = _lag_weights(n)
    total = 0.0
    power = np.ones(n)
    for q in range(1, a.size):
        power = power * r
        if a[q] != 0.0:
            total += a[q] * float(np.dot(w, power))
    return total


def _lag_sum_power(m: CovarianceModel, q: int, tail_tol: float) -> float:
    """``sum_{k in Z} rho(k)^q`` for a summable exponent."""
    if m.kind == "white_noise":
        return 1.0
    if m.kind == "ar1":
        x = m.param ** q
        return (1.0 + x) / (1.0 - x)
    if m.kind == "power_law":
        return 2.0 * float(zeta(m.param * q, 1.0)) - 1.0
    if m.kind == "table":
        v = m.values ** q
        return float(2.0 * v.sum() - v[0])
    # fgn: direct sum, then the power-law asymptote rho(k) ~ H(2H-1) k^(2H-2)
    hurst = m.param
    if hurst == 0.5:
        return 1.0
    amp = hurst * (2.0 * hurst - 1.0)
    expo = (2.0 - 2.0 * hurst) * q
    K = 1 << 14
    while True:
        r = rho_vector(m, K)
        head = float(2.0 * np.sum(r[1:] ** q) + 1.0)
        tail = 2.0 * amp ** q * float(zeta(expo, K + 1.0))
        mismatch = abs(r[K] ** q - amp ** q * K ** (-expo)) / abs(r[K] ** q)
        if mismatch * abs(tail) < tail_tol or K >= 1 << 22:
            return head + tail
        K <<= 2


def sigma_sq_limit(s: HermiteSeries, m: CovarianceModel, tail_tol: float = 1e-12) -> float:
    """Limiting variance ``sum_q q! c_q^2 sum_k rho(k)^q``.

    Raises
    ------
    NotSummable
        If ``sum_k |rho(k)|^d`` diverges for the Hermite rank ``d`` of ``s``.
    """
    s = _centered_quiet(s)
    d = hermite_rank(s)
    check = summability_check(m, d)
    if not check.holds:
        raise NotSummable(f"sum |rho|^{d} diverges for {m.tag} (tail exponent {check.tail_exponent:g})")
    a = s.scaled ** 2
    return float(sum(a[q] * _lag_sum_power(m, q, tail_tol) for q in range(1, a.size) if a[q] != 0.0))


def _phi_parts(s: HermiteSeries):
    s = _centered_quiet(s)
    return derivative(s), shift(s, 1)


def toeplitz_apply(m: CovarianceModel, b: np.ndarray) -> np.ndarray:
    """Row-wise product ``b @ Gamma`` with ``Gamma_ij = rho(i - j)``, through
    a zero-padded circulant of power-of-two size ``>= 2n - 1``."""
    n = b.shape[-1]
    P = 1 << (2 * n - 2).bit_length()
    r = rho_vector(m, n - 1)
    col = np.zeros(P)
    col[:n] = r
    col[P - n + 1 :] = r[:0:-1]
    kern = np.fft.rfft(col)
    return np.fft.irfft(np.fft.rfft(b, n=P, axis=-1) * kern, n=P, axis=-1)[..., :n]


def compute_phi(paths: PathEnsemble, s: HermiteSeries, m: CovarianceModel) -> np.ndarray:
    """``Phi_n`` per replicate using FFT convolution, ``O(n log n)`` each."""
    gprime, g1 = _phi_parts(s)
    n = paths.n
    out = np.empty(paths.R)
    step = max(1, (1 << 20) // n)
    for a in range(0, paths.R, step):
        x = paths.data[a : a + step]
        conv = toeplitz_apply(m, evaluate(g1, x))
        out[a : a + step] = np.einsum("ij,ij->i", evaluate(gprime, x), conv) / n
    return out


def compute_phi_direct(paths: PathEnsemble, s: HermiteSeries, m: CovarianceModel) -> np.ndarray:
    """Reference ``O(n^2)`` double sum for ``Phi_n``."""
    gprime, g1 = _phi_parts(s)
    gamma = toeplitz(rho_vector(m, paths.n - 1))
    a = evaluate(gprime, paths.data)
    b = evaluate(g1, paths.data)
    return np.einsum("ri,ij,rj->r", a, gamma, b) / paths.n


class VarianceEstimate(NamedTuple):
    variance: float
    stderr: float


def variance_with_stderr(x) -> VarianceEstimate:
    """Unbiased sample variance with its delete-one jackknife standard error."""
    x = np.asarray(x, dtype=float)
    R = x.size
    if R < 3:
        raise TooFewReplicates("need at least 3 values")
    dev = x - x.mean()
    ss = float(np.sum(dev * dev))
    var = ss / (R - 1)
    loo = (ss - dev * dev * R / (R - 1)) / (R - 2)
    jk = math.sqrt((R - 1) / R * float(np.sum((loo - loo.mean()) ** 2)))
    return VarianceEstimate(var, jk)


@dataclass(frozen=True, eq=False)
class FunctionalSample:
    """Per-replicate ``F_n``, ``Y_n``, ``Phi_n`` and the exact ``sigma_n^2``."""

    f_values: np.ndarray
    phi_values: np.ndarray | None
    sigma_n_sq: float
    n: int
    series_tag: str = ""
    model_tag: str = ""

    def __post_init__(self):
        if not self.sigma_n_sq > 0:
            raise ValueError("sigma_n_sq must be strictly positive")

    @property
    def y_values(self) -> np.ndarray:
        return self.f_values / math.sqrt(self.sigma_n_sq)

    @property
    def R(self) -> int:
        return self.f_values.size


def var_phi(sample: FunctionalSample | np.ndarray) -> VarianceEstimate:
    """Sample variance of ``Phi_n`` with jackknife standard error."""
    values = sample.phi_values if isinstance(sample, FunctionalSample) else np.asarray(sample)
    if values is None or values.size < 100:
        raise TooFewReplicates("var_phi needs at least 100 replicates")
    return variance_with_stderr(values)


def functional_sample(
    paths: PathEnsemble | Iterable[PathEnsemble],
    s: HermiteSeries,
    m: CovarianceModel,
    with_phi: bool = True,
    phi_replicates: int | None = None,
) -> FunctionalSample:
    """Reduce an ensemble (or a stream of ensemble blocks) to a
    :class:`FunctionalSample`.  ``phi_replicates`` limits ``Phi_n`` to the
    first replicates, which is cheaper for large runs."""
    blocks = [paths] if isinstance(paths, PathEnsemble) else paths
    s = _centered_quiet(s)
    fs, phis = [], []
    n = None
    done = 0
    for blk in blocks:
        n = blk.n
        fs.append(compute_f(blk, s))
        if with_phi and (phi_replicates is None or done < phi_replicates):
            take = blk if phi_replicates is None else PathEnsemble(blk.data[: phi_replicates - done])
            phis.append(compute_phi(take, s, m))
        done += blk.R
    if n is None:
        raise InvalidSize("empty ensemble")
    return FunctionalSample(
        f_values=np.concatenate(fs),
        phi_values=np.concatenate(phis) if phis else None,
        sigma_n_sq=sigma_n_sq_exact(s, m, n),
        n=n,
        series_tag=s.tag,
        model_tag=m.tag,
    )


def phi_variance_h2(s: HermiteSeries, m: CovarianceModel, n: int) -> float:
    """Exact ``Var(Phi_n)`` for ``g = c H_2`` by the Gaussian fourth-moment
    (Wick) formula: ``Phi_n = (2c^2/n) X'Gamma X`` so the variance is
    ``8 c^4 tr(Gamma^4) / n^2``."""
    c = _centered_quiet(s).coeffs
    if c.size < 3 or np.any(np.delete(c, 2) != 0.0):
        raise ValueError("the Wick oracle only covers pure H_2 input")
    if n > 4096:
        raise InvalidSize("dense oracle limited to n <= 4096")
    gamma = toeplitz(rho_vector(m, n - 1))
    g2 = gamma @ gamma
    return 8.0 * c[2] ** 4 * float(np.sum(g2 * g2)) / n**2


def lag_covariance(s: HermiteSeries, m: CovarianceModel, k: int) -> float:
    """``Cov(g(X_0), g(X_k))``."""
    return cross_covariance(s, s, float(rho(m, k)))
