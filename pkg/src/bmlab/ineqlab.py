"""Numerical checks of the inequalities behind the total-variation bound:
correlated-Gaussian covariance decay, convolution-type lattice sums, the
Stein equation and a vanishing lemma for normalized partial sums."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate, signal
from scipy.special import ndtr

from .covariance import CovarianceModel, partial_lp_sum, rho
from .errors import BadVector, HUnbounded, NotCentered
from .hermite import HermiteSeries, cross_covariance, evaluate, lp_norm
from .sampler import replicate_rng

# ---------------------------------------------------------------------------
# Gebelein


@dataclass(frozen=True)
class GebeleinCase:
    a: HermiteSeries
    b: HermiteSeries
    theta: float
    p: float = 2.0
    q: float = 2.0

    def __post_init__(self):
        if self.a.coeffs[0] != 0.0 or self.b.coeffs[0] != 0.0:
            raise NotCentered("Gebelein case needs centered series")
        if not -1.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [-1, 1]")
        if self.p <= 1 or self.q <= 1 or abs(1.0 / self.p + 1.0 / self.q - 1.0) > 1e-12:
            raise ValueError("p and q must be conjugate exponents")


class GebeleinExact(NamedTuple):
    cross_moment: float
    rhs: float
    ratio: float
    holds: bool


def gebelein_exact(case: GebeleinCase, constant: float = 1.0) -> GebeleinExact:
    """Exact ``E[F1(W) F2(theta W + sqrt(1-theta^2) W')]`` through Mehler's
    formula, against ``|theta| ||F1||_p ||F2||_q``.

    ``constant`` is the multiplier applied to the right-hand side in
    ``holds``; the reported ``ratio`` is free of it.
    """
    cm = cross_covariance(case.a, case.b, case.theta)
    rhs = abs(case.theta) * lp_norm(case.a, case.p) * lp_norm(case.b, case.q)
    ratio = abs(cm) / rhs if rhs > 0 else (0.0 if cm == 0 else math.inf)
    return GebeleinExact(cm, rhs, ratio, abs(cm) <= constant * rhs + 1e-15)


class MCEstimate(NamedTuple):
    estimate: float
    stderr: float


def gebelein_mc(case: GebeleinCase, R: int, seed: int) -> MCEstimate:
    """Monte Carlo mean of ``F1(W) F2(theta W + sqrt(1-theta^2) W')``."""
    if R < 10_000:
        raise ValueError("gebelein_mc needs R >= 10^4")
    rng = replicate_rng(seed, 0)
    w = rng.standard_normal(R)
    w_hat = rng.standard_normal(R)
    t = case.theta
    prod = evaluate(case.a, w) * evaluate(case.b, t * w + math.sqrt(1.0 - t * t) * w_hat)
    return MCEstimate(float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(R)))


def gebelein_envelope_holds(a: HermiteSeries, b: HermiteSeries, thetas) -> bool:
    """``|cov(theta)| <= |theta| cov(1)`` when every ``a_q b_q >= 0``."""
    top = cross_covariance(a, b, 1.0)
    return all(abs(cross_covariance(a, b, t)) <= abs(t) * top * (1 + 1e-12) + 1e-15 for t in thetas)


# ---------------------------------------------------------------------------
# lattice sums


@dataclass(frozen=True, eq=False)
class SumLemmaCase:
    """``f`` on ``-n..n`` with signs ``v``.

    ``f_source`` is a covariance model (``f = |rho|``, evaluated at any lag)
    or an explicit nonnegative vector indexed ``-n..n`` (zero outside).
    """

    M: int
    v: tuple
    n: int
    f_source: CovarianceModel | np.ndarray

    def __post_init__(self):
        if self.M < 2 or len(self.v) != self.M:
            raise BadVector("v must have M >= 2 entries")
        if any(x not in (-1, 0, 1) for x in self.v):
            raise BadVector("v entries must be -1, 0 or 1")
        if self.n < 1:
            raise ValueError("window n must be >= 1")
        if not isinstance(self.f_source, CovarianceModel):
            f = np.asarray(self.f_source, dtype=float)
            if f.shape != (2 * self.n + 1,) or np.any(f < 0):
                raise ValueError("explicit f must be nonnegative with length 2n+1")

    def f_at(self, k) -> np.ndarray:
        k = np.asarray(k)
        if isinstance(self.f_source, CovarianceModel):
            return np.abs(rho(self.f_source, k))
        f = np.asarray(self.f_source, dtype=float)
        out = np.zeros(k.shape)
        inside = np.abs(k) <= self.n
        out[inside] = f[k[inside] + self.n]
        return out

    def window(self) -> np.ndarray:
        return self.f_at(np.arange(-self.n, self.n + 1))


class SumLemmaResult(NamedTuple):
    lhs: float
    rhs_unit: float
    ratio: float


def _result(lhs: float, rhs: float) -> SumLemmaResult:
    if rhs > 0:
        return SumLemmaResult(lhs, rhs, lhs / rhs)
    return SumLemmaResult(lhs, rhs, 0.0 if lhs == 0 else math.inf)


def _signed_sum_weights(weights: Sequence[np.ndarray], v: Sequence[int], n: int):
    """Distribution of ``k . v`` under product weights on ``[-n, n]^M``:
    returns ``(offset, w)`` with ``w[i]`` the mass at ``i - offset`` and the
    scalar factor contributed by coordinates with ``v_j = 0``."""
    factor = 1.0
    dist = np.ones(1)
    for wj, vj in zip(weights, v):
        if vj == 0:
            factor *= float(wj.sum())
        else:
            dist = signal.convolve(dist, wj if vj == 1 else wj[::-1])
    active = sum(1 for vj in v if vj != 0)
    return active * n, dist, factor


def _lattice_sum(weights, v, n, outer: Callable) -> float:
    offset, dist, factor = _signed_sum_weights(weights, v, n)
    s = np.arange(dist.size) - offset
    return factor * float(np.dot(dist, outer(s)))


def _lattice_sum_brute(weights, v, n, outer: Callable) -> float:
    total = 0.0
    for ks in itertools.product(range(-n, n + 1), repeat=len(v)):
        w = 1.0
        for wj, k in zip(weights, ks):
            w *= wj[k + n]
        total += w * float(outer(np.array(sum(a * b for a, b in zip(v, ks)))))
    return total


def check_lemma_2_1(case: SumLemmaCase, brute: bool = False) -> SumLemmaResult:
    """``sum_k f(k . v) prod_j f(k_j)`` over ``[-n, n]^M`` against
    ``(sum_k f(k)^(1 + 1/M))^M``; ``v`` must be all ``+-1``."""
    if case.M > 4:
        raise BadVector("M is limited to 4")
    if any(x == 0 for x in case.v):
        raise BadVector("v components must be 1 or -1")
    f = case.window()
    weights = [f] * case.M
    fn = _lattice_sum_brute if brute else _lattice_sum
    lhs = fn(weights, case.v, case.n, case.f_at)
    rhs = float(np.sum(f ** (1.0 + 1.0 / case.M)) ** case.M)
    return _result(lhs, rhs)


def check_lemma_2_2(case: SumLemmaCase, brute: bool = False) -> SumLemmaResult:
    """``sum_k rho(k_1)^2 |rho(k . v)| prod_{j>=2} |rho(k_j)|`` against
    ``S_1(n)^(M-2)``; ``v`` needs at least two nonzero entries."""
    if case.M > 4 or case.M < 3:
        raise BadVector("M must be 3 or 4")
    if sum(1 for x in case.v if x != 0) < 2:
        raise BadVector("v needs at least two nonzero components")
    f = case.window()
    weights = [f * f] + [f] * (case.M - 1)
    fn = _lattice_sum_brute if brute else _lattice_sum
    lhs = fn(weights, case.v, case.n, case.f_at)
    s1 = float(np.sum(f))
    rhs = s1 ** (case.M - 2)
    return _result(lhs, rhs)


# ---------------------------------------------------------------------------
# Stein equation


class TestFunction(NamedTuple):
    """A bounded test function with the points where it jumps or kinks."""

    __test__ = False  # not a pytest class

    func: Callable
    breakpoints: tuple = ()
    name: str = ""

    def __call__(self, x):
        return self.func(x)


def indicator(z: float) -> TestFunction:
    return TestFunction(lambda x: (np.asarray(x) <= z).astype(float), (z,), f"1(x<={z:g})")


class SteinSolution(NamedTuple):
    f_values: np.ndarray
    fprime_values: np.ndarray
    sup_f: float
    sup_fprime: float
    ode_residual: float
    mean_h: float


def _expect(h: TestFunction) -> float:
    pts = sorted(h.breakpoints)
    edges = [-np.inf] + pts + [np.inf]
    dens = lambda y: float(h(np.array(y))) * math.exp(-0.5 * y * y) / math.sqrt(2 * math.pi)  # noqa: E731
    return sum(integrate.quad(dens, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)[0] for a, b in zip(edges[:-1], edges[1:]))


def _stein_value(h: TestFunction, mean_h: float, x: float) -> float:
    # x <= 0: integrate y = x - t; x > 0: use the right tail, y = x + t.
    # Both kernels are bounded by 1, so nothing overflows.
    if x <= 0:
        kern = lambda t: (float(h(np.array(x - t))) - mean_h) * math.exp(x * t - 0.5 * t * t)  # noqa: E731
        pts = [x - b for b in h.breakpoints if b < x]
        sign = 1.0
    else:
        kern = lambda t: (float(h(np.array(x + t))) - mean_h) * math.exp(-x * t - 0.5 * t * t)  # noqa: E731
        pts = [b - x for b in h.breakpoints if b > x]
        sign = -1.0
    edges = [0.0] + sorted(pts) + [np.inf]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += integrate.quad(kern, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return sign * total


def stein_solution(h: Callable, x_grid, step: float = 1e-5) -> SteinSolution:
    """Bounded solution ``f_h`` of ``f'(x) - x f(x) = h(x) - E h(N)``.

    ``f'`` is read off the equation.  ``ode_residual`` compares it with a
    central difference of ``f`` of half-width ``step``; grid points within
    ``2 step`` of a breakpoint of ``h`` are skipped, since ``f'`` jumps there.
    """
    if not isinstance(h, TestFunction):
        h = TestFunction(h)
    x = np.asarray(x_grid, dtype=float)
    hx = np.asarray(h(x), dtype=float)
    if np.any(np.abs(hx) > 1.0 + 1e-12):
        raise HUnbounded("test function must satisfy |h| <= 1 on the grid")
    mean_h = _expect(h)
    f = np.array([_stein_value(h, mean_h, xi) for xi in x])
    fprime = x * f + hx - mean_h
    bp = np.asarray(h.breakpoints, dtype=float)
    residual = 0.0
    for xi, fpi in zip(x, fprime):
        if bp.size and np.min(np.abs(bp - xi)) < 2 * step:
            continue
        num = (_stein_value(h, mean_h, xi + step) - _stein_value(h, mean_h, xi - step)) / (2 * step)
        residual = max(residual, abs(num - fpi))
    return SteinSolution(f, fprime, float(np.max(np.abs(f))), float(np.max(np.abs(fprime))), residual, mean_h)


def stein_indicator_closed_form(z: float, x) -> np.ndarray:
    """``sqrt(2 pi) e^{x^2/2} Phi(min(x,z)) (1 - Phi(max(x,z)))``."""
    x = np.asarray(x, dtype=float)
    lo, hi = np.minimum(x, z), np.maximum(x, z)
    return math.sqrt(2 * math.pi) * np.exp(0.5 * x * x) * ndtr(lo) * ndtr(-hi)


# ---------------------------------------------------------------------------
# vanishing lemma


class VanishingResult(NamedTuple):
    n_grid: np.ndarray
    t_values: np.ndarray
    condition_holds: bool


def vanishing_sequence(m: CovarianceModel, alpha: float, beta: float, gamma_exp: float, n_grid) -> VanishingResult:
    """``T_n = n^-gamma (sum_{|k|<n} |rho(k)|^alpha)^beta`` on the grid, with
    the sufficient condition ``(2 - alpha)/2 <= gamma/beta`` for ``T_n -> 0``."""
    if not 0 < alpha < 2 or beta <= 0 or gamma_exp <= 0:
        raise ValueError("need 0 < alpha < 2 and beta, gamma > 0")
    ns = np.asarray(n_grid, dtype=np.int64)
    t = np.array([n ** -gamma_exp * partial_lp_sum(m, alpha, int(n) - 1) ** beta for n in ns])
    return VanishingResult(ns, t, (2.0 - alpha) / 2.0 <= gamma_exp / beta + 1e-15)

