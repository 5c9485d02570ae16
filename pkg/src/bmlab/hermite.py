"""One-dimensional Hermite calculus over the standard Gaussian measure.

A function ``g`` in L2(gamma) is represented by its probabilists' Hermite
coefficients ``c_q`` (``g = sum_q c_q H_q``).  Every operator here acts on
that coefficient vector.  Internally the normalized basis
``h_q = H_q / sqrt(q!)`` is used for evaluation, since its three-term
recurrence stays bounded for large ``q`` where ``H_q`` itself overflows.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import (
    CorrelationOutOfRange,
    NonFiniteIntegrand,
    NoRank,
    SeriesParseError,
    ShiftExceedsRank,
)

DEFAULT_ORDER = 40
DEFAULT_RANK_TOL = 1e-8


def sqrt_factorials(Q: int) -> np.ndarray:
    """Return ``sqrt(q!)`` for ``q = 0..Q``, computed through log-gamma."""
    q = np.arange(Q + 1, dtype=float)
    return np.exp(0.5 * gammaln(q + 1.0))


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule on ``[-L, L]`` with the Gaussian density
    folded into the weights.

    Panels have width ``panel_width`` and start at ``-L``; ``L / panel_width``
    must be an integer so that 0 falls on a panel boundary.
    """

    panel_width: float = 0.5
    points_per_panel: int = 16
    domain_halfwidth: float = 12.0

    def __post_init__(self):
        if self.panel_width <= 0 or self.points_per_panel < 1:
            raise ValueError("panel_width and points_per_panel must be positive")
        if self.domain_halfwidth < 8:
            raise ValueError("domain_halfwidth must be at least 8")
        ratio = self.domain_halfwidth / self.panel_width
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("domain_halfwidth must be a multiple of panel_width")

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(x, w)`` with ``sum(w * f(x)) ~= E f(N)``."""
        return _gauss_nodes(self.panel_width, self.points_per_panel, self.domain_halfwidth)


@lru_cache(maxsize=16)
def _gauss_nodes(width, points, half):
    t, wt = np.polynomial.legendre.leggauss(points)
    n_panels = int(round(2 * half / width))
    left = -half + width * np.arange(n_panels)
    x = (left[:, None] + 0.5 * width * (t[None, :] + 1.0)).ravel()
    w = np.tile(0.5 * width * wt, n_panels)
    w = w * np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


DEFAULT_QUADRATURE = QuadratureSpec()


@dataclass(frozen=True, eq=False)
class HermiteSeries:
    """Truncated Hermite expansion ``sum_{q<=Q} c_q H_q``.

    Parameters
    ----------
    coeffs : array_like
        Coefficients ``(c_0, ..., c_Q)`` in the probabilists' basis.
    rank_tol : float
        Relative threshold below which a coefficient counts as zero.  The
        comparison is made on ``|c_q| sqrt(q!)`` against the largest such
        value of the series.
    """

    coeffs: np.ndarray
    rank_tol: float = DEFAULT_RANK_TOL
    tag: str = field(default="", compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.size == 0:
            c = np.zeros(1)
        if not np.all(np.isfinite(c)):
            raise ValueError("Hermite coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.rank_tol < 0:
            raise ValueError("rank_tol must be nonnegative")

    @classmethod
    def basis(cls, q: int, scale: float = 1.0, Q: int | None = None, **kw) -> "HermiteSeries":
        """The series ``scale * H_q`` truncated at order ``max(q, Q)``."""
        c = np.zeros(max(q, Q or 0) + 1)
        c[q] = scale
        return cls(c, **kw)

    @property
    def Q(self) -> int:
        return self.coeffs.size - 1

    @property
    def scaled(self) -> np.ndarray:
        """Coefficients in the orthonormal basis, ``c_q sqrt(q!)``."""
        return self.coeffs * sqrt_factorials(self.Q)

    @property
    def rank(self) -> int:
        return hermite_rank(self)

    def replace(self, coeffs) -> "HermiteSeries":
        return HermiteSeries(coeffs, rank_tol=self.rank_tol, tag=self.tag)

    def __call__(self, x):
        return evaluate(self, x)

    def __eq__(self, other):
        if not isinstance(other, HermiteSeries):
            return NotImplemented
        a, b = _aligned(self, other)
        return bool(np.array_equal(a, b))

    __hash__ = None

    def __repr__(self):
        nz = np.flatnonzero(self.coeffs)
        terms = ", ".join(f"c_{q}={self.coeffs[q]:.6g}" for q in nz[:6])
        more = ", ..." if nz.size > 6 else ""
        return f"HermiteSeries(Q={self.Q}, {terms}{more})"


def _aligned(a: HermiteSeries, b: HermiteSeries) -> tuple[np.ndarray, np.ndarray]:
    size = max(a.coeffs.size, b.coeffs.size)
    ca = np.zeros(size)
    cb = np.zeros(size)
    ca[: a.coeffs.size] = a.coeffs
    cb[: b.coeffs.size] = b.coeffs
    return ca, cb


def hermite_eval(q: int, x):
    """Probabilists' Hermite polynomial ``H_q(x)`` by three-term recurrence."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if q == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for m in range(1, q):
        prev, cur = cur, x * cur - m * prev
    return cur if cur.ndim else float(cur)


def normalized_basis(x, Q: int) -> np.ndarray:
    """Matrix of ``h_q(x) = H_q(x)/sqrt(q!)`` with shape ``x.shape + (Q+1,)``."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (Q + 1,))
    out[..., 0] = 1.0
    if Q >= 1:
        out[..., 1] = x
    for q in range(1, Q):
        out[..., q + 1] = (x * out[..., q] - np.sqrt(q) * out[..., q - 1]) / np.sqrt(q + 1)
    return out


def evaluate(s: HermiteSeries, x):
    """Evaluate the series at ``x`` in one pass of the normalized recurrence."""
    x = np.asarray(x, dtype=float)
    a = s.scaled
    total = np.full_like(x, a[0])
    if s.Q >= 1:
        prev = np.ones_like(x)
        cur = x.copy()
        total += a[1] * cur
        for q in range(1, s.Q):
            prev, cur = cur, (x * cur - np.sqrt(q) * prev) / np.sqrt(q + 1)
            if a[q + 1] != 0.0:
                total += a[q + 1] * cur
    return total if total.ndim else float(total)


def project(
    g: Callable,
    Q: int = DEFAULT_ORDER,
    quad: QuadratureSpec | None = None,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> HermiteSeries:
    """Hermite coefficients ``c_q = E[g(N) H_q(N)] / q!`` for ``q <= Q``.

    ``g`` is called on the full node array; scalar-only callables are
    vectorized automatically.
    """
    quad = quad or DEFAULT_QUADRATURE
    x, w = quad.nodes()
    try:
        values = np.asarray(g(x), dtype=float)
        if values.shape != x.shape:
            raise TypeError
    except TypeError:
        values = np.array([float(g(xi)) for xi in x])
    if not np.all(np.isfinite(values)):
        raise NonFiniteIntegrand("g returned non-finite values on quadrature nodes")
    basis = normalized_basis(x, Q)
    scaled = (w * values) @ basis
    return HermiteSeries(scaled / sqrt_factorials(Q), rank_tol=rank_tol)


def _zero_mask(s: HermiteSeries) -> np.ndarray:
    mag = np.abs(s.scaled)
    top = mag.max() if mag.size else 0.0
    return mag <= s.rank_tol * top


def hermite_rank(s: HermiteSeries) -> int:
    """Smallest ``q >= 1`` whose coefficient is above the rank threshold."""
    zero = _zero_mask(s)
    idx = np.flatnonzero(~zero[1:])
    if idx.size == 0:
        raise NoRank("no coefficient of order >= 1 exceeds rank_tol")
    return int(idx[0]) + 1


def centered(s: HermiteSeries) -> tuple[HermiteSeries, bool]:
    """Drop the constant term; the flag reports whether it was significant.

    A constant above the rank threshold triggers a warning, since the series
    then did not describe a centered functional.
    """
    if s.coeffs[0] == 0.0:
        return s, False
    significant = not _zero_mask(s)[0]
    c = s.coeffs.copy()
    c0, c[0] = c[0], 0.0
    if significant:
        warnings.warn(f"constant term c_0={c0:.6g} removed to center g", stacklevel=2)
    return s.replace(c), significant


def shift(s: HermiteSeries, k: int) -> HermiteSeries:
    """The operator ``T_k``: the coefficient of ``H_{m-k}`` becomes ``c_m``
    for ``m >= d``; orders below the rank contribute nothing."""
    if k < 1:
        raise ValueError("k must be >= 1")
    d = hermite_rank(s)
    if k > d:
        raise ShiftExceedsRank(f"shift order {k} exceeds Hermite rank {d}")
    c = np.zeros_like(s.coeffs)
    c[d - k : s.Q + 1 - k] = s.coeffs[d:]
    return s.replace(c)


def derivative(s: HermiteSeries) -> HermiteSeries:
    """``g'`` via ``H_q' = q H_{q-1}``."""
    c = np.zeros_like(s.coeffs)
    q = np.arange(1, s.Q + 1)
    c[: s.Q] = q * s.coeffs[1:]
    return s.replace(c)


def abs_series(s: HermiteSeries) -> HermiteSeries:
    return s.replace(np.abs(s.coeffs))


def cross_covariance(
    a: HermiteSeries, b: HermiteSeries, rho: float, include_zero: bool = False
) -> float:
    """``sum_q q! a_q b_q rho^q``, i.e. ``Cov(a(X), b(Y))`` for standard
    Gaussians with correlation ``rho``.  With ``include_zero`` the ``q = 0``
    term is kept and the result is the raw moment ``E[a(X) b(Y)]``.
    """
    rho = float(rho)
    if not -1.0 <= rho <= 1.0:
        raise CorrelationOutOfRange(f"rho={rho} outside [-1, 1]")
    ca, cb = _aligned(a, b)
    fact = sqrt_factorials(ca.size - 1)
    terms = (ca * fact) * (cb * fact) * rho ** np.arange(ca.size)
    if not include_zero:
        terms = terms[1:]
    return float(np.sum(terms))


def norm_sq(s: HermiteSeries, include_zero: bool = False) -> float:
    """``sum_q q! c_q^2``; same arithmetic path as ``cross_covariance(s, s, 1)``."""
    return cross_covariance(s, s, 1.0, include_zero=include_zero)


def ou_apply(s: HermiteSeries, t: float) -> HermiteSeries:
    """Ornstein-Uhlenbeck semigroup: ``c_q -> exp(-q t) c_q``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return s.replace(s.coeffs * np.exp(-t * np.arange(s.Q + 1)))


def L_apply(s: HermiteSeries) -> HermiteSeries:
    """Generator of the OU semigroup: ``c_q -> -q c_q``."""
    return s.replace(-np.arange(s.Q + 1) * s.coeffs)


def Linv_apply(s: HermiteSeries) -> HermiteSeries:
    """Pseudo-inverse of ``L``: ``c_q -> -c_q / q`` for ``q >= 1``, ``c_0 -> 0``."""
    c = np.zeros_like(s.coeffs)
    q = np.arange(1, s.Q + 1)
    c[1:] = -s.coeffs[1:] / q
    return s.replace(c)


def sobolev_norm(
    s: HermiteSeries, k: int, p: float, quad: QuadratureSpec | None = None
) -> float:
    """``(E|g|^p + sum_{i=1..k} E|D^i g|^p)^(1/p)`` under the Gaussian measure."""
    if k < 0 or p <= 1:
        raise ValueError("need k >= 0 and p > 1")
    x, w = (quad or DEFAULT_QUADRATURE).nodes()
    total = np.sum(w * np.abs(evaluate(s, x)) ** p)
    d = s
    for _ in range(k):
        d = derivative(d)
        total += np.sum(w * np.abs(evaluate(d, x)) ** p)
    return float(total ** (1.0 / p))


def lp_norm(s: HermiteSeries, p: float, quad: QuadratureSpec | None = None) -> float:
    """``E[|g(N)|^p]^(1/p)`` by quadrature."""
    x, w = (quad or DEFAULT_QUADRATURE).nodes()
    return float(np.sum(w * np.abs(evaluate(s, x)) ** p) ** (1.0 / p))


def tail_mass(s: HermiteSeries) -> float:
    """Heuristic estimate of the discarded mass ``sum_{q>Q} q! c_q^2``.

    A power law is fitted to the last five nonzero terms of ``q! c_q^2`` and
    summed beyond ``Q``.  Series whose last nonzero term sits at least five
    orders below ``Q`` are treated as exact polynomials (tail 0).  Returns
    ``inf`` when the fitted terms do not decay faster than ``1/q``.
    """
    terms = s.scaled ** 2
    nz = np.flatnonzero(~_zero_mask(s))
    nz = nz[nz >= 1]
    if nz.size < 5 or nz[-1] < s.Q - 4:
        return 0.0
    q = nz[-5:].astype(float)
    slope, intercept = np.polyfit(np.log(q), np.log(terms[nz[-5:]]), 1)
    if slope >= -1.0:
        return float("inf")
    spacing = (q[-1] - q[0]) / 4.0
    start = s.Q + 0.5
    return float(np.exp(intercept) * start ** (slope + 1.0) / (-(slope + 1.0)) / spacing)


def absx_series(p: float = 1.0, Q: int = DEFAULT_ORDER, quad: QuadratureSpec | None = None) -> HermiteSeries:
    """Centered ``|x|^p - E|N|^p``, projected numerically."""
    s = project(lambda x: np.abs(x) ** p, Q, quad)
    c = s.coeffs.copy()
    c[0] = 0.0
    return HermiteSeries(c, tag=f"absx:p={p:g}")


def _read_coeffs(path: Path) -> list[float]:
    out = []
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.extend(float(tok) for tok in line.replace(",", " ").split())
    return out


def parse_series(text: str, base_dir: str | Path | None = None, Q: int = DEFAULT_ORDER) -> HermiteSeries:
    """Parse ``h1``, ``h2``, ``absx:p=<real>`` or ``hermite:@file``.

    The file lists raw coefficients ``c_0, c_1, ...`` separated by commas,
    whitespace or newlines; ``#`` starts a comment.
    """
    text = text.strip()
    name, _, rest = text.partition(":")
    name = name.lower()
    try:
        if name in ("h1", "h2") and not rest:
            return HermiteSeries.basis(int(name[1]), tag=name)
        if name == "absx":
            key, _, val = rest.partition("=")
            if key.strip().lower() != "p":
                raise SeriesParseError(f"cannot parse function {text!r}")
            p = float(val)
            if not p > 0:
                raise SeriesParseError("absx needs p > 0")
            return absx_series(p, Q)
        if name == "hermite" and rest.startswith("@"):
            path = Path(rest[1:])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            coeffs = _read_coeffs(path)
            if not coeffs:
                raise SeriesParseError(f"{path}: no coefficients")
            return HermiteSeries(np.array(coeffs), tag=f"hermite:{path.name}")
    except SeriesParseError:
        raise
    except (ValueError, OSError) as exc:
        raise SeriesParseError(f"cannot parse function {text!r}: {exc}") from exc
    raise SeriesParseError(f"cannot parse function {text!r}")
