"""Stationary covariance families and their l^p partial sums."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ModelParseError

KINDS = ("power_law", "fgn", "ar1", "white_noise", "table")


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Covariance ``rho(k)`` of a unit-variance stationary Gaussian sequence.

    Use the constructors :meth:`power_law`, :meth:`fgn`, :meth:`ar1`,
    :meth:`white_noise` and :meth:`table` rather than the raw fields.
    """

    kind: str
    param: float = 0.0
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.kind == "power_law" and not self.param > 0:
            raise ValueError("power_law needs alpha > 0")
        if self.kind == "fgn" and not 0 < self.param < 1:
            raise ValueError("fgn needs H in (0, 1)")
        if self.kind == "ar1" and not -1 < self.param < 1:
            raise ValueError("ar1 needs phi in (-1, 1)")
        if self.kind == "table":
            v = np.array(self.values, dtype=float).ravel()
            if v.size == 0 or v[0] != 1.0:
                raise ValueError("table must start with rho(0) = 1")
            if np.any(np.abs(v) > 1.0) or not np.all(np.isfinite(v)):
                raise ValueError("table values must lie in [-1, 1]")
            v.setflags(write=False)
            object.__setattr__(self, "values", v)

    @classmethod
    def power_law(cls, alpha: float) -> "CovarianceModel":
        """``rho(k) = (1 + |k|)^(-alpha)``."""
        return cls("power_law", float(alpha))

    @classmethod
    def fgn(cls, hurst: float) -> "CovarianceModel":
        """Fractional Gaussian noise with Hurst index ``hurst``."""
        return cls("fgn", float(hurst))

    @classmethod
    def ar1(cls, phi: float) -> "CovarianceModel":
        return cls("ar1", float(phi))

    @classmethod
    def white_noise(cls) -> "CovarianceModel":
        return cls("white_noise")

    @classmethod
    def table(cls, values) -> "CovarianceModel":
        """Finite table ``rho(0), rho(1), ...``; lags past the end are 0."""
        return cls("table", values=np.asarray(values, dtype=float))

    @property
    def tag(self) -> str:
        if self.kind == "power_law":
            return f"powerlaw:alpha={self.param:g}"
        if self.kind == "fgn":
            return f"fgn:H={self.param:g}"
        if self.kind == "ar1":
            return f"ar1:phi={self.param:g}"
        if self.kind == "white_noise":
            return "white"
        return f"table:len={self.values.size}"

    def __call__(self, k):
        return rho(self, k)

    def __eq__(self, other):
        if not isinstance(other, CovarianceModel):
            return NotImplemented
        if self.kind != other.kind or self.param != other.param:
            return False
        if self.kind == "table":
            return bool(np.array_equal(self.values, other.values))
        return True

    __hash__ = None

    def __repr__(self):
        return f"CovarianceModel({self.tag})"


def rho(m: CovarianceModel, k):
    """Covariance at integer lag(s) ``k``; symmetric in ``k``."""
    scalar = np.ndim(k) == 0
    k = np.abs(np.asarray(k, dtype=np.int64))
    kf = k.astype(float)
    if m.kind == "power_law":
        out = (1.0 + kf) ** (-m.param)
    elif m.kind == "ar1":
        out = m.param ** kf
    elif m.kind == "white_noise":
        out = (k == 0).astype(float)
    elif m.kind == "table":
        out = np.zeros(k.shape)
        inside = k < m.values.size
        out[inside] = m.values[k[inside]]
    else:
        out = _fgn_rho(m.param, kf)
    return float(out) if scalar else out


def _fgn_rho(hurst: float, k: np.ndarray) -> np.ndarray:
    two_h = 2.0 * hurst
    out = np.empty(k.shape)
    small = k < 2
    ks = k[small]
    out[small] = 0.5 * (np.abs(ks + 1) ** two_h - 2 * ks ** two_h + np.abs(ks - 1) ** two_h)
    kb = k[~small]
    # factor k^{2H} out so the second difference does not cancel at large lags
    inv = 1.0 / kb
    out[~small] = 0.5 * kb ** two_h * (
        np.expm1(two_h * np.log1p(inv)) + np.expm1(two_h * np.log1p(-inv))
    )
    return out


def rho_vector(m: CovarianceModel, n: int) -> np.ndarray:
    """``rho(0), ..., rho(n)``."""
    return rho(m, np.arange(n + 1))


def partial_lp_sum(m: CovarianceModel, p: float, n: int) -> float:
    """``S_p(n) = sum_{|k|<=n} |rho(k)|^p``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    r = np.abs(rho_vector(m, n))
    return float(r[0] ** p + 2.0 * np.sum(r[1:] ** p))


def partial_lp_sums(m: CovarianceModel, p: float, ns) -> np.ndarray:
    """``S_p(n)`` for every ``n`` in ``ns`` from a single cumulative sum."""
    ns = np.asarray(ns, dtype=np.int64)
    r = np.abs(rho_vector(m, int(ns.max()))) ** p
    cum = np.cumsum(r)
    return 2.0 * cum[ns] - r[0]


class SummabilityResult(NamedTuple):
    holds: bool
    tail_exponent: float


def summability_check(m: CovarianceModel, d: int) -> SummabilityResult:
    """Whether ``sum_k |rho(k)|^d`` is finite, with the decay exponent of
    ``|rho(k)|^d`` as evidence (``inf`` for geometric or finite support)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if m.kind == "power_law":
        e = m.param * d
    elif m.kind == "fgn":
        e = math.inf if m.param == 0.5 else d * (2.0 - 2.0 * m.param)
    else:
        e = math.inf
    return SummabilityResult(e > 1.0, e)


class LogConvexity(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def logconvexity_check(m: CovarianceModel, n: int) -> LogConvexity:
    """Compare ``S_{4/3}^{3/4}`` with ``S_1^{1/2} S_2^{1/4}``."""
    lhs = partial_lp_sum(m, 4.0 / 3.0, n) ** 0.75
    rhs = partial_lp_sum(m, 1.0, n) ** 0.5 * partial_lp_sum(m, 2.0, n) ** 0.25
    return LogConvexity(lhs, rhs, lhs <= rhs + 1e-12)


def parse_model(text: str, base_dir: str | Path | None = None) -> CovarianceModel:
    """Parse ``powerlaw:alpha=0.75``, ``fgn:H=0.7``, ``ar1:phi=0.5``,
    ``white`` or ``table:@file.csv``."""
    text = text.strip()
    name, _, rest = text.partition(":")
    name = name.lower()
    try:
        if name in ("white", "white_noise"):
            return CovarianceModel.white_noise()
        if name == "table":
            if not rest.startswith("@"):
                raise ModelParseError("table model needs table:@file")
            path = Path(rest[1:])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            values = [float(line.split(",")[0]) for line in path.read_text().splitlines() if line.strip()]
            return CovarianceModel.table(values)
        key, _, val = rest.partition("=")
        expected = {"powerlaw": "alpha", "power_law": "alpha", "fgn": "h", "ar1": "phi"}
        if name not in expected or key.strip().lower() != expected[name]:
            raise ModelParseError(f"cannot parse covariance model {text!r}")
        x = float(val)
        if name in ("powerlaw", "power_law"):
            return CovarianceModel.power_law(x)
        if name == "fgn":
            return CovarianceModel.fgn(x)
        return CovarianceModel.ar1(x)
    except ModelParseError:
        raise
    except (ValueError, OSError) as exc:
        raise ModelParseError(f"cannot parse covariance model {text!r}: {exc}") from exc
