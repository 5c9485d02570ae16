"""Verification suites behind ``bmlab verify``.

Each suite returns ``{"suite", "passed", "cases"}``; a case is a flat dict
with its own ``passed`` flag so the JSON report stays easy to scan.
"""

from __future__ import annotations

import math

import numpy as np

from .covariance import CovarianceModel, logconvexity_check, rho_vector
from .hermite import HermiteSeries, absx_series
from .ineqlab import (
    GebeleinCase,
    SumLemmaCase,
    TestFunction,
    check_lemma_2_1,
    check_lemma_2_2,
    gebelein_envelope_holds,
    gebelein_exact,
    gebelein_mc,
    indicator,
    stein_solution,
    vanishing_sequence,
)
from .sampler import chol_sample, empirical_autocorrelation, sample

SUITES = ("gebelein", "sums", "stein", "vanishing", "logconvex", "sampler")

THETAS = (-0.9, -0.5, 0.0, 0.3, 0.7, 1.0)
SUP_F = math.sqrt(math.pi / 2.0)
SUP_FPRIME = 2.0


def default_models() -> dict[str, CovarianceModel]:
    return {
        "white": CovarianceModel.white_noise(),
        "ar1:phi=0.5": CovarianceModel.ar1(0.5),
        "powerlaw:alpha=0.75": CovarianceModel.power_law(0.75),
        "powerlaw:alpha=1.5": CovarianceModel.power_law(1.5),
        "fgn:H=0.7": CovarianceModel.fgn(0.7),
    }


def _report(suite, cases):
    return {"suite": suite, "passed": all(c["passed"] for c in cases), "cases": cases}


def gebelein_suite(seed: int = 0, R: int = 100_000, thetas=THETAS) -> dict:
    series = {
        "h1": HermiteSeries.basis(1),
        "h2": HermiteSeries.basis(2),
        "absx": absx_series(1.0, Q=20),
    }
    cases = []
    names = list(series)
    for i, na in enumerate(names):
        for nb in names[i:]:
            for t in thetas:
                case = GebeleinCase(series[na], series[nb], t)
                ex = gebelein_exact(case)
                mc = gebelein_mc(case, R, seed)
                dev = abs(mc.estimate - ex.cross_moment)
                cases.append(
                    {
                        "a": na,
                        "b": nb,
                        "theta": t,
                        "exact": ex.cross_moment,
                        "mc": mc.estimate,
                        "mc_stderr": mc.stderr,
                        "ratio": ex.ratio,
                        "passed": bool(dev <= 3.0 * mc.stderr + 1e-12),
                    }
                )
            a, b = series[na], series[nb]
            nonneg = bool(np.all(a.coeffs[: min(a.Q, b.Q) + 1] * b.coeffs[: min(a.Q, b.Q) + 1] >= 0))
            if nonneg:
                grid = np.linspace(-1.0, 1.0, 41)
                cases.append({"a": na, "b": nb, "check": "envelope", "passed": gebelein_envelope_holds(a, b, grid)})
    return _report("gebelein", cases)


def _ratio_case(name, results):
    ratios = [r.ratio for r in results]
    cap = 3.0 * ratios[0]
    return {
        "lemma": name,
        "ratios": ratios,
        "cap": cap,
        "passed": bool(all(r.lhs <= cap * r.rhs_unit * (1 + 1e-12) for r in results)),
    }


def sums_suite(n_grid=tuple(2**e for e in range(6, 12))) -> dict:
    cases = []
    # convolution path against brute-force enumeration
    for label, m in (("powerlaw:alpha=0.75", CovarianceModel.power_law(0.75)), ("ar1:phi=0.5", CovarianceModel.ar1(0.5))):
        for n in (1, 4, 12):
            for M in (2, 3):
                for v in ((1,) * M, (1, -1) + (1,) * (M - 2), (-1,) * M):
                    c = SumLemmaCase(M, v, n, m)
                    fast, slow = check_lemma_2_1(c).lhs, check_lemma_2_1(c, brute=True).lhs
                    cases.append(
                        {"lemma": "2.1", "model": label, "M": M, "v": list(v), "n": n, "conv": fast, "brute": slow,
                         "passed": bool(abs(fast - slow) <= 1e-12 * abs(slow))}
                    )
            for v in ((1, 1, 1), (1, -1, 0), (0, 1, 1)):
                c = SumLemmaCase(3, v, n, m)
                fast, slow = check_lemma_2_2(c).lhs, check_lemma_2_2(c, brute=True).lhs
                cases.append(
                    {"lemma": "2.2", "model": label, "M": 3, "v": list(v), "n": n, "conv": fast, "brute": slow,
                     "passed": bool(abs(fast - slow) <= 1e-12 * abs(slow))}
                )
    # boundedness over the grid
    for label, m in default_models().items():
        for M in (2, 3, 4):
            v = (1,) * M
            res = [check_lemma_2_1(SumLemmaCase(M, v, n, m)) for n in n_grid]
            cases.append({**_ratio_case("2.1", res), "model": label, "M": M})
        for M in (3, 4):
            v = (1,) * M
            res = [check_lemma_2_2(SumLemmaCase(M, v, n, m)) for n in n_grid]
            cases.append({**_ratio_case("2.2", res), "model": label, "M": M})
    return _report("sums", cases)


def _clipped_sine() -> TestFunction:
    # kinks where 2 sin x = +-1
    kinks = sorted(
        s * math.pi / 6 + 2 * math.pi * j + off
        for j in range(-3, 4)
        for s, off in ((1, 0.0), (-1, math.pi), (-1, 0.0), (1, -math.pi))
    )
    return TestFunction(lambda x: np.clip(2.0 * np.sin(x), -1.0, 1.0), tuple(kinks), "clip(2 sin x)")


def stein_battery() -> list[TestFunction]:
    return [indicator(z) for z in (-2.0, -1.0, 0.0, 1.0, 2.0)] + [
        TestFunction(np.tanh, (), "tanh"),
        _clipped_sine(),
    ]


def stein_suite(x_grid=None) -> dict:
    x = np.linspace(-6.0, 6.0, 241) if x_grid is None else np.asarray(x_grid)
    cases = []
    for h in stein_battery():
        sol = stein_solution(h, x)
        cases.append(
            {
                "h": h.name,
                "sup_f": sol.sup_f,
                "sup_fprime": sol.sup_fprime,
                "ode_residual": sol.ode_residual,
                "passed": bool(
                    sol.sup_f <= SUP_F + 1e-9 and sol.sup_fprime <= SUP_FPRIME + 1e-6 and sol.ode_residual <= 1e-6
                ),
            }
        )
    return _report("stein", cases)


VANISHING_TRIPLES = ((1.0, 0.5, 0.5), (4.0 / 3.0, 1.5, 0.5))


def vanishing_suite(n_grid=tuple(2**e for e in range(4, 17))) -> dict:
    cases = []
    for label, m in default_models().items():
        for a, b, g in VANISHING_TRIPLES:
            res = vanishing_sequence(m, a, b, g, n_grid)
            t = res.t_values
            tail = t[len(t) // 2 :]
            decays = bool(t[-1] < t[0] and np.all(np.diff(tail) <= 1e-15 * tail[:-1]))
            cases.append(
                {
                    "model": label,
                    "alpha": a,
                    "beta": b,
                    "gamma": g,
                    "condition_holds": res.condition_holds,
                    "t_first": float(t[0]),
                    "t_last": float(t[-1]),
                    "passed": bool(res.condition_holds and decays),
                }
            )
    return _report("vanishing", cases)


def logconvex_suite(n_grid=tuple(2**e for e in range(0, 17))) -> dict:
    models = default_models()
    models.update({"powerlaw:alpha=0.6": CovarianceModel.power_law(0.6), "fgn:H=0.9": CovarianceModel.fgn(0.9)})
    cases = []
    for label, m in models.items():
        checks = [logconvexity_check(m, n) for n in n_grid]
        cases.append(
            {
                "model": label,
                "max_lhs_over_rhs": max(c.lhs / c.rhs for c in checks),
                "passed": all(c.holds for c in checks),
            }
        )
    return _report("logconvex", cases)


def sampler_suite(seed: int = 0, n: int = 256, R: int = 20_000, max_lag: int = 20, tol: float = 0.01) -> dict:
    cases = []
    for label, m in default_models().items():
        ens = sample(m, n, R, seed)
        est, _ = empirical_autocorrelation(ens, max_lag)
        err = float(np.max(np.abs(est - rho_vector(m, max_lag))))
        cases.append({"model": label, "check": "autocorrelation", "max_abs_error": err, "passed": err <= tol})
    m = CovarianceModel.power_law(0.75)
    a = sample(m, 64, 64, seed, threads=1).data
    b = sample(m, 64, 64, seed, threads=3).data
    cases.append({"model": "powerlaw:alpha=0.75", "check": "thread_reproducible", "passed": bool(np.array_equal(a, b))})
    fft = empirical_autocorrelation(sample(m, 64, 4000, seed), 10)
    chol = empirical_autocorrelation(chol_sample(m, 64, 4000, seed + 1), 10)
    z = np.abs(fft[0] - chol[0]) / np.hypot(fft[1], chol[1])
    cases.append({"model": "powerlaw:alpha=0.75", "check": "fft_vs_cholesky", "max_z": float(z.max()), "passed": bool(z.max() <= 4.0)})
    return _report("sampler", cases)


def run_suite(name: str, seed: int = 0) -> dict:
    if name == "gebelein":
        return gebelein_suite(seed)
    if name == "sums":
        return sums_suite()
    if name == "stein":
        return stein_suite()
    if name == "vanishing":
        return vanishing_suite()
    if name == "logconvex":
        return logconvex_suite()
    if name == "sampler":
        return sampler_suite(seed)
    raise ValueError(f"unknown suite {name!r}")


def run_suites(names, seed: int = 0) -> dict:
    reports = [run_suite(n, seed) for n in names]
    return {"seed": seed, "passed": all(r["passed"] for r in reports), "suites": reports}
