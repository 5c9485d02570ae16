"""Command-line driver: ``bmlab coeffs | rates | varphi | verify | sample``.

Options may also come from ``--config FILE`` holding ``key = value`` lines
(keys are the long option names).  A flag on the command line beats the file,
which beats the built-in default.

Exit codes: 0 success, 2 usage or parse error, 3 computation error, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import regime_rate, rhs_main, rhs_variance, stein_bound
from .covariance import CovarianceModel, parse_model
from .distance import (
    KOLMOGOROV_SCALE,
    DistanceMethod,
    calibration_floor,
    fit_rate,
    kolmogorov,
    tv_hist,
)
from .errors import BMLabError, DumpFormatError, ModelParseError, SeriesParseError
from .hermite import (
    HermiteSeries,
    _zero_mask,
    centered,
    hermite_rank,
    norm_sq,
    parse_series,
    project,
    tail_mass,
)
from .sampler import read_ensemble, sample, sample_batches, write_ensemble
from .statistic import functional_sample, var_phi
from .verify import SUITES, run_suites

EXIT_OK, EXIT_USAGE, EXIT_COMPUTE, EXIT_IO = 0, 2, 3, 4

DEFAULTS = {
    "g": "h2",
    "model": "white",
    "grid": "256,512,1024,2048,4096,8192",
    "replicates": 100_000,
    "seed": 0,
    "method": DistanceMethod.TV_HIST.value,
    "phi_replicates": 20_000,
    "allow_rank1": False,
    "out": None,
    "summary": None,
    "n": 1024,
    "suite": "all",
    "inspect": None,
}

_INT_KEYS = {"replicates", "seed", "phi_replicates", "n"}
_BOOL_KEYS = {"allow_rank1"}


class UsageError(BMLabError):
    """Bad option value or configuration file."""


# ---------------------------------------------------------------------------
# option handling


def read_config(path: str | Path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: expected a known key=value, got {line!r}")
        out[key] = val.strip()
    return out


def _coerce(key, val):
    if val is None or not isinstance(val, str):
        return val
    try:
        if key in _INT_KEYS:
            return int(val, 0)
        if key in _BOOL_KEYS:
            low = val.lower()
            if low not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(val)
            return low in ("1", "true", "yes")
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {val!r}") from exc
    return val


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags, config file and defaults (in that order of priority)."""
    file_opts = read_config(args.config) if getattr(args, "config", None) else {}
    merged = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            merged[key] = flag
        elif key in file_opts:
            merged[key] = _coerce(key, file_opts[key])
        else:
            merged[key] = default
    merged["base_dir"] = Path(args.config).parent if getattr(args, "config", None) else None
    return merged


def parse_grid(text: str) -> list[int]:
    """Comma-separated sizes; ``2^k`` tokens are accepted."""
    out = []
    for tok in str(text).replace(" ", "").split(","):
        if not tok:
            continue
        try:
            if "^" in tok:
                base, exp = tok.split("^")
                out.append(int(base) ** int(exp))
            else:
                out.append(int(tok))
        except ValueError as exc:
            raise UsageError(f"bad grid entry {tok!r}") from exc
    if not out or any(b <= a for a, b in zip(out, out[1:])) or out[0] < 2:
        raise UsageError("grid must be strictly increasing sizes >= 2")
    return out


def _series_for_experiment(opts) -> HermiteSeries:
    s = parse_series(opts["g"], opts["base_dir"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = centered(s)[0]
    d = hermite_rank(s)
    if d == 1 and not opts["allow_rank1"]:
        raise UsageError(f"{opts['g']} has Hermite rank 1; pass --allow-rank1 for the baseline run")
    if d > 2:
        raise UsageError(f"{opts['g']} has Hermite rank {d}; rate experiments need rank 2")
    return s


def _model(opts) -> CovarianceModel:
    return parse_model(opts["model"], opts["base_dir"])


# ---------------------------------------------------------------------------
# output helpers


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def write_csv(path, header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)
    return text


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def dump_json(obj, path=None, stream=None):
    text = json.dumps(obj, indent=2, default=_json_default, allow_nan=False) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        (stream or sys.stdout).write(text)


def _summary_target(opts):
    if opts["summary"]:
        return opts["summary"], None
    if opts["out"]:
        return str(opts["out"]) + ".summary.json", None
    return None, sys.stderr


def grid_seed(seed: int, n: int) -> int:
    """Independent seed per grid size, derived from ``(seed, n)``."""
    return int(np.random.SeedSequence([int(seed), int(n)]).generate_state(1, np.uint64)[0])


def model_alpha(m: CovarianceModel) -> float:
    """Decay exponent of ``|rho(k)|``; ``inf`` for short memory."""
    if m.kind == "power_law":
        return m.param
    if m.kind == "fgn" and m.param != 0.5:
        return 2.0 - 2.0 * m.param
    return math.inf


def _regime(m, n):
    a = model_alpha(m)
    if a <= 0.5:
        return math.nan
    return regime_rate(min(a, 2.0), n)


# ---------------------------------------------------------------------------
# commands


def cmd_coeffs(opts) -> int:
    spec = opts["g"]
    raw = parse_series(spec, opts["base_dir"])
    if raw.tag.startswith("absx:"):
        # show the constant that the parsed (centered) series dropped
        p = float(spec.split("=", 1)[1])
        raw = project(lambda x: np.abs(x) ** p)
    zero = _zero_mask(raw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s, c0_significant = centered(raw)
    rows = []
    for q in range(raw.Q + 1):
        if zero[q]:
            continue
        note = "centered away" if q == 0 else ""
        rows.append((q, raw.coeffs[q], raw.scaled[q], note))
    rank = hermite_rank(s)
    var = norm_sq(s)
    tail = tail_mass(s)
    if opts["out"]:
        write_csv(opts["out"], ["q", "c_q", "c_q_sqrt_qfact", "note"], rows)
    print(f"{'q':>4}  {'c_q':>24}  {'c_q*sqrt(q!)':>24}  note")
    for q, c, sc, note in rows:
        print(f"{q:>4}  {fmt(c):>24}  {fmt(sc):>24}  {note}")
    print(f"rank = {rank}")
    print(f"variance (sum q! c_q^2, q>=1) = {fmt(var)}")
    print(f"L2 norm = {fmt(math.sqrt(var))}")
    print(f"estimated truncated tail mass = {fmt(tail)}")
    if c0_significant:
        print(f"constant term c_0 = {fmt(raw.coeffs[0])} removed (centered away)")
    return EXIT_OK


RATES_HEADER = [
    "n",
    "sigma_n_sq",
    "dtv_value",
    "dtv_stderr",
    "ks_value",
    "bound_main_term1",
    "bound_main_term2",
    "bound_variance",
    "stein_bound",
    "regime_rate",
]


def run_rates(opts):
    """Rows and summary of the rates experiment (also used by the tests)."""
    s = _series_for_experiment(opts)
    m = _model(opts)
    grid = parse_grid(opts["grid"])
    R = int(opts["replicates"])
    if R < 1000:
        raise UsageError("distance runs need at least 1000 replicates")
    method = DistanceMethod(opts["method"])
    phi_R = min(R, int(opts["phi_replicates"]))
    rows, points = [], []
    for n in grid:
        sd = grid_seed(opts["seed"], n)
        fs = functional_sample(sample_batches(m, n, R, sd), s, m, phi_replicates=phi_R)
        y = fs.y_values
        tv = tv_hist(y, seed=sd)
        ks = kolmogorov(y)
        main = rhs_main(m, n)
        vp = var_phi(fs)
        sb = stein_bound(vp.variance, vp.stderr, fs.sigma_n_sq)
        rows.append(
            [n, fs.sigma_n_sq, tv.value, tv.stderr, ks.value, main.term1, main.term2,
             rhs_variance(m, n).total, sb.bound, _regime(m, n)]
        )
        points.append((n, tv) if method is DistanceMethod.TV_HIST else (n, ks))
    floor = calibration_floor(R) if method is DistanceMethod.TV_HIST else KOLMOGOROV_SCALE / math.sqrt(R)
    summary = {
        "g": opts["g"],
        "model": m.tag,
        "grid": grid,
        "replicates": R,
        "phi_replicates": phi_R,
        "seed": int(opts["seed"]),
        "method": method.value,
        "noise_floor": floor,
        "fitted_slope": None,
        "slope_ci": None,
        "fitted_constant": None,
        "dropped": [],
    }
    try:
        rep = fit_rate(points, floor=floor)
    except BMLabError as exc:
        summary["note"] = str(exc)
        summary["dropped"] = [n for n, est in points if est.value < 2.0 * floor]
    else:
        summary.update(
            fitted_slope=rep.slope,
            slope_ci=list(rep.slope_ci),
            fitted_constant=rep.fitted_constant,
            dropped=[p[0] for p in rep.dropped],
        )
    return rows, summary


def cmd_rates(opts) -> int:
    rows, summary = run_rates(opts)
    write_csv(opts["out"], RATES_HEADER, rows)
    path, stream = _summary_target(opts)
    dump_json(summary, path, stream)
    return EXIT_OK


VARPHI_HEADER = ["n", "var_phi", "var_phi_stderr", "rhs_variance", "ratio", "mean_phi_minus_sigma_n_sq", "mean_phi_stderr"]


def run_varphi(opts):
    s = _series_for_experiment(opts)
    m = _model(opts)
    R = int(opts["replicates"])
    rows = []
    for n in parse_grid(opts["grid"]):
        sd = grid_seed(opts["seed"], n)
        fs = functional_sample(sample_batches(m, n, R, sd), s, m)
        vp = var_phi(fs)
        rhs = rhs_variance(m, n).total
        phi = fs.phi_values
        rows.append(
            [n, vp.variance, vp.stderr, rhs, vp.variance / rhs, phi.mean() - fs.sigma_n_sq,
             phi.std(ddof=1) / math.sqrt(phi.size)]
        )
    return rows


def cmd_varphi(opts) -> int:
    write_csv(opts["out"], VARPHI_HEADER, run_varphi(opts))
    return EXIT_OK


def cmd_verify(opts) -> int:
    suite = opts["suite"]
    names = SUITES if suite == "all" else (suite,)
    if any(n not in SUITES for n in names):
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)} or all")
    report = run_suites(names, int(opts["seed"]))
    dump_json(report, opts["out"])
    for r in report["suites"]:
        failed = sum(not c["passed"] for c in r["cases"])
        print(f"{r['suite']}: {'PASS' if r['passed'] else 'FAIL'} ({len(r['cases'])} cases, {failed} failed)", file=sys.stderr)
    return EXIT_OK if report["passed"] else 1


def cmd_sample(opts) -> int:
    if opts["inspect"]:
        ens = read_ensemble(opts["inspect"])
        dump_json({"R": ens.R, "n": ens.n, "seed": ens.seed, "model": ens.model_tag})
        return EXIT_OK
    if not opts["out"]:
        raise UsageError("sample needs --out")
    m = _model(opts)
    ens = sample(m, int(opts["n"]), int(opts["replicates"]), int(opts["seed"]))
    write_ensemble(opts["out"], ens, m)
    return EXIT_OK


COMMANDS = {
    "coeffs": cmd_coeffs,
    "rates": cmd_rates,
    "varphi": cmd_varphi,
    "verify": cmd_verify,
    "sample": cmd_sample,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bmlab", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"bmlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *keys):
        sp.add_argument("--config", help="key=value file with default options")
        if "g" in keys:
            sp.add_argument("--g", help="h1, h2, absx:p=<real> or hermite:@file (default h2)")
        if "model" in keys:
            sp.add_argument("--model", help="white, ar1:phi=, powerlaw:alpha=, fgn:H= or table:@file")
        if "grid" in keys:
            sp.add_argument("--grid", help="comma-separated n values, 2^k allowed (default 2^8..2^13)")
        if "replicates" in keys:
            sp.add_argument("--replicates", "-R", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output file (default standard output)")
        if "allow_rank1" in keys:
            sp.add_argument("--allow-rank1", action="store_true", default=None, help="permit Hermite rank 1")

    sp = sub.add_parser("coeffs", help="Hermite coefficients of g")
    sp.add_argument("--config")
    sp.add_argument("--g")
    sp.add_argument("--out")

    sp = sub.add_parser("rates", help="distance to normal and bounds over an n grid")
    common(sp, "g", "model", "grid", "replicates", "allow_rank1")
    sp.add_argument("--method", choices=[m.value for m in DistanceMethod])
    sp.add_argument("--phi-replicates", type=int, help="replicates used for Var(Phi_n) (default 20000)")
    sp.add_argument("--summary", help="JSON summary path (default <out>.summary.json or stderr)")

    sp = sub.add_parser("varphi", help="Var(Phi_n) against its bound")
    common(sp, "g", "model", "grid", "replicates", "allow_rank1")

    sp = sub.add_parser("verify", help="run verification suites")
    sp.add_argument("suite", nargs="?", choices=SUITES + ("all",))
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="JSON report path (default standard output)")

    sp = sub.add_parser("sample", help="write a binary ensemble dump")
    common(sp, "model", "replicates")
    sp.add_argument("--n", type=int)
    sp.add_argument("--inspect", help="read and describe an existing dump instead")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except (UsageError, ModelParseError, SeriesParseError) as exc:
        print(f"bmlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DumpFormatError, OSError) as exc:
        print(f"bmlab: {exc}", file=sys.stderr)
        return EXIT_IO
    except (BMLabError, ValueError, ArithmeticError) as exc:
        print(f"bmlab: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
