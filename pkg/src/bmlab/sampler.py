"""Exact simulation of stationary Gaussian sequences.

Paths are drawn by circulant embedding: the Toeplitz covariance of
``(X_1, ..., X_n)`` is embedded in a circulant matrix of size ``M`` (a power
of two, at least ``2(n-1)``) whose eigenvalues come from one FFT.  A
Hermitian-symmetric complex Gaussian vector scaled by the square-rooted
spectrum is inverted with a real FFT, which yields one exact path from ``M``
standard normals.

Replicate ``r`` always draws its normals from its own generator, seeded by
hashing ``(seed, r)``.  Batches have fixed boundaries, so the output does not
depend on how many worker threads ran them.
"""

from __future__ import annotations

import json
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy.linalg import cholesky, toeplitz

from .covariance import CovarianceModel, rho_vector
from .errors import DumpFormatError, EmbeddingNotPSD, InvalidSize, NotPSD

NEG_EIG_TOL = 1e-8
MAGIC = b"BMLB"
_HEADER = struct.Struct("<4sIII")
# target number of doubles per batch; batch size depends only on M
_BATCH_ELEMENTS = 1 << 21


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """``R`` independent replicates of ``(X_1, ..., X_n)`` stored row-wise."""

    data: np.ndarray
    seed: int = 0
    model_tag: str = ""
    first_replicate: int = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise InvalidSize("ensemble data must be a 2-D array")
        if not np.all(np.isfinite(data)):
            raise ValueError("ensemble contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def R(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


def worker_count() -> int:
    """Threads to use, from ``BML_THREADS`` or the hardware count."""
    env = os.environ.get("BML_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def replicate_rng(seed: int, r: int) -> np.random.Generator:
    """Independent stream for replicate ``r``, derived by hashing ``(seed, r)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(r),))))


def embedding_size(n: int) -> int:
    return 1 << max(1, (2 * (n - 1) - 1).bit_length())


def embed_spectrum(m: CovarianceModel, n: int) -> np.ndarray:
    """Eigenvalues of the minimal power-of-two circulant embedding."""
    if n < 2:
        raise InvalidSize("n must be >= 2")
    M = embedding_size(n)
    r = rho_vector(m, M // 2)
    row = np.concatenate([r, r[-2:0:-1]])
    return np.fft.fft(row).real


def _check_sizes(n, R):
    if n < 2 or R < 1:
        raise InvalidSize(f"need n >= 2 and R >= 1, got n={n}, R={R}")


def _batch_bounds(R: int, per_batch: int) -> list[tuple[int, int]]:
    return [(a, min(a + per_batch, R)) for a in range(0, R, per_batch)]


def _run_batches(fn, bounds, threads):
    threads = threads or worker_count()
    if threads == 1 or len(bounds) == 1:
        for b in bounds:
            yield b, fn(*b)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for i in range(0, len(bounds), threads):
            wave = bounds[i : i + threads]
            for b, out in zip(wave, pool.map(lambda ab: fn(*ab), wave)):
                yield b, out


def _circulant_factors(m, n):
    lam = embed_spectrum(m, n)
    if lam.min() < -NEG_EIG_TOL:
        raise EmbeddingNotPSD(
            f"circulant embedding of {m.tag} at n={n} has eigenvalue {lam.min():.3g}; use chol_sample"
        )
    lam = np.clip(lam, 0.0, None)
    M = lam.size
    half = M // 2
    amp = np.sqrt(lam[: half + 1] * M / 2.0)
    amp[0] = np.sqrt(lam[0] * M)
    amp[half] = np.sqrt(lam[half] * M)
    return M, amp


def _circulant_batch(M, amp, n, seed, a, b):
    half = M // 2
    out = np.empty((b - a, n))
    w = np.empty((b - a, half + 1), dtype=complex)
    for i, r in enumerate(range(a, b)):
        z = replicate_rng(seed, r).standard_normal(M)
        w[i, 0] = z[0]
        w[i, half] = z[1]
        w[i, 1:half].real = z[2::2]
        w[i, 1:half].imag = z[3::2]
    w *= amp
    out[:] = np.fft.irfft(w, n=M, axis=1)[:, :n]
    return out


def sample_batches(
    m: CovarianceModel,
    n: int,
    R: int,
    seed: int,
    threads: int | None = None,
    batch_size: int | None = None,
) -> Iterator[PathEnsemble]:
    """Yield the ensemble of :func:`sample` in consecutive replicate blocks.

    Lets callers reduce very large ensembles without holding them in memory.
    """
    _check_sizes(n, R)
    M, amp = _circulant_factors(m, n)
    per_batch = batch_size or max(1, _BATCH_ELEMENTS // M)
    fn = lambda a, b: _circulant_batch(M, amp, n, seed, a, b)  # noqa: E731
    for (a, _), block in _run_batches(fn, _batch_bounds(R, per_batch), threads):
        yield PathEnsemble(block, seed=seed, model_tag=m.tag, first_replicate=a)


def sample(m: CovarianceModel, n: int, R: int, seed: int, threads: int | None = None) -> PathEnsemble:
    """``R`` exact draws of ``N(0, Sigma)``, ``Sigma_ij = rho(i - j)``, by
    circulant embedding.

    Raises
    ------
    EmbeddingNotPSD
        If the embedding spectrum has an eigenvalue below ``-1e-8``.
    """
    blocks = [blk.data for blk in sample_batches(m, n, R, seed, threads)]
    return PathEnsemble(np.vstack(blocks), seed=seed, model_tag=m.tag)


def toeplitz_cholesky(m: CovarianceModel, n: int) -> np.ndarray:
    """Lower Cholesky factor of the ``n x n`` covariance, with a ``1e-12``
    diagonal jitter retry."""
    cov = toeplitz(rho_vector(m, n - 1))
    for jitter in (0.0, 1e-12):
        try:
            return cholesky(cov + jitter * np.eye(n), lower=True)
        except np.linalg.LinAlgError:
            continue
    raise NotPSD(f"covariance of {m.tag} at n={n} is not positive definite")


def chol_sample(m: CovarianceModel, n: int, R: int, seed: int, threads: int | None = None) -> PathEnsemble:
    """Reference sampler through the dense Cholesky factor; ``O(n^3)``."""
    _check_sizes(n, R)
    if n > 4096:
        raise InvalidSize("chol_sample is limited to n <= 4096")
    L = toeplitz_cholesky(m, n)

    def fn(a, b):
        z = np.vstack([replicate_rng(seed, r).standard_normal(n) for r in range(a, b)])
        return z @ L.T

    per_batch = max(1, _BATCH_ELEMENTS // n)
    blocks = [blk for _, blk in _run_batches(fn, _batch_bounds(R, per_batch), threads)]
    return PathEnsemble(np.vstack(blocks), seed=seed, model_tag=m.tag)


def empirical_autocorrelation(paths: PathEnsemble, max_lag: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-lag mean of ``X_i X_{i+k}`` over positions and replicates, with the
    standard error computed from the per-replicate averages."""
    x = paths.data
    est = np.empty(max_lag + 1)
    se = np.empty(max_lag + 1)
    for k in range(max_lag + 1):
        per_rep = np.mean(x[:, : x.shape[1] - k] * x[:, k:], axis=1)
        est[k] = per_rep.mean()
        se[k] = per_rep.std(ddof=1) / np.sqrt(x.shape[0]) if x.shape[0] > 1 else np.inf
    return est, se


def meta_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_ensemble(path: str | Path, paths: PathEnsemble, model: CovarianceModel | None = None) -> None:
    """Binary dump: 16-byte header (``BMLB``, u32 R, u32 n, u32 reserved)
    followed by little-endian float64 values, row-major."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, paths.R, paths.n, 0))
        fh.write(np.ascontiguousarray(paths.data, dtype="<f8").tobytes())
    meta = {
        "format": "BMLB",
        "R": paths.R,
        "n": paths.n,
        "seed": int(paths.seed),
        "model": model.tag if model is not None else paths.model_tag,
    }
    meta_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def read_ensemble(path: str | Path) -> PathEnsemble:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DumpFormatError(f"{path}: file shorter than header")
    magic, R, n, _ = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DumpFormatError(f"{path}: bad magic {magic!r}")
    body = raw[_HEADER.size :]
    if len(body) != 8 * R * n:
        raise DumpFormatError(f"{path}: expected {8 * R * n} data bytes, found {len(body)}")
    data = np.frombuffer(body, dtype="<f8").reshape(R, n).astype(np.float64)
    seed, tag = 0, ""
    mp = meta_path(path)
    if mp.exists():
        meta = json.loads(mp.read_text())
        seed, tag = meta.get("seed", 0), meta.get("model", "")
    return PathEnsemble(data, seed=seed, model_tag=tag)
