"""
Monte Carlo ground truth for moments and application metrics.

Trials are grouped into fixed blocks of ``BLOCK`` draws. Block ``b``
takes its randomness from a Philox stream keyed by the seed with the
block index in the high counter word, so the draws for trial ``t``
depend only on ``(seed, t)``. Blocks reduce to ``(count, mean, M2)``
and are merged in block order, so the estimate is bit-identical for
any number of worker threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import DimensionError, OrderOutOfRange, SingularSample
from .spectra import CorrelationMatrix, Spectrum, complex_gaussian

__all__ = [
    "BLOCK",
    "MomentEstimate",
    "block_generator",
    "default_workers",
    "sample_gram",
    "mc_empirical_moment",
    "mc_blue_error",
    "mc_lmmse_error",
    "mc_scm_loss",
    "mc_application_metric",
]

BLOCK = 2048
MAX_SAMPLE_COND = 1e14
THREADS_ENV = "GRAM_MOMENTS_THREADS"


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    std_error: float
    trials: int
    seed: int
    r: int = 0

    def z_score(self, exact: float) -> float:
        if self.std_error == 0.0:
            return 0.0 if exact == self.mean else float("inf")
        return (self.mean - exact) / self.std_error


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def block_generator(seed: int, block: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(block)]))


def sample_gram(s: Spectrum, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw ``H^* diag(theta) H`` with ``H`` ``n x m`` unit-variance complex Gaussian.

    Returns one ``m x m`` matrix, or a ``(size, m, m)`` stack.
    """
    batch = 1 if size is None else size
    h = complex_gaussian(rng, (batch, s.n, s.m))
    g = np.einsum("tki,k,tkj->tij", h.conj(), s.thetas, h)
    g = 0.5 * (g + g.conj().transpose(0, 2, 1))
    return g[0] if size is None else g


def _check_conditioning(g: np.ndarray) -> None:
    ev = np.linalg.eigvalsh(g)
    bad = (ev[:, 0] <= 0.0) | (ev[:, -1] > MAX_SAMPLE_COND * ev[:, 0])
    count = int(np.count_nonzero(bad))
    if count:
        raise SingularSample(
            f"{count} sampled matrices with condition number above {MAX_SAMPLE_COND:g}", count=count
        )


def _trace_power(g: np.ndarray, r: int) -> np.ndarray:
    """``Tr(G^r)`` per matrix; negative powers via repeated linear solves."""
    m = g.shape[-1]
    if r == 0:
        return np.full(g.shape[0], float(m))
    if r > 0:
        acc = g
        for _ in range(r - 1):
            acc = acc @ g
        return np.real(np.trace(acc, axis1=1, axis2=2))
    x = np.broadcast_to(np.eye(m, dtype=g.dtype), g.shape)
    for _ in range(-r):
        x = np.linalg.solve(g, x)
    return np.real(np.trace(x, axis1=1, axis2=2))


def _block_stats(values: np.ndarray) -> tuple[int, float, float]:
    mean = float(np.mean(values))
    return values.size, mean, float(np.sum((values - mean) ** 2))


def _run(block_fn: Callable[[np.random.Generator, int], np.ndarray], trials: int, seed: int,
         workers: int | None, r: int = 0) -> MomentEstimate:
    if trials < 1:
        raise ValueError("trials must be positive")
    sizes = [min(BLOCK, trials - start) for start in range(0, trials, BLOCK)]
    job = lambda b: _block_stats(block_fn(block_generator(seed, b), sizes[b]))  # noqa: E731
    workers = workers or default_workers()
    if workers == 1 or len(sizes) == 1:
        stats = [job(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(job, range(len(sizes))))
    count, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in stats:
        tot = count + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * count * nb / tot
        count = tot
    std = (m2 / (count - 1)) ** 0.5 if count > 1 else 0.0
    return MomentEstimate(mean, std / count**0.5, trials, seed, r)


def mc_empirical_moment(s: Spectrum, r: int, trials: int, seed: int, workers: int | None = None) -> MomentEstimate:
    """Sample mean of ``(1/m) Tr(S^r)``; negative ``r`` limited to ``r >= -p``."""
    if r < -s.p:
        raise OrderOutOfRange(f"(1/m) Tr S^{r} has infinite mean for p={s.p}")
    if r == 0:
        return MomentEstimate(1.0, 0.0, trials, seed, 0)

    def block(rng, size):
        g = sample_gram(s, rng, size)
        if r < 0:
            _check_conditioning(g)
        return _trace_power(g, r) / s.m

    return _run(block, trials, seed, workers, r)


# ------------------------------------------------------- application metrics

def _as_matrix(cov) -> np.ndarray:
    if isinstance(cov, CorrelationMatrix):
        return cov.entries
    if isinstance(cov, Spectrum):
        return np.diag(cov.thetas.astype(np.complex128))
    a = np.asarray(cov)
    if a.ndim == 1:
        return np.diag(a.astype(np.complex128))
    return a.astype(np.complex128)


def _precision(sigma_z) -> np.ndarray:
    a = _as_matrix(sigma_z)
    w, v = np.linalg.eigh(a)
    if w[0] <= 0.0:
        raise DimensionError("noise covariance must be positive definite")
    return (v / w) @ v.conj().T


def _gaussian_gram(lam: np.ndarray, rng: np.random.Generator, size: int, m: int) -> np.ndarray:
    h = complex_gaussian(rng, (size, lam.shape[0], m))
    g = h.conj().transpose(0, 2, 1) @ lam @ h
    return 0.5 * (g + g.conj().transpose(0, 2, 1))


def mc_blue_error(sigma_z, m: int, trials: int, seed: int, workers: int | None = None) -> MomentEstimate:
    """``E Tr (H^* Sigma_z^-1 H)^-1`` with the full noise covariance (no diagonalization)."""
    lam = _precision(sigma_z)

    def block(rng, size):
        g = _gaussian_gram(lam, rng, size, m)
        _check_conditioning(g)
        return _trace_power(g, -1)

    return _run(block, trials, seed, workers, -1)


def mc_lmmse_error(sigma_z, m: int, sigma_x2: float, trials: int, seed: int,
                   workers: int | None = None) -> MomentEstimate:
    """``E Tr (I/sigma_x^2 + H^* Sigma_z^-1 H)^-1``."""
    lam = _precision(sigma_z)
    shift = np.eye(m) / sigma_x2

    def block(rng, size):
        g = _gaussian_gram(lam, rng, size, m) + shift
        return _trace_power(g, -1)

    return _run(block, trials, seed, workers, -1)


def _sqrt_psd(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(a)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def mc_scm_loss(m: int, n: int, lam: float, trials: int, seed: int, R=None,
                workers: int | None = None) -> MomentEstimate:
    """``E || R^1/2 Rhat^-1 R^1/2 - I ||_F^2`` for the exponentially weighted SCM.

    Observations are ``u(k) = R^1/2 x(k)`` and
    ``Rhat = (1 - lam) sum_k lam^(n-k) u(k) u(k)^*``.
    """
    r_half = np.eye(m) if R is None else _sqrt_psd(_as_matrix(R))
    weights = (1.0 - lam) * lam ** (n - np.arange(1, n + 1, dtype=np.float64))
    eye = np.eye(m)

    def block(rng, size):
        x = complex_gaussian(rng, (size, m, n))
        u = r_half @ x
        rhat = (u * weights) @ u.conj().transpose(0, 2, 1)
        rhat = 0.5 * (rhat + rhat.conj().transpose(0, 2, 1))
        _check_conditioning(rhat)
        inner = r_half @ np.linalg.solve(rhat, np.broadcast_to(r_half, rhat.shape))
        return np.sum(np.abs(inner - eye) ** 2, axis=(1, 2))

    return _run(block, trials, seed, workers, -2)


def mc_application_metric(kind: str, params: Mapping, trials: int, seed: int,
                          workers: int | None = None) -> MomentEstimate:
    """Dispatch on ``kind`` in ``{"blue", "lmmse", "scm"}``.

    ``params`` keys: blue ``sigma_z, m``; lmmse ``sigma_z, m, sigma_x2``;
    scm ``m, n, lam`` and optional ``R``.
    """
    if kind == "blue":
        return mc_blue_error(params["sigma_z"], params["m"], trials, seed, workers)
    if kind == "lmmse":
        return mc_lmmse_error(params["sigma_z"], params["m"], params["sigma_x2"], trials, seed, workers)
    if kind == "scm":
        return mc_scm_loss(params["m"], params["n"], params["lam"], trials, seed, params.get("R"), workers)
    raise ValueError(f"unknown metric kind {kind!r}")
