"""
Loss of the exponentially weighted sample covariance matrix.

With ``Rhat = (1-lam) sum_k lam^(n-k) u(k) u(k)^*`` and
``u(k) = R^1/2 x(k)``, the whitened loss
``E || R^1/2 Rhat^-1 R^1/2 - I ||_F^2`` reduces to
``m (1 + mu(-2) - 2 mu(-1))`` for the weight spectrum
``(1-lam) lam^(n-k)``, whatever ``R`` is.

The rectangular window ``Rhat = (1/n) sum_k u(k) u(k)^*`` has a fully
repeated weight spectrum and falls outside the exact engine; use the
asymptotic module or the classical complex Wishart identities for it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AllRejected, DimensionError, EmptyGrid, IllConditioned
from .exact import MAX_DIGITS, build_engine, inverse_moment, required_digits
from .spectra import GAP_TOL, Spectrum

__all__ = ["ScmConfig", "LossCurve", "DEFAULT_GRID", "weight_spectrum", "scm_loss", "optimize_lambda"]

DEFAULT_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))


@dataclass(frozen=True)
class ScmConfig:
    m: int
    n: int
    lam: float

    def __post_init__(self) -> None:
        if not 0.0 < self.lam < 1.0:
            raise DimensionError(f"forgetting factor must lie in (0, 1), got {self.lam}")
        if not self.n > self.m >= 1:
            raise DimensionError(f"need n > m >= 1, got m={self.m}, n={self.n}")


@dataclass(frozen=True)
class LossCurve:
    grid: list[tuple[float, float]]
    lambda_star: float
    loss_star: float
    rejected: list[float] = field(default_factory=list)


def weight_spectrum(cfg: ScmConfig) -> Spectrum:
    """``(1-lam) lam^(n-k)``, ``k = 1..n``, ascending.

    Rejects spectra whose gaps fall below ``GAP_TOL`` times the largest
    weight, or that would need more working precision than the exact
    engine allows (long windows with ``lam`` near one).
    """
    k = np.arange(1, cfg.n + 1, dtype=np.float64)
    th = (1.0 - cfg.lam) * cfg.lam ** (cfg.n - k)
    if th[0] <= 0.0 or np.any(np.diff(th) < GAP_TOL * th[-1]):
        raise IllConditioned(
            f"weight spectrum for lam={cfg.lam}, n={cfg.n} has gaps below {GAP_TOL:g} of its maximum; "
            "shorten the window or move lam away from 0 and 1"
        )
    s = Spectrum(th, cfg.m)
    if required_digits(s) > MAX_DIGITS:
        raise IllConditioned(
            f"weight spectrum for lam={cfg.lam}, n={cfg.n} is too clustered for the exact moments; "
            "shorten the window or lower lam"
        )
    return s


def scm_loss(cfg: ScmConfig) -> float:
    """``m (1 + mu(-2) - 2 mu(-1))`` on the weight spectrum."""
    if min(cfg.m, cfg.n - cfg.m) < 2:
        raise DimensionError("the loss needs mu(-2): require min(m, n-m) >= 2")
    e = build_engine(weight_spectrum(cfg))
    return cfg.m * (1.0 + inverse_moment(e, 2) - 2.0 * inverse_moment(e, 1))


def _argmin(pairs: Sequence[tuple[float, float]]) -> tuple[float, float]:
    # ties go to the smaller lam: faster tracking for the same loss
    best = min(pairs, key=lambda p: (p[1], p[0]))
    return best


def optimize_lambda(m: int, n: int, grid: Sequence[float] | None = None, workers: int = 1) -> LossCurve:
    """Grid search for the forgetting factor minimizing the closed-form loss.

    Grid points that fail conditioning are skipped and listed in
    ``LossCurve.rejected``. One closed-form evaluation per point replaces
    a Monte Carlo run per point.
    """
    grid = sorted(float(g) for g in (DEFAULT_GRID if grid is None else grid))
    if not grid:
        raise EmptyGrid("lambda grid is empty")

    def evaluate(lam):
        try:
            return scm_loss(ScmConfig(m, n, lam))
        except IllConditioned:
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            losses = list(pool.map(evaluate, grid))
    else:
        losses = [evaluate(lam) for lam in grid]
    pairs = [(lam, loss) for lam, loss in zip(grid, losses) if loss is not None]
    rejected = [lam for lam, loss in zip(grid, losses) if loss is None]
    if not pairs:
        raise AllRejected(f"every lambda in the grid failed conditioning for m={m}, n={n}")
    lam_star, loss_star = _argmin(pairs)
    return LossCurve(pairs, lam_star, loss_star, rejected)
