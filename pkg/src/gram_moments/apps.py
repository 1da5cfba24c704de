"""
Closed-form estimation error for the linear model ``y = H x + z``.

With ``Lambda = Sigma_z^-1`` the BLUE error covariance is
``(H^* Lambda H)^-1``, so its mean trace is ``m mu(-1)``. For
``Sigma_x = sigma_x^2 I`` the LMMSE error covariance
``(I/sigma_x^2 + S)^-1`` expands in negative moments at high SNR and in
positive moments at low SNR.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConvergenceWarning, DimensionError, NotPositiveDefinite, OrderOutOfRange
from .exact import ExactEngine, build_engine, inverse_moment, positive_moment
from .spectra import CorrelationMatrix, Spectrum

__all__ = [
    "NoiseModel",
    "SeriesValue",
    "blue_mse",
    "lmmse_mse_high_snr",
    "lmmse_mse_low_snr",
]


@dataclass(frozen=True)
class NoiseModel:
    """Eigenvalues of the noise covariance ``Sigma_z``."""

    sigma_z_spectrum: np.ndarray

    def __post_init__(self) -> None:
        ev = np.sort(np.asarray(self.sigma_z_spectrum, dtype=np.float64).ravel())
        if ev.size < 2:
            raise DimensionError("noise covariance needs at least two eigenvalues")
        if ev[0] <= 0.0:
            raise NotPositiveDefinite("noise covariance must be positive definite")
        ev.setflags(write=False)
        object.__setattr__(self, "sigma_z_spectrum", ev)

    @classmethod
    def from_matrix(cls, sigma_z: CorrelationMatrix) -> "NoiseModel":
        return cls(sigma_z.eigenvalues())

    @classmethod
    def from_precision(cls, lam: Spectrum | Sequence[float]) -> "NoiseModel":
        """Noise model whose inverse covariance ``Lambda`` has the given eigenvalues."""
        th = lam.thetas if isinstance(lam, Spectrum) else np.asarray(lam, dtype=np.float64)
        return cls(1.0 / th)

    @property
    def n(self) -> int:
        return self.sigma_z_spectrum.size

    def lambda_spectrum(self, m: int) -> Spectrum:
        """Spectrum of ``Lambda = Sigma_z^-1`` (reciprocals, re-sorted ascending)."""
        return Spectrum(1.0 / self.sigma_z_spectrum, m)

    def engine(self, m: int) -> ExactEngine:
        return build_engine(self.lambda_spectrum(m))


@dataclass(frozen=True)
class SeriesValue:
    """A truncated series and the magnitude of its last retained term."""

    value: float
    last_term: float
    order: int


def blue_mse(nm: NoiseModel, m: int, engine: ExactEngine | None = None) -> float:
    """``E ||x_blue - x||^2 = m mu(-1)``."""
    e = engine or nm.engine(m)
    return m * inverse_moment(e, 1)


def lmmse_mse_high_snr(nm: NoiseModel, m: int, sigma_x2: float, l: int,
                       engine: ExactEngine | None = None) -> SeriesValue:
    """``m sum_{k=0}^{l} (-1)^k sigma_x^(-2k) mu(-k-1)``, valid for ``l <= p - 1``."""
    e = engine or nm.engine(m)
    p = e.spectrum.p
    if not 0 <= l <= p - 1:
        raise OrderOutOfRange(f"high-SNR truncation order must satisfy 0 <= l <= p-1={p - 1}, got {l}")
    if not sigma_x2 > 0:
        raise ValueError("sigma_x2 must be positive")
    terms = [(-1) ** k * sigma_x2 ** (-k) * inverse_moment(e, k + 1) for k in range(l + 1)]
    return SeriesValue(m * float(np.sum(terms)), m * abs(terms[-1]), l)


def lmmse_mse_low_snr(nm: NoiseModel, m: int, sigma_x2: float, K: int,
                      engine: ExactEngine | None = None) -> SeriesValue:
    """``m sum_{k=0}^{K} (-1)^k sigma_x^(2k+2) mu(k)``.

    Raises :class:`ConvergenceWarning` if the last term is not smaller in
    magnitude than the one before it.
    """
    if K < 0:
        raise OrderOutOfRange("K must be non-negative")
    if not sigma_x2 > 0:
        raise ValueError("sigma_x2 must be positive")
    e = engine or nm.engine(m)
    terms = [(-1) ** k * sigma_x2 ** (k + 1) * positive_moment(e, k) for k in range(K + 1)]
    if K >= 1 and abs(terms[-1]) >= abs(terms[-2]):
        raise ConvergenceWarning(
            f"low-SNR series not decreasing at k={K} for sigma_x2={sigma_x2:g}",
            last_terms=(m * abs(terms[-2]), m * abs(terms[-1])),
        )
    return SeriesValue(m * float(np.sum(terms)), m * abs(terms[-1]), K)
