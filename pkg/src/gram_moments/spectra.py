"""
Eigenvalue spectra and the two correlation-matrix models.

Moments of ``S = H^* Lambda H`` depend on ``Lambda`` only through its
eigenvalues, so most of the package works with a :class:`Spectrum`
(sorted eigenvalues plus the Gram dimension ``m``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from os import PathLike
from typing import Sequence

import numpy as np
from scipy.special import j0

from .errors import DimensionError, NotPositiveDefinite, RepeatedEigenvalues

__all__ = [
    "GAP_TOL",
    "Spectrum",
    "CorrelationMatrix",
    "spectrum_from_matrix",
    "bessel_scattering_matrix",
    "shifted_wishart_matrix",
    "scale_spectrum",
    "complex_gaussian",
    "load_spectrum",
    "save_spectrum",
    "load_matrix",
    "save_matrix",
]

# Relative to the largest eigenvalue.
GAP_TOL = 1e-8
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class Spectrum:
    """Ascending positive eigenvalues of ``Lambda`` and the Gram dimension.

    Input order is irrelevant; eigenvalues are sorted on construction.
    With ``distinct=False`` ties are allowed (the asymptotic module accepts
    them, the exact engine does not).
    """

    thetas: np.ndarray
    m: int
    distinct: bool = True
    min_gap: float = field(init=False)
    condition_ratio: float = field(init=False)

    def __post_init__(self) -> None:
        th = np.sort(np.asarray(self.thetas, dtype=np.float64).ravel())
        m = int(self.m)
        if th.size < 2:
            raise DimensionError("a spectrum needs at least two eigenvalues")
        if not 1 <= m < th.size:
            raise DimensionError(f"need 1 <= m < n, got m={m}, n={th.size}")
        if not np.all(np.isfinite(th)) or th[0] <= 0.0:
            raise NotPositiveDefinite(f"eigenvalues must be finite and positive, smallest is {th[0]!r}")
        gaps = np.diff(th)
        if self.distinct and np.any(gaps <= 0.0):
            raise RepeatedEigenvalues("eigenvalues must be strictly distinct")
        th.setflags(write=False)
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "min_gap", float(gaps.min()))
        object.__setattr__(self, "condition_ratio", float(th[-1] / th[0]))

    @property
    def n(self) -> int:
        return int(self.thetas.size)

    @property
    def p(self) -> int:
        """Largest inverse-moment order with a finite value."""
        return min(self.m, self.n - self.m)

    def relative_gap(self) -> float:
        return self.min_gap / float(self.thetas[-1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Spectrum):
            return NotImplemented
        return self.m == other.m and np.array_equal(self.thetas, other.thetas)

    def __hash__(self) -> int:
        return hash((self.m, self.thetas.tobytes()))


@dataclass(frozen=True)
class CorrelationMatrix:
    """Dense Hermitian ``n x n`` matrix tagged with the model that built it."""

    entries: np.ndarray
    model: str = "user"

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {a.shape}")
        scale = max(float(np.abs(a).max()), np.finfo(float).tiny)
        if float(np.abs(a - a.conj().T).max()) > HERMITIAN_TOL * scale:
            raise DimensionError("matrix is not Hermitian")
        a = 0.5 * (a + a.conj().T)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


def spectrum_from_matrix(mat: CorrelationMatrix, m: int, gap_tol: float = GAP_TOL) -> Spectrum:
    """Eigenvalues of ``mat`` as a :class:`Spectrum`.

    Unitary invariance of the Gaussian matrix means only the eigenvalues
    of ``mat`` matter.
    """
    if not 1 <= m < mat.n:
        raise DimensionError(f"need 1 <= m < n, got m={m}, n={mat.n}")
    ev = np.sort(mat.eigenvalues())
    if ev[0] <= 0.0:
        raise NotPositiveDefinite(
            f"{mat.model} matrix has non-positive eigenvalue {ev[0]:.6g}; refusing indefinite instance"
        )
    if np.any(np.diff(ev) < gap_tol * ev[-1]):
        raise RepeatedEigenvalues(
            f"adjacent eigenvalue gap below {gap_tol:g} * largest eigenvalue"
        )
    return Spectrum(ev, m)


def bessel_scattering_matrix(n: int) -> CorrelationMatrix:
    """Dense-scattering antenna correlation ``[i, j] -> J0(pi |i - j|^2)``."""
    if n < 2:
        raise DimensionError("n must be at least 2")
    idx = np.arange(n, dtype=np.float64)
    d2 = (idx[:, None] - idx[None, :]) ** 2
    return CorrelationMatrix(j0(np.pi * d2), model="bessel")


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular complex Gaussian samples with unit total variance.

    Box-Muller on the generator's uniforms: the modulus squared is Exp(1)
    and the phase is uniform, so real and imaginary parts are N(0, 1/2).
    """
    if isinstance(shape, int):
        shape = (shape,)
    u = rng.random((2, *shape))
    return np.sqrt(-np.log1p(-u[0])) * np.exp(2j * np.pi * u[1])


def shifted_wishart_matrix(n: int, seed: int) -> CorrelationMatrix:
    """``I_n + W^* W`` with ``W`` an ``n x n`` seeded complex Gaussian matrix."""
    if n < 2:
        raise DimensionError("n must be at least 2")
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    w = complex_gaussian(rng, (n, n))
    return CorrelationMatrix(np.eye(n) + w.conj().T @ w, model="shifted-wishart")


def scale_spectrum(s: Spectrum, c: float) -> Spectrum:
    if not c > 0:
        raise ValueError("scale factor must be positive")
    return Spectrum(s.thetas * c, s.m, distinct=s.distinct)


# ---------------------------------------------------------------- file formats

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_rows(a: np.ndarray) -> str:
    return "[" + ", ".join("[" + ", ".join(_fmt(v) for v in row) + "]" for row in a) + "]"


def save_spectrum(s: Spectrum, path: str | PathLike) -> None:
    text = '{"thetas": [' + ", ".join(_fmt(t) for t in s.thetas) + f'], "m": {s.m}}}\n'
    with open(path, "w") as fh:
        fh.write(text)


def load_spectrum(path: str | PathLike) -> Spectrum:
    with open(path) as fh:
        obj = json.load(fh)
    try:
        return Spectrum(np.asarray(obj["thetas"], dtype=np.float64), int(obj["m"]))
    except KeyError as exc:
        raise DimensionError(f"spectrum file is missing key {exc}") from None


def save_matrix(mat: CorrelationMatrix, path: str | PathLike) -> None:
    a = mat.entries
    text = '{"re": ' + _fmt_rows(a.real) + ', "im": ' + _fmt_rows(a.imag) + "}\n"
    with open(path, "w") as fh:
        fh.write(text)


def load_matrix(path: str | PathLike, model: str = "user") -> CorrelationMatrix:
    with open(path) as fh:
        obj = json.load(fh)
    re = np.asarray(obj["re"], dtype=np.float64)
    im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=np.float64)
    return CorrelationMatrix(re + 1j * im, model=model)


def as_spectrum(thetas: Sequence[float] | np.ndarray | Spectrum, m: int | None = None) -> Spectrum:
    if isinstance(thetas, Spectrum):
        return thetas
    if m is None:
        raise DimensionError("m is required when passing raw eigenvalues")
    return Spectrum(np.asarray(thetas, dtype=np.float64), m)
