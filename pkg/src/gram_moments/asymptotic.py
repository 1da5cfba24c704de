"""
Large-dimension (deterministic equivalent) inverse moments.

The Stieltjes transform ``m(z)`` of the limiting spectrum of ``S/m``
solves ``m(z) = 1 / (-z + (1/m) sum_k d_k / (1 + d_k m(z)))``. Its
derivatives at ``z = 0`` are obtained order by order from two coupled
linear relations between ``m^(p)`` and ``f_k^(p)``, where
``f_k(z) = -1 / (1 + d_k m(z))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import comb, factorial

import numpy as np

from .errors import DegenerateCoefficient, MissingDerivatives, NoConvergence, OrderOutOfRange
from .spectra import Spectrum

__all__ = [
    "AsymptoticState",
    "solve_fixed_point",
    "compute_derivatives",
    "asymptotic_inverse_moment",
    "asymptotic_moments",
]

DAMPING = 0.5


@dataclass(frozen=True)
class AsymptoticState:
    spectrum: Spectrum
    m0: float
    residual: float
    iterations: int
    m_derivs: tuple[float, ...] = ()
    f_derivs: np.ndarray = field(default_factory=lambda: np.empty((0, 1)))

    @property
    def order(self) -> int:
        """Highest derivative order available."""
        return len(self.m_derivs)

    def m_deriv(self, p: int) -> float:
        """``m^(p)`` with ``m^(0) = m0``."""
        if p == 0:
            return self.m0
        if p > self.order:
            raise MissingDerivatives(f"derivative order {p} not computed (have {self.order})")
        return self.m_derivs[p - 1]


def _fixed_point_map(d: np.ndarray, m: int, x: float) -> float:
    return m / float(np.sum(d / (1.0 + d * x)))


def solve_fixed_point(s: Spectrum, tol: float = 1e-14, max_iter: int = 100_000) -> AsymptoticState:
    """Damped iteration for ``m(0)``.

    The map is increasing with slope below one at the fixed point, so
    the damped iteration converges from the starting point ``n / sum(theta)``.
    ``tol`` applies to ``|x - F(x)|`` scaled by ``max(1, x)``.
    """
    d = np.asarray(s.thetas, dtype=np.float64)
    m = s.m
    x = m / (float(np.sum(d)) * m / s.n)
    resid = float("inf")
    for it in range(1, max_iter + 1):
        fx = _fixed_point_map(d, m, x)
        resid = abs(x - fx)
        if resid < tol * max(1.0, x):
            f0 = -1.0 / (1.0 + d * fx)
            return AsymptoticState(s, fx, abs(fx - _fixed_point_map(d, m, fx)), it, (), f0[:, None])
        x = (1.0 - DAMPING) * x + DAMPING * fx
    raise NoConvergence(f"fixed point not reached after {max_iter} iterations", residual=resid)


def compute_derivatives(st: AsymptoticState, P: int) -> AsymptoticState:
    """Extend ``st`` with ``m^(p)`` and ``f_k^(p)`` for ``p = 1..P``.

    Each step first solves the summed relation for ``m^(p)`` (it is linear
    in ``m^(p)`` once lower orders are known), then the per-``k`` relation
    for ``f_k^(p)``.
    """
    if P <= st.order:
        return st
    d = np.asarray(st.spectrum.thetas, dtype=np.float64)
    m = st.spectrum.m
    den = 1.0 + d * st.m0
    md = [st.m0, *st.m_derivs]
    f = [st.f_derivs[:, k].copy() for k in range(st.f_derivs.shape[1])]
    for p in range(st.order + 1, P + 1):
        coef = float(np.sum(d * f[0] / den)) / m
        if abs(coef) < 1e-14:
            raise DegenerateCoefficient(f"coefficient of m^({p}) is {coef:.3g}")
        cross = sum(comb(p, l) * float(np.sum(d * md[l] * f[p - l] / den)) for l in range(1, p)) / m
        md.append(-(p * md[p - 1] + cross) / coef)
        fp = -sum(comb(p, l) * d * md[l] * f[p - l] for l in range(1, p + 1)) / den
        f.append(fp)
    return replace(st, m_derivs=tuple(md[1:]), f_derivs=np.column_stack(f))


def asymptotic_inverse_moment(st: AsymptoticState, r: int) -> float:
    """Deterministic approximation of ``(1/m) Tr E[S^-r]``: ``m^(r-1) / ((r-1)! m^r)``."""
    if r < 1:
        raise OrderOutOfRange("asymptotic inverse moments need r >= 1")
    m = st.spectrum.m
    return st.m_deriv(r - 1) / (factorial(r - 1) * m**r)


def asymptotic_moments(s: Spectrum, orders, tol: float = 1e-14) -> dict[int, float]:
    """Convenience wrapper: ``{r: asymptotic_inverse_moment}`` for positive ``r`` in ``orders``."""
    orders = list(orders)
    st = compute_derivatives(solve_fixed_point(s, tol=tol), max(orders) - 1)
    return {r: asymptotic_inverse_moment(st, r) for r in orders}
