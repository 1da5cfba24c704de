"""
Exact moments of ``S = H^* Lambda H`` for fixed ``(n, m)``.

The engine evaluates the closed-form Mellin transform of the marginal
eigenvalue density of ``S`` and the closed-form inverse moments that
follow from its pole-cancelling limit. Both formulas are built from

* ``psi``: the ``(n-m) x (n-m)`` Vandermonde matrix of the ``n-m``
  smallest eigenvalues, ``psi[i, j] = theta_i ** j``;
* ``cmat``: the ``m x m`` matrix whose ``(l, k)`` entry is ``k!`` times the
  polynomial-extrapolation residual of ``t -> t**(n-m+k)`` at the
  ``l``-th of the ``m`` largest eigenvalues (0-based ``k``);
* ``cof``: the cofactor matrix of ``cmat``;
* ``L = 1 / (m * prod(theta_l - theta_k) * prod_{l<m} l!)``, the product
  running over eigenvalue pairs whose larger index falls among the top ``m``.

Clustered eigenvalues make ``psi`` violently ill-conditioned (a spectrum
``1 + i*1e-4`` gives ``cond(psi) ~ 1e25``), so everything is evaluated in
extended precision. The working precision is estimated from Gautschi's
bound on Vandermonde inverses and then certified by checking that the
Mellin transform at ``s = 1`` (total probability) equals one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import DomainError, IllConditioned, OrderOutOfRange, RepeatedEigenvalues
from .spectra import GAP_TOL, Spectrum

__all__ = [
    "ExactEngine",
    "build_engine",
    "mellin",
    "positive_moment",
    "inverse_moment",
    "moment",
    "mellin_split",
    "mellin_continuation_check",
    "cofactor_residual",
    "gamma_pole_ratio",
    "required_digits",
]

BASE_DIGITS = 30
MAX_DIGITS = 400
# |M(1) - 1| must fall below this for the working precision to be accepted.
CERTIFY_TOL = 1e-25
CONTINUATION_MAX_S = 0.05


def _log10_vandermonde_cond(x: np.ndarray) -> float:
    """Upper estimate of log10 cond_inf of the monomial Vandermonde on ``x``."""
    k = x.size
    if k <= 1:
        return 0.0
    xmax = float(np.max(np.abs(x)))
    log_norm = math.log10(sum(xmax**j for j in range(k))) if xmax < 1e30 else k * math.log10(xmax)
    worst = 0.0
    for i in range(k):
        d = np.abs(x[i] - np.delete(x, i))
        worst = max(worst, float(np.sum(np.log10(1.0 + np.abs(np.delete(x, i))) - np.log10(d))))
    return log_norm + worst


def required_digits(s: Spectrum) -> int:
    """Decimal digits of working precision needed for ``s``."""
    q = s.n - s.m
    lost = _log10_vandermonde_cond(s.thetas[:q]) + _log10_vandermonde_cond(s.thetas[q:])
    return BASE_DIGITS + int(math.ceil(max(lost, 0.0)))


@dataclass(frozen=True)
class _Cache:
    ctx: mpmath.ctx_mp.MPContext
    nodes: list  # n-m smallest eigenvalues
    tops: list  # m largest eigenvalues
    beta: list  # beta[i][l] = (b_i^t psi^{-1})[l]
    lcof: list  # L * cof[i][j]
    cmat: object = None
    cof: object = None


@dataclass(frozen=True)
class ExactEngine:
    """Precomputed closed-form ingredients for one spectrum.

    Array fields are float64 copies for inspection; evaluation uses the
    extended-precision values held privately.
    """

    spectrum: Spectrum
    psi: np.ndarray
    psi_inv: np.ndarray
    cmat: np.ndarray
    cof: np.ndarray
    logL: tuple[int, float]
    dps: int
    cond_psi: float
    normalization_residual: float
    _cache: _Cache = field(repr=False, compare=False)

    @property
    def L(self) -> float:
        sign, log_abs = self.logL
        return sign * math.exp(log_abs)


def _cofactors(ctx, c) -> object:
    m = c.rows
    if m == 1:
        return ctx.matrix([[1]])
    cond = ctx.norm(c, 1) * ctx.norm(ctx.inverse(c), 1) if ctx.det(c) != 0 else ctx.inf
    if m <= 4 and cond > 1e10:
        cof = ctx.matrix(m, m)
        for i in range(m):
            for j in range(m):
                rows = [r for r in range(m) if r != i]
                cols = [k for k in range(m) if k != j]
                minor = ctx.matrix([[c[r, k] for k in cols] for r in rows])
                cof[i, j] = (-1) ** (i + j) * ctx.det(minor)
        return cof
    return ctx.det(c) * ctx.inverse(c).T


def _build(s: Spectrum, dps: int) -> ExactEngine:
    ctx = mpmath.MPContext()
    ctx.dps = dps
    n, m = s.n, s.m
    q = n - m
    th = [ctx.mpf(float(t)) for t in s.thetas]
    nodes, tops = th[:q], th[q:]

    psi = ctx.matrix([[x**j for j in range(q)] for x in nodes])
    psi_inv = ctx.inverse(psi)
    beta = [[ctx.fsum(x**k * psi_inv[k, l] for k in range(q)) for l in range(q)] for x in tops]

    c = ctx.matrix(m, m)
    for l, x in enumerate(tops):
        for k in range(m):
            e = q + k
            resid = x**e - ctx.fsum(beta[l][t] * nodes[t] ** e for t in range(q))
            c[l, k] = ctx.factorial(k) * resid
    cof = _cofactors(ctx, c)

    log_l = -ctx.log(m)
    for hi in range(q, n):
        for lo in range(hi):
            log_l -= ctx.log(th[hi] - th[lo])
    for l in range(1, m):
        log_l -= ctx.log(ctx.factorial(l))
    big_l = ctx.exp(log_l)
    lcof = [[big_l * cof[i, j] for j in range(m)] for i in range(m)]

    cache = _Cache(ctx=ctx, nodes=nodes, tops=tops, beta=beta, lcof=lcof, cmat=c, cof=cof)
    cond_psi = ctx.norm(psi, 1) * ctx.norm(psi_inv, 1)
    to_np = lambda a: np.array(a.tolist(), dtype=np.float64)  # noqa: E731
    engine = ExactEngine(
        spectrum=s,
        psi=to_np(psi),
        psi_inv=to_np(psi_inv),
        cmat=to_np(c),
        cof=to_np(cof),
        logL=(1, float(log_l)),
        dps=dps,
        cond_psi=float(cond_psi),
        normalization_residual=float("nan"),
        _cache=cache,
    )
    resid = abs(_mellin_sum(engine, ctx.mpf(1)) - 1)
    object.__setattr__(engine, "normalization_residual", float(resid))
    return engine


def build_engine(s: Spectrum, gap_tol: float = GAP_TOL) -> ExactEngine:
    """Precompute the closed-form ingredients for ``s``.

    Raises :class:`IllConditioned` when eigenvalues are closer than
    ``gap_tol`` times the largest one, or when the precision needed to
    certify the result exceeds ``MAX_DIGITS``.
    """
    if not s.distinct or s.min_gap <= 0.0:
        raise RepeatedEigenvalues("the exact moments need distinct eigenvalues")
    if s.relative_gap() < gap_tol:
        raise IllConditioned(
            f"relative eigenvalue gap {s.relative_gap():.3g} below {gap_tol:g}; accuracy not certifiable"
        )
    dps = required_digits(s)
    if dps > MAX_DIGITS:
        raise IllConditioned(f"spectrum needs ~{dps} digits of working precision (limit {MAX_DIGITS})")
    for _ in range(3):
        engine = _build(s, dps)
        if engine.normalization_residual < CERTIFY_TOL:
            return engine
        dps = 2 * dps
        if dps > MAX_DIGITS:
            break
    raise IllConditioned(
        f"could not certify normalization (residual {engine.normalization_residual:.3g} at {engine.dps} digits)"
    )


def cofactor_residual(e: ExactEngine) -> float:
    """``max |C cof^t - det(C) I| / |det(C)|`` at the engine's working precision.

    The float64 copies cannot show this when ``C`` is badly conditioned.
    """
    ctx = e._cache.ctx
    c, cof = e._cache.cmat, e._cache.cof
    det = ctx.det(c)
    r = c * cof.T - det * ctx.eye(c.rows)
    return float(max(abs(x) for x in r) / abs(det))


# ------------------------------------------------------------------ Mellin

def _is_pole(x) -> bool:
    return x <= 0 and x == int(x)


def _mellin_terms(e: ExactEngine, s) -> list:
    """Per-``j`` contributions to the Mellin transform at ``s`` (extended precision)."""
    cache = e._cache
    ctx = cache.ctx
    m = e.spectrum.m
    q = e.spectrum.n - m
    terms = []
    for j in range(1, m + 1):
        arg = s + j - 1
        if _is_pole(arg):
            raise DomainError(f"Gamma pole at argument {arg}")
        g = ctx.gamma(arg)
        ex = q + s + j - 2
        node_pow = [x**ex for x in cache.nodes]
        acc = ctx.fsum(
            cache.lcof[i][j - 1] * (x**ex - ctx.fsum(b * t for b, t in zip(cache.beta[i], node_pow)))
            for i, x in enumerate(cache.tops)
        )
        terms.append(g * acc)
    return terms


def _mellin_sum(e: ExactEngine, s):
    return e._cache.ctx.fsum(_mellin_terms(e, s))


def mellin(e: ExactEngine, s: float) -> float:
    """Mellin transform ``E[lambda^(s-1)]`` of an unordered eigenvalue of ``S``, for ``s > 0``."""
    if not s > 0:
        raise DomainError("mellin needs s > 0; use mellin_continuation_check near the poles")
    return float(_mellin_sum(e, e._cache.ctx.mpf(float(s))))


def positive_moment(e: ExactEngine, r: int) -> float:
    """``(1/m) Tr E[S^r]`` for ``r >= 0``."""
    if r < 0:
        raise OrderOutOfRange("positive_moment needs r >= 0")
    if r == 0:
        return 1.0
    return mellin(e, r + 1)


def inverse_moment(e: ExactEngine, r: int) -> float:
    """``(1/m) Tr E[S^-r]`` for ``1 <= r <= min(m, n-m)``."""
    p = e.spectrum.p
    if not 1 <= r <= p:
        raise OrderOutOfRange(f"inverse moment order must satisfy 1 <= r <= p={p}, got {r}")
    cache = e._cache
    ctx = cache.ctx
    m = e.spectrum.m
    q = e.spectrum.n - m
    total = []
    for j in range(1, r + 1):
        coef = (-1) ** (r - j) / ctx.factorial(r - j)
        a = [t ** (q - r + j - 1) for t in cache.nodes]
        for i, x in enumerate(cache.tops):
            quad = ctx.fsum(b * ctx.log(x / t) * at for b, t, at in zip(cache.beta[i], cache.nodes, a))
            total.append(coef * cache.lcof[i][j - 1] * quad)
    value = float(ctx.fsum(total))
    if not value > 0.0:
        raise IllConditioned(f"inverse moment evaluated to non-positive {value!r}")
    return value


def moment(e: ExactEngine, r: int) -> float:
    """``mu(r)`` for any supported integer order."""
    if r >= 0:
        return positive_moment(e, r)
    return inverse_moment(e, -r)


# ------------------------------------------------------------ continuation

def gamma_pole_ratio(k: int, s: float, dps: int = 30) -> float:
    """``Gamma(s - k) / Gamma(s)``; tends to ``(-1)^k / k!`` as ``s -> 0``."""
    ctx = mpmath.MPContext()
    ctx.dps = dps
    s = ctx.mpf(s)
    return float(ctx.gamma(s - k) / ctx.gamma(s))


def mellin_split(e: ExactEngine, s: float, r: int) -> tuple[float, float]:
    """Mellin transform at ``s - r + 1`` split into the ``j <= r`` and ``j > r`` parts.

    The second part vanishes as ``s -> 0``; the first tends to ``mu(-r)``.
    """
    ctx = e._cache.ctx
    terms = _mellin_terms(e, ctx.mpf(float(s)) - r + 1)
    return float(ctx.fsum(terms[:r])), float(ctx.fsum(terms[r:]))


def mellin_continuation_check(e: ExactEngine, r: int, s_list) -> list[float]:
    """Mellin transform at ``s - r + 1`` for each small positive ``s``.

    Near the Gamma poles the diverging factors are compensated by
    vanishing extrapolation residuals, so the sequence converges to
    ``inverse_moment(e, r)`` as ``s`` decreases.
    """
    p = e.spectrum.p
    if not 1 <= r <= p:
        raise OrderOutOfRange(f"need 1 <= r <= p={p}, got {r}")
    ctx = e._cache.ctx
    out = []
    for s in s_list:
        if not 0.0 < s <= CONTINUATION_MAX_S:
            raise DomainError(f"s must lie in (0, {CONTINUATION_MAX_S}], got {s!r}")
        out.append(float(_mellin_sum(e, ctx.mpf(float(s)) - r + 1)))
    return out
