import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.special import gamma

from gram_moments.errors import DomainError, IllConditioned, OrderOutOfRange, RepeatedEigenvalues
from gram_moments.exact import (
    build_engine,
    cofactor_residual,
    gamma_pole_ratio,
    inverse_moment,
    mellin,
    mellin_continuation_check,
    mellin_split,
    moment,
    positive_moment,
)
from gram_moments.oracle import mc_empirical_moment
from gram_moments.spectra import Spectrum, scale_spectrum

FIVE = Spectrum([1.0, 2.0, 3.0, 4.0, 5.0], 2)
M1 = Spectrum([0.5, 1.3, 2.0, 4.1], 1)

# frozen from independent oracles (quadrature, Wishart identities, MC), see below
FIVE_MU_M1 = 0.1222000545710718
FIVE_MU_M2 = 0.03010110493708248


def spectra(min_n=3, max_n=12):
    """Well separated random spectra."""

    @st.composite
    def build(draw):
        n = draw(st.integers(min_n, max_n))
        m = draw(st.integers(1, n - 1))
        gaps = draw(st.lists(st.floats(0.2, 3.0), min_size=n, max_size=n))
        return Spectrum(np.cumsum(gaps), m)

    return build()


def m1_laplace_integral(thetas, power):
    """``int_0^inf t^power prod(1 + theta t)^-1 dt`` for the m = 1 case."""
    f = lambda t: t**power / np.prod(1.0 + np.asarray(thetas) * t)  # noqa: E731
    a, _ = integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-13, limit=200)
    b, _ = integrate.quad(f, 1, np.inf, epsabs=0, epsrel=1e-13, limit=200)
    return a + b


# ---------------------------------------------------------------- examples

def test_psi_is_vandermonde_of_smallest_eigenvalues():
    e = build_engine(Spectrum([1.0, 2.0, 3.0], 1))
    np.testing.assert_allclose(e.psi, [[1.0, 1.0], [1.0, 2.0]], rtol=1e-15)
    assert e.psi_inv.shape == (2, 2)
    e4 = build_engine(Spectrum([1.0, 2.0, 4.0, 7.0], 1))
    np.testing.assert_allclose(e4.psi, [[1, 1, 1], [1, 2, 4], [1, 4, 16]], rtol=1e-15)
    np.testing.assert_allclose(e4.psi @ e4.psi_inv, np.eye(3), atol=1e-12)


def test_close_pair_is_ill_conditioned():
    with pytest.raises(IllConditioned):
        build_engine(Spectrum([1.0, 1.0 + 1e-12, 3.0], 1))


def test_repeated_spectrum_refused_by_engine():
    with pytest.raises(RepeatedEigenvalues):
        build_engine(Spectrum([1.0, 1.0, 3.0], 1, distinct=False))


def test_normalization_and_first_moment_m1():
    e = build_engine(Spectrum([1.0, 2.0, 3.0], 1))
    assert mellin(e, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert mellin(e, 2.0) == pytest.approx(6.0, rel=1e-12)
    assert positive_moment(e, 0) == 1.0


def test_fractional_mellin_against_monte_carlo():
    s = Spectrum([1.0, 2.0, 3.0], 1)
    exact = mellin(build_engine(s), 1.5)
    est = mc_empirical_moment_fractional(s, 0.5, 200_000, seed=5)
    assert abs(exact - est[0]) < 4 * est[1]


def mc_empirical_moment_fractional(s, power, trials, seed):
    rng = np.random.default_rng(seed)
    # m = 1: S = sum theta_i |h_i|^2 with |h_i|^2 ~ Exp(1)
    x = rng.exponential(size=(trials, s.n)) @ s.thetas
    v = x**power
    return v.mean(), v.std(ddof=1) / math.sqrt(trials)


def test_second_moment_closed_form():
    # Isserlis for complex Gaussians: (Tr L)^2 + m Tr L^2
    e = build_engine(FIVE)
    assert positive_moment(e, 2) == pytest.approx(335.0, rel=1e-12)
    assert positive_moment(e, 1) == pytest.approx(15.0, rel=1e-12)


def test_frozen_inverse_moments():
    e = build_engine(FIVE)
    assert inverse_moment(e, 1) == pytest.approx(FIVE_MU_M1, rel=1e-12)
    assert inverse_moment(e, 2) == pytest.approx(FIVE_MU_M2, rel=1e-12)
    assert moment(e, -1) == inverse_moment(e, 1)


def test_frozen_first_inverse_moment_against_monte_carlo():
    est = mc_empirical_moment(FIVE, -1, 1_000_000, seed=14)
    assert abs(est.z_score(FIVE_MU_M1)) < 3


def test_frozen_second_inverse_moment_against_monte_carlo():
    # n - m = 3 < 2r: infinite per-sample variance, so only a loose check
    est = mc_empirical_moment(FIVE, -2, 100_000, seed=15)
    assert abs(est.z_score(FIVE_MU_M2)) < 4


@pytest.mark.parametrize("c", [0.01, 0.5, 7.0, 300.0])
def test_scaling_example(c):
    e, ec = build_engine(FIVE), build_engine(scale_spectrum(FIVE, c))
    for r in (1, 2):
        assert inverse_moment(ec, r) == pytest.approx(c**-r * inverse_moment(e, r), rel=1e-10)
    assert positive_moment(ec, 3) == pytest.approx(c**3 * positive_moment(e, 3), rel=1e-10)


def test_near_identity_matches_wishart():
    # complex Wishart W(n, I) with m columns: E Tr W^-1 / m = 1/(n-m),
    # E Tr W^-2 / m = n / ((n-m)^3 - (n-m))
    th = 1.0 + 1e-4 * np.arange(1, 11)
    e = build_engine(Spectrum(th, 3))
    assert inverse_moment(e, 1) == pytest.approx(1.0 / 7.0, rel=1e-3)
    assert inverse_moment(e, 2) == pytest.approx(10.0 / (7**3 - 7), rel=2e-3)
    assert e.normalization_residual < 1e-25


def test_m1_inverse_moment_quadrature():
    # E[1/S] = int_0^inf E[exp(-tS)] dt with E[exp(-tS)] = prod(1 + theta t)^-1
    e = build_engine(M1)
    assert inverse_moment(e, 1) == pytest.approx(m1_laplace_integral(M1.thetas, 0.0), rel=1e-10)


@pytest.mark.parametrize("a", [-0.75, -0.5, -0.25])
def test_m1_fractional_quadrature(a):
    # E[S^a] = (1/Gamma(-a)) int t^(-a-1) E[exp(-tS)] dt for a in (-1, 0)
    expected = m1_laplace_integral(M1.thetas, -a - 1.0) / gamma(-a)
    assert mellin(build_engine(M1), 1.0 + a) == pytest.approx(expected, rel=1e-9)


def test_mellin_domain():
    e = build_engine(FIVE)
    with pytest.raises(DomainError):
        mellin(e, 0.0)
    with pytest.raises(DomainError):
        mellin(e, -1.0)


@pytest.mark.parametrize("r", [0, 3, -1])
def test_inverse_order_range(r):
    with pytest.raises(OrderOutOfRange):
        inverse_moment(build_engine(FIVE), r)


# ------------------------------------------------------------ continuation

def test_continuation_approaches_inverse_moment():
    e = build_engine(FIVE)
    for r in (1, 2):
        target = inverse_moment(e, r)
        vals = mellin_continuation_check(e, r, [1e-2, 1e-3, 1e-4])
        errs = [abs(v - target) for v in vals]
        assert errs[0] > errs[1] > errs[2]
        assert errs[-1] / target < 1e-2
        head, tail = mellin_split(e, 1e-4, r)
        assert abs(tail) < 1e-2 * target
        assert head + tail == pytest.approx(vals[-1], rel=1e-12)


def test_continuation_finite_next_to_pole():
    e = build_engine(Spectrum([1.0, 3.0], 1))
    (v,) = mellin_continuation_check(e, 1, [1e-3])
    assert np.isfinite(v)
    assert v == pytest.approx(inverse_moment(e, 1), rel=1e-2)


def test_continuation_rejects_large_s():
    e = build_engine(FIVE)
    with pytest.raises(DomainError):
        mellin_continuation_check(e, 1, [0.1])
    with pytest.raises(OrderOutOfRange):
        mellin_continuation_check(e, 3, [0.01])


@pytest.mark.parametrize("k", [0, 1, 2, 3, 5])
def test_gamma_pole_ratio_limit(k):
    assert gamma_pole_ratio(k, 1e-12) == pytest.approx((-1) ** k / math.factorial(k), rel=1e-9)


# -------------------------------------------------------------- properties

@settings(max_examples=40, deadline=None)
@given(s=spectra())
def test_cofactor_identity(s):
    e = build_engine(s)
    c = e.cmat
    det = np.linalg.det(c)
    np.testing.assert_allclose(c @ e.cof.T, det * np.eye(s.m), atol=1e-12 * abs(det) * np.linalg.cond(c))
    assert e.L * det == pytest.approx(1.0 / s.m, rel=1e-6)
    assert cofactor_residual(e) < 1e-20


@settings(max_examples=40, deadline=None)
@given(s=spectra())
def test_normalization_and_trace(s):
    e = build_engine(s)
    assert mellin(e, 1.0) == pytest.approx(1.0, abs=1e-10)
    assert positive_moment(e, 1) == pytest.approx(float(np.sum(s.thetas)), rel=1e-10)
    assert positive_moment(e, 2) == pytest.approx(
        float(np.sum(s.thetas)) ** 2 + s.m * float(np.sum(s.thetas**2)), rel=1e-10
    )


@settings(max_examples=40, deadline=None)
@given(s=spectra(), c=st.floats(1e-3, 1e3))
def test_scaling_property(s, c):
    e, ec = build_engine(s), build_engine(scale_spectrum(s, c))
    for r in range(1, s.p + 1):
        assert inverse_moment(ec, r) == pytest.approx(c**-r * inverse_moment(e, r), rel=1e-10)
        assert positive_moment(ec, r) == pytest.approx(c**r * positive_moment(e, r), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(s=spectra())
def test_jensen(s):
    e = build_engine(s)
    mu1 = inverse_moment(e, 1)
    assert mu1 * positive_moment(e, 1) >= 1.0 - 1e-12
    if s.p >= 2:
        assert inverse_moment(e, 2) >= mu1**2 * (1 - 1e-12)
