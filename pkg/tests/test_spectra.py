import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gram_moments.errors import DimensionError, NotPositiveDefinite, RepeatedEigenvalues
from gram_moments.spectra import (
    CorrelationMatrix,
    Spectrum,
    bessel_scattering_matrix,
    load_matrix,
    load_spectrum,
    save_matrix,
    save_spectrum,
    scale_spectrum,
    shifted_wishart_matrix,
    spectrum_from_matrix,
)


def j0_series(x, terms=80):
    """Power series of J0 summed in exact rationals, then rounded once."""
    x = Fraction(x)
    total, term = Fraction(0), Fraction(1)
    for k in range(terms):
        total += term
        term *= -(x * x) / (4 * (k + 1) ** 2)
    return float(total)


def test_spectrum_sorts_and_exposes_dimensions():
    s = Spectrum([3.0, 1.0, 2.0, 5.0], 1)
    assert list(s.thetas) == [1.0, 2.0, 3.0, 5.0]
    assert (s.n, s.m, s.p) == (4, 1, 1)
    assert s.min_gap == 1.0
    assert s.condition_ratio == 5.0
    assert Spectrum(np.arange(1.0, 11.0), 4).p == 4
    assert Spectrum(np.arange(1.0, 11.0), 8).p == 2


@pytest.mark.parametrize(
    "thetas, m, exc",
    [
        ([1.0, 2.0], 2, DimensionError),
        ([1.0, 2.0], 0, DimensionError),
        ([0.0, 2.0, 3.0], 1, NotPositiveDefinite),
        ([-1.0, 2.0, 3.0], 1, NotPositiveDefinite),
        ([1.0, 2.0, 2.0], 1, RepeatedEigenvalues),
    ],
)
def test_spectrum_validation(thetas, m, exc):
    with pytest.raises(exc):
        Spectrum(thetas, m)


def test_repeats_allowed_when_requested():
    s = Spectrum(np.ones(5), 2, distinct=False)
    assert s.min_gap == 0.0


def test_spectrum_from_diagonal():
    s = spectrum_from_matrix(CorrelationMatrix(np.diag([3.0, 1.0, 2.0])), 1)
    assert s == Spectrum([1.0, 2.0, 3.0], 1)
    assert s.n == 3 and s.m == 1


def test_identity_is_rejected_as_repeated():
    with pytest.raises(RepeatedEigenvalues):
        spectrum_from_matrix(CorrelationMatrix(np.eye(4)), 2)


def test_dimension_error_when_m_too_large():
    with pytest.raises(DimensionError):
        spectrum_from_matrix(CorrelationMatrix(np.diag([1.0, 2.0, 3.0])), 3)


def test_indefinite_matrix_refused():
    with pytest.raises(NotPositiveDefinite):
        spectrum_from_matrix(CorrelationMatrix(np.array([[1.0, 2.0], [2.0, 1.0]])), 1)


def test_non_hermitian_rejected():
    with pytest.raises(DimensionError):
        CorrelationMatrix(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_shifted_wishart_spectrum():
    mat = shifted_wishart_matrix(5, seed=7)
    s = spectrum_from_matrix(mat, 2)
    assert s.n == 5
    assert np.all(s.thetas > 1.0)
    assert np.all(np.diff(s.thetas) > 0)
    # independent eigen-solver as cross-check
    ev = np.sort(np.real(np.linalg.eigvals(mat.entries)))
    np.testing.assert_allclose(s.thetas, ev, rtol=1e-10)


def test_bessel_two_by_two():
    a = bessel_scattering_matrix(2).entries
    oracle = j0_series(math.pi)
    assert oracle == pytest.approx(-0.304242, abs=1e-6)
    np.testing.assert_allclose(a, [[1.0, oracle], [oracle, 1.0]], rtol=0, atol=1e-14)


@pytest.mark.parametrize("n", [2, 5, 9])
def test_bessel_diagonal_and_toeplitz(n):
    a = bessel_scattering_matrix(n).entries
    assert np.all(a.diagonal() == 1.0)
    assert np.all(a.imag == 0.0)
    for i in range(n):
        for j in range(n):
            assert a[i, j] == a[abs(i - j), 0]


def test_bessel_entry_uses_squared_distance():
    a = bessel_scattering_matrix(4).entries
    assert a[0, 2].real == pytest.approx(j0_series(4 * math.pi), abs=1e-13)
    assert a[0, 3].real == pytest.approx(j0_series(9 * math.pi), abs=1e-12)


def test_shifted_wishart_deterministic_and_hermitian():
    a = shifted_wishart_matrix(3, seed=1).entries
    b = shifted_wishart_matrix(3, seed=1).entries
    assert np.array_equal(a, b)
    c = shifted_wishart_matrix(5, seed=7).entries
    assert np.abs(c - c.conj().T).max() <= 1e-15 * np.abs(c).max()
    assert not np.array_equal(c, shifted_wishart_matrix(5, seed=8).entries)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 10), seed=st.integers(0, 2**32))
def test_shifted_wishart_smallest_eigenvalue(n, seed):
    assert shifted_wishart_matrix(n, seed).eigenvalues().min() >= 1 - 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(3, 8))
def test_unitary_invariance(seed, n):
    rng = np.random.default_rng(seed)
    a = shifted_wishart_matrix(n, seed).entries
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    u, _ = np.linalg.qr(z)
    rotated = CorrelationMatrix(u.conj().T @ a @ u)
    s1 = spectrum_from_matrix(CorrelationMatrix(a), 1)
    s2 = spectrum_from_matrix(rotated, 1)
    np.testing.assert_allclose(s1.thetas, s2.thetas, rtol=1e-10)


@pytest.mark.parametrize(
    "c, expected",
    [(2.0, [2.0, 4.0, 6.0]), (1.0, [1.0, 2.0, 3.0]), (0.5, [0.5, 1.0, 1.5])],
)
def test_scale_spectrum(c, expected):
    s = scale_spectrum(Spectrum([1.0, 2.0, 3.0], 1), c)
    assert list(s.thetas) == expected
    assert s.m == 1


def test_scale_spectrum_rejects_nonpositive():
    with pytest.raises(ValueError):
        scale_spectrum(Spectrum([1.0, 2.0, 3.0], 1), 0.0)


def test_spectrum_file_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    s = Spectrum(rng.uniform(0.1, 10.0, size=7), 3)
    path = tmp_path / "spectrum.json"
    save_spectrum(s, path)
    assert load_spectrum(path) == s
    assert '"m": 3' in path.read_text()


def test_matrix_file_round_trip(tmp_path):
    mat = shifted_wishart_matrix(4, seed=11)
    path = tmp_path / "mat.json"
    save_matrix(mat, path)
    back = load_matrix(path)
    assert np.array_equal(back.entries, mat.entries)
