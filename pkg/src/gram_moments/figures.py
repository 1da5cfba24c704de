"""Datasets behind the six comparison figures (data only, no plotting)."""

from __future__ import annotations

import numpy as np

from .apps import NoiseModel, blue_mse, lmmse_mse_high_snr, lmmse_mse_low_snr
from .asymptotic import asymptotic_inverse_moment, compute_derivatives, solve_fixed_point
from .errors import ConvergenceWarning
from .exact import build_engine, inverse_moment
from .oracle import mc_blue_error, mc_empirical_moment, mc_lmmse_error
from .scm import DEFAULT_GRID, optimize_lambda
from .spectra import bessel_scattering_matrix, shifted_wishart_matrix, spectrum_from_matrix

__all__ = ["COLUMNS", "row", "derive_seed", "model_matrix", "FIGURES", "figure_dataset"]

COLUMNS = ("method", "n", "m", "order", "value", "std_error", "trials", "seed", "param")

FIG_M = 3
FIG_NS = tuple(range(4, 11))
LMMSE_N = 10
SNR_DB = tuple(range(-30, 35, 5))
LOW_SNR_K = 8


def row(method, n, m, order, value, std_error=None, trials=None, seed=None, param=None) -> dict:
    return dict(zip(COLUMNS, (method, n, m, order, value, std_error, trials, seed, param)))


def derive_seed(seed: int, *tags: int) -> int:
    """Independent, reproducible sub-seed for one table cell."""
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1, np.uint64)[0])


def model_matrix(model: str, n: int, seed: int):
    if model == "bessel":
        return bessel_scattering_matrix(n)
    if model in ("randpd", "shifted-wishart"):
        return shifted_wishart_matrix(n, seed)
    raise ValueError(f"unknown model {model!r}")


def _inverse_moments(model: str, fig: int, seed: int, trials: int) -> list[dict]:
    rows = []
    for n in FIG_NS:
        sp = spectrum_from_matrix(model_matrix(model, n, seed), FIG_M)
        e = build_engine(sp)
        st = compute_derivatives(solve_fixed_point(sp), sp.p - 1)
        for r in range(1, sp.p + 1):
            rows.append(row("exact", n, FIG_M, -r, inverse_moment(e, r)))
            rows.append(row("asymptotic", n, FIG_M, -r, asymptotic_inverse_moment(st, r)))
            cell_seed = derive_seed(seed, fig, n, r)
            est = mc_empirical_moment(sp, -r, trials, cell_seed)
            rows.append(row("mc", n, FIG_M, -r, est.mean, est.std_error, trials, cell_seed))
    return rows


def _blue(seed: int, trials: int) -> list[dict]:
    rows = []
    for k, model in enumerate(("bessel", "randpd")):
        for n in FIG_NS:
            lam = model_matrix(model, n, seed)
            nm = NoiseModel.from_precision(spectrum_from_matrix(lam, FIG_M))
            rows.append(row(f"exact:{model}", n, FIG_M, -1, blue_mse(nm, FIG_M)))
            cell_seed = derive_seed(seed, 3, k, n)
            sigma_z = np.linalg.inv(lam.entries)
            est = mc_blue_error(sigma_z, FIG_M, trials, cell_seed)
            rows.append(row(f"mc:{model}", n, FIG_M, -1, est.mean, est.std_error, trials, cell_seed))
    return rows


def _lmmse(model: str, fig: int, seed: int, trials: int) -> list[dict]:
    sigma_z = model_matrix(model, LMMSE_N, seed)
    nm = NoiseModel.from_matrix(sigma_z)
    e = nm.engine(FIG_M)
    l = e.spectrum.p - 1
    rows = []
    for db in SNR_DB:
        s2 = 10.0 ** (db / 10.0)
        hi = lmmse_mse_high_snr(nm, FIG_M, s2, l, engine=e)
        rows.append(row("high_snr", LMMSE_N, FIG_M, l, hi.value, param=s2))
        try:
            lo = lmmse_mse_low_snr(nm, FIG_M, s2, LOW_SNR_K, engine=e)
            rows.append(row("low_snr", LMMSE_N, FIG_M, LOW_SNR_K, lo.value, param=s2))
        except ConvergenceWarning:
            pass  # diverging low-SNR series: no row rather than a misleading value
        cell_seed = derive_seed(seed, fig, db + 100)
        est = mc_lmmse_error(sigma_z, FIG_M, s2, trials, cell_seed)
        rows.append(row("mc", LMMSE_N, FIG_M, None, est.mean, est.std_error, trials, cell_seed, s2))
    return rows


def _scm() -> list[dict]:
    curve = optimize_lambda(FIG_M, LMMSE_N, DEFAULT_GRID)
    return [row("exact", LMMSE_N, FIG_M, None, loss, param=lam) for lam, loss in curve.grid]


FIGURES = {
    1: "inverse moments, Bessel scattering model",
    2: "inverse moments, shifted Wishart model",
    3: "BLUE mean square error vs n",
    4: "LMMSE mean square error vs SNR, Bessel noise covariance",
    5: "LMMSE mean square error vs SNR, shifted Wishart noise covariance",
    6: "SCM loss vs forgetting factor",
}


def figure_dataset(which: int, seed: int = 42, trials: int = 10_000) -> list[dict]:
    if which == 1:
        return _inverse_moments("bessel", 1, seed, trials)
    if which == 2:
        return _inverse_moments("randpd", 2, seed, trials)
    if which == 3:
        return _blue(seed, trials)
    if which == 4:
        return _lmmse("bessel", 4, seed, trials)
    if which == 5:
        return _lmmse("randpd", 5, seed, trials)
    if which == 6:
        return _scm()
    raise ValueError(f"no figure {which}; choose from 1-6")
