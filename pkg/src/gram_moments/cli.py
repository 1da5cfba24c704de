"""Command-line interface: ``gram-moments <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 numerical conditioning,
4 convergence failure. Errors are reported on stderr as a JSON object
and no partial output file is left behind.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import figures
from .apps import NoiseModel, blue_mse, lmmse_mse_high_snr, lmmse_mse_low_snr
from .asymptotic import asymptotic_inverse_moment, compute_derivatives, solve_fixed_point
from .errors import ConvergenceWarning, GramMomentsError, OrderOutOfRange
from .exact import build_engine, moment
from .figures import COLUMNS, derive_seed, row
from .oracle import mc_empirical_moment, mc_lmmse_error, mc_blue_error, mc_scm_loss
from .scm import DEFAULT_GRID, optimize_lambda
from .spectra import Spectrum, load_matrix, load_spectrum, spectrum_from_matrix

MODELS = ("bessel", "randpd", "shifted-wishart")


# ------------------------------------------------------------------ parsing

def parse_orders(text: str) -> list[int]:
    """``"a..b"`` inclusive, or a comma list; zero is dropped."""
    try:
        if ".." in text:
            lo, hi = (int(t) for t in text.split("..", 1))
            orders = list(range(lo, hi + 1))
        else:
            orders = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad order range {text!r}; use a..b") from None
    return [r for r in orders if r != 0]


def parse_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _add_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--spectrum", type=Path, help='JSON {"thetas": [...], "m": int}')
    src.add_argument("--matrix", type=Path, help='JSON {"re": [[...]], "im": [[...]]}')
    src.add_argument("--model", choices=MODELS, help="built-in correlation model")
    p.add_argument("--n", type=int, help="dimension for --model")
    p.add_argument("--m", type=int, help="Gram dimension (overrides the spectrum file)")


def _add_output(p: argparse.ArgumentParser, seed: bool = True) -> None:
    p.add_argument("--out", type=Path, help="output file (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    if seed:
        p.add_argument("--seed", type=int, default=42)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gram-moments", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", help="exact moments mu(r)")
    _add_source(p)
    p.add_argument("--orders", type=parse_orders, help="range a..b (default -p..3)")
    _add_output(p)

    p = sub.add_parser("asymptotic", help="deterministic-equivalent inverse moments")
    _add_source(p)
    p.add_argument("--orders", type=parse_orders, help="negative range, e.g. -3..-1 (default -p..-1)")
    _add_output(p)

    p = sub.add_parser("mc", help="Monte Carlo estimate of mu(r)")
    _add_source(p)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--trials", type=int, default=10_000)
    _add_output(p)

    p = sub.add_parser("blue", help="BLUE mean square error")
    _add_source(p)
    p.add_argument("--as", dest="role", choices=("lambda", "sigma_z"), default="lambda",
                   help="whether the source matrix is Lambda = Sigma_z^-1 (default) or Sigma_z")
    p.add_argument("--trials", type=int, default=10_000, help="0 skips Monte Carlo")
    _add_output(p)

    p = sub.add_parser("lmmse", help="LMMSE error: high/low-SNR series and Monte Carlo")
    _add_source(p)
    p.add_argument("--as", dest="role", choices=("lambda", "sigma_z"), default="sigma_z",
                   help="whether the source matrix is Sigma_z (default) or Lambda")
    p.add_argument("--sigma-x2", type=parse_floats, help="signal variances (default -30..30 dB)")
    p.add_argument("--l", type=int, help="high-SNR truncation order (default p-1)")
    p.add_argument("--K", type=int, default=figures.LOW_SNR_K, help="low-SNR truncation order")
    p.add_argument("--trials", type=int, default=10_000, help="0 skips Monte Carlo")
    _add_output(p)

    p = sub.add_parser("scm", help="exponentially weighted SCM loss over a lambda grid")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--grid", type=parse_floats, help="forgetting factors (default 0.05..0.95)")
    p.add_argument("--trials", type=int, default=0, help="Monte Carlo trials per point (0 skips)")
    _add_output(p)

    p = sub.add_parser("figures", help="emit the six comparison datasets")
    p.add_argument("--which", type=lambda t: [int(v) for v in t.split(",")], default=list(figures.FIGURES))
    p.add_argument("--out", type=Path, default=Path("figures"), help="output directory")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trials", type=int, default=10_000)
    return ap


# ---------------------------------------------------------------- rendering

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def render(rows: list[dict], metadata: dict, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        for key, val in metadata.items():
            buf.write(f"# {key}={_cell(val) if not isinstance(val, list) else ','.join(map(_cell, val))}\n")
        buf.write(",".join(COLUMNS) + "\n")
        for r in rows:
            buf.write(",".join(_cell(r[c]) for c in COLUMNS) + "\n")
        return buf.getvalue()
    plain = lambda v: float(v) if isinstance(v, np.floating) else v  # noqa: E731
    obj = {"metadata": metadata, "columns": list(COLUMNS),
           "rows": [{c: plain(r[c]) for c in COLUMNS} for r in rows]}
    return json.dumps(obj, indent=1) + "\n"


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


# ----------------------------------------------------------------- commands

def _spectrum(args) -> tuple[Spectrum, object]:
    """Resolve the spectrum source; also returns the matrix when one exists."""
    if args.spectrum is not None:
        s = load_spectrum(args.spectrum)
        if args.m is not None:
            s = Spectrum(s.thetas, args.m)
        return s, None
    if args.m is None:
        raise GramMomentsError("--m is required with --matrix or --model")
    if args.matrix is not None:
        mat = load_matrix(args.matrix)
    else:
        if args.n is None:
            raise GramMomentsError("--n is required with --model")
        mat = figures.model_matrix(args.model, args.n, args.seed)
    return spectrum_from_matrix(mat, args.m), mat


def cmd_moments(args):
    s, _ = _spectrum(args)
    orders = args.orders or [r for r in range(-s.p, 4) if r != 0]
    e = build_engine(s)
    rows = [row("exact", s.n, s.m, r, moment(e, r)) for r in orders]
    return rows, {"mu(0)": 1, "p": s.p}


def cmd_asymptotic(args):
    s, _ = _spectrum(args)
    orders = args.orders or list(range(-s.p, 0))
    if any(r > 0 for r in orders):
        raise OrderOutOfRange("asymptotic moments are computed for negative orders only")
    st = compute_derivatives(solve_fixed_point(s), max(-r for r in orders) - 1)
    rows = [row("asymptotic", s.n, s.m, r, asymptotic_inverse_moment(st, -r)) for r in orders]
    return rows, {"m0": st.m0, "fixed_point_residual": st.residual}


def cmd_mc(args):
    s, _ = _spectrum(args)
    est = mc_empirical_moment(s, args.order, args.trials, args.seed)
    rows = [row("mc", s.n, s.m, args.order, est.mean, est.std_error, args.trials, args.seed)]
    if args.order >= -s.p:
        rows.insert(0, row("exact", s.n, s.m, args.order, moment(build_engine(s), args.order)))
    return rows, {}


def _noise_model(args) -> tuple[NoiseModel, object, int]:
    s, mat = _spectrum(args)
    if args.role == "lambda":
        nm = NoiseModel.from_precision(s)
        sigma_z = np.linalg.inv(mat.entries) if mat is not None else nm.sigma_z_spectrum
    else:
        nm = NoiseModel(s.thetas)
        sigma_z = mat if mat is not None else s.thetas
    return nm, sigma_z, s.m


def cmd_blue(args):
    nm, sigma_z, m = _noise_model(args)
    rows = [row("exact", nm.n, m, -1, blue_mse(nm, m))]
    if args.trials > 0:
        est = mc_blue_error(sigma_z, m, args.trials, args.seed)
        rows.append(row("mc", nm.n, m, -1, est.mean, est.std_error, args.trials, args.seed))
    return rows, {}


def cmd_lmmse(args):
    nm, sigma_z, m = _noise_model(args)
    e = nm.engine(m)
    l = e.spectrum.p - 1 if args.l is None else args.l
    variances = args.sigma_x2 or [10.0 ** (db / 10.0) for db in figures.SNR_DB]
    rows, diverged = [], []
    for i, s2 in enumerate(variances):
        rows.append(row("high_snr", nm.n, m, l, lmmse_mse_high_snr(nm, m, s2, l, engine=e).value, param=s2))
        try:
            lo = lmmse_mse_low_snr(nm, m, s2, args.K, engine=e)
            rows.append(row("low_snr", nm.n, m, args.K, lo.value, param=s2))
        except ConvergenceWarning:
            diverged.append(s2)
        if args.trials > 0:
            cell_seed = derive_seed(args.seed, i)
            est = mc_lmmse_error(sigma_z, m, s2, args.trials, cell_seed)
            rows.append(row("mc", nm.n, m, None, est.mean, est.std_error, args.trials, cell_seed, s2))
    return rows, {"low_snr_diverged": diverged}


def cmd_scm(args):
    curve = optimize_lambda(args.m, args.n, args.grid or DEFAULT_GRID)
    rows = []
    for i, (lam, loss) in enumerate(curve.grid):
        rows.append(row("exact", args.n, args.m, None, loss, param=lam))
        if args.trials > 0:
            cell_seed = derive_seed(args.seed, i)
            est = mc_scm_loss(args.m, args.n, lam, args.trials, cell_seed)
            rows.append(row("mc", args.n, args.m, None, est.mean, est.std_error, args.trials, cell_seed, lam))
    return rows, {"lambda_star": curve.lambda_star, "loss_star": curve.loss_star, "rejected": curve.rejected}


def cmd_figures(args):
    outputs = {}
    for k in args.which:
        rows = figures.figure_dataset(k, seed=args.seed, trials=args.trials)
        meta = {"figure": k, "title": figures.FIGURES[k]}
        outputs[args.out / f"fig{k}.{args.format}"] = render(rows, meta, args.format)
    written = []
    try:
        for path, text in outputs.items():
            _write_atomic(path, text)
            written.append(path)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return None


COMMANDS = {
    "moments": cmd_moments,
    "asymptotic": cmd_asymptotic,
    "mc": cmd_mc,
    "blue": cmd_blue,
    "lmmse": cmd_lmmse,
    "scm": cmd_scm,
    "figures": cmd_figures,
}


def _fail(exc: BaseException, code: int) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def _glue_negative_values(argv: list[str]) -> list[str]:
    # argparse reads "-2..3" as an option; pass it as "--orders=-2..3"
    out, i = [], 0
    while i < len(argv):
        if argv[i] in ("--orders", "--order") and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_negative_values(argv))
    try:
        result = COMMANDS[args.command](args)
        if result is not None:
            rows, meta = result
            text = render(rows, {"command": args.command, **meta}, args.format)
            if args.out is None:
                sys.stdout.write(text)
            else:
                _write_atomic(args.out, text)
    except GramMomentsError as exc:
        return _fail(exc, exc.exit_code)
    except (ValueError, KeyError, OSError) as exc:
        return _fail(exc, 2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
