"""
Command-line driver.

Subcommands: ``extract``, ``eval``, ``fit {rq,psi,superscaling,tau-linear}``,
``simulate`` and ``check``.  Each writes its outputs plus ``manifest.json``
into the output directory (``--out``, else ``$CTRWSTATS_OUT``, else ``.``).

Exit codes: 0 success, 1 check-suite failure, 2 input error, 3 parameter error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checks import IDENTITY_TOL, run_checks
from .estimation import (
    ALPHA_CAP,
    FitError,
    fit_piecewise_tau,
    fit_psi,
    fit_rq_curve,
    fit_superscaling,
)
from .events import (
    InputError,
    Histogram,
    InterEventSample,
    _read_csv_rows,
    detrend,
    extract_events,
    histogram,
    read_rq_curve_csv,
    read_series_csv,
    rq_curve,
    write_rq_curve_csv,
    write_series_csv,
)
from .extreme_model import WeibullParams
from .mc_sim import SimConfig, generate_series, sample_interevents
from .special_fns import DomainError
from .superstat import (
    Direction,
    SuperstatParams,
    density,
    moment,
    psi_clustering,
    psi_initial,
    psi_mixture,
    psi_tail,
)

log = logging.getLogger("ctrwstats")

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_PARAM = 0, 1, 2, 3
OUT_ENV = "CTRWSTATS_OUT"


class ParamError(ValueError):
    """Invalid model parameters or configuration."""


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:n`` with an optional ``log`` (default) or ``lin`` suffix."""
    m = re.fullmatch(r"\s*([^:]+):([^:]+):(\d+)\s*(log|lin)?\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"grid must look like lo:hi:n[log|lin], got {text!r}")
    try:
        lo, hi = float(m[1]), float(m[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid bounds must be numbers, got {text!r}") from None
    n, kind = int(m[3]), m[4] or "log"
    if n < 1 or not hi >= lo:
        raise argparse.ArgumentTypeError("grid needs n >= 1 and hi >= lo")
    if kind == "log":
        if lo <= 0:
            raise argparse.ArgumentTypeError("log grid needs lo > 0")
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, Path):
        return str(v)
    return v


class Run:
    """Collects outputs and writes the manifest for one command."""

    def __init__(self, args, command: str):
        self.args = args
        self.command = command
        self.out = Path(args.out or os.environ.get(OUT_ENV) or ".")
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.inputs: dict[str, str] = {}

    def input(self, path) -> Path:
        path = Path(path)
        if not path.is_file():
            raise InputError(f"{path}: no such file")
        self.inputs[str(path)] = _sha256(path)
        return path

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def write_json(self, name: str, obj) -> None:
        self.path(name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def manifest(self) -> None:
        cfg = {k: _plain(v) for k, v in sorted(vars(self.args).items()) if k not in ("func", "out")}
        (self.out / "manifest.json").write_text(
            json.dumps(
                {
                    "command": self.command,
                    "config": cfg,
                    "inputs": self.inputs,
                    "seed": getattr(self.args, "seed", None),
                    "version": __version__,
                    "outputs": self.outputs,
                },
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )


# extract


def cmd_extract(args) -> int:
    run = Run(args, "extract")
    series = read_series_csv(run.input(args.input), log_returns=args.log_returns)
    if args.detrend:
        series = detrend(series, args.detrend)
    inclusive = not args.exclusive
    if args.q is None and args.grid is None:
        raise ParamError("give --q and/or --grid")
    if args.q is not None:
        smp = extract_events(series, args.mode, args.q, inclusive=inclusive, min_events=args.min_events)
        smp.to_json(run.path("interevents.json"), indent=2)
        if args.bins and len(smp.deltas):
            histogram(smp, args.binning, args.bins).to_csv(run.path("histogram.csv"))
    if args.grid is not None:
        pts = rq_curve(series, args.mode, args.grid, min_events=args.min_events, inclusive=inclusive)
        write_rq_curve_csv(pts, run.path("rq_curve.csv"))
    run.manifest()
    return EXIT_OK


# eval


def _eval_params(args) -> tuple[SuperstatParams, SuperstatParams | None, float, float]:
    d: dict = {}
    if args.params:
        try:
            d = json.loads(Path(args.params).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.params}: {exc.msg}", line=exc.lineno) from None
    for key, flag in (("alpha", args.alpha), ("tau_q", args.tau)):
        if flag is not None:
            d[key] = flag
    if args.direction:
        d["direction"] = args.direction
    if "alpha" not in d or "tau_q" not in d:
        raise ParamError("alpha and tau_q are required")
    try:
        sp = SuperstatParams.from_dict(d)
        # the clustering component inherits alpha and tau_q unless it overrides them
        shared = {"alpha": d["alpha"], "tau_q": d["tau_q"]}
        clu = SuperstatParams.from_dict({**shared, **d["clustering"], "direction": "clustering"}) if "clustering" in d else None
        r_q = float(d.get("r_q", 1.0))
        w = float(d.get("weight", 0.5))
        if not r_q > 0 or not 0 <= w <= 1:
            raise ValueError("r_q must be > 0 and weight in [0, 1]")
    except (TypeError, KeyError, ValueError) as exc:
        raise ParamError(str(exc)) from None
    return sp, clu, r_q, w


def _safe(fn, *a, **kw):
    try:
        return float(fn(*a, **kw))
    except (DomainError, ValueError, OverflowError):
        return math.nan


def cmd_eval(args) -> int:
    run = Run(args, "eval")
    if args.params:
        run.input(args.params)
    sp, clu, r_q, w = _eval_params(args)
    grid = args.grid if args.grid is not None else np.geomspace(1e-3, 1e3, 61) * sp.tau_q
    expanding = sp.direction is Direction.EXPANDING
    cols = ["dt", "psi"]
    if expanding:
        cols += ["psi_tail", "psi_initial"]
        if clu is not None:
            cols += ["psi_clustering", "psi_mixture"]
    with open(run.path("psi.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(cols)
        for t in grid:
            t = float(t)
            if expanding:
                row = [t, _safe(density, sp, t), _safe(psi_tail, sp, t), _safe(psi_initial, sp, t)]
                if clu is not None:
                    row += [
                        _safe(psi_clustering, clu, t, compat=args.alt_clustering),
                        _safe(psi_mixture, sp, clu, w, t, compat=args.alt_clustering),
                    ]
            else:
                row = [t, _safe(psi_clustering, sp, t, compat=args.alt_clustering)]
            wr.writerow([repr(v) for v in row])
    with open(run.path("moments.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["m", "value", "finite"])
        for m in args.moments:
            mo = moment(sp, r_q, m, conditional=args.conditional)
            wr.writerow([m, "" if mo.value is None else repr(mo.value), int(mo.finite)])
    run.manifest()
    return EXIT_OK


# fit


def _read_pairs(path, header) -> np.ndarray:
    rows = _read_csv_rows(path, header)
    out = []
    for lineno, row in rows:
        try:
            out.append((float(row[0]), float(row[1])))
        except (ValueError, IndexError):
            raise InputError("expected two numeric columns", line=lineno) from None
    return np.array(out, dtype=float).reshape(-1, 2)


def _residuals(run: Run, data) -> None:
    with open(run.path("residuals.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "observed", "fitted"])
        for x, obs, fit in data:
            wr.writerow([repr(float(x)), repr(float(obs)), repr(float(fit))])


def cmd_fit(args) -> int:
    run = Run(args, f"fit {args.kind}")
    path = run.input(args.input)
    rows = []
    if args.kind == "rq":
        pts = [p for p in read_rq_curve_csv(path) if p.reliable and math.isfinite(p.r_q)]
        rep = fit_rq_curve(pts, fit_calib=not args.fix_calib)
        wp: WeibullParams = rep.value
        rows = [(p.q, p.r_q, wp.calib * math.exp((p.q / wp.eps_bar) ** wp.eta)) for p in pts]
    elif args.kind == "psi":
        if path.suffix == ".json":
            try:
                smp = InterEventSample.from_dict(json.loads(path.read_text()))
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: {exc.msg}", line=exc.lineno) from None
            if len(smp.deltas) == 0:
                raise InputError("interevent sample has no deltas")
            h = histogram(smp, args.binning, args.bins)
        else:
            h = Histogram.from_csv(path)
        rep = fit_psi(h, args.direction or "expanding", alpha_cap=args.alpha_cap, model=args.model)
        keep = h.counts > 0
        fitted = density(rep.value, h.centers[keep])
        rows = list(zip(h.centers[keep], h.densities[keep], np.atleast_1d(fitted)))
    elif args.kind == "superscaling":
        arr = _read_pairs(path, ("r_q", "alpha"))
        rep = fit_superscaling(arr, alpha_cap=args.alpha_cap)
        if rep.value is not None:
            law = rep.value
            rows = [(r, 1 / a, law.b * math.log(r) ** law.zeta) for r, a in arr if a < args.alpha_cap]
    else:
        arr = _read_pairs(path, ("r_q", "tau_q"))
        rep = fit_piecewise_tau(arr)
        rows = [(r, t, rep.value(r)) for r, t in arr]
    run.write_json("fit.json", rep.to_dict())
    if args.residuals and rows:
        _residuals(run, rows)
    run.manifest()
    return EXIT_OK


# simulate


def cmd_simulate(args) -> int:
    run = Run(args, "simulate")
    if args.series_length:
        if not args.params:
            raise ParamError("--series-length needs --params with Weibull parameters")
        try:
            p = WeibullParams.from_dict(json.loads(Path(run.input(args.params)).read_text()))
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.params}: {exc.msg}", line=exc.lineno) from None
        except (KeyError, TypeError, ValueError) as exc:
            raise ParamError(str(exc)) from None
        s = generate_series(p, args.series_length, args.sign_prob, seed=args.seed or 0, n_workers=args.workers or 1)
        write_series_csv(s, run.path("series.csv"))
        run.manifest()
        return EXIT_OK
    if not args.config:
        raise ParamError("simulate needs --config (or --series-length)")
    try:
        d = json.loads(Path(run.input(args.config)).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}: {exc.msg}", line=exc.lineno) from None
    for key, flag in (("seed", args.seed), ("n_workers", args.workers), ("n_samples", args.n_samples), ("q", args.q)):
        if flag is not None:
            d[key] = flag
    try:
        cfg = SimConfig.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParamError(str(exc)) from None
    args.seed = cfg.seed
    smp = sample_interevents(cfg, mode=args.mode)
    smp.to_json(run.path("interevents.json"))
    if len(smp.deltas):
        histogram(smp, args.binning, args.bins).to_csv(run.path("histogram.csv"))
    run.write_json("config_resolved.json", cfg.to_dict())
    run.manifest()
    return EXIT_OK


# check


def cmd_check(args) -> int:
    run = Run(args, "check")
    rep = run_checks(
        n_sets=args.n_sets,
        seed=args.seed or 0,
        tol=args.tol,
        perturb=args.perturb,
        integrals=not args.no_integrals,
    )
    run.write_json("check.json", rep.to_dict())
    run.manifest()
    for name, r in rep.results.items():
        print(f"{'PASS' if r.passed else 'FAIL'} {name} max_rel_err={r.max_rel_err:.3e} tol={r.tol:g}")
    return EXIT_OK if rep.passed else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ctrwstats", description=__doc__.split("\n\n")[0].strip())
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
        p.add_argument("--settings", help="JSON file of option defaults; explicit flags win")
        return p

    p = common(sub.add_parser("extract", help="threshold events, interevent times and R_Q curves"))
    p.add_argument("--input", required=True, help="CSV with header t,r")
    p.add_argument("--mode", choices=("loss", "profit"), default="loss")
    p.add_argument("--q", type=float, help="single threshold: write interevents.json")
    p.add_argument("--grid", type=parse_grid, help="threshold grid for rq_curve.csv")
    p.add_argument("--min-events", type=int, default=10)
    p.add_argument("--exclusive", action="store_true", help="strict threshold comparison")
    p.add_argument("--log-returns", action="store_true", help="convert simple returns r to ln(1 + r)")
    p.add_argument("--detrend", type=int, default=0, metavar="WINDOW")
    p.add_argument("--bins", type=int, default=0, help="also write a histogram with this many bins")
    p.add_argument("--binning", choices=("log", "lin"), default="log")
    p.set_defaults(func=cmd_extract)

    p = common(sub.add_parser("eval", help="tabulate densities and moments"))
    p.add_argument("--params", help="JSON with alpha, tau_q[, direction, r_q, weight, clustering{alpha, tau_q}]")
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--direction", choices=("expanding", "clustering"))
    p.add_argument("--grid", type=parse_grid, help="dt grid (default 1e-3..1e3 times tau_q, 61 log points)")
    p.add_argument("--moments", type=lambda s: [int(v) for v in s.split(",")], default=[0, 1, 2])
    p.add_argument("--conditional", action="store_true", help="moments of the unit-mass density")
    p.add_argument(
        "--alt-clustering-form",
        dest="alt_clustering",
        action="store_true",
        help="evaluate the alternative (non-normalizable) clustering expression",
    )
    p.set_defaults(func=cmd_eval)

    p = common(sub.add_parser("fit", help="parameter estimation"))
    p.add_argument("kind", choices=("rq", "psi", "superscaling", "tau-linear"))
    p.add_argument("--input", required=True)
    p.add_argument("--direction", choices=("expanding", "clustering"))
    p.add_argument("--alpha-cap", type=float, default=ALPHA_CAP)
    p.add_argument("--model", choices=("bin_average", "center"), default="bin_average")
    p.add_argument("--bins", type=int, default=40)
    p.add_argument("--binning", choices=("log", "lin"), default="log")
    p.add_argument("--fix-calib", action="store_true", help="hold calib at 1 in the R_Q fit")
    p.add_argument("--residuals", action="store_true", help="write residuals.csv")
    p.set_defaults(func=cmd_fit)

    p = common(sub.add_parser("simulate", help="Monte Carlo interevent samples or return series"))
    p.add_argument("--config", help="SimConfig JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--q", type=float)
    p.add_argument("--mode", choices=("loss", "profit"), default="loss")
    p.add_argument("--bins", type=int, default=40)
    p.add_argument("--binning", choices=("log", "lin"), default="log")
    p.add_argument("--series-length", type=int, help="write a return series of this length instead")
    p.add_argument("--params", help="Weibull JSON for --series-length")
    p.add_argument("--sign-prob", type=float, default=0.5)
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("check", help="identity and consistency suite"))
    p.add_argument("--n-sets", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=IDENTITY_TOL)
    p.add_argument("--perturb", help="skew one named check (test hook)")
    p.add_argument("--no-integrals", action="store_true", help="skip normalization and quadrature checks")
    p.set_defaults(func=cmd_check)
    return ap


def _explicit_dests(parser: argparse.ArgumentParser, argv: list[str]) -> set[str]:
    given = set()
    for action in parser._actions:
        for opt in action.option_strings:
            if any(a == opt or a.startswith(opt + "=") for a in argv):
                given.add(action.dest)
    return given


def _apply_settings(ap, args, argv) -> None:
    """Fill options from ``--settings`` unless given on the command line."""
    if not getattr(args, "settings", None):
        return
    path = Path(args.settings)
    try:
        cfg = json.loads(path.read_text())
    except FileNotFoundError:
        raise InputError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: {exc.msg}", line=exc.lineno) from None
    sub = ap._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    given = _explicit_dests(sub, argv)
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in actions:
            raise ParamError(f"unknown setting {key!r}")
        if dest in given:
            continue
        act = actions[dest]
        if act.type is not None and isinstance(value, str):
            value = act.type(value)
        setattr(args, dest, value)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _apply_settings(ap, args, argv)
        return args.func(args)
    except (InputError, FitError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ParamError, DomainError, ValueError, OverflowError) as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
