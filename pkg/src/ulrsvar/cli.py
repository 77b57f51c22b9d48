"""Command-line interface: ``ulrsvar <command> ...`` (or ``python3 -m ulrsvar``)."""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from .acf import ACF_KINDS, acf_family, end_aligned_grid
from .config import floats, load_params
from .errors import IngestError
from .estimator import estimate
from .experiments import acf_rows, path_rows, resolve_spec, run_fig_suite, write_csv
from .model_core import bivariate_design_params
from .pipeline_app import apply_pipeline
from .prediction import DEFAULT_LEVELS, build_belt, minmax_interval, plug_in_interval
from .simulator import LTU_TAGS, LTUVariant, simulate_array, simulate_ltu, tail_prob


def read_path_csv(path) -> np.ndarray:
    """Observed columns ``y_1..y_n`` of a path CSV (``#`` lines skipped)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if len(rows) < 2:
        raise IngestError(f"{path}: no data")
    header = rows[0]
    cols = [j for j, h in enumerate(header) if h.startswith("y_")]
    if not cols:
        raise IngestError(f"{path}: line 1: no y_ columns")
    try:
        return np.array([[float(r[j]) for j in cols] for r in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise IngestError(f"{path}: malformed row ({exc})") from None


def _grid(args, T: int) -> np.ndarray:
    if args.c_grid:
        return np.array(floats(args.c_grid))
    return end_aligned_grid(args.K, args.H, T)


def cmd_simulate(args) -> int:
    params = load_params(args.config) if args.config else bivariate_design_params()
    path = simulate_array(params, args.T, args.seed, args.rep)
    header, rows = path_rows(path)
    write_csv(args.out, header, rows, {"seed": args.seed, "rep": args.rep, "T": args.T, "a_convention": path.a_convention})
    return 0


def cmd_ltu(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for T in args.T:
        v = LTUVariant(args.variant, sigma=args.sigma, c=args.c, d=args.d)
        y = simulate_ltu(v, T, args.seed)
        write_csv(out / f"ltu_{args.variant}_T{T}.csv", ["t", "y"], [[t + 1, y[t]] for t in range(T)], {"variant": args.variant, "seed": args.seed})
        est = tail_prob(v, T, args.A_level, args.reps, args.seed)
        summary.append([args.variant, T, args.A_level, est.prob, est.se, est.t_argmax, est.reps])
    write_csv(out / "tail_summary.csv", ["variant", "T", "A_level", "tail_prob", "se", "t_argmax", "reps"], summary)
    return 0


def cmd_acf(args) -> int:
    y = read_path_csv(args.input)
    T = y.shape[0]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = _grid(args, T)
    for kind in args.kind:
        if kind == "standard":
            est = acf_family(y, kind, np.arange(args.max_lag + 1))
        elif kind == "distant":
            est = acf_family(y, kind, np.array(floats(args.fractions)))
        elif kind == "local":
            est = acf_family(y, kind, np.arange(min(args.max_lag, args.H) + 1), H_T=args.H, c=args.c)
        elif kind == "averaged_sr":
            est = acf_family(y, kind, np.arange(min(args.max_lag, args.H) + 1), c_grid=grid, H_T=args.H)
        else:
            est = acf_family(y, kind, np.arange(len(grid)), c_grid=grid, H_T=args.H)
        write_csv(out / f"acf_{kind}.csv", ["lag", "i", "j", "value"], acf_rows(est), {"kind": kind, "degenerate": int(est.degenerate)})
    return 0


def cmd_estimate(args) -> int:
    y = read_path_csv(args.input)
    T = y.shape[0]
    grid = _grid(args, T)
    resid = np.array(floats(args.residual_grid)) if args.residual_grid else None
    rep = estimate(y, grid, args.H, threshold=args.threshold, rule=args.rule, residual_grid=resid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(rep.to_text())
    write_csv(out / "estimates.csv", ["name", "i", "j", "value"], rep.to_rows(), {"flags": ";".join(rep.flags) or "none"})
    if rep.diagnostics is not None:
        d = rep.diagnostics
        n = d.observed.shape[1]
        header = ["gamma"] + [f"{p}_{i + 1}" for p in ("observed", "fitted", "residual") for i in range(n)]
        rows = [[d.gamma[k], *d.observed[k], *d.fitted[k], *d.residual[k]] for k in range(len(d.gamma))]
        write_csv(out / "residuals.csv", header, rows)
    sys.stdout.write(rep.to_text())
    return 0


def cmd_belt(args) -> int:
    levels = floats(args.levels) if args.levels else DEFAULT_LEVELS
    belt = build_belt(args.K, levels=levels, reps=args.reps, seed=args.seed, n_transitions=args.transitions, demean=args.demean)
    header = ["rho"] + [f"q_{lv:g}" for lv in belt.levels]
    rows = [[r, *(belt.quantile_curves[lv][i] for lv in belt.levels)] for i, r in enumerate(belt.rho_grid)]
    write_csv(args.out, header, rows, {"K": belt.K, "reps": belt.reps, "seed": belt.seed, "transitions": belt.n_transitions})
    return 0


def read_estimates(path) -> dict:
    vals: dict = {}
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    for name, i, j, v in rows[1:]:
        vals.setdefault(name, {})[(int(i), int(j))] = float(v)
    return vals


def cmd_predict(args) -> int:
    est = read_estimates(args.estimates)
    if int(est["L_hat"][(0, 0)]) != 1:
        sys.stderr.write("predict needs exactly one long-run factor in the estimates\n")
        return 2
    K = est["K"][(0, 0)]
    Kint = int(round(K))
    rho = est["rho_hat"][(0, 0)]
    theta = est["theta_hat"][(0, 0)]
    s = est["s_hat"][(0, 0)]
    yl = est["y_l_hat"]
    y_l_T = args.y_l if args.y_l is not None else yl[(max(i for i, _ in yl), 0)]
    belt = build_belt(Kint, reps=args.belt_reps, seed=args.seed, n_transitions=len(yl) - 1)
    pi = minmax_interval(args.alpha, belt, rho, (args.eta, s), y_l_T, args.gamma, two_sided=args.two_sided)
    plug = plug_in_interval(args.alpha, (theta, args.eta, s), y_l_T, args.gamma, two_sided=args.two_sided)
    plug_lo, plug_hi = plug if args.two_sided else (-math.inf, plug)
    header = ["gamma", "level", "lower", "upper", "alpha1_star", "beta_star", "plug_in", "parameter_shift", "level_shift", "plug_in_lower", "plug_in_upper", "flags"]
    row = [pi.horizon_ratio, pi.level, pi.lower, pi.upper, pi.alpha1_star, pi.beta_star, *pi.decomposition, plug_lo, plug_hi, ";".join(pi.flags)]
    write_csv(args.out, header, [row])
    return 0


def cmd_experiment(args) -> int:
    spec = resolve_spec(args.spec)
    res = run_fig_suite(spec, args.out, svg=args.svg)
    sys.stdout.write(f"spec_hash={res.spec_hash}; wrote {len(res.files)} artifacts to {args.out}\n")
    return 0


def cmd_apply(args) -> int:
    try:
        res = apply_pipeline(args.input, args.out, args.block, args.horizon, args.alpha, args.ar_order, args.belt_reps, args.seed)
    except (IngestError, OSError) as exc:
        sys.stderr.write(f"ingestion failed: {exc}\n")
        return 1
    sys.stdout.write(f"wrote {', '.join(sorted(p.name for p in res.files.values()))} to {args.out}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ulrsvar", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate one path to CSV")
    s.add_argument("--config", help="model key-value file (default: bivariate design)")
    s.add_argument("--T", type=int, default=7200)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--rep", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("ltu", help="local-to-unity variants and tail diagnostics")
    s.add_argument("--variant", choices=LTU_TAGS, required=True)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--c", type=float)
    s.add_argument("--d", type=float)
    s.add_argument("--T", type=int, nargs="+", default=[1000, 10000])
    s.add_argument("--reps", type=int, default=2000)
    s.add_argument("--A-level", dest="A_level", type=float, default=4.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ltu)

    def grid_args(s):
        s.add_argument("--H", type=int, default=60, help="window length H_T")
        s.add_argument("--K", type=int, default=20, help="grid size when --c-grid is not given")
        s.add_argument("--c-grid", dest="c_grid", help="explicit grid fractions (default: windows ending at kT/K)")

    s = sub.add_parser("acf", help="sample ACF families from a path CSV")
    s.add_argument("--input", required=True)
    s.add_argument("--kind", nargs="+", choices=ACF_KINDS, default=["standard", "local", "long_run_of_means"])
    s.add_argument("--max-lag", dest="max_lag", type=int, default=40)
    s.add_argument("--c", type=float, default=0.5, help="window start for the local ACF")
    s.add_argument("--fractions", default="0.1 0.2 0.3 0.4 0.5", help="lag fractions for the distant ACF")
    grid_args(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_acf)

    s = sub.add_parser("estimate", help="run the estimation pipeline on a path CSV")
    s.add_argument("--input", required=True)
    grid_args(s)
    s.add_argument("--threshold", type=float, default=0.05)
    s.add_argument("--rule", choices=("significance", "share"), default="significance")
    s.add_argument("--residual-grid", dest="residual_grid")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("belt", help="tabulate a confidence belt for the AR(1) coefficient")
    s.add_argument("--K", type=int, default=25)
    s.add_argument("--transitions", type=int)
    s.add_argument("--reps", type=int, default=1000)
    s.add_argument("--levels")
    s.add_argument("--demean", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_belt)

    s = sub.add_parser("predict", help="min-max prediction bound from an estimates CSV")
    s.add_argument("--estimates", required=True)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--gamma", type=float, default=0.5)
    s.add_argument("--eta", type=float, default=0.0, help="short-run standard deviation added to the forecast")
    s.add_argument("--y-l", dest="y_l", type=float, help="current factor value (default: last estimated)")
    s.add_argument("--two-sided", dest="two_sided", action="store_true")
    s.add_argument("--belt-reps", dest="belt_reps", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("experiment", help="experiment runner")
    esub = s.add_subparsers(dest="action", required=True)
    r = esub.add_parser("run", help="run a preset name or spec file")
    r.add_argument("spec")
    r.add_argument("--out", required=True)
    r.add_argument("--svg", action="store_true")
    r.set_defaults(func=cmd_experiment)

    s = sub.add_parser("apply", help="filter, fit and compare prediction intervals for CSV series")
    s.add_argument("--input", required=True)
    s.add_argument("--block", type=int, default=11)
    s.add_argument("--horizon", type=int, default=200)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--ar-order", dest="ar_order", type=int, default=1)
    s.add_argument("--belt-reps", dest="belt_reps", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_apply)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
