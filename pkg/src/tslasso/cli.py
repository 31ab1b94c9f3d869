"""Command-line entry point.

Subcommands: simulate, fit, scaling, conditions, concentration, diagnose.
Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .dgm import make_example_spec, simulate
from .harness import (
    EXAMPLES,
    ExperimentConfig,
    collapse_diagnostics,
    resolve_output_dir,
    run_concentration_study,
    run_condition_study,
    run_scaling_experiment,
)
from .lasso import LassoConfig, error_metrics, solve
from .problem import build_problem, population_target


def _add_common(parser):
    parser.add_argument("--config", type=Path, help="JSON config file (or a manifest)")
    parser.add_argument("--seed", type=int, help="override base seed")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--workers", type=int, help="worker process count")
    parser.add_argument("--example", choices=EXAMPLES, help="override example tag")


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.example is not None:
        overrides["example"] = args.example
    if overrides:
        d = cfg.to_dict()
        d.update(overrides)
        cfg = ExperimentConfig.from_dict(d)
    return cfg


def _cmd_simulate(args) -> int:
    spec = make_example_spec(args.example or "gaussian_var", args.p, args.s
                             or int(np.ceil(np.sqrt(args.p))), args.op_norm)
    series = simulate(spec, args.T, args.seed if args.seed is not None else 0)
    out = args.out or Path("series.csv")
    out = Path(out)
    if out.is_dir():
        out = out / "series.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(out, series.values, delimiter=",")
    print(f"wrote {series.length}x{series.dim} series to {out}")
    return 0


def _cmd_fit(args) -> int:
    example = args.example or "gaussian_var"
    s = args.s or int(np.ceil(np.sqrt(args.p)))
    spec = make_example_spec(example, args.p, s, args.op_norm)
    seed = args.seed if args.seed is not None else 0
    series = simulate(spec, args.T + 1, seed)
    prob = build_problem(series, 1)
    lam = args.lam if args.lam is not None else float(
        np.sqrt(np.log(args.p * args.p) / prob.T))
    sol = solve(prob.X, prob.Y, LassoConfig(lam=lam))
    theta_star = population_target(spec, 1)
    met = error_metrics(sol.theta_hat, theta_star, prob.gram)
    print(json.dumps({
        "example": example, "p": args.p, "T": prob.T, "lambda": lam,
        "l2_err": met["l2_err"], "pred_err": met["pred_err"],
        "objective": sol.objective, "kkt_residual": sol.kkt_residual,
        "active_set_size": sol.active_set_size, "sweeps": sol.sweeps,
        "converged": sol.converged,
    }, indent=2))
    return 0


def _run_study(args, runner) -> int:
    cfg = _load_config(args)
    out = resolve_output_dir(str(args.out) if args.out else None, cfg)
    rows = runner(cfg, workers=args.workers, output_dir=out)
    failed = sum(1 for r in rows if r.get("error"))
    print(f"{len(rows)} records written to {out} ({failed} with errors)")
    return 0


def _cmd_diagnose(args) -> int:
    with open(args.csv) as fh:
        rows = list(csv.DictReader(fh))
    diag = collapse_diagnostics(rows, value=args.value)
    print(json.dumps(diag, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tslasso",
        description="Lasso estimation lab for beta-mixing subgaussian time series")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulate one series to CSV")
    _add_common(p_sim)
    p_sim.add_argument("--p", type=int, default=10)
    p_sim.add_argument("--T", type=int, default=1000)
    p_sim.add_argument("--s", type=int, help="sparsity (default ceil(sqrt(p)))")
    p_sim.add_argument("--op-norm", type=float, default=0.9)
    p_sim.set_defaults(func=_cmd_simulate)

    p_fit = sub.add_parser("fit", help="simulate and fit one lasso instance")
    _add_common(p_fit)
    p_fit.add_argument("--p", type=int, default=10)
    p_fit.add_argument("--T", type=int, default=1000)
    p_fit.add_argument("--s", type=int)
    p_fit.add_argument("--op-norm", type=float, default=0.9)
    p_fit.add_argument("--lam", type=float, help="penalty level (default rate rule)")
    p_fit.set_defaults(func=_cmd_fit)

    for name, runner, help_text in (
        ("scaling", run_scaling_experiment, "error-scaling study"),
        ("conditions", run_condition_study, "RE / deviation-bound study"),
        ("concentration", run_concentration_study, "blocking concentration study"),
    ):
        p_cmd = sub.add_parser(name, help=help_text)
        _add_common(p_cmd)
        p_cmd.set_defaults(func=lambda a, r=runner: _run_study(a, r))

    p_diag = sub.add_parser("diagnose", help="collapse diagnostics over a records.csv")
    p_diag.add_argument("--csv", type=Path, required=True)
    p_diag.add_argument("--value", default="l2_err",
                        help="error column (l2_err or l2_err_rel)")
    p_diag.set_defaults(func=_cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
