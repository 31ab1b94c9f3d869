"""Experiment orchestration: the error-scaling study over (example, p, T,
replicate) grids, condition and concentration studies, deterministic
per-record seeding, CSV/manifest emission, and collapse diagnostics.

Every record is a pure function of (config, cell coordinates); the per-record
seed is a hash of the base seed and the cell coordinates, so output is
independent of scheduling and worker count.
"""
from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .conditions import (
    concentration_tail_experiment,
    db_bound,
    db_statistic,
    default_mixing_rate,
    lower_re_certificate,
    re_tolerance,
)
from .dgm import make_example_spec, simulate, stationary_covariance
from .errors import SampleSizeError
from .lasso import LassoConfig, error_metrics, solve
from .numerics import min_eigen_sym
from .problem import build_problem, population_target, residuals, subgaussian_constants

SCHEMA_VERSION = 1
EXAMPLES = ("gaussian_var", "subgaussian_var", "omitted_var", "arch")

SCALING_HEADER = [
    "schema_version", "example", "p", "T", "replicate", "s", "seed",
    "c_lambda", "lambda", "l2_err", "l2_err_rel", "pred_err", "kkt_residual",
    "converged", "sweeps", "re_min_sparse_eig", "re_mode", "db_stat", "db_Q",
    "db_R", "db_holds", "wall_time", "error",
]

CONCENTRATION_HEADER = [
    "schema_version", "example", "p", "T", "a_T", "mu_T", "t",
    "empirical_tail", "bound", "reps", "K", "c_beta", "C_B", "seed",
    "wall_time", "error",
]


@dataclass
class ExperimentConfig:
    example: str = "gaussian_var"
    p_grid: tuple = (50, 100, 200, 300)
    T_grid: tuple = (500, 1000, 2000, 4000, 8000)
    replicates: int = 20
    sparsity_rule: str = "ceil_sqrt_p"
    op_norm_target: float = 0.9
    lambda_rule: dict = field(default_factory=lambda: {"type": "fixed", "c_lambda": 1.0})
    base_seed: int = 0
    burn_in: int = 500
    output_dir: str = "out"
    lag: int = 1
    workers: int = 1
    tol: float = 1e-7
    max_sweeps: int = 10_000
    C_B: float = 0.5
    xi: float = 0.5
    arch_scale: float = 1.0
    arch_exponent: float = 0.5
    arch_clip: tuple = (0.5, 2.0)
    conc_t_grid: tuple = (0.3, 0.5)
    conc_reps: int = 1000

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise ValueError(f"unknown example {self.example!r}; choose from {EXAMPLES}")
        if not self.p_grid or not self.T_grid:
            raise ValueError("p_grid and T_grid must be non-empty")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not (0.0 < self.op_norm_target < 1.0):
            raise ValueError("op_norm_target must lie in (0, 1)")
        if self.lambda_rule.get("type") not in ("fixed", "grid"):
            raise ValueError("lambda_rule.type must be 'fixed' or 'grid'")

    def sparsity(self, p: int) -> int:
        if self.sparsity_rule == "ceil_sqrt_p":
            return int(math.ceil(math.sqrt(p)))
        raise ValueError(f"unknown sparsity rule {self.sparsity_rule!r}")

    def lambda_candidates(self, p: int, q: int, T: int) -> list:
        base = math.sqrt(math.log(p * q) / T)
        if self.lambda_rule["type"] == "fixed":
            c = float(self.lambda_rule.get("c_lambda", 1.0))
            return [(c, c * base)]
        return [(float(c), float(c) * base) for c in self.lambda_rule["values"]]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["p_grid"] = list(self.p_grid)
        d["T_grid"] = list(self.T_grid)
        d["arch_clip"] = list(self.arch_clip)
        d["conc_t_grid"] = list(self.conc_t_grid)
        return d

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(ExperimentConfig)}
        kwargs = {k: v for k, v in d.items() if k in known}
        for key in ("p_grid", "T_grid", "arch_clip", "conc_t_grid"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return ExperimentConfig(**kwargs)

    @staticmethod
    def from_file(path) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        if "config" in data:  # accept a manifest as a config source
            data = data["config"]
        return ExperimentConfig.from_dict(data)


def record_seed(base_seed: int, *parts) -> int:
    """Stable 63-bit seed from the base seed and cell coordinates."""
    key = "|".join(str(x) for x in (base_seed, *parts))
    digest = hashlib.sha256(key.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _build_spec(cfg: ExperimentConfig, p: int):
    s = cfg.sparsity(p)
    return make_example_spec(cfg.example, p, s, cfg.op_norm_target,
                             arch_scale=cfg.arch_scale,
                             arch_exponent=cfg.arch_exponent,
                             arch_clip=cfg.arch_clip), s


def _scaling_cell(task) -> dict:
    cfg, p, T, replicate, with_conditions = task
    seed = record_seed(cfg.base_seed, cfg.example, p, T, replicate)
    s = cfg.sparsity(p)
    row = {h: "" for h in SCALING_HEADER}
    row.update(schema_version=SCHEMA_VERSION, example=cfg.example, p=p, T=T,
               replicate=replicate, s=s, seed=seed, error="")
    t0 = time.perf_counter()
    try:
        spec, s = _build_spec(cfg, p)
        series = simulate(spec, T + cfg.lag, seed, burn_in=cfg.burn_in)
        prob = build_problem(series, cfg.lag)
        theta_star = population_target(spec, cfg.lag)
        residuals(prob, theta_star)
        best = None
        for c_lam, lam in cfg.lambda_candidates(p, prob.Y.shape[1], prob.T):
            sol = solve(prob.X, prob.Y, LassoConfig(lam=lam, tol=cfg.tol,
                                                    max_sweeps=cfg.max_sweeps))
            met = error_metrics(sol.theta_hat, theta_star, prob.gram)
            if best is None or met["l2_err"] < best[2]["l2_err"]:
                best = (c_lam, lam, met, sol)
        c_lam, lam, met, sol = best
        norm_star = float(np.linalg.norm(theta_star))
        row.update(
            c_lambda=c_lam, **{"lambda": lam},
            l2_err=met["l2_err"],
            l2_err_rel=met["l2_err"] / norm_star if norm_star > 0 else math.nan,
            pred_err=met["pred_err"],
            kkt_residual=sol.kkt_residual,
            converged=int(sol.converged),
            sweeps=sol.sweeps,
        )
        if with_conditions:
            _attach_condition_fields(cfg, row, spec, prob, theta_star, s)
    except Exception as exc:  # record-level failures never abort the grid
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_time"] = time.perf_counter() - t0
    return row


def _attach_condition_fields(cfg, row, spec, prob, theta_star, s):
    dim = prob.X.shape[1]
    k = min(s, dim // 2)
    alpha = tau = None
    try:
        S = stationary_covariance(spec)
        lam_min = min_eigen_sym(S[:dim, :dim])
        consts = subgaussian_constants(spec, theta_star)
        c_beta = default_mixing_rate(spec)
        tol = re_tolerance(consts.K_X, lam_min, c_beta, cfg.C_B, prob.T, dim)
        alpha, tau = tol["alpha2"], tol["tau2"]
    except (SampleSizeError, ValueError):
        # no analytic covariance (ARCH) or below the RE sample threshold;
        # the certificate is still reported without a holds verdict
        pass
    if k >= 1:
        cert = lower_re_certificate(prob.gram, k, mode="auto", alpha=alpha, tau=tau,
                                    seed=record_seed(cfg.base_seed, "re", row["p"],
                                                     row["T"], row["replicate"]))
        row["re_min_sparse_eig"] = cert.min_sparse_eig
        row["re_mode"] = cert.mode
    stat = db_statistic(prob.X, prob.W)
    consts = subgaussian_constants(spec, theta_star)
    db = db_bound(consts.K_composite, cfg.C_B, cfg.xi,
                  prob.X.shape[1], prob.Y.shape[1], prob.T,
                  c_beta=default_mixing_rate(spec))
    row.update(db_stat=stat, db_Q=db["Q"], db_R=db["R"],
               db_holds=int(stat <= db["Q"] * db["R"]))


def _format(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_records(rows, path, header) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(row.get(h, "")) for h in header])


def write_manifest(cfg: ExperimentConfig, rows, path, kind: str) -> None:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "package_version": __version__,
        "config": cfg.to_dict(),
        "records": [
            {k: row[k] for k in ("example", "p", "T", "replicate", "seed")
             if k in row and row[k] != ""}
            for row in rows
        ],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_grid(cfg: ExperimentConfig, tasks, cell_fn, workers: Optional[int]):
    workers = workers if workers is not None else cfg.workers
    if workers <= 1:
        return [cell_fn(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves task order, so output content is worker-count invariant
        return list(pool.map(cell_fn, tasks, chunksize=1))


def run_scaling_experiment(cfg: ExperimentConfig, workers: Optional[int] = None,
                           output_dir: Optional[str] = None,
                           with_conditions: bool = False) -> list:
    """One record per (p, T, replicate): simulate, build the lagged problem,
    solve the lasso at the configured lambda, record metrics. Emits
    records.csv and manifest.json when an output directory is set."""
    tasks = [(cfg, p, T, r, with_conditions)
             for p in cfg.p_grid for T in cfg.T_grid for r in range(cfg.replicates)]
    rows = _run_grid(cfg, tasks, _scaling_cell, workers)
    out = output_dir if output_dir is not None else cfg.output_dir
    if out:
        write_records(rows, Path(out) / "records.csv", SCALING_HEADER)
        write_manifest(cfg, rows, Path(out) / "manifest.json",
                       "conditions" if with_conditions else "scaling")
    return rows


def run_condition_study(cfg: ExperimentConfig, workers: Optional[int] = None,
                        output_dir: Optional[str] = None) -> list:
    """Scaling grid augmented with RE-certificate and deviation-bound fields.
    Exact RE mode engages automatically when the support enumeration fits the
    budget."""
    return run_scaling_experiment(cfg, workers=workers, output_dir=output_dir,
                                  with_conditions=True)


def _concentration_cell(task) -> dict:
    cfg, p, T, t = task
    seed = record_seed(cfg.base_seed, "conc", cfg.example, p, T, t)
    a_T = int(math.ceil(math.sqrt(T)))
    row = {h: "" for h in CONCENTRATION_HEADER}
    row.update(schema_version=SCHEMA_VERSION, example=cfg.example, p=p, T=T,
               a_T=a_T, t=t, reps=cfg.conc_reps, seed=seed, error="")
    t0 = time.perf_counter()
    try:
        spec, _ = _build_spec(cfg, p)
        v = np.zeros(p)
        v[0] = 1.0
        rep = concentration_tail_experiment(spec, v, T, a_T, t, cfg.conc_reps,
                                            seed, C_B=cfg.C_B,
                                            burn_in=cfg.burn_in)
        row.update(mu_T=rep.mu_T, empirical_tail=rep.empirical_tail,
                   bound=rep.bound, K=rep.K, c_beta=rep.c_beta, C_B=rep.C_B)
    except Exception as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_time"] = time.perf_counter() - t0
    return row


def run_concentration_study(cfg: ExperimentConfig, workers: Optional[int] = None,
                            output_dir: Optional[str] = None) -> list:
    """Sweep (T, t) cells of the blocking concentration experiment with block
    length a_T = ceil(sqrt(T)); p is taken from the first p_grid entry."""
    p = cfg.p_grid[0]
    tasks = [(cfg, p, T, t) for T in cfg.T_grid for t in cfg.conc_t_grid]
    rows = _run_grid(cfg, tasks, _concentration_cell, workers)
    out = output_dir if output_dir is not None else cfg.output_dir
    if out:
        write_records(rows, Path(out) / "records.csv", CONCENTRATION_HEADER)
        write_manifest(cfg, rows, Path(out) / "manifest.json", "concentration")
    return rows


def collapse_diagnostics(records, value: str = "l2_err") -> dict:
    """Scaling-law diagnostics over a single-example record table.

    slope: least-squares slope of log(median err) vs log T per p, averaged.
    collapse_spread: max over common rescaled-sample points n = T/(s log p) of
    (max_p err - min_p err) / median err, medians over replicates, linear
    interpolation in log n.
    """
    rows = [r for r in records if not r.get("error")]
    examples = {r["example"] for r in rows}
    if len(examples) != 1:
        raise ValueError(f"records must cover exactly one example, got {examples}")
    groups = {}
    for r in rows:
        key = (int(r["p"]), int(r["T"]))
        groups.setdefault(key, []).append(float(r[value]))
    p_values = sorted({p for p, _ in groups})
    T_values = sorted({T for _, T in groups})
    if len(p_values) < 2 or len(T_values) < 3:
        raise ValueError("need >= 2 distinct p and >= 3 distinct T values")

    s_of = {int(r["p"]): int(r["s"]) for r in rows}
    slopes = {}
    curves = {}
    for p in p_values:
        Ts = sorted(T for pp, T in groups if pp == p)
        med = np.array([float(np.median(groups[(p, T)])) for T in Ts])
        logT = np.log(np.array(Ts, dtype=float))
        slope = float(np.polyfit(logT, np.log(med), 1)[0])
        slopes[p] = slope
        log_n = np.log(np.array(Ts, dtype=float) / (s_of[p] * math.log(p)))
        curves[p] = (log_n, med)

    lo = max(c[0][0] for c in curves.values())
    hi = min(c[0][-1] for c in curves.values())
    if hi <= lo:
        raise ValueError("rescaled sample-size ranges do not overlap across p")
    grid = np.linspace(lo, hi, 25)
    spread = 0.0
    for x in grid:
        # interpolate in log-log space so exact power laws incur no error
        vals = np.exp([float(np.interp(x, c[0], np.log(c[1]))) for c in curves.values()])
        rel = (vals.max() - vals.min()) / float(np.median(vals))
        spread = max(spread, rel)
    return {
        "slope": float(np.mean(list(slopes.values()))),
        "slope_per_p": slopes,
        "collapse_spread": spread,
    }


def resolve_output_dir(cli_value: Optional[str], cfg: ExperimentConfig) -> str:
    """Priority: TSLASSO_OUT env var > --out flag > config file value."""
    env = os.environ.get("TSLASSO_OUT")
    if env:
        return env
    if cli_value:
        return cli_value
    return cfg.output_dir
