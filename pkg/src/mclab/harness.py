"""Experiment configuration and seeded phase-transition sweeps."""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ArgumentError, ConvergenceError, DivergenceError
from .groundtruth import RECT, SYM_PSD, gen_ground_truth
from .sampling import default_k0, golfing_split, sample_mask
from .svp import run_svp
from .tangentcert import build_certificate, solve_nnm_primal

log = logging.getLogger(__name__)

ALGORITHMS = ("svp", "nnm-cert", "nnm-primal")


@dataclass
class ExperimentConfig:
    """Every knob of every subcommand; unused fields are ignored.

    ``trials=None`` selects each subcommand's own default.
    """

    subcommand: str = ""
    d: int = 100
    d2: int | None = None
    r: int = 2
    kappa: float = 1.0
    p: float = 0.4
    p_grid: list = field(default_factory=lambda: [round(0.05 * k, 2) for k in range(1, 11)])
    kappa_grid: list = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0])
    seed: int = 0
    trials: int | None = None
    eta: float | None = None
    estimate_p: bool = False
    t_max: int | None = None
    tol: float | None = None
    success_tol: float = 1e-6
    k0: int | None = None
    c0: float = 1.0
    t0: int | None = None
    c_hyp: float = 1.0
    g_exponent: float = 10.0
    subsample_m: int | None = None
    n_w: int = 20
    lemma: str = "all"
    algorithm: str = "svp"
    max_iter: int = 5000
    rectangular: bool = False
    plot: bool = False
    out: str = "out"
    jobs: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.d < 2:
            raise ArgumentError("d must be at least 2")
        if not 1 <= self.r < self.d:
            raise ArgumentError("need 1 <= r < d")
        if self.kappa < 1:
            raise ArgumentError("kappa must be >= 1")
        for p in [self.p] + list(self.p_grid):
            if not 0 < p <= 1:
                raise ArgumentError(f"probability {p} outside (0, 1]")
        if not self.p_grid or not self.kappa_grid:
            raise ArgumentError("grids must be nonempty")
        if any(k < 1 for k in self.kappa_grid):
            raise ArgumentError("kappa grid values must be >= 1")
        if self.d2 is not None and not 1 <= self.r < self.d2:
            raise ArgumentError("need 1 <= r < d2")
        if (self.trials is not None and self.trials < 1) or self.jobs < 1:
            raise ArgumentError("trials and jobs must be positive")
        if self.eta is not None and self.eta <= 0:
            raise ArgumentError("eta must be positive")
        if self.algorithm not in ALGORITHMS:
            raise ArgumentError(f"algorithm must be one of {ALGORITHMS}")
        if self.k0 is not None and self.k0 < 1:
            raise ArgumentError("k0 must be positive")
        if self.t0 is not None and self.t0 < 1:
            raise ArgumentError("t0 must be positive")


# ---------------------------------------------------------------- single trials
# Trials are module-level functions of plain arguments so that a process pool
# can run them; each depends only on its arguments.

def svp_trial(d, r, kappa, p, seed, t_max=100, eta=None, success_tol=1e-6, estimate_p=False):
    """One SVP recovery attempt on a symmetric problem.

    Returns
    -------
    dict
        ``success`` (reached ``err_inf <= success_tol * sigma1``),
        ``iters`` (first such iteration, NaN otherwise), ``err`` (final
        relative entrywise error, inf on divergence).
    """
    truth = gen_ground_truth(d, d, r, kappa, SYM_PSD, seed=seed)
    mask = sample_mask(d, d, p, True, seed)
    if estimate_p:
        mask = mask.with_p(mask.estimated_p())
    M = truth.matrix
    observed = np.where(mask.observed, M, 0.0)
    try:
        res = run_svp(observed, mask, r, eta=eta, t_max=t_max, tol_objective=0.0, truth=M)
    except DivergenceError:
        return {"success": False, "iters": math.nan, "err": math.inf}
    rel = res.trace.column("err_inf") / truth.sigma1
    hit = np.nonzero(rel <= success_tol)[0]
    return {"success": bool(hit.size), "iters": float(hit[0]) if hit.size else math.nan,
            "err": float(rel[-1])}


def nnm_cert_trial(d, r, kappa, p, seed, k0=None, c0=1.0, t0=None):
    """One dual-certificate construction; success when the report passes."""
    truth = gen_ground_truth(d, d, r, kappa, RECT, seed=seed)
    k = default_k0(truth.mu, r, c0) if k0 is None else k0
    part = golfing_split(d, d, p, k, seed)
    rep = build_certificate(truth, part, t0, seed=seed).report
    return {"success": rep.passed, "iters": float(rep.t0), "err": rep.cond2b,
            "cond1": rep.cond1, "cond2a": rep.cond2a}


def nnm_primal_trial(d, r, kappa, p, seed, max_iter=5000, success_tol=1e-5):
    """One nuclear-norm recovery; success at relative Frobenius error ``success_tol``."""
    truth = gen_ground_truth(d, d, r, kappa, RECT, seed=seed)
    mask = sample_mask(d, d, p, False, seed)
    M = truth.matrix
    try:
        X = solve_nnm_primal(np.where(mask.observed, M, 0.0), mask, max_iter=max_iter)
    except ConvergenceError:
        return {"success": False, "iters": math.nan, "err": math.inf}
    err = float(np.linalg.norm(X - M) / np.linalg.norm(M))
    return {"success": err <= success_tol, "iters": math.nan, "err": err}


def _call(task):
    fn, args = task
    return fn(*args)


def run_tasks(tasks, jobs: int = 1):
    """Run ``(fn, args)`` tasks, results in task order regardless of ``jobs``."""
    if jobs <= 1 or len(tasks) <= 1:
        return [_call(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_call, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


# ---------------------------------------------------------------- sweeps

@dataclass
class SweepResult:
    """Success statistics on a (kappa, p) grid.

    ``success[i, j]`` is the success fraction at ``kappa_grid[i]``,
    ``p_grid[j]``.
    """

    algorithm: str
    kappa_grid: list
    p_grid: list
    trials: int
    success: np.ndarray
    median_iters: np.ndarray
    median_err: np.ndarray
    wall_time: float = 0.0

    def boundary(self, i: int, level: float = 0.5):
        """Index of the first p with success fraction >= ``level``, or None."""
        hit = np.nonzero(self.success[i] >= level)[0]
        return int(hit[0]) if hit.size else None

    def non_monotone(self, i: int) -> int:
        """Number of cells in row ``i`` that drop below their left neighbour."""
        s = self.success[i]
        return int((np.diff(s) < 0).sum())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("algorithm", "kappa", "p", "trials", "success", "median_iters", "median_err"))
            for i, kap in enumerate(self.kappa_grid):
                for j, p in enumerate(self.p_grid):
                    w.writerow([self.algorithm, repr(float(kap)), repr(float(p)), self.trials,
                                repr(float(self.success[i, j])), repr(float(self.median_iters[i, j])),
                                repr(float(self.median_err[i, j]))])

    def write_gnuplot(self, path, csv_name: str = "sweep.csv") -> None:
        lines = ["set datafile separator ','", "set key left top", "set xlabel 'p'",
                 "set ylabel 'success fraction'", "set yrange [0:1.05]"]
        plots = [f"'{csv_name}' every ::{1 + i * len(self.p_grid)}::{(i + 1) * len(self.p_grid)} "
                 f"using 3:5 with linespoints title 'kappa={kap:g}'"
                 for i, kap in enumerate(self.kappa_grid)]
        lines.append("plot " + ", \\\n     ".join(plots))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _median(vals):
    v = np.asarray(vals, dtype=float)
    v = v[np.isfinite(v)]
    return float(np.median(v)) if v.size else math.nan


def sweep_trials(cfg: ExperimentConfig) -> int:
    return 10 if cfg.trials is None else cfg.trials


def sweep_tasks(cfg: ExperimentConfig):
    """Task list in grid order: kappa outer, p middle, trial inner."""
    tasks = []
    for kap in cfg.kappa_grid:
        for p in cfg.p_grid:
            for k in range(sweep_trials(cfg)):
                seed = cfg.seed + k
                if cfg.algorithm == "svp":
                    t_max = 100 if cfg.t_max is None else cfg.t_max
                    args = (cfg.d, cfg.r, float(kap), float(p), seed, t_max, cfg.eta,
                            cfg.success_tol, cfg.estimate_p)
                    tasks.append((svp_trial, args))
                elif cfg.algorithm == "nnm-cert":
                    tasks.append((nnm_cert_trial, (cfg.d, cfg.r, float(kap), float(p), seed,
                                                   cfg.k0, cfg.c0, cfg.t0)))
                else:
                    tasks.append((nnm_primal_trial, (cfg.d, cfg.r, float(kap), float(p), seed,
                                                     cfg.max_iter)))
    return tasks


def phase_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Success fractions over ``kappa_grid x p_grid``.

    Trial ``k`` of every cell uses seed ``cfg.seed + k``, so cells share
    ground-truth factors and nested masks across p; results do not depend
    on ``cfg.jobs``.
    """
    cfg.validate()
    start = time.perf_counter()
    res = run_tasks(sweep_tasks(cfg), cfg.jobs)
    nk, npg, n = len(cfg.kappa_grid), len(cfg.p_grid), sweep_trials(cfg)
    succ = np.zeros((nk, npg))
    iters = np.zeros((nk, npg))
    err = np.zeros((nk, npg))
    for i in range(nk):
        for j in range(npg):
            cell = res[(i * npg + j) * n:(i * npg + j + 1) * n]
            succ[i, j] = np.mean([c["success"] for c in cell])
            iters[i, j] = _median([c["iters"] for c in cell])
            err[i, j] = _median([c["err"] for c in cell])
    wall = time.perf_counter() - start
    log.info("sweep %s: %d trials in %.1fs", cfg.algorithm, len(res), wall)
    return SweepResult(cfg.algorithm, list(cfg.kappa_grid), list(cfg.p_grid), n, succ, iters, err, wall)
