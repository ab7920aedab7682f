"""Command line interface: ``mclab <subcommand> [flags]``.

Exit codes: 0 on success, 1 when a hard assertion fails (divergence,
deterministic lemma violation, certificate identity or support failure,
solver non-convergence), 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict

import numpy as np

from . import rng
from .checks import (BERNSTEIN, DETERMINISTIC, PROBABILISTIC, check_bernstein,
                     check_deterministic, check_probabilistic)
from .errors import ArgumentError, ConvergenceError, DegenerateIterateError, DivergenceError, MclabError
from .groundtruth import RECT, SYM_PSD, gen_ground_truth, save_ground_truth
from .harness import ExperimentConfig, phase_sweep, run_tasks
from .loodiag import QUANTITIES, build_svp_ledger, run_loo_family
from .matcore import read_matrix, write_matrix
from .sampling import default_k0, golfing_split, read_mask, sample_mask, write_mask
from .svp import run_svp
from .tangentcert import build_certificate, run_nnm_loo, solve_nnm_primal

log = logging.getLogger("mclab")

SUBCOMMANDS = ("svp-run", "svp-loo", "nnm-cert", "nnm-solve", "nnm-loo", "checks", "sweep")
ALIASES = {"loo-run": "svp-loo"}
IDENTITY_TOL = 1e-10


class HardFailure(MclabError):
    """A hard assertion failed; maps to exit code 1."""


def _dump_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


# ---------------------------------------------------------------- argument parsing

def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON file with configuration keys")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--trials", type=int, help="number of seeds (trial k uses seed + k)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    problem = argparse.ArgumentParser(add_help=False, argument_default=S)
    problem.add_argument("--d", type=int, help="dimension (rows)")
    problem.add_argument("--d2", type=int, help="columns for rectangular problems")
    problem.add_argument("--r", type=int, help="rank")
    problem.add_argument("--p", type=float, help="sampling probability")
    problem.add_argument("--kappa", type=float, help="condition number")

    golf = argparse.ArgumentParser(add_help=False, argument_default=S)
    golf.add_argument("--k0", type=int, help="golfing layers (default from mu and r)")
    golf.add_argument("--c0", type=float, help="constant in the default k0")
    golf.add_argument("--t0", type=int, help="reuses of the last layer")

    parser = argparse.ArgumentParser(prog="mclab", description="Matrix completion lab.")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    parents = [common, problem]

    sp = sub.add_parser("svp-run", parents=parents, argument_default=S, help="run SVP, write trace.csv")
    sp.add_argument("--eta", type=float, help="step size (default 1/p)")
    sp.add_argument("--tmax", dest="t_max", type=int, help="iteration budget")
    sp.add_argument("--tol", type=float, help="stop when the objective falls to this level")
    sp.add_argument("--estimate-p", action="store_true", help="use the empirical sampling rate")
    sp.add_argument("--rectangular", action="store_true", help="rectangular truth and SVD projection")

    sp = sub.add_parser("svp-loo", aliases=["loo-run"], parents=parents, argument_default=S,
                        help="leave-one-out family and ledger.csv")
    sp.add_argument("--tmax", dest="t_max", type=int, help="iteration budget")
    sp.add_argument("--c-hyp", dest="c_hyp", type=float, help="constant of the hypothesis bounds")
    sp.add_argument("--subsample-m", dest="subsample_m", type=int, help="random subset of members")

    sub.add_parser("nnm-cert", parents=parents + [golf], argument_default=S,
                   help="golfing dual certificate, write cert.json")

    sp = sub.add_parser("nnm-solve", parents=parents, argument_default=S,
                        help="nuclear norm minimization, write solution.txt")
    sp.add_argument("--observed", help="matrix file with observed values")
    sp.add_argument("--mask", help="mask file")
    sp.add_argument("--max-iter", dest="max_iter", type=int, help="iteration budget")
    sp.add_argument("--tol", type=float, help="relative residual tolerance")

    sp = sub.add_parser("nnm-loo", parents=parents + [golf], argument_default=S,
                        help="leave-one-out ledger of the golfing sequence")
    sp.add_argument("--n-w", dest="n_w", type=int, help="number of (row, column) pairs")
    sp.add_argument("--g-exponent", dest="g_exponent", type=float, help="exponent of mu r in G_scale")

    sp = sub.add_parser("checks", parents=parents, argument_default=S, help="lemma checks, write checks.json")
    sp.add_argument("--lemma", help="lemma name, 'bernstein-<kind>', or 'all'")

    sp = sub.add_parser("sweep", parents=parents + [golf], argument_default=S,
                        help="phase-transition sweep, write sweep.csv")
    sp.add_argument("--algorithm", choices=("svp", "nnm-cert", "nnm-primal"))
    sp.add_argument("--p-grid", dest="p_grid", type=_floats, help="comma-separated p values")
    sp.add_argument("--kappa-grid", dest="kappa_grid", type=_floats, help="comma-separated kappa values")
    sp.add_argument("--eta", type=float, help="SVP step size (default 1/p)")
    sp.add_argument("--tmax", dest="t_max", type=int, help="SVP iteration budget")
    sp.add_argument("--plot", action="store_true", help="also write a gnuplot script")
    return parser


def make_config(ns: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the JSON config file, then explicit flags."""
    data = {}
    path = getattr(ns, "config", None)
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ArgumentError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ArgumentError("config file must hold a JSON object")
        data.pop("subcommand", None)
    flags = {k: v for k, v in vars(ns).items() if k not in ("config", "verbose", "subcommand", "observed", "mask")}
    data.update(flags)
    data["subcommand"] = ALIASES.get(ns.subcommand, ns.subcommand)
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------- trial workers
# Top-level so a process pool can pickle them; each depends only on its
# arguments and writes only to paths it is given.

def _svp_worker(cfg: dict, seed: int, out_dir):
    d, d2 = cfg["d"], cfg["d2"] or cfg["d"]
    rect = cfg["rectangular"]
    truth = gen_ground_truth(d, d2 if rect else d, cfg["r"], cfg["kappa"], RECT if rect else SYM_PSD, seed=seed)
    mask = sample_mask(truth.d1, truth.d2, cfg["p"], not rect, seed)
    if cfg["estimate_p"]:
        mask = mask.with_p(mask.estimated_p())
    M = truth.matrix
    observed = np.where(mask.observed, M, 0.0)
    t_max = 100 if cfg["t_max"] is None else cfg["t_max"]
    try:
        res = run_svp(observed, mask, cfg["r"], eta=cfg["eta"], t_max=t_max,
                      tol_objective=cfg["tol"], truth=M)
    except DivergenceError as exc:
        return {"seed": seed, "diverged": True, "diverged_at": exc.t, "success": False}
    rel = res.trace.column("err_inf") / truth.sigma1
    hit = np.nonzero(rel <= cfg["success_tol"])[0]
    if out_dir is not None:
        res.trace.write_csv(os.path.join(out_dir, "trace.csv"))
        t, r1, rr = res.trace.early_phase(truth.sigma1, max(mask.shape), truth.r)
        with open(os.path.join(out_dir, "early_phase.csv"), "w") as fh:
            fh.write("t,ratio_1_over_d,ratio_r_over_d\n")
            for row in zip(t.tolist(), r1.tolist(), rr.tolist()):
                fh.write(f"{row[0]},{row[1]!r},{row[2]!r}\n")
        save_ground_truth(os.path.join(out_dir, "truth"), truth)
        write_mask(os.path.join(out_dir, "mask.txt"), mask)
        write_matrix(os.path.join(out_dir, "estimate.txt"), res.factors.reconstruct())
    return {"seed": seed, "diverged": False, "success": bool(hit.size),
            "iterations": int(hit[0]) if hit.size else None, "final_err_inf_rel": float(rel[-1]),
            "final_objective": float(res.trace.objective[-1]), "converged": res.converged,
            "records": len(res.trace), "mu": truth.mu}


def _loo_worker(cfg: dict, seed: int, out_dir):
    d = cfg["d"]
    truth = gen_ground_truth(d, d, cfg["r"], cfg["kappa"], SYM_PSD, seed=seed)
    mask = sample_mask(d, d, cfg["p"], True, seed)
    members = None
    if cfg["subsample_m"] is not None and cfg["subsample_m"] < d:
        gen = rng.stream(seed, rng.TRIAL)
        members = (gen.choice(d, size=cfg["subsample_m"], replace=False) + 1).tolist()
    out = {"seed": seed, "mu": truth.mu}
    try:
        fam = run_loo_family(truth, mask, t_max=cfg["t_max"], members=members)
        ref = run_svp(np.where(mask.observed, truth.matrix, 0.0), mask, truth.r,
                      t_max=fam.t_max, tol_objective=0.0, keep_iterates=True)
        match = len(ref.iterates) == fam.t_max + 1 and all(
            np.array_equal(f.F, fam.F[t, 0]) and np.array_equal(f.spectrum, fam.lam[t, 0])
            for t, f in enumerate(ref.iterates) if t > 0)
        ledger = build_svp_ledger(fam, c_hyp=cfg["c_hyp"])
    except (DivergenceError, DegenerateIterateError) as exc:
        out.update(error=f"{type(exc).__name__}: {exc}", member0_bitwise_match=None)
        return out
    out["member0_bitwise_match"] = bool(match)
    out["members"] = fam.members.tolist()
    for name in QUANTITIES:
        try:
            ratio, r2 = ledger.decay(name)
        except ArgumentError:
            ratio, r2 = None, None
        out[name] = {"decay_ratio": ratio, "r2": r2, "max_ratio_to_rhs": float(ledger.ratio(name).max())}
    if out_dir is not None:
        ledger.write_csv(os.path.join(out_dir, "ledger.csv"))
    return out


def _resolve_k0(cfg, truth):
    return default_k0(truth.mu, truth.r, cfg["c0"]) if cfg["k0"] is None else cfg["k0"]


def _cert_worker(cfg: dict, seed: int):
    d, d2 = cfg["d"], cfg["d2"] or cfg["d"]
    truth = gen_ground_truth(d, d2, cfg["r"], cfg["kappa"], RECT, seed=seed)
    part = golfing_split(d, d2, cfg["p"], _resolve_k0(cfg, truth), seed)
    rep = build_certificate(truth, part, cfg["t0"], seed=seed).report.to_json()
    rep["mu"] = truth.mu
    return rep


def _nnm_loo_worker(cfg: dict, seed: int, out_dir):
    d, d2 = cfg["d"], cfg["d2"] or cfg["d"]
    truth = gen_ground_truth(d, d2, cfg["r"], cfg["kappa"], RECT, seed=seed)
    k0 = _resolve_k0(cfg, truth)
    part = golfing_split(d, d2, cfg["p"], k0, seed)
    cert = build_certificate(truth, part, cfg["t0"], seed=seed)
    gen = rng.stream(seed, rng.TRIAL)
    n_w = cfg["n_w"]
    w = np.column_stack([gen.integers(0, d, n_w), gen.integers(0, d2, n_w)]).tolist()
    led = run_nnm_loo(truth, part.layers[-1], cert.W[-1], cert.report.t0, w, k0, cfg["g_exponent"])
    dec = led.dist_decay()
    if out_dir is not None:
        led.write_csv(os.path.join(out_dir, "ledger.csv"))
    ratios = led.ratios()
    return {"seed": seed, "k0": k0, "t0": cert.report.t0, "mu": truth.mu, "G_scale": led.G_scale,
            "dist_decay": dec.tolist(), "dist_decay_below_1": float(np.mean(dec < 1)),
            "Z_fro_first": float(led.Z_fro[0]), "Z_fro_last": float(led.Z_fro[-1]),
            "max_ratio": {k: float(np.max(v)) for k, v in ratios.items()}}


def _check_worker(name: str, cfg: dict):
    seed, trials = cfg["seed"], cfg["trials"]
    if name in DETERMINISTIC:
        res = check_deterministic(name, 1000 if trials is None else trials, seed)
        hard = True
    elif name.startswith("bernstein-"):
        res = check_bernstein(name[len("bernstein-"):], 10000 if trials is None else trials, seed)
        hard = True
    else:
        res = check_probabilistic(name, cfg["d"], cfg["r"], cfg["p"], 20 if trials is None else trials, seed)
        hard = res.violations > 0
    out = res.to_json()
    out["hard_failure"] = bool(hard and not res.ok)
    return out


def all_lemmas():
    return list(DETERMINISTIC) + list(PROBABILISTIC) + [f"bernstein-{k}" for k in BERNSTEIN]


# ---------------------------------------------------------------- subcommands

def _seeds(cfg: ExperimentConfig):
    return [cfg.seed + k for k in range(1 if cfg.trials is None else cfg.trials)]


def _multi(cfg, worker):
    """Run ``worker`` on every seed; the first seed also writes files."""
    c = asdict(cfg)
    tasks = [(worker, (c, s, cfg.out if k == 0 else None)) for k, s in enumerate(_seeds(cfg))]
    return run_tasks(tasks, cfg.jobs)


def cmd_svp_run(cfg):
    res = _multi(cfg, _svp_worker)
    _dump_json(os.path.join(cfg.out, "summary.json"),
               {"trials": res, "success_fraction": float(np.mean([r["success"] for r in res]))})
    bad = [r["seed"] for r in res if r["diverged"]]
    if bad:
        raise HardFailure(f"SVP diverged for seeds {bad}")


def cmd_svp_loo(cfg):
    res = _multi(cfg, _loo_worker)
    _dump_json(os.path.join(cfg.out, "summary.json"), {"trials": res})
    errs = [r for r in res if "error" in r]
    if errs:
        raise HardFailure("; ".join(f"seed {r['seed']}: {r['error']}" for r in errs))
    if not all(r["member0_bitwise_match"] for r in res):
        raise HardFailure("member 0 differs from the plain SVP run")


def cmd_nnm_cert(cfg):
    c = asdict(cfg)
    reps = run_tasks([(_cert_worker, (c, s)) for s in _seeds(cfg)], cfg.jobs)
    if len(reps) == 1:
        _dump_json(os.path.join(cfg.out, "cert.json"), reps[0])
    else:
        _dump_json(os.path.join(cfg.out, "cert.json"), {
            "reports": reps, "pass_fraction": float(np.mean([r["pass"] for r in reps])),
            "cond1_fraction": float(np.mean([r["pass_cond1"] for r in reps]))})
    bad = [r["seed"] for r in reps if not r["support_ok"] or not r["identity_residual"] <= IDENTITY_TOL]
    if bad:
        raise HardFailure(f"certificate identity or support check failed for seeds {bad}")


def cmd_nnm_solve(cfg, ns):
    obs_path, mask_path = getattr(ns, "observed", None), getattr(ns, "mask", None)
    tol = 1e-9 if cfg.tol is None else cfg.tol
    truth = None
    if obs_path or mask_path:
        if not (obs_path and mask_path):
            raise ArgumentError("--observed and --mask must be given together")
        observed, mask = read_matrix(obs_path), read_mask(mask_path)
    else:
        d2 = cfg.d2 or cfg.d
        truth = gen_ground_truth(cfg.d, d2, cfg.r, cfg.kappa, RECT, seed=cfg.seed)
        mask = sample_mask(cfg.d, d2, cfg.p, False, cfg.seed)
        observed = np.where(mask.observed, truth.matrix, 0.0)
    try:
        X = solve_nnm_primal(observed, mask, max_iter=cfg.max_iter, tol=tol)
    except ConvergenceError as exc:
        raise HardFailure(str(exc)) from exc
    write_matrix(os.path.join(cfg.out, "solution.txt"), X)
    s = np.linalg.svd(X, compute_uv=False)
    out = {"nuclear_norm": float(s.sum()), "numerical_rank": int((s > 1e-8 * s[0]).sum()) if s[0] > 0 else 0,
           "seed": cfg.seed}
    if truth is not None:
        out["rel_fro_error"] = float(np.linalg.norm(X - truth.matrix) / np.linalg.norm(truth.matrix))
    _dump_json(os.path.join(cfg.out, "solve.json"), out)


def cmd_nnm_loo(cfg):
    res = _multi(cfg, _nnm_loo_worker)
    _dump_json(os.path.join(cfg.out, "summary.json"), {"trials": res})


def cmd_checks(cfg):
    names = all_lemmas() if cfg.lemma == "all" else [cfg.lemma]
    unknown = [n for n in names if n not in all_lemmas()]
    if unknown:
        raise ArgumentError(f"unknown lemma {unknown[0]!r}; expected 'all' or one of {all_lemmas()}")
    c = asdict(cfg)
    res = run_tasks([(_check_worker, (n, c)) for n in names], cfg.jobs)
    _dump_json(os.path.join(cfg.out, "checks.json"), res)
    bad = [r["lemma"] for r in res if r["hard_failure"]]
    if bad:
        raise HardFailure(f"hard lemma violations: {bad}")


def cmd_sweep(cfg):
    res = phase_sweep(cfg)
    res.write_csv(os.path.join(cfg.out, "sweep.csv"))
    if cfg.plot:
        res.write_gnuplot(os.path.join(cfg.out, "sweep.gp"))
    bounds = [res.boundary(i) for i in range(len(res.kappa_grid))]
    _dump_json(os.path.join(cfg.out, "sweep_summary.json"), {
        "algorithm": res.algorithm, "kappa_grid": res.kappa_grid, "p_grid": res.p_grid,
        "boundary_index": bounds,
        "boundary_p": [None if b is None else res.p_grid[b] for b in bounds],
        "non_monotone_cells": [res.non_monotone(i) for i in range(len(res.kappa_grid))]})
    log.info("sweep wall time %.1fs", res.wall_time)


def run_cli(argv=None) -> int:
    """Parse ``argv``, run the subcommand and return the exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if ns.subcommand is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if getattr(ns, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = make_config(ns)
        os.makedirs(cfg.out, exist_ok=True)
        name = cfg.subcommand
        if name == "svp-run":
            cmd_svp_run(cfg)
        elif name == "svp-loo":
            cmd_svp_loo(cfg)
        elif name == "nnm-cert":
            cmd_nnm_cert(cfg)
        elif name == "nnm-solve":
            cmd_nnm_solve(cfg, ns)
        elif name == "nnm-loo":
            cmd_nnm_loo(cfg)
        elif name == "checks":
            cmd_checks(cfg)
        else:
            cmd_sweep(cfg)
    except ArgumentError as exc:
        print(f"mclab: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except (HardFailure, MclabError) as exc:
        print(f"mclab: failed: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli())
