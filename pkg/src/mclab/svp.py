"""Singular value projection (projected gradient descent) for matrix completion."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ArgumentError, DivergenceError
from .matcore import RankRFactors, as_matrix, best_rank_r
from .sampling import ObservationMask

TRACE_FIELDS = ("t", "err_inf", "err_fro", "objective", "sigma1", "sigmar", "ratio")

# Abort when sigma1(M^t) exceeds this multiple of sigma1(M^1).
BLOWUP = 1e3


def default_t_max(d: int) -> int:
    return math.ceil(5 * math.log2(d)) + 12


@dataclass
class SvpTrace:
    """Per-iteration records; index ``k`` of every array is iteration ``t = k``.

    Ground-truth dependent fields (``err_inf``, ``err_fro``, ``ratio``) are
    NaN when the run had no diagnostics truth.
    """

    t: list = field(default_factory=list)
    err_inf: list = field(default_factory=list)
    err_fro: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    sigma1: list = field(default_factory=list)
    sigmar: list = field(default_factory=list)
    ratio: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def append(self, **rec):
        for k in TRACE_FIELDS:
            getattr(self, k).append(rec[k])

    def column(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def rows(self):
        for k in range(len(self)):
            yield tuple(getattr(self, f)[k] for f in TRACE_FIELDS)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_FIELDS)
            for row in self.rows():
                w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])

    def early_phase(self, sigma1: float, d: int, r: int):
        """Ratios of ``err_inf`` to ``(1/2)^t sigma1 / d`` and ``(1/2)^t sigma1 r / d``.

        Only iterations ``1 <= t <= log d`` are reported.
        """
        t = np.asarray(self.t)
        keep = (t >= 1) & (t <= math.log(d))
        e = self.column("err_inf")[keep]
        base = 0.5 ** t[keep] * sigma1 / d
        return t[keep], e / base, e / (base * r)


@dataclass
class SvpResult:
    trace: SvpTrace
    factors: RankRFactors
    iterates: Optional[list] = None
    converged: bool = False


def _project(Y, r, symmetric):
    return best_rank_r(Y, r, hermitian=symmetric)


def svp_step(M, observed, mask, eta, r):
    """One update ``P_r(M - eta * Pi_Omega(M - M*))`` from observed data."""
    Y = M - eta * (np.where(mask.observed, M, 0.0) - observed)
    return _project(Y, r, mask.symmetric)


def _objective(M, observed, mask):
    R = np.where(mask.observed, M, 0.0) - observed
    return 0.5 * float(np.vdot(R, R))


def run_svp(observed, mask: ObservationMask, r: int, eta: float | None = None,
            t_max: int | None = None, tol_objective: float | None = None,
            truth=None, keep_iterates: bool = False) -> SvpResult:
    """Run SVP from ``M^0 = 0``.

    Parameters
    ----------
    observed : ndarray
        ``Pi_Omega(M*)``; entries outside the mask must be zero.
    mask : ObservationMask
        Symmetric masks select the eigenvalue projection, others the SVD.
    r : int
    eta : float, optional
        Step size, default ``1 / mask.p``.
    t_max : int, optional
        Iteration budget, default ``ceil(5 log2 d) + 12``.
    tol_objective : float, optional
        Stop once ``0.5 ||Pi_Omega(M^t - M*)||_F^2`` falls to this level.
        Defaults to ``1e-26`` times the objective at ``M^0``.
    truth : ndarray, optional
        ``M*`` for the diagnostic error columns. It never enters the
        iteration itself.
    keep_iterates : bool
        Store every ``RankRFactors`` iterate (``None`` stands for ``M^0``).

    Raises
    ------
    DivergenceError
        On a non-finite iterate or ``sigma1(M^t) > 1e3 sigma1(M^1)``.
    """
    observed = as_matrix(observed, "observed")
    if observed.shape != mask.shape:
        raise ArgumentError("observed and mask shapes differ")
    if np.any(observed[~mask.observed] != 0):
        raise ArgumentError("observed has nonzero entries outside the mask")
    eta = 1.0 / mask.p if eta is None else float(eta)
    if not eta > 0:
        raise ArgumentError("eta must be positive")
    t_max = default_t_max(max(mask.shape)) if t_max is None else int(t_max)
    if t_max < 1:
        raise ArgumentError("t_max must be at least 1")
    M_star = None if truth is None else as_matrix(truth, "truth")

    M = np.zeros(mask.shape)
    obj0 = _objective(M, observed, mask)
    tol = 1e-26 * obj0 if tol_objective is None else float(tol_objective)
    trace = SvpTrace()
    iterates = [None] if keep_iterates else None

    def record(t, M, f):
        obj = _objective(M, observed, mask)
        if M_star is not None:
            E = M - M_star
            e_inf = float(np.abs(E).max())
            e_fro = float(np.linalg.norm(E))
            prev = trace.err_inf[-1] if trace.t else math.nan
            ratio = e_inf / prev if prev and prev > 0 else math.nan
        else:
            e_inf = e_fro = ratio = math.nan
        s = f.singular_values if f is not None else np.zeros(1)
        trace.append(t=t, err_inf=e_inf, err_fro=e_fro, objective=obj,
                     sigma1=float(s[0]), sigmar=float(s[-1]) if f is not None else 0.0, ratio=ratio)
        return obj

    record(0, M, None)
    f = None
    s1_first = None
    converged = obj0 <= tol
    for t in range(1, t_max + 1):
        if converged:
            break
        f = svp_step(M, observed, mask, eta, r)
        M = f.reconstruct()
        s1 = float(np.abs(f.spectrum).max())
        if not np.all(np.isfinite(M)):
            raise DivergenceError(f"non-finite iterate at t={t}", t - 1)
        if s1_first is None:
            s1_first = s1
        elif s1_first > 0 and s1 > BLOWUP * s1_first:
            raise DivergenceError(f"sigma1 blew up at t={t}: {s1:.3g} vs {s1_first:.3g} at t=1", t - 1)
        if keep_iterates:
            iterates.append(f)
        converged = record(t, M, f) <= tol
    if f is None:
        f = _project(M, r, mask.symmetric)
    return SvpResult(trace, f, iterates, converged)


def fit_decay(values, t=None, floor_rel: float = 1e-11):
    """Per-step ratio and R^2 of a least-squares fit of ``log(values)`` on ``t``.

    Only the leading run of values above ``floor_rel * max(values)`` is used,
    so a plateau at machine precision does not bend the fit.

    Returns
    -------
    ratio : float
        ``exp(slope)``.
    r2 : float
        Coefficient of determination; 1 when the data are exactly fitted.
    """
    v = np.asarray(values, dtype=float)
    t = np.arange(v.size, dtype=float) if t is None else np.asarray(t, dtype=float)
    if v.size < 2 or not np.all(np.isfinite(v)):
        raise ArgumentError("need at least two finite values to fit")
    floor = floor_rel * v.max()
    below = np.nonzero(v <= floor)[0]
    n = below[0] if below.size else v.size
    if n < 2:
        raise ArgumentError("fewer than two values above the numerical floor")
    y = np.log(v[:n])
    x = t[:n]
    A = np.column_stack([x, np.ones(n)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(((y - y.mean()) ** 2).sum())
    ss_res = float((resid ** 2).sum())
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, float((y ** 2).sum())) else 1.0 - ss_res / ss_tot
    return float(math.exp(coef[0])), float(r2)


def frobenius_contraction_phase(trace: SvpTrace, burn_in: int = 0, floor_rel: float = 1e-11):
    """Fitted per-step Frobenius error ratio after ``burn_in`` and its R^2."""
    if len(trace) < burn_in + 5:
        raise ArgumentError(f"trace has {len(trace)} records, need at least {burn_in + 5}")
    e = trace.column("err_fro")[burn_in:]
    if np.isnan(e).any():
        raise ArgumentError("trace lacks ground-truth errors")
    return fit_decay(e, trace.column("t")[burn_in:], floor_rel)
