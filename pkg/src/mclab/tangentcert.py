"""Tangent-space projectors and the nuclear-norm dual certificate.

The certificate ``Y`` is built by the golfing scheme over independent sample
layers and then checked against the sufficient conditions for ``M*`` to be
the unique nuclear-norm minimizer consistent with the observations.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import ArgumentError, ConvergenceError
from .groundtruth import GroundTruth
from .matcore import as_matrix
from .sampling import (GolfingPartition, ObservationMask, h_omega, h_omega_minus_entryline)
from .svp import fit_decay

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TangentProjector:
    """Projections onto the tangent space ``T`` at ``U S V^T`` and its complement."""

    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        for name in ("U", "V"):
            A = np.array(getattr(self, name), dtype=float)
            if A.ndim != 2 or np.abs(A.T @ A - np.eye(A.shape[1])).max() > 1e-8:
                raise ArgumentError(f"{name} must have orthonormal columns")
            A.setflags(write=False)
            object.__setattr__(self, name, A)
        if self.U.shape[1] != self.V.shape[1]:
            raise ArgumentError("U and V must have the same rank")

    @property
    def shape(self) -> tuple:
        return (self.U.shape[0], self.V.shape[0])

    def P_T(self, Z) -> np.ndarray:
        U, V = self.U, self.V
        UtZ = U.T @ Z
        return U @ UtZ + (Z @ V) @ V.T - U @ (UtZ @ V) @ V.T

    def P_T_perp(self, Z) -> np.ndarray:
        U, V = self.U, self.V
        A = Z - U @ (U.T @ Z)
        return A - (A @ V) @ V.T


def make_tangent(truth: GroundTruth) -> TangentProjector:
    """Projector built from the factors of ``truth``."""
    if not np.all(truth.factors.singular_values > 0):
        raise ArgumentError("ground truth has a zero singular value")
    return TangentProjector(truth.U, truth.V)


def opnorm_matrix_operator(op, shape, adjoint=None, tol: float = 1e-8, max_iter: int = 1000,
                           seed: int = 0, block: int = 4) -> float:
    """Operator norm ``max ||op(Z)||_F / ||Z||_F`` of a linear map on matrices.

    Block power iteration on ``op* op`` with Rayleigh-Ritz extraction. The
    start block is drawn from a fixed seeded stream.

    Parameters
    ----------
    op : callable
        Linear map from ``shape`` matrices to matrices.
    shape : tuple of int
        Input shape.
    adjoint : callable, optional
        Adjoint of ``op``; ``None`` means ``op`` is self-adjoint.
    tol : float
        Target relative accuracy. Iteration stops once successive estimates
        differ by less than ``tol / 100`` relative, which keeps the remaining
        error of the geometric convergence below ``tol``.
    max_iter : int
    seed : int
    block : int
        Number of simultaneous probe directions.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations; carries the last estimate.
    """
    adjoint = op if adjoint is None else adjoint
    n = int(np.prod(shape))
    b = max(1, min(block, n))
    X = rng.stream(seed, rng.PROBE).standard_normal((n, b))
    X, _ = np.linalg.qr(X)

    def gram(X):
        out = np.empty_like(X)
        for j in range(X.shape[1]):
            out[:, j] = np.asarray(adjoint(op(X[:, j].reshape(shape))), dtype=float).ravel()
        return out

    est = prev = None
    for it in range(max_iter):
        Y = gram(X)
        small = X.T @ Y
        small = 0.5 * (small + small.T)
        w, Q = np.linalg.eigh(small)
        est = math.sqrt(max(w[-1], 0.0))
        if est == 0.0 and np.linalg.norm(Y) == 0.0:
            return 0.0
        if prev is not None and abs(est - prev) <= 0.01 * tol * est:
            return est
        prev = est
        X, _ = np.linalg.qr(Y @ Q[:, ::-1])
    raise ConvergenceError(f"power iteration did not reach tol={tol} in {max_iter} steps", est)


def check_candes1(mask: ObservationMask, projector: TangentProjector, **kw) -> float:
    """``|| P_T R_Omega P_T - P_T ||_op`` with ``R_Omega = Pi_Omega / p``."""
    if mask.shape != projector.shape:
        raise ArgumentError("mask and projector shapes differ")
    scale = np.where(mask.observed, 1.0 / mask.p - 1.0, -1.0)
    PT = projector.P_T

    def op(Z):
        return PT(scale * PT(Z))

    return opnorm_matrix_operator(op, mask.shape, **kw)


def default_t0(d: int) -> int:
    return math.ceil(2 * math.log2(d)) + 2


@dataclass
class CertificateReport:
    cond1: float
    cond2a: float
    cond2b: float
    support_ok: bool
    thresholds: tuple
    pass_cond1: bool
    pass_cond2a: bool
    pass_cond2b: bool
    passed: bool
    k0: int
    t0: int
    q: float
    seed: int
    identity_residual: float

    def to_json(self) -> dict:
        return {"cond1": self.cond1, "cond2a": self.cond2a, "cond2b": self.cond2b,
                "support_ok": self.support_ok, "pass": self.passed, "k0": self.k0,
                "t0": self.t0, "q": self.q, "seed": self.seed,
                "pass_cond1": self.pass_cond1, "pass_cond2a": self.pass_cond2a,
                "pass_cond2b": self.pass_cond2b, "identity_residual": self.identity_residual}


@dataclass
class Certificate:
    Y: np.ndarray
    W: list
    Z: list
    report: CertificateReport


def build_certificate(truth: GroundTruth, partition: GolfingPartition, t0: int | None = None,
                      seed: int = 0) -> Certificate:
    """Golfing construction of the dual certificate ``Y``.

    ``W^0 = U V^T`` and ``W^t = P_T H_{Omega_t}(W^{t-1})`` on the first
    ``k0 - 1`` layers; then ``Z^0 = W^{k0-1}`` and
    ``Z^t = P_T H_{Omega_k0}(Z^{t-1})`` reusing the last layer ``t0`` times.
    ``Y`` sums the rescaled samples ``R_{Omega_t} P_T`` of every term, so it is
    supported on the union of the layers.

    Parameters
    ----------
    truth : GroundTruth
    partition : GolfingPartition
    t0 : int, optional
        Default ``ceil(2 log2 d) + 2`` with ``d = max(d1, d2)``.
    seed : int
        Recorded in the report.

    Returns
    -------
    Certificate
        ``Y``, the ``W`` and ``Z`` sequences and a :class:`CertificateReport`.
        ``cond1`` is measured on the union mask at probability ``p_total``.
    """
    k0 = partition.k0
    if k0 < 1:
        raise ArgumentError("k0 must be at least 1")
    proj = make_tangent(truth)
    if partition.layers[0].shape != proj.shape:
        raise ArgumentError("partition shape differs from the truth")
    d = max(proj.shape)
    t0 = default_t0(d) if t0 is None else int(t0)
    if t0 < 1:
        raise ArgumentError("t0 must be at least 1")
    PT = proj.P_T
    q = partition.q
    Y = np.zeros(proj.shape)
    W = [proj.U @ proj.V.T]
    for layer in partition.layers[:-1]:
        PW = PT(W[-1])
        Y += np.where(layer.observed, PW / q, 0.0)
        W.append(PT(h_omega(PW, layer, q)))
    last = partition.layers[-1]
    Z = [W[-1]]
    for _ in range(t0):
        PZ = PT(Z[-1])
        Y += np.where(last.observed, PZ / q, 0.0)
        Z.append(PT(h_omega(PZ, last, q)))

    union = partition.union()
    UV = W[0]
    support_ok = bool(np.array_equal(np.where(union.observed, Y, 0.0), Y))
    cond1 = check_candes1(union, proj)
    cond2a = float(np.linalg.norm(proj.P_T_perp(Y), 2))
    gap = PT(Y) - UV
    cond2b = float(np.linalg.norm(gap))
    zt = np.linalg.norm(Z[-1])
    ident = float(np.linalg.norm(gap + Z[-1]) / max(zt, np.linalg.norm(UV)))
    th = (0.5, 0.5, 1.0 / (4 * d))
    flags = (cond1 <= th[0], cond2a <= th[1], cond2b <= th[2])
    report = CertificateReport(cond1, cond2a, cond2b, support_ok, th, *flags,
                               bool(all(flags) and support_ok), k0, t0, q, seed, ident)
    return Certificate(Y, W, Z, report)


@dataclass
class NnmLooLedger:
    """Leave-one-out quantities of the same-sample sequence ``Z^t``.

    Arrays are indexed by ``t = 0..t0``; per-``w`` arrays by ``[t, j]`` for
    ``w = w_subset[j]``.
    """

    w_subset: list
    Z_22inf: np.ndarray
    Z_inf: np.ndarray
    Z_fro: np.ndarray
    Zw_22inf: np.ndarray
    Zw_inf: np.ndarray
    dist: np.ndarray
    rhs_22inf: np.ndarray
    rhs_inf: np.ndarray
    rhs_dist: np.ndarray
    G_scale: float
    k0: int

    def ratios(self) -> dict:
        return {
            "Z_22inf": self.Z_22inf / self.rhs_22inf,
            "Z_inf": self.Z_inf / self.rhs_inf,
            "Zw_22inf": self.Zw_22inf / self.rhs_22inf[:, None],
            "Zw_inf": self.Zw_inf / self.rhs_inf[:, None],
            "dist": self.dist / self.rhs_dist[:, None],
        }

    def dist_decay(self, floor_rel: float = 1e-11):
        """Fitted per-step ratio of ``||Z^t - Z^{t,w}||_F`` for every ``w``.

        The fit starts at ``t = 1`` because ``t = 0`` is identically zero.
        """
        t = np.arange(self.dist.shape[0])
        out = []
        for j in range(self.dist.shape[1]):
            v = self.dist[1:, j]
            out.append(fit_decay(v, t[1:], floor_rel)[0] if v.max() > 0 else 0.0)
        return np.array(out)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("t", "w1", "w2", "quantity", "value", "rhs", "ratio"))
            for t in range(self.Z_fro.size):
                rows = [("", "", "Z_22inf", self.Z_22inf[t], self.rhs_22inf[t]),
                        ("", "", "Z_inf", self.Z_inf[t], self.rhs_inf[t]),
                        ("", "", "Z_fro", self.Z_fro[t], math.nan)]
                for j, (w1, w2) in enumerate(self.w_subset):
                    rows += [(w1, w2, "Zw_22inf", self.Zw_22inf[t, j], self.rhs_22inf[t]),
                             (w1, w2, "Zw_inf", self.Zw_inf[t, j], self.rhs_inf[t]),
                             (w1, w2, "dist_fro", self.dist[t, j], self.rhs_dist[t])]
                for w1, w2, q, v, rhs in rows:
                    w.writerow([t, w1, w2, q, repr(float(v)), repr(float(rhs)), repr(float(v / rhs))])


def _n22inf(Z):
    sq = Z * Z
    return math.sqrt(max(sq.sum(axis=1).max(), sq.sum(axis=0).max()))


def run_nnm_loo(truth: GroundTruth, mask_k0: ObservationMask, Z0, t0: int, w_subset,
                k0: int = 1, g_exponent: float = 10.0) -> NnmLooLedger:
    """Leave-one-out ledger of ``Z^t = P_T H_{Omega_k0}(Z^{t-1})``.

    ``Z^{t,w} = P_T H^{(-w)}(Z^{t-1,w})`` drops row ``w1`` and column ``w2``
    of the sampling deviation. The operators use ``mask_k0.p`` as ``q``.

    Parameters
    ----------
    truth : GroundTruth
    mask_k0 : ObservationMask
        The reused golfing layer.
    Z0 : ndarray
        Start point, must lie in the tangent space.
    t0 : int
    w_subset : sequence of (int, int)
    k0 : int
        Layer count, enters ``G_scale = 2^{-(k0-1)} (mu r)^{-g_exponent}``.
    g_exponent : float
    """
    proj = make_tangent(truth)
    Z0 = as_matrix(Z0, "Z0")
    if Z0.shape != proj.shape or mask_k0.shape != proj.shape:
        raise ArgumentError("shapes of Z0, mask and truth differ")
    if np.linalg.norm(proj.P_T_perp(Z0)) > 1e-10 * max(1.0, np.linalg.norm(Z0)):
        raise ArgumentError("Z0 is not in the tangent space")
    w_subset = [(int(a), int(b)) for a, b in w_subset]
    q = mask_k0.p
    PT = proj.P_T
    nw = len(w_subset)
    shape = (t0 + 1,)
    Z_22, Z_in, Z_fr = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    Zw_22, Zw_in, dist = np.zeros(shape + (nw,)), np.zeros(shape + (nw,)), np.zeros(shape + (nw,))
    Z = Z0.copy()
    Zw = [Z0.copy() for _ in range(nw)]
    for t in range(t0 + 1):
        if t > 0:
            Z = PT(h_omega(Z, mask_k0, q))
            Zw = [PT(h_omega_minus_entryline(Zw[j], mask_k0, w, q)) for j, w in enumerate(w_subset)]
        Z_22[t], Z_in[t], Z_fr[t] = _n22inf(Z), np.abs(Z).max(), np.linalg.norm(Z)
        for j in range(nw):
            Zw_22[t, j] = _n22inf(Zw[j])
            Zw_in[t, j] = np.abs(Zw[j]).max()
            dist[t, j] = np.linalg.norm(Z - Zw[j])
    d = max(proj.shape)
    mur = truth.mu * truth.r
    G = 0.5 ** (k0 - 1) * mur ** (-g_exponent)
    half = 0.5 ** np.arange(t0 + 1)
    rhs_22 = half * math.sqrt(mur / d) * G
    rhs_in = half * (mur / d) * G
    return NnmLooLedger(w_subset, Z_22, Z_in, Z_fr, Zw_22, Zw_in, dist,
                        rhs_22, rhs_in, rhs_22.copy(), G, k0)


def _svt(Z, tau):
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    s = s - tau
    k = int((s > 0).sum())
    return (U[:, :k] * s[:k]) @ Vt[:k]


def solve_nnm_primal(observed, mask: ObservationMask, max_iter: int = 5000, tol: float = 1e-9,
                     step: float = 1.0) -> np.ndarray:
    """Minimum nuclear norm matrix agreeing with ``observed`` on the mask.

    Douglas-Rachford splitting between singular-value soft-thresholding and
    exact projection onto ``{X : Pi_Omega(X) = observed}``. The threshold is
    ``step`` times the spectral norm of ``observed``; any positive threshold
    has the same fixed points, this choice only makes the iteration count
    scale free.

    Parameters
    ----------
    observed : ndarray
        ``Pi_Omega(M*)``.
    mask : ObservationMask
    max_iter : int
    tol : float
        Stop when ``||prox - proj||_F / ||observed||_F`` falls below ``tol``.
    step : float

    Raises
    ------
    ConvergenceError
        If ``max_iter`` is reached first; carries the last residual.
    """
    b = as_matrix(observed, "observed")
    if b.shape != mask.shape:
        raise ArgumentError("observed and mask shapes differ")
    if mask.count == 0:
        raise ArgumentError("mask has no observed entries")
    b = np.where(mask.observed, b, 0.0)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return np.zeros(mask.shape)
    tau = step * np.linalg.norm(b, 2)
    z = b.copy()
    res = math.inf
    for k in range(max_iter):
        x = np.where(mask.observed, b, z)
        y = _svt(2 * x - z, tau)
        res = np.linalg.norm(y - x) / nb
        z += y - x
        if res < tol:
            log.debug("nnm primal converged in %d iterations", k + 1)
            return np.where(mask.observed, b, z)
    raise ConvergenceError(f"primal solver residual {res:.3g} after {max_iter} iterations", res)


def write_report(path, report: CertificateReport) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json(), fh, indent=2)
        fh.write("\n")
