"""Leave-one-out SVP families and the induction-hypothesis ledger.

Member ``0`` of a family is the plain SVP run. Member ``m >= 1`` replaces the
sampling deviation on row and column ``m - 1`` (0-based) by the truth, i.e. it
runs ``M^{t+1,m} = P_r[M* + H^{(-m)}(M^{t,m} - M*)]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DegenerateIterateError, DivergenceError
from .groundtruth import GroundTruth
from .matcore import best_rank_r
from .sampling import ObservationMask, h_omega, h_omega_minus_line
from .svp import BLOWUP, default_t_max, fit_decay, svp_step

QUANTITIES = ("E_op", "Delta_2inf", "D_fro", "S_fro")


@dataclass
class LooFamily:
    """Iterates of every member, ``F[t, k]`` and ``lam[t, k]`` for member ``members[k]``.

    Row ``t = 0`` holds zeros for the zero start.
    """

    members: np.ndarray
    F: np.ndarray
    lam: np.ndarray
    mask: ObservationMask
    truth: GroundTruth
    eta: float

    @property
    def t_max(self) -> int:
        return self.F.shape[0] - 1

    def iterate(self, t: int, k: int) -> np.ndarray:
        """Dense ``M^{t, members[k]}``."""
        F = self.F[t, k]
        return (F * self.lam[t, k]) @ F.T


def loo_step(M, observed, mask, eta, r, line, M_star):
    """One leave-one-out update; ``line=None`` is the plain SVP step."""
    if line is None:
        return svp_step(M, observed, mask, eta, r)
    Y = M - eta * (np.where(mask.observed, M, 0.0) - observed)
    Y[line, :] = M_star[line, :]
    Y[:, line] = M_star[:, line]
    return best_rank_r(Y, r, hermitian=True)


def run_loo_family(truth: GroundTruth, mask: ObservationMask, r: int | None = None,
                   t_max: int | None = None, members=None) -> LooFamily:
    """Run all requested leave-one-out members under one mask at ``eta = 1/p``.

    Parameters
    ----------
    truth : GroundTruth
        Symmetric ground truth.
    mask : ObservationMask
        Symmetric mask.
    r : int, optional
        Rank, default ``truth.r``.
    t_max : int, optional
        Default ``ceil(5 log2 d) + 12``.
    members : sequence of int, optional
        Member labels in ``0..d``; default all. Label 0 is always included
        and stored first.

    Raises
    ------
    DivergenceError
        With ``t`` and ``member`` set, under the same rule as ``run_svp``.
    """
    if not (truth.symmetric and mask.symmetric):
        raise ArgumentError("leave-one-out families need a symmetric truth and mask")
    if truth.matrix.shape != mask.shape:
        raise ArgumentError("truth and mask shapes differ")
    d = mask.rows
    r = truth.r if r is None else int(r)
    t_max = default_t_max(d) if t_max is None else int(t_max)
    if members is None:
        labels = np.arange(d + 1)
    else:
        rest = sorted({int(m) for m in members} - {0})
        if rest and (rest[0] < 1 or rest[-1] > d):
            raise ArgumentError(f"member labels must lie in 0..{d}")
        labels = np.array([0] + rest)
    M_star = truth.matrix
    observed = np.where(mask.observed, M_star, 0.0)
    eta = 1.0 / mask.p
    F = np.zeros((t_max + 1, labels.size, d, r))
    lam = np.zeros((t_max + 1, labels.size, r))
    for k, m in enumerate(labels):
        line = None if m == 0 else int(m) - 1
        M = np.zeros((d, d))
        s1_first = None
        for t in range(1, t_max + 1):
            f = loo_step(M, observed, mask, eta, r, line, M_star)
            M = f.reconstruct()
            s1 = float(np.abs(f.spectrum).max())
            if not np.all(np.isfinite(M)):
                raise DivergenceError(f"member {m}: non-finite iterate at t={t}", t - 1, int(m))
            if s1_first is None:
                s1_first = s1
            elif s1_first > 0 and s1 > BLOWUP * s1_first:
                raise DivergenceError(f"member {m}: sigma1 blew up at t={t}", t - 1, int(m))
            F[t, k] = f.F
            lam[t, k] = f.spectrum
    return LooFamily(labels, F, lam, mask, truth, eta)


def _polar(H):
    U, _, Vt = np.linalg.svd(H)
    return U @ Vt


@dataclass
class SvpLedger:
    """Induction-hypothesis quantities for ledger rows ``t = 1..T``.

    Per-index arrays are indexed ``[t - 1, k]`` (member ``members[k]``);
    ``D[t - 1, a, b]`` is ``||F^{t,i} - F^{t,m} G^{t,i,m}||_F`` with
    ``i = members[a]``, ``m = members[b]``. ``E[t - 1, k]`` is
    ``||E^{t,m}||_op``, whose hypothesis bound carries ``(1/2)^(t+1)``.
    """

    members: np.ndarray
    t: np.ndarray
    E: np.ndarray
    Delta: np.ndarray
    D: np.ndarray
    S: np.ndarray
    G_star: np.ndarray
    rhs: dict
    c_hyp: float
    err_inf: np.ndarray
    sigma1: float
    d: int
    r: int

    def aggregate(self, name: str) -> np.ndarray:
        """Max over the index set of quantity ``name`` for every ledger row."""
        arr = {"E_op": self.E, "Delta_2inf": self.Delta, "D_fro": self.D, "S_fro": self.S}[name]
        return arr.reshape(arr.shape[0], -1).max(axis=1)

    def ratio(self, name: str) -> np.ndarray:
        return self.aggregate(name) / self.rhs[name]

    def decay(self, name: str, floor_rel: float = 1e-11):
        """Fitted per-step ratio and R^2 of the aggregate of ``name``."""
        return fit_decay(self.aggregate(name), self.t, floor_rel)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("t", "m", "i", "quantity", "value", "rhs", "ratio"))
            for a, t in enumerate(self.t.tolist()):
                rows = []
                for name, arr in (("E_op", self.E), ("Delta_2inf", self.Delta), ("S_fro", self.S)):
                    for k, m in enumerate(self.members.tolist()):
                        i = "" if name != "S_fro" else 0
                        rows.append((m, i, name, arr[a, k], self.rhs[name][a]))
                for ka, i in enumerate(self.members.tolist()):
                    for kb, m in enumerate(self.members.tolist()):
                        rows.append((m, i, "D_fro", self.D[a, ka, kb], self.rhs["D_fro"][a]))
                for name in QUANTITIES:
                    rows.append(("max", "max", name + "_max", self.aggregate(name)[a], self.rhs[name][a]))
                if t <= math.log(self.d):
                    base = 0.5 ** t * self.sigma1 / self.d
                    rows.append((0, "", "err_inf_early_1_over_d", self.err_inf[a], base))
                    rows.append((0, "", "err_inf_early_r_over_d", self.err_inf[a], base * self.r))
                for m, i, q, v, rhs in rows:
                    w.writerow([t, m, i, q, repr(float(v)), repr(float(rhs)), repr(float(v / rhs))])


def build_svp_ledger(family: LooFamily, truth: GroundTruth | None = None, c_hyp: float = 1.0) -> SvpLedger:
    """Measure every hypothesis quantity of a leave-one-out family.

    Parameters
    ----------
    family : LooFamily
    truth : GroundTruth, optional
        Defaults to ``family.truth``.
    c_hyp : float
        Constant multiplying the hypothesis right-hand sides
        ``(1/2)^t {sigma_r, sqrt(mu r/d), sqrt(mu r/d), sigma_1 sqrt(mu r/d)}``.

    Raises
    ------
    DegenerateIterateError
        If some ``M^{t,m}`` with ``t >= 1`` has a non-positive r-th eigenvalue.
    """
    truth = family.truth if truth is None else truth
    mask = family.mask
    d, r, T = mask.rows, truth.r, family.t_max
    if T < 1:
        raise ArgumentError("family has no iterations")
    F_star = truth.U
    M_star = truth.matrix
    nm = family.members.size
    E = np.zeros((T, nm))
    Delta = np.zeros((T, nm))
    D = np.zeros((T, nm, nm))
    S = np.zeros((T, nm))
    G_star = np.zeros((T, nm, r, r))
    err_inf = np.zeros(T)
    for a, t in enumerate(range(1, T + 1)):
        Ft, lt = family.F[t], family.lam[t]
        if lt.min() <= 0:
            k = int(np.argmin(lt.min(axis=1)))
            raise DegenerateIterateError(
                f"member {family.members[k]} lost rank at t={t}: lambda_r={lt[k].min():.3g}")
        for k, m in enumerate(family.members.tolist()):
            R = family.iterate(t, k) - M_star
            op = h_omega(R, mask) if m == 0 else h_omega_minus_line(R, mask, m - 1)
            E[a, k] = np.linalg.norm(op, 2)
            if m == 0:
                err_inf[a] = np.abs(R).max()
        G = _polar(np.einsum("dr,kds->krs", F_star, Ft))
        G_star[a] = G
        dev = Ft - np.einsum("dr,krs->kds", F_star, G)
        Delta[a] = np.sqrt((dev * dev).sum(axis=2).max(axis=1))
        for ka in range(nm):
            # H^{t,i,m} = (F^{t,m})^T F^{t,i} for i = members[ka] and every m.
            Gi = _polar(np.einsum("kdr,ds->krs", Ft, Ft[ka]))
            # Identical members align with G = I exactly, not via round-off.
            Gi[ka] = np.eye(r)
            diff = Ft[ka][None] - np.einsum("kdr,krs->kds", Ft, Gi)
            D[a, ka] = np.sqrt((diff * diff).sum(axis=(1, 2)))
            if ka == 0:
                S[a] = np.linalg.norm(lt[:, :, None] * Gi - Gi * lt[0][None, None, :], axis=(1, 2))
    tt = np.arange(1, T + 1)
    half = 0.5 ** tt
    s = math.sqrt(truth.mu * r / d)
    rhs = {
        "E_op": c_hyp * 0.5 * half * truth.sigmar,
        "Delta_2inf": c_hyp * half * s,
        "D_fro": c_hyp * half * s,
        "S_fro": c_hyp * half * truth.sigma1 * s,
    }
    return SvpLedger(family.members, tt, E, Delta, D, S, G_star, rhs, float(c_hyp),
                     err_inf, truth.sigma1, d, r)


def clemma1_rows(family: LooFamily, ledger: SvpLedger, truth: GroundTruth | None = None):
    """Check the eigenvector-perturbation bounds along a family.

    For every ledger row ``t < T`` and member with ``||E^{t,m}|| < sigma_r/2``,
    ``M^{t+1,m}`` is the top-r part of ``M* + E^{t,m}``. Returns an array of
    ``(lhs, rhs)`` pairs for ``||Lambda* G - G Lambda*||_op <=
    (2 + 2 sigma_1/(sigma_r - ||E||)) ||E||`` with ``G = G^{t+1,m}``.
    """
    truth = family.truth if truth is None else truth
    lam_star = truth.factors.spectrum
    out = []
    for a in range(ledger.t.size - 1):
        for k in range(ledger.members.size):
            e = ledger.E[a, k]
            if e >= truth.sigmar / 2:
                continue
            G = ledger.G_star[a + 1, k]
            lhs = np.linalg.norm(lam_star[:, None] * G - G * lam_star[None, :], 2)
            out.append((lhs, (2 + 2 * truth.sigma1 / (truth.sigmar - e)) * e))
    return np.array(out).reshape(-1, 2)
