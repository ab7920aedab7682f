"""Rank-r ground-truth matrices with controlled condition number."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .errors import ArgumentError, GenerationError
from .matcore import RECTANGULAR, SYMMETRIC, RankRFactors, read_matrix, write_matrix

SYM_PSD = "sym-psd"
RECT = "rectangular"


@dataclass(frozen=True)
class GroundTruth:
    """Low-rank target ``M*`` with its measured incoherence and conditioning."""

    factors: RankRFactors
    mu: float
    kappa: float
    seed: int = 0

    @property
    def d1(self) -> int:
        return self.factors.shape[0]

    @property
    def d2(self) -> int:
        return self.factors.shape[1]

    @property
    def r(self) -> int:
        return self.factors.r

    @property
    def symmetric(self) -> bool:
        return self.factors.variant == SYMMETRIC

    @property
    def U(self) -> np.ndarray:
        return self.factors.F

    @property
    def V(self) -> np.ndarray:
        return self.factors.right

    @property
    def sigma1(self) -> float:
        return float(self.factors.spectrum.max())

    @property
    def sigmar(self) -> float:
        return float(self.factors.spectrum.min())

    @property
    def matrix(self) -> np.ndarray:
        return self.factors.reconstruct()


def _orthonormal(gen, d, r):
    Q, R = np.linalg.qr(gen.standard_normal((d, r)))
    return Q * np.sign(np.diag(R))


def _row_mu(F):
    d, r = F.shape
    return float(d / r * (F * F).sum(axis=1).max())


def measure_incoherence(factors, tol: float = 1e-8):
    """Smallest mu with every row of each factor at squared norm <= mu r / d.

    Parameters
    ----------
    factors : RankRFactors or ndarray
        A single orthonormal ``d x r`` matrix, or factors of ``M*``.

    Returns
    -------
    float or tuple of float
        One value for a single matrix or symmetric factors, otherwise
        ``(mu_left, mu_right)``.
    """
    mats = [factors] if isinstance(factors, np.ndarray) else (
        [factors.F] if factors.variant == SYMMETRIC else [factors.F, factors.V]
    )
    out = []
    for F in mats:
        F = np.asarray(F, dtype=float)
        if F.ndim != 2 or np.abs(F.T @ F - np.eye(F.shape[1])).max() > tol:
            raise ArgumentError("incoherence needs a factor with orthonormal columns")
        out.append(_row_mu(F))
    return out[0] if len(out) == 1 else tuple(out)


def spectrum_for(r: int, kappa: float) -> np.ndarray:
    """Geometric spectrum from ``kappa`` down to 1, descending."""
    if r == 1:
        return np.ones(1)
    s = np.geomspace(kappa, 1.0, r)
    s[0], s[-1] = kappa, 1.0
    return s


def gen_ground_truth(d1: int, d2: int, r: int, kappa_target: float, variant: str = SYM_PSD,
                     seed: int = 0, max_mu: float | None = None, max_tries: int = 100) -> GroundTruth:
    """Random rank-r ground truth.

    Factors are QR-orthogonalized Gaussian draws; the spectrum is geometric
    between 1 and ``kappa_target``. With ``max_mu`` set, draws are rejected
    until the measured incoherence is at most ``max_mu``.

    Parameters
    ----------
    d1, d2 : int
        Shape; the ``sym-psd`` variant requires ``d1 == d2``.
    r : int
    kappa_target : float
        Condition number, at least 1. A rank-one truth must use 1.
    variant : {'sym-psd', 'rectangular'}
    seed : int
    max_mu : float, optional
    max_tries : int
        Rejection budget when ``max_mu`` is given.
    """
    if variant not in (SYM_PSD, RECT):
        raise ArgumentError(f"unknown variant {variant!r}")
    if variant == SYM_PSD and d1 != d2:
        raise ArgumentError("sym-psd ground truth must be square")
    if not (1 <= r <= min(d1, d2)):
        raise ArgumentError(f"rank {r} infeasible for shape {(d1, d2)}")
    if not kappa_target >= 1.0:
        raise ArgumentError("kappa_target must be >= 1")
    if r == 1 and kappa_target != 1.0:
        raise ArgumentError("a rank-one truth has condition number 1")
    lam = spectrum_for(r, float(kappa_target))
    for attempt in range(max_tries if max_mu is not None else 1):
        gen = rng.stream(seed, rng.TRUTH, attempt)
        U = _orthonormal(gen, d1, r)
        if variant == SYM_PSD:
            f = RankRFactors(U, lam, None, SYMMETRIC)
            mu = _row_mu(U)
        else:
            V = _orthonormal(gen, d2, r)
            f = RankRFactors(U, lam, V, RECTANGULAR)
            mu = max(_row_mu(U), _row_mu(V))
        if max_mu is None or mu <= max_mu:
            return GroundTruth(f, mu, float(lam[0] / lam[-1]), seed)
    raise GenerationError(f"no draw with mu <= {max_mu} in {max_tries} tries")


def save_ground_truth(prefix, truth: GroundTruth) -> None:
    """Write ``<prefix>_U.txt`` (and ``_V.txt``), ``_spectrum.txt`` and ``.json``."""
    prefix = Path(prefix)
    write_matrix(f"{prefix}_U.txt", truth.U)
    if not truth.symmetric:
        write_matrix(f"{prefix}_V.txt", truth.factors.V)
    write_matrix(f"{prefix}_spectrum.txt", truth.factors.spectrum[None, :])
    meta = {"d1": truth.d1, "d2": truth.d2, "r": truth.r, "mu": truth.mu,
            "kappa": truth.kappa, "seed": truth.seed,
            "variant": SYM_PSD if truth.symmetric else RECT}
    Path(f"{prefix}.json").write_text(json.dumps(meta, indent=2) + "\n")


def load_ground_truth(prefix) -> GroundTruth:
    meta = json.loads(Path(f"{prefix}.json").read_text())
    U = read_matrix(f"{prefix}_U.txt")
    lam = read_matrix(f"{prefix}_spectrum.txt")[0]
    if meta.get("variant", SYM_PSD) == SYM_PSD:
        f = RankRFactors(U, lam, None, SYMMETRIC)
    else:
        f = RankRFactors(U, lam, read_matrix(f"{prefix}_V.txt"), RECTANGULAR)
    return GroundTruth(f, float(meta["mu"]), float(meta["kappa"]), int(meta["seed"]))
