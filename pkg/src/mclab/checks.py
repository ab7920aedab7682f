"""Executable checks of the perturbation and concentration lemmas.

Deterministic lemmas are evaluated exactly on random instances that satisfy
their premises; any violation beyond floating-point tolerance is a failure.
Probabilistic lemmas are measured by Monte Carlo: each trial yields the ratio
of the left side to the right side with its leading constant removed, and the
result reports the largest ratio (the smallest constant that works on every
trial) together with the fraction of trials satisfied at a reference
constant.

Suprema over all matrices in a set are either computed exactly where the
quantity is an operator norm of a small matrix, or approximated from below by
random starts followed by ascent steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import ArgumentError, GenerationError
from .groundtruth import RECT, SYM_PSD, gen_ground_truth, spectrum_for
from .matcore import procrustes, top_r_eig_sym
from .sampling import ObservationMask, h_omega, h_omega_minus_entryline, h_omega_minus_line, h_omega_w
from .tangentcert import TangentProjector

DETERMINISTIC = ("clemma1", "clemma2", "davis-kahan", "weyl", "tu", "inftwoinf",
                 "sintheta-equivalence")
PROBABILISTIC = ("candes0", "yudong0", "yudong1", "yudong2", "hpterm", "fixedfro",
                 "prop1-rip", "s2l2", "l2normbound", "linftynormbound", "l2lip", "discrepancy")
BERNSTEIN = ("scalar", "vector", "matrix")

REL_TOL = 1e-9
RESAMPLE_CAP = 100
N_DIRECTIONS = 64
N_ASCENT = 50


@dataclass
class LemmaCheckResult:
    """Outcome of one lemma check.

    ``violations`` counts failed hard inequalities (deterministic lemmas,
    deterministic parts of probabilistic ones, Bernstein tails). For
    probabilistic lemmas ``satisfaction`` is the fraction of trials with
    ``ratio <= constant`` and ``fitted_constant`` the largest ratio seen.
    ``worst_margin`` is the smallest relative slack ``(rhs - lhs) / rhs``.
    """

    lemma: str
    trials: int
    violations: int = 0
    satisfaction: float | None = None
    fitted_constant: float | None = None
    worst_margin: float = math.inf
    constant: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {"lemma": self.lemma, "trials": self.trials, "violations": self.violations,
                "satisfaction": self.satisfaction, "fitted_constant": self.fitted_constant,
                "worst_margin": self.worst_margin, "constant": self.constant,
                **({"details": self.details} if self.details else {})}


# ---------------------------------------------------------------- helpers

def _orth(gen, d, r):
    Q, R = np.linalg.qr(gen.standard_normal((d, r)))
    return Q * np.sign(np.diag(R))


def _sym(gen, d):
    A = gen.standard_normal((d, d))
    return (A + A.T) / 2


def _op(A):
    return float(np.linalg.norm(A, 2))


def _fro(A):
    return float(np.linalg.norm(A))


def _polar(H):
    U, _, Vt = np.linalg.svd(H)
    return U @ Vt


def _sin_op(U, Ut):
    return _op(U - Ut @ (Ut.T @ U))


def _sin_fro(U, Ut):
    return _fro(U - Ut @ (Ut.T @ U))


def _row_norms(A):
    return np.sqrt((A * A).sum(axis=1))


def _n2inf(A):
    return float(_row_norms(A).max())


def _n22inf(A):
    return max(_n2inf(A), _n2inf(A.T))


def _dims(gen, dmax=30):
    d = int(gen.integers(4, dmax + 1))
    r = int(gen.integers(1, min(5, d - 1) + 1))
    return d, r


def _kappa(gen, r):
    return 1.0 if r == 1 else float(math.exp(gen.uniform(0, math.log(10))))


def _sym_direction(gen, d, F):
    # Random symmetric direction mixing a dense part with parts aligned to F.
    r = F.shape[1]
    w = gen.uniform(0, 1, 3)
    S = _sym(gen, r)
    X = gen.standard_normal((d, r))
    A = w[0] * _sym(gen, d) + w[1] * F @ S @ F.T + w[2] * (F @ X.T + X @ F.T)
    n = _op(A)
    return A / n if n > 0 else _sym_direction(gen, d, F)


# ---------------------------------------------------------------- deterministic lemmas
# Each instance function returns a list of (lhs, rhs, scale) triples or None
# when the drawn instance misses the premise (it is then redrawn).

def _inst_clemma1(gen):
    d, r = _dims(gen)
    Fs = _orth(gen, d, r)
    lam = spectrum_for(r, _kappa(gen, r))
    s1, sr = lam[0], lam[-1]
    E = _sym_direction(gen, d, Fs) * gen.uniform(0, 1) * sr / 2
    e = _op(E)
    if not e < sr / 2:
        return None
    F = top_r_eig_sym((Fs * lam) @ Fs.T + E, r).F
    H = Fs.T @ F
    G = _polar(H)
    L = lam[:, None]
    return [
        (_op(L * G - G * lam), (2 + 2 * s1 / (sr - e)) * e, s1),
        (_op(L * H - G * lam), (2 + s1 / (sr - e)) * e, s1),
        (_op(L * G - H * lam), (2 + s1 / (sr - e)) * e, s1),
    ]


def _inst_clemma2(gen):
    d, r = _dims(gen)
    Q = _orth(gen, d, d)
    F1 = Q[:, :r]
    lam1 = spectrum_for(r, _kappa(gen, r))
    lam2 = -gen.uniform(0, 0.999, d - r) * lam1[-1]
    lam2[gen.uniform(size=d - r) < 0.2] = 0.0
    A = (Q * np.concatenate([lam1, lam2])) @ Q.T
    gap = lam1[-1] - abs(lam2.max())
    E = _sym_direction(gen, d, F1) * gen.uniform(0, 1) * gap / 2
    e = _op(E)
    if not e < gap / 2:
        return None
    top = top_r_eig_sym(A + E, r)
    Ft, lt = top.F, top.spectrum
    G = _polar(F1.T @ Ft)
    K = lam1[:, None] * G - G * lt[None, :]
    c = (2 * lam1[0] + e) / (lam1[-1] - e) + 1
    EF = E @ Ft
    return [(_fro(K), c * _fro(EF), lam1[0]), (_op(K), c * _op(EF), lam1[0])]


def _inst_davis_kahan(gen):
    d, r = _dims(gen)
    Q = _orth(gen, d, d)
    lam = np.sort(gen.standard_normal(d))[::-1] * gen.uniform(0.5, 5)
    delta = lam[r - 1] - lam[r]
    if delta <= 0:
        return None
    A = (Q * lam) @ Q.T
    W = _sym_direction(gen, d, Q[:, :r]) * gen.uniform(0, 1) * delta
    w = _op(W)
    if not delta > w:
        return None
    U = top_r_eig_sym(A, r).F
    Ut = top_r_eig_sym(A + W, r).F
    WU = W @ U
    O = procrustes(Ut, U)
    scale = 1.0
    return [
        (_sin_fro(U, Ut), _fro(WU) / (delta - w), scale),
        (_sin_op(U, Ut), _op(WU) / (delta - w), scale),
        (_fro(U - Ut @ O), math.sqrt(2) * _fro(WU) / (delta - w), scale),
    ]


def _inst_weyl(gen):
    d, _ = _dims(gen)
    A = _sym(gen, d) * gen.uniform(0.1, 10)
    E = _sym(gen, d) * 10 ** gen.uniform(-6, 1)
    a = np.linalg.eigvalsh(A)
    b = np.linalg.eigvalsh(A + E)
    e = _op(E)
    scale = max(_op(A), e)
    return [(float(abs(x - y)), e, scale) for x, y in zip(a, b)]


def _inst_tu(gen):
    d, r = _dims(gen)
    Fp = gen.standard_normal((d, r)) * gen.uniform(0.2, 3)
    O = _orth(gen, r, r)
    F = Fp @ O + gen.standard_normal((d, r)) * 10 ** gen.uniform(-4, 1)
    Os = procrustes(Fp, F)
    D = F - Fp @ Os
    M, Mp = F @ F.T, Fp @ Fp.T
    gap = _fro(M - Mp) ** 2
    sr = np.linalg.svd(Fp, compute_uv=False)[-1] ** 2
    scale = _fro(Mp) ** 2
    return [
        (_fro(D @ D.T) ** 2, 2 * gap, scale),
        (sr * _fro(D) ** 2, gap / (2 * (math.sqrt(2) - 1)), scale),
    ]


def _inst_inftwoinf(gen):
    d, r = _dims(gen)
    Fs = _orth(gen, d, r)
    lam_s = spectrum_for(r, _kappa(gen, r))
    kappa = lam_s[0] / lam_s[-1]
    Ms = (Fs * lam_s) @ Fs.T
    if gen.uniform() < 0.5:
        E0 = _sym_direction(gen, d, Fs) * gen.uniform(0, 1) * lam_s[-1] / 20
        top = top_r_eig_sym(Ms + E0, r)
        F, lam = top.F, top.spectrum
    else:
        F = np.linalg.qr(Fs + gen.standard_normal((d, r)) * 10 ** gen.uniform(-4, -1.5))[0]
        lam = np.sort(lam_s * (1 + gen.uniform(-0.02, 0.02, r)))[::-1]
    if lam.min() <= 0:
        return None
    M = (F * lam) @ F.T
    E = M - Ms
    e = _op(E)
    if not e <= lam_s[-1] / 10:
        return None
    G = _polar(Fs.T @ F)
    D = F - Fs @ G
    L = float(lam.max())
    s = lam_s[0]
    return [
        (float(np.abs(E).max()),
         2 * _n2inf(D) * _n2inf(F) * L + (1 + 5 * kappa) * _n2inf(Fs) ** 2 * e, s),
        (_n2inf(E),
         _n2inf(D) * L + _n2inf(F) * L * _fro(D) + (1 + 5 * kappa) * _n2inf(Fs) * e, s),
    ]


def _inst_sintheta(gen):
    d, r = _dims(gen)
    V1 = _orth(gen, d, r)
    if gen.uniform() < 0.3:
        V2 = _orth(gen, d, r)
    else:
        O = _orth(gen, r, r)
        V2 = np.linalg.qr(V1 @ O + gen.standard_normal((d, r)) * 10 ** gen.uniform(-5, 0.5))[0]
    Q = procrustes(V2, V1)
    dist2 = _fro(V1 - V2 @ Q) ** 2
    s2 = _sin_fro(V2, V1) ** 2
    return [(0.5 * dist2, s2, 1.0), (s2, dist2, 1.0)]


_DET = {
    "clemma1": _inst_clemma1,
    "clemma2": _inst_clemma2,
    "davis-kahan": _inst_davis_kahan,
    "weyl": _inst_weyl,
    "tu": _inst_tu,
    "inftwoinf": _inst_inftwoinf,
    "sintheta-equivalence": _inst_sintheta,
}


def check_deterministic(lemma: str, trials: int = 1000, seed: int = 0) -> LemmaCheckResult:
    """Evaluate every inequality of a deterministic lemma on random instances.

    An inequality ``lhs <= rhs`` counts as violated when
    ``lhs > rhs + 1e-9 * max(|rhs|, scale)``, with ``scale`` the natural
    magnitude of the instance.

    Raises
    ------
    GenerationError
        If 100 consecutive draws miss the lemma's premise.
    """
    if lemma not in _DET:
        raise ArgumentError(f"unknown deterministic lemma {lemma!r}; expected one of {DETERMINISTIC}")
    make = _DET[lemma]
    violations = 0
    worst = math.inf
    for k in range(trials):
        for attempt in range(RESAMPLE_CAP):
            inst = make(rng.stream(seed, rng.TRIAL, k, attempt))
            if inst is not None:
                break
        else:
            raise GenerationError(f"{lemma}: premise missed {RESAMPLE_CAP} times in trial {k}")
        for lhs, rhs, scale in inst:
            ref = max(abs(rhs), scale)
            if lhs > rhs + REL_TOL * ref:
                violations += 1
            worst = min(worst, (rhs - lhs) / ref)
    return LemmaCheckResult(lemma, trials, violations, worst_margin=float(worst))


# ---------------------------------------------------------------- probabilistic lemmas

def _ascend(ratio, start, step, n_steps=N_ASCENT):
    # Greedy ascent: keep a step only if it raises the ratio.
    best_z, best = start, ratio(start)
    for _ in range(n_steps):
        z = step(best_z)
        val = ratio(z)
        if not val > best * (1 + 1e-12):
            break
        best_z, best = z, val
    return best


def _tangent_setup(d, r, p, seed, k):
    truth = gen_ground_truth(d, d, r, 1.0, RECT, seed=seed * 1000003 + k)
    gen = rng.stream(seed, rng.TRIAL, k)
    mask = ObservationMask(gen.random((d, d)) < p, p, False)
    return truth, TangentProjector(truth.U, truth.V), mask, gen


def _sym_setup(d, r, p, seed, k):
    truth = gen_ground_truth(d, d, r, 1.0, SYM_PSD, seed=seed * 1000003 + k)
    gen = rng.stream(seed, rng.TRIAL, k)
    u = gen.random((d, d))
    upper = np.triu(u < p)
    mask = ObservationMask(upper | np.triu(upper, 1).T, p, True)
    return truth, mask, gen


def _trial_candes0(d, r, p, seed, k):
    _, mask, gen = _sym_setup(d, r, p, seed, k)
    Z = _sym(gen, d)
    i = int(gen.integers(d))
    full = _op(h_omega(Z, mask))
    loo = _op(h_omega_minus_line(Z, mask, i))
    base = math.sqrt(d * math.log(d) / p) * np.abs(Z).max()
    return full / base, [(loo, full, full)]


def _trial_yudong0(d, r, p, seed, k):
    _, mask, gen = _sym_setup(d, r, p, seed, k)
    base = math.sqrt(r * d * math.log(d) / p)

    def ratio(XY):
        A = XY[0] @ XY[1].T
        return _op(h_omega(A, mask)) / (base * np.abs(A).max())

    starts = [(gen.standard_normal((d, r)), gen.standard_normal((d, r))) for _ in range(N_DIRECTIONS)]
    vals = [ratio(s) for s in starts]
    best = starts[int(np.argmax(vals))]

    def step(XY):
        return (XY[0] + 0.1 * gen.standard_normal((d, r)), XY[1] + 0.1 * gen.standard_normal((d, r)))

    # Random local search: a few restarts of the greedy walk.
    out = max(vals)
    for _ in range(N_ASCENT):
        cand = step(best)
        v = ratio(cand)
        if v > out:
            out, best = v, cand
    return out, []


def _trial_yudong1(d, r, p, seed, k):
    truth, mask, _ = _sym_setup(d, r, p, seed, k)
    F = truth.U
    C = mask.observed / p - 1.0
    K1 = np.einsum("ij,ia,jb->jaib", C, F, F).reshape(d * r, d * r)
    K2 = np.einsum("ij,ia,ib->jab", C, F, F)
    eps = max(_op(K1), max(_op(K2[j]) for j in range(d)))
    base = math.sqrt(truth.mu * r * math.log(d) / (p * d))
    return eps / base, []


def _trial_yudong2(d, r, p, seed, k):
    truth, mask, gen = _sym_setup(d, r, p, seed, k)
    radius = 6 * math.sqrt(truth.mu * r / d)

    def clip(H):
        n = _row_norms(H)
        return H * np.minimum(1.0, radius / np.maximum(n, 1e-300))[:, None]

    def eps(H):
        f2 = _fro(H) ** 2
        P = np.where(mask.observed, H @ H.T, 0.0)
        return (_fro(P) ** 2 / p - f2 * f2) / (f2 * f2 + f2)

    starts = []
    for _ in range(N_DIRECTIONS):
        H = gen.standard_normal((d, r))
        if gen.uniform() < 0.5:
            # Aligned columns make H H^T rank one, the hardest case on average.
            H = np.outer(H[:, 0], gen.standard_normal(r))
        H = clip(H / _row_norms(H).max() * radius * gen.uniform(0.05, 1))
        starts.append(H)
    vals = [eps(H) for H in starts]
    best = starts[int(np.argmax(vals))]
    out = max(vals)
    for _ in range(N_ASCENT):
        cand = clip(best + 0.05 * radius * gen.standard_normal((d, r)))
        v = eps(cand)
        if v > out:
            out, best = v, cand
    base = math.sqrt((truth.mu ** 2 * r ** 2 + math.log(d)) / (p * d))
    return max(out, 0.0) / base, []


def _trial_hpterm(d, r, p, seed, k):
    truth, mask, _ = _sym_setup(d, r, p, seed, k)
    F = truth.U
    C = 1.0 - mask.observed / p
    L = np.einsum("ik,ka,kb->iab", C, F, F)
    eps = max(_op(L[i]) for i in range(d))
    base = math.sqrt(truth.mu * r * math.log(d) / (p * d))
    return eps / base, []


def _trial_fixedfro(d, r, p, seed, k):
    gen = rng.stream(seed, rng.TRIAL, k)
    mask = ObservationMask(gen.random((d, d)) < p, p, False)
    Z = gen.standard_normal((d, d))
    if gen.uniform() < 0.5:
        Z = gen.standard_normal((d, r)) @ gen.standard_normal((r, d))
    lg = math.log(d)
    base = math.sqrt(lg / p) * _n22inf(Z) + lg / p * np.abs(Z).max()
    return _op(h_omega(Z, mask)) / base, []


def _trial_prop1(d, r, p, seed, k):
    truth, mask, gen = _sym_setup(d, r, p, seed, k)
    s1 = truth.sigma1
    Ms = truth.matrix
    radius = s1 / (64 ** 2 * truth.kappa ** 2)
    cap = 2 * truth.mu * r / d * s1
    pair = []
    for _ in range(2):
        for attempt in range(RESAMPLE_CAP):
            X = gen.standard_normal((d, r))
            F = truth.U + X
            lam = truth.factors.spectrum * (1 + gen.standard_normal(r))
            M0 = (F * lam) @ F.T
            W = M0 - Ms
            M = Ms + W / _fro(W) * radius * gen.uniform(0, 1) ** 0.5
            # Rescaling the difference keeps the rank only when W is tangent;
            # project back to rank r and re-check the neighbourhood.
            M = top_r_eig_sym(M, r)
            M = (M.F * M.spectrum) @ M.F.T
            if _fro(M - Ms) <= radius and np.abs(M).max() <= cap:
                pair.append(M - Ms)
                break
        else:
            raise GenerationError("prop1-rip: could not draw a matrix in the neighbourhood")
    W1, W2 = pair
    dev = abs(np.vdot(W1, W2) - np.vdot(np.where(mask.observed, W1, 0), W2) / p)
    return dev / (_fro(W1) * _fro(W2)), []


def _tangent_probe(gen, proj, d, r):
    if gen.uniform() < 0.5:
        return proj.P_T(gen.standard_normal((d, d)))
    E = np.zeros((d, d))
    E[gen.integers(d), gen.integers(d)] = 1.0
    return proj.P_T(E)


def _trial_s2l2(d, r, p, seed, k):
    truth, proj, mask, gen = _tangent_setup(d, r, p, seed, k)
    w = (int(gen.integers(d)), int(gen.integers(d)))
    base = math.sqrt(truth.mu * r / d)
    best = 0.0
    for op in (lambda Z: h_omega(Z, mask), lambda Z: h_omega_minus_entryline(Z, mask, w, p)):
        def ratio(Z, op=op):
            return np.abs(proj.P_T(op(Z))).max() / (base * _fro(Z))

        def step(Z, op=op):
            A = proj.P_T(op(Z))
            a, b = np.unravel_index(np.argmax(np.abs(A)), A.shape)
            E = np.zeros((d, d))
            E[a, b] = 1.0
            # Exact maximiser of the (a, b) entry functional over T.
            return proj.P_T(op(proj.P_T(E)))

        starts = [_tangent_probe(gen, proj, d, r) for _ in range(N_DIRECTIONS)]
        vals = [ratio(Z) for Z in starts]
        best = max(best, _ascend(ratio, starts[int(np.argmax(vals))], step))
    return best, []


def _trial_l2lip(d, r, p, seed, k):
    truth, proj, mask, gen = _tangent_setup(d, r, p, seed, k)
    w = (int(gen.integers(d)), int(gen.integers(d)))
    best = 0.0
    for op in (lambda Z: h_omega(Z, mask), lambda Z: h_omega_minus_entryline(Z, mask, w, p)):
        def ratio(Z, op=op):
            return _n22inf(proj.P_T(op(Z))) / _fro(Z)

        def step(Z, op=op):
            # One power step on the worst row (or column) map L, Z <- L* L Z.
            A = proj.P_T(op(Z))
            rows, cols = _row_norms(A), _row_norms(A.T)
            B = np.zeros((d, d))
            if rows.max() >= cols.max():
                a = int(np.argmax(rows))
                B[a] = A[a]
            else:
                b = int(np.argmax(cols))
                B[:, b] = A[:, b]
            Z2 = proj.P_T(op(proj.P_T(B)))
            return Z2 / _fro(Z2)

        starts = [_tangent_probe(gen, proj, d, r) for _ in range(N_DIRECTIONS)]
        vals = [ratio(Z) for Z in starts]
        best = max(best, _ascend(ratio, starts[int(np.argmax(vals))], step))
    return best, []


def _trial_discrepancy(d, r, p, seed, k):
    truth, proj, mask, gen = _tangent_setup(d, r, p, seed, k)
    Z = proj.P_T(gen.standard_normal((d, d))) if gen.uniform() < 0.5 else truth.U @ truth.V.T
    w = (int(gen.integers(d)), int(gen.integers(d)))
    lhs = _fro(proj.P_T(h_omega_w(Z, mask, w, p)))
    rhs = _n22inf(Z) / 32 + math.sqrt(math.log(d) / p) * np.abs(Z).max()
    return lhs / rhs, []


def _z_sequences(d, r, p, seed, k, n_random=4):
    truth, proj, mask, gen = _tangent_setup(d, r, p, seed, k)
    t0 = math.ceil(2 * math.log2(d)) + 2
    Z = [truth.U @ truth.V.T]
    for _ in range(t0):
        Z.append(proj.P_T(h_omega(Z[-1], mask)))
    vs = [(int(gen.integers(d)), int(gen.integers(d))) for _ in range(n_random)]
    # Add the rows/columns where the first step is largest.
    A = proj.P_T(h_omega(Z[0], mask))
    vs.append((int(np.argmax(_row_norms(A))), int(np.argmax(_row_norms(A.T)))))
    loo = {}
    for v in vs:
        seq = [Z[0]]
        for _ in range(t0):
            seq.append(proj.P_T(h_omega_minus_entryline(seq[-1], mask, v, p)))
        loo[v] = seq
    return truth, proj, mask, Z, loo, t0


def _trial_l2normbound(d, r, p, seed, k):
    truth, proj, mask, Z, loo, t0 = _z_sequences(d, r, p, seed, k)
    s = math.sqrt(truth.mu * r / d)
    sq = math.sqrt(math.log(d) / p)
    worst = 0.0
    for t in range(1, t0 + 1):
        A = proj.P_T(h_omega(Z[t - 1], mask))
        for v, seq in loo.items():
            Zv = seq[t - 1]
            lhs = max(_fro(A[v[0]]), _fro(A[:, v[1]]))
            extra = _n22inf(proj.P_T(h_omega(Z[t - 1] - Zv, mask)))
            base = _n22inf(Zv) + sq * np.abs(Zv).max() + s * _fro(Z[t - 1])
            worst = max(worst, max(lhs - extra, 0.0) / base)
    return worst, []


def _trial_linftynormbound(d, r, p, seed, k):
    truth, proj, mask, Z, loo, t0 = _z_sequences(d, r, p, seed, k)
    mr = truth.mu * r / d
    s = math.sqrt(mr)
    worst = 0.0
    for t in range(1, t0 + 1):
        A = proj.P_T(h_omega(Z[t - 1], mask))
        for v, seq in loo.items():
            Zv = seq[t - 1]
            lhs = abs(A[v])
            base = np.abs(Zv).max() + mr * _fro(Z[t]) + s * _fro(Z[t - 1] - Zv)
            worst = max(worst, lhs / base)
    return worst, []


# name -> (trial function, reference constant)
_PROB = {
    "candes0": (_trial_candes0, 2.0),
    "yudong0": (_trial_yudong0, 2.0),
    "yudong1": (_trial_yudong1, 1.0),
    "yudong2": (_trial_yudong2, 1.0),
    "hpterm": (_trial_hpterm, 1.0),
    "fixedfro": (_trial_fixedfro, 1.0),
    "prop1-rip": (_trial_prop1, 0.25),
    "s2l2": (_trial_s2l2, 0.125),
    "l2normbound": (_trial_l2normbound, 1 / 32),
    "linftynormbound": (_trial_linftynormbound, 1 / 32),
    "l2lip": (_trial_l2lip, 1 / 32),
    "discrepancy": (_trial_discrepancy, 1.0),
}


def reference_constant(lemma: str) -> float:
    """Constant the bound is stated with (1 or 2 where it is unnamed)."""
    return _PROB[lemma][1]


def check_probabilistic(lemma: str, d: int, r: int, p: float, trials: int = 20, seed: int = 0,
                        constant: float | None = None) -> LemmaCheckResult:
    """Monte Carlo measurement of a concentration lemma.

    Parameters
    ----------
    lemma : str
        One of :data:`PROBABILISTIC`.
    d, r : int
        Dimension and rank of the random ground truth.
    p : float
        Sampling probability (used as ``q`` by the golfing-layer lemmas).
    trials : int
    seed : int
    constant : float, optional
        Constant for the satisfaction fraction; default
        :func:`reference_constant`.

    Returns
    -------
    LemmaCheckResult
        ``fitted_constant`` is the largest trial ratio ``lhs / base``, where
        ``base`` is the right side without its leading constant.
        ``violations`` counts failures of the deterministic parts.
    """
    if lemma not in _PROB:
        raise ArgumentError(f"unknown probabilistic lemma {lemma!r}; expected one of {PROBABILISTIC}")
    if not 0 < p <= 1:
        raise ArgumentError("p must lie in (0, 1]")
    if not 1 <= r < d:
        raise ArgumentError("need 1 <= r < d")
    fn, cref = _PROB[lemma]
    c = cref if constant is None else float(constant)
    ratios = np.empty(trials)
    violations = 0
    for k in range(trials):
        ratios[k], hard = fn(d, r, p, seed, k)
        for lhs, rhs, scale in hard:
            if lhs > rhs + REL_TOL * max(abs(rhs), scale):
                violations += 1
    sat = float(np.mean(ratios <= c))
    fitted = float(ratios.max()) if trials else 0.0
    worst = float((1 - ratios / c).min()) if trials else math.inf
    return LemmaCheckResult(lemma, trials, violations, sat, fitted, worst, c,
                            {"d": d, "r": r, "p": p, "median_ratio": float(np.median(ratios))})


# ---------------------------------------------------------------- Bernstein

def _binom_slack(bound, n):
    b = min(max(bound, 0.0), 1.0)
    return 3 * math.sqrt(b * (1 - b) / n)


def check_bernstein(kind: str, trials: int = 10000, seed: int = 0, n: int = 100,
                    dim: int = 10) -> LemmaCheckResult:
    """Empirical tails of bounded zero-mean sums against Bernstein bounds.

    ``scalar``: Rademacher sums of length ``n``, bound
    ``2 exp(-t^2 / (2 n + 2 t / 3))``. ``vector``: sums of ``n`` random-sign
    fixed unit vectors in ``R^dim``, bound
    ``(dim + 1) exp(-t^2 / (2 s + 2 t / 3))`` with ``s = sum E||v_k||^2 = n``.
    ``matrix``: sums of ``n`` random-sign fixed ``dim x dim`` diagonal sign
    matrices, bound ``2 dim exp(-t^2 / (2 n + 2 t / 3))``.

    Five thresholds ``t = c sqrt(n)``, ``c`` in ``{0.5, 1, 1.5, 2, 3}``
    (matrix: shifted up by 1.5). A threshold fails when the empirical tail
    exceeds the bound plus three binomial standard deviations at the bound.
    """
    if kind not in BERNSTEIN:
        raise ArgumentError(f"unknown Bernstein kind {kind!r}; expected one of {BERNSTEIN}")
    gen = rng.stream(seed, rng.TRIAL, BERNSTEIN.index(kind))
    signs = gen.integers(0, 2, size=(trials, n), dtype=np.int8) * 2.0 - 1.0
    cs = np.array([0.5, 1.0, 1.5, 2.0, 3.0])
    if kind == "scalar":
        stat = np.abs(signs.sum(axis=1))
        lead, var = 2.0, float(n)
    elif kind == "vector":
        U = gen.standard_normal((n, dim))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        stat = np.linalg.norm(signs @ U, axis=1)
        lead, var = dim + 1.0, float(n)
    else:
        D = gen.integers(0, 2, size=(n, dim)) * 2.0 - 1.0
        # Diagonal matrices: operator norm is the largest absolute diagonal.
        stat = np.abs(signs @ D).max(axis=1)
        lead, var = 2.0 * dim, float(n)
        cs = cs + 1.5
    ts = cs * math.sqrt(n)
    violations = 0
    worst = math.inf
    rows = []
    for t in ts:
        emp = float(np.mean(stat >= t))
        bound = lead * math.exp(-t * t / (2 * var + 2 * t / 3))
        slack = _binom_slack(bound, trials)
        if emp > bound + slack:
            violations += 1
        worst = min(worst, bound + slack - emp)
        rows.append({"t": float(t), "empirical": emp, "bound": bound, "slack": slack})
    return LemmaCheckResult(f"bernstein-{kind}", trials, violations, worst_margin=worst,
                            details={"thresholds": rows})
