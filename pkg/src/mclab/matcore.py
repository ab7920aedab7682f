"""Dense matrices, norms, truncated spectral decompositions and Procrustes.

All matrices are plain two-dimensional ``numpy`` float arrays. Functions in
this module are pure; they never modify their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ArgumentError, DimensionError, NumericError

NORM_KINDS = (
    "frobenius",
    "operator",
    "nuclear",
    "entrywise-inf",
    "row-l2-inf",
    "doubly-l2-inf",
)

SYMMETRIC = "symmetric-eig"
RECTANGULAR = "rectangular-svd"


def as_matrix(Z, name: str = "Z") -> np.ndarray:
    """Validate and return ``Z`` as a finite 2-D float array.

    Raises
    ------
    DimensionError
        If ``Z`` is not two-dimensional or has a zero dimension.
    NumericError
        If ``Z`` has a non-finite entry.
    """
    A = np.asarray(Z, dtype=float)
    if A.ndim != 2 or A.shape[0] == 0 or A.shape[1] == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericError(f"{name} has non-finite entries")
    return A


def norm(Z, kind: str) -> float:
    """Matrix norm by name.

    Parameters
    ----------
    Z : array_like, shape (m, n)
    kind : str
        One of ``frobenius``, ``operator`` (largest singular value),
        ``nuclear`` (sum of singular values), ``entrywise-inf`` (largest
        absolute entry), ``row-l2-inf`` (largest row Euclidean norm) or
        ``doubly-l2-inf`` (larger of the row-l2-inf norms of Z and Z^T).

    Returns
    -------
    float
    """
    A = as_matrix(Z)
    if kind == "frobenius":
        return float(np.linalg.norm(A))
    if kind == "operator":
        return float(np.linalg.svd(A, compute_uv=False)[0])
    if kind == "nuclear":
        return float(np.linalg.svd(A, compute_uv=False).sum())
    if kind == "entrywise-inf":
        return float(np.abs(A).max())
    if kind == "row-l2-inf":
        return float(np.sqrt((A * A).sum(axis=1).max()))
    if kind == "doubly-l2-inf":
        sq = A * A
        return float(np.sqrt(max(sq.sum(axis=1).max(), sq.sum(axis=0).max())))
    raise ArgumentError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")


def _fix_signs(F: np.ndarray, V: Optional[np.ndarray] = None):
    # Make the largest-magnitude entry of each column of F positive; the first
    # occurrence wins on ties.
    idx = np.argmax(np.abs(F), axis=0)
    s = np.sign(F[idx, np.arange(F.shape[1])])
    s[s == 0] = 1.0
    F = F * s
    if V is not None:
        V = V * s
    return F, V


@dataclass(frozen=True)
class RankRFactors:
    """Factored rank-r matrix.

    Attributes
    ----------
    F : ndarray, shape (d1, r)
        Orthonormal left factor (eigenvectors for the symmetric variant).
    spectrum : ndarray, shape (r,)
        Eigenvalues (symmetric variant) or singular values, descending.
    V : ndarray, shape (d2, r) or None
        Orthonormal right factor; ``None`` for the symmetric variant.
    variant : str
        ``"symmetric-eig"`` or ``"rectangular-svd"``.
    """

    F: np.ndarray
    spectrum: np.ndarray
    V: Optional[np.ndarray] = None
    variant: str = RECTANGULAR

    def __post_init__(self):
        if self.variant not in (SYMMETRIC, RECTANGULAR):
            raise ArgumentError(f"unknown variant {self.variant!r}")
        if self.variant == RECTANGULAR and self.V is None:
            raise ArgumentError("rectangular factors need V")
        for name in ("F", "spectrum", "V"):
            a = getattr(self, name)
            if a is not None:
                a = np.array(a, dtype=float)
                a.setflags(write=False)
                object.__setattr__(self, name, a)

    @property
    def r(self) -> int:
        return self.F.shape[1]

    @property
    def shape(self) -> tuple:
        right = self.F if self.V is None else self.V
        return (self.F.shape[0], right.shape[0])

    @property
    def right(self) -> np.ndarray:
        """Right factor: ``V`` for SVD factors, ``F`` for eigen factors."""
        return self.F if self.V is None else self.V

    @property
    def singular_values(self) -> np.ndarray:
        """Singular values in descending order."""
        return np.sort(np.abs(self.spectrum))[::-1]

    def reconstruct(self) -> np.ndarray:
        """Dense matrix ``F diag(spectrum) right^T``."""
        return (self.F * self.spectrum) @ self.right.T


def _check_rank(shape, r):
    if not isinstance(r, (int, np.integer)) or r < 1 or r > min(shape):
        raise ArgumentError(f"rank r={r} must be an integer in [1, {min(shape)}]")


def best_rank_r(Z, r: int, hermitian: bool = False) -> RankRFactors:
    """Frobenius-optimal rank-r approximation in factored form.

    Parameters
    ----------
    Z : array_like, shape (m, n)
    r : int
        Target rank, ``1 <= r <= min(m, n)``.
    hermitian : bool, optional
        If True, ``Z`` is treated as symmetric and the result is the
        symmetric-eig variant keeping the ``r`` eigenpairs of largest
        magnitude (which is the Frobenius-optimal rank-r approximation of a
        symmetric matrix). Ties in magnitude prefer the larger eigenvalue,
        then the lower index.

    Returns
    -------
    RankRFactors
        Left vectors carry the sign convention that their largest-magnitude
        entry is positive.
    """
    A = as_matrix(Z)
    _check_rank(A.shape, r)
    if hermitian:
        if A.shape[0] != A.shape[1]:
            raise ArgumentError("hermitian input must be square")
        w, Q = np.linalg.eigh(A)
        order = np.lexsort((np.arange(w.size), -w, -np.abs(w)))[:r]
        lam, F = w[order], Q[:, order]
        # Store eigenpairs by descending eigenvalue.
        o2 = np.argsort(-lam, kind="stable")
        lam, F = lam[o2], F[:, o2]
        F, _ = _fix_signs(F)
        return RankRFactors(np.ascontiguousarray(F), lam.copy(), None, SYMMETRIC)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    order = np.argsort(-s, kind="stable")[:r]
    F, V = _fix_signs(U[:, order], Vt[order].T)
    return RankRFactors(np.ascontiguousarray(F), s[order].copy(), np.ascontiguousarray(V), RECTANGULAR)


def check_symmetric(Z, tol: float = 1e-10) -> np.ndarray:
    A = as_matrix(Z)
    if A.shape[0] != A.shape[1]:
        raise ArgumentError(f"matrix must be square, got {A.shape}")
    scale = max(1.0, float(np.abs(A).max()))
    if np.abs(A - A.T).max() > tol * scale:
        raise ArgumentError("matrix is not symmetric")
    return A


def top_r_eig_sym(Z, r: int) -> RankRFactors:
    """Top-r eigenpairs of a symmetric matrix by algebraic value.

    Parameters
    ----------
    Z : array_like, shape (d, d)
        Symmetric to 1e-10 relative.
    r : int

    Returns
    -------
    RankRFactors
        Symmetric-eig variant with eigenvalues in descending order.
    """
    A = check_symmetric(Z)
    _check_rank(A.shape, r)
    w, Q = np.linalg.eigh(A)
    order = np.argsort(-w, kind="stable")[:r]
    F, _ = _fix_signs(Q[:, order])
    return RankRFactors(np.ascontiguousarray(F), w[order].copy(), None, SYMMETRIC)


def _check_pair(A, B):
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape != B.shape:
        raise ArgumentError(f"factor shapes differ: {A.shape} vs {B.shape}")
    return A, B


def procrustes(A, B) -> np.ndarray:
    """Orthogonal r x r matrix G minimizing ``||B - A G||_F``.

    ``G`` is the polar factor of ``A^T B``: with ``A^T B = U S V^T``,
    ``G = U V^T``. It also maximizes ``trace(G^T A^T B)``.

    Parameters
    ----------
    A, B : array_like, shape (d, r)

    Returns
    -------
    ndarray, shape (r, r)
    """
    A, B = _check_pair(A, B)
    U, _, Vt = np.linalg.svd(A.T @ B)
    U, V = _fix_signs(U, Vt.T)
    return U @ V.T


def sin_theta(A, B) -> float:
    """Frobenius norm of the sines of the principal angles between spans.

    Computed as ``||(I - A A^T) B||_F``, which is accurate for small angles.
    """
    A, B = _check_pair(A, B)
    return float(np.linalg.norm(B - A @ (A.T @ B)))


def read_matrix(path) -> np.ndarray:
    """Read the text format: a ``rows cols`` header then one row per line."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ArgumentError(f"{path}: header must be 'rows cols'")
        rows, cols = int(header[0]), int(header[1])
        data = np.loadtxt(fh, ndmin=2) if rows else np.empty((0, cols))
    if data.shape != (rows, cols):
        raise DimensionError(f"{path}: header says {(rows, cols)}, body has {data.shape}")
    return data


def write_matrix(path, Z) -> None:
    """Write ``Z`` in the text format with round-trip exact decimals."""
    A = as_matrix(Z)
    with open(path, "w") as fh:
        fh.write(f"{A.shape[0]} {A.shape[1]}\n")
        for row in A:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")
