"""Observation masks and the Omega-indexed linear operators built on them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import ArgumentError, DimensionError


@dataclass(frozen=True, eq=False)
class ObservationMask:
    """Observed index set on a ``rows x cols`` grid.

    Attributes
    ----------
    observed : ndarray of bool, shape (rows, cols)
    p : float
        Sampling probability of the model that produced the mask.
    symmetric : bool
        True when ``observed`` is symmetric by construction.
    """

    observed: np.ndarray
    p: float
    symmetric: bool = False
    _indices: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        obs = np.array(self.observed, dtype=bool)
        if obs.ndim != 2 or 0 in obs.shape:
            raise DimensionError(f"mask must be a non-empty 2-D grid, got shape {obs.shape}")
        if not 0.0 < self.p <= 1.0:
            raise ArgumentError(f"p={self.p} must lie in (0, 1]")
        if self.symmetric and (obs.shape[0] != obs.shape[1] or not np.array_equal(obs, obs.T)):
            raise ArgumentError("symmetric mask must be square with observed(i,j) = observed(j,i)")
        obs.setflags(write=False)
        object.__setattr__(self, "observed", obs)
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "_indices", np.nonzero(obs))

    @property
    def shape(self) -> tuple:
        return self.observed.shape

    @property
    def rows(self) -> int:
        return self.observed.shape[0]

    @property
    def cols(self) -> int:
        return self.observed.shape[1]

    @property
    def indices(self) -> tuple:
        """Row and column index arrays of the observed entries."""
        return self._indices

    @property
    def count(self) -> int:
        return int(self._indices[0].size)

    def estimated_p(self) -> float:
        """Fill fraction; a symmetric mask counts the upper triangle only."""
        if self.symmetric:
            d = self.rows
            return float(np.triu(self.observed).sum()) / (d * (d + 1) / 2)
        return self.count / self.observed.size

    def with_p(self, p: float) -> "ObservationMask":
        """Same index set, different operator probability."""
        return ObservationMask(self.observed, p, self.symmetric)


@dataclass(frozen=True)
class GolfingPartition:
    """Independent sample layers whose union has probability ``p_total``."""

    k0: int
    layers: tuple
    q: float
    p_total: float

    def union(self) -> ObservationMask:
        """Union of all layers as a mask with probability ``p_total``."""
        obs = np.zeros(self.layers[0].shape, dtype=bool)
        for layer in self.layers:
            obs |= layer.observed
        return ObservationMask(obs, self.p_total, False)


def _check_prob(p):
    if not (isinstance(p, (int, float, np.floating)) and 0.0 < p <= 1.0):
        raise ArgumentError(f"probability {p!r} must lie in (0, 1]")


def _draw(rows, cols, p, symmetric, gen):
    if symmetric:
        if rows != cols:
            raise ArgumentError("symmetric mask must be square")
        u = gen.random((rows, rows))
        upper = np.triu(u < p)
        return upper | np.triu(upper, 1).T
    return gen.random((rows, cols)) < p


def sample_mask(rows: int, cols: int, p: float, symmetric: bool, seed: int) -> ObservationMask:
    """Sample Omega with each entry observed independently with probability p.

    In the symmetric model only entries with ``i <= j`` are drawn (one
    uniform per entry, diagonal included) and the result is mirrored.
    """
    _check_prob(p)
    if rows < 1 or cols < 1:
        raise DimensionError("mask dimensions must be positive")
    obs = _draw(rows, cols, p, symmetric, rng.stream(seed, rng.MASK))
    return ObservationMask(obs, p, symmetric)


def _check_shape(Z, mask):
    Z = np.asarray(Z, dtype=float)
    if Z.shape != mask.shape:
        raise ArgumentError(f"matrix shape {Z.shape} does not match mask shape {mask.shape}")
    return Z


def pi_omega(Z, mask: ObservationMask) -> np.ndarray:
    """Keep observed entries, zero the rest."""
    Z = _check_shape(Z, mask)
    return np.where(mask.observed, Z, 0.0)


def _weights(mask, prob):
    prob = mask.p if prob is None else prob
    _check_prob(prob)
    return 1.0 - mask.observed / prob


def h_omega(Z, mask: ObservationMask, prob_override: float | None = None) -> np.ndarray:
    """Centered sampling deviation ``(Id - (1/p) Pi_Omega)(Z)``."""
    Z = _check_shape(Z, mask)
    return _weights(mask, prob_override) * Z


def r_omega(Z, mask: ObservationMask, prob_override: float | None = None) -> np.ndarray:
    """Rescaled sampling ``(1/p) Pi_Omega(Z)``."""
    Z = _check_shape(Z, mask)
    prob = mask.p if prob_override is None else prob_override
    _check_prob(prob)
    return np.where(mask.observed, Z / prob, 0.0)


def _check_index(i, n, what):
    if not (isinstance(i, (int, np.integer)) and 0 <= i < n):
        raise ArgumentError(f"{what} index {i!r} out of range [0, {n})")


def h_omega_minus_line(Z, mask: ObservationMask, m: int, prob_override: float | None = None) -> np.ndarray:
    """``h_omega`` with row ``m`` and column ``m`` zeroed (square masks)."""
    if mask.rows != mask.cols:
        raise ArgumentError("leave-one-line operator needs a square mask")
    _check_index(m, mask.rows, "row/column")
    out = h_omega(Z, mask, prob_override)
    out[m, :] = 0.0
    out[:, m] = 0.0
    return out


def h_omega_minus_entryline(Z, mask: ObservationMask, w, q: float) -> np.ndarray:
    """``h_omega`` at probability q with row ``w[0]`` and column ``w[1]`` zeroed."""
    w1, w2 = w
    _check_index(w1, mask.rows, "row")
    _check_index(w2, mask.cols, "column")
    out = h_omega(Z, mask, q)
    out[w1, :] = 0.0
    out[:, w2] = 0.0
    return out


def h_omega_w(Z, mask: ObservationMask, w, q: float) -> np.ndarray:
    """Cross-shaped remainder ``h_omega - h_omega_minus_entryline``."""
    w1, w2 = w
    _check_index(w1, mask.rows, "row")
    _check_index(w2, mask.cols, "column")
    full = h_omega(Z, mask, q)
    out = np.zeros_like(full)
    out[w1, :] = full[w1, :]
    out[:, w2] = full[:, w2]
    return out


def golfing_q(p_total: float, k0: int) -> float:
    """Per-layer probability q with ``1 - (1 - q)^k0 = p_total``."""
    return 1.0 - (1.0 - p_total) ** (1.0 / k0)


def default_k0(mu: float, r: int, c0: float = 1.0) -> int:
    """Number of golfing layers ``ceil(c0 * max(1, log(mu r)))``."""
    if c0 <= 0:
        raise ArgumentError("c0 must be positive")
    return max(1, math.ceil(c0 * max(1.0, math.log(mu * r)) - 1e-12))


def golfing_split(rows: int, cols: int, p_total: float, k0: int, seed: int) -> GolfingPartition:
    """Draw ``k0`` independent layers at probability ``q``.

    Layer ``t`` uses its own keyed stream, so layers do not depend on each
    other or on ``k0`` beyond their count.
    """
    if not (0.0 < p_total <= 1.0):
        raise ArgumentError(f"p_total={p_total} must lie in (0, 1]")
    if not isinstance(k0, (int, np.integer)) or k0 < 1:
        raise ArgumentError(f"k0={k0!r} must be a positive integer")
    q = golfing_q(p_total, k0)
    layers = tuple(
        ObservationMask(_draw(rows, cols, q, False, rng.stream(seed, rng.GOLF, t)), q, False)
        for t in range(k0)
    )
    return GolfingPartition(int(k0), layers, q, float(p_total))


def read_mask(path) -> ObservationMask:
    """Read the mask text format: ``rows cols p symmetric`` then ``i j`` lines."""
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 4:
            raise ArgumentError(f"{path}: header must be 'rows cols p symmetric'")
        rows, cols, p = int(head[0]), int(head[1]), float(head[2])
        symmetric = head[3].lower() in ("1", "true", "yes")
        obs = np.zeros((rows, cols), dtype=bool)
        for line in fh:
            parts = line.split()
            if parts:
                obs[int(parts[0]), int(parts[1])] = True
    return ObservationMask(obs, p, symmetric)


def write_mask(path, mask: ObservationMask) -> None:
    i, j = mask.indices
    with open(path, "w") as fh:
        fh.write(f"{mask.rows} {mask.cols} {mask.p!r} {str(mask.symmetric).lower()}\n")
        for a, b in zip(i.tolist(), j.tolist()):
            fh.write(f"{a} {b}\n")
