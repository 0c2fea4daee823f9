"""Angles on the torus T = R / 2piZ and distances between torus-valued data.

All distances use the geodesic metric on the circle, so every value is
bounded by pi.  Empirical measures carry uniform weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ContractError, DomainError

TWO_PI = 2.0 * math.pi

__all__ = [
    "TWO_PI",
    "EmpiricalMeasure",
    "TrajectoryPair",
    "wrap_angle",
    "geodesic_dist",
    "wasserstein2_circle",
    "wasserstein1_circle",
    "coupled_sup_distance",
    "coupled_sup_distance_arrays",
    "d_T_classes",
]


def wrap_angle(x):
    """Map ``x`` to its representative in ``[0, 2pi)``.

    Works on scalars (returns a float) and on arrays (returns an array).
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("wrap_angle requires finite input")
    out = np.mod(arr, TWO_PI)
    # np.mod can round tiny negative inputs up to exactly 2pi.
    out = np.where(out >= TWO_PI, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def geodesic_dist(a, b):
    """Arc-length distance between angles, in ``[0, pi]``."""
    # |a - b| first: exact symmetry in the arguments
    d = np.mod(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), TWO_PI)
    out = np.minimum(d, TWO_PI - d)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform-weight atomic measure on the torus."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float).ravel()
        if atoms.size == 0:
            raise DomainError("empirical measure needs at least one atom")
        atoms = wrap_angle(atoms)
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def n(self) -> int:
        return self.atoms.size

    def rotated(self, angle: float) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.atoms + angle)


MeasureLike = Union[EmpiricalMeasure, Sequence[float], np.ndarray]


def _atoms(mu: MeasureLike) -> np.ndarray:
    if isinstance(mu, EmpiricalMeasure):
        return mu.atoms
    return EmpiricalMeasure(mu).atoms


def _equalize(a: np.ndarray, b: np.ndarray):
    """Replicate atoms so both measures have lcm(n, m) atoms."""
    n, m = a.size, b.size
    if n == m:
        return a, b
    size = math.lcm(n, m)
    return np.repeat(a, size // n), np.repeat(b, size // m)


def _canonical(a: np.ndarray, b: np.ndarray):
    """Fixed argument order so that both distances are exactly symmetric."""
    ka, kb = (a.size, tuple(np.sort(a))), (b.size, tuple(np.sort(b)))
    return (a, b) if ka <= kb else (b, a)


def wasserstein2_circle(mu: MeasureLike, nu: MeasureLike) -> float:
    """2-Wasserstein distance between empirical measures on the circle.

    Both atom lists are sorted; an optimal matching is then one of the n
    cyclic shifts of the sorted order, so the cost is O(n^2) in the worst
    case.  Unequal sizes are handled by atom replication (exact).
    """
    a, b = _canonical(_atoms(mu), _atoms(nu))
    a, b = _equalize(np.sort(a), np.sort(b))
    n = a.size
    chunk = max(1, 4_000_000 // n)
    base = np.arange(n)
    best = math.inf
    for start in range(0, n, chunk):
        shifts = np.arange(start, min(n, start + chunk))
        idx = (base[None, :] + shifts[:, None]) % n
        cost = np.mean(geodesic_dist(a[None, :], b[idx]) ** 2, axis=1)
        best = min(best, float(cost.min()))
    return math.sqrt(best)


def wasserstein1_circle(mu: MeasureLike, nu: MeasureLike) -> float:
    """1-Wasserstein distance on the circle via the cumulative-function formula.

    ``W1 = min_s int_0^{2pi} |F_mu - F_nu - s|``; the optimal level ``s`` is
    the (lower) weighted median of the piecewise-constant difference.
    """
    a, b = _canonical(_atoms(mu), _atoms(nu))
    pts = np.concatenate([a, b])
    w = np.concatenate([np.full(a.size, 1.0 / a.size), np.full(b.size, -1.0 / b.size)])
    order = np.argsort(pts, kind="stable")
    pts, w = pts[order], w[order]
    g = np.cumsum(w)
    g[-1] = 0.0
    lengths = np.empty_like(pts)
    lengths[:-1] = np.diff(pts)
    lengths[-1] = pts[0] + TWO_PI - pts[-1]
    srt = np.argsort(g, kind="stable")
    cum = np.cumsum(lengths[srt])
    k = int(np.searchsorted(cum, 0.5 * cum[-1], side="left"))
    s = g[srt][min(k, g.size - 1)]
    return float(np.sum(lengths * np.abs(g - s)))


@dataclass(frozen=True)
class TrajectoryPair:
    time_grid: np.ndarray
    path_a: np.ndarray
    path_b: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.time_grid, dtype=float)
        pa = np.asarray(self.path_a, dtype=float)
        pb = np.asarray(self.path_b, dtype=float)
        if not (t.shape == pa.shape == pb.shape) or t.ndim != 1:
            raise ContractError("time grid and paths must be 1-d of equal length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ContractError("time grid must be strictly increasing")
        object.__setattr__(self, "time_grid", t)
        object.__setattr__(self, "path_a", pa)
        object.__setattr__(self, "path_b", pb)


def coupled_sup_distance_arrays(paths_a: np.ndarray, paths_b: np.ndarray) -> float:
    """Same as :func:`coupled_sup_distance` on ``(pairs, times)`` arrays."""
    paths_a = np.asarray(paths_a, dtype=float)
    paths_b = np.asarray(paths_b, dtype=float)
    if paths_a.shape != paths_b.shape or paths_a.ndim != 2:
        raise ContractError(
            f"path arrays must share a 2-d shape, got {paths_a.shape} and {paths_b.shape}"
        )
    sup_sq = np.max(geodesic_dist(paths_a, paths_b) ** 2, axis=1)
    return math.sqrt(float(np.mean(sup_sq)))


def coupled_sup_distance(pairs: Sequence[TrajectoryPair]) -> float:
    """Root mean (over pairs) of the sup-in-time squared geodesic gap.

    Under a synchronous coupling this upper-bounds the path-space
    2-Wasserstein distance between the two path laws.
    """
    if len(pairs) == 0:
        raise ContractError("need at least one trajectory pair")
    grid = pairs[0].time_grid
    for p in pairs[1:]:
        if not np.array_equal(p.time_grid, grid):
            raise ContractError("all trajectory pairs must share one time grid")
    a = np.stack([p.path_a for p in pairs])
    b = np.stack([p.path_b for p in pairs])
    return coupled_sup_distance_arrays(a, b)


def d_T_classes(per_class_distances: Sequence[float]) -> float:
    """Combine per-label-cell distances into the labelled distance (RMS over cells)."""
    d = np.asarray(per_class_distances, dtype=float).ravel()
    if d.size == 0:
        raise ContractError("need at least one per-class distance")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ContractError("per-class distances must be finite and nonnegative")
    return math.sqrt(float(np.mean(d * d)))
