"""Exact Mallows (Wasserstein-2) distance between equal-size atom clouds.

For two empirical measures with ``m`` equally weighted atoms each, the
squared distance is the minimum over permutations of the mean squared
pairing cost, i.e. a linear assignment problem on the matrix of squared
distances.  The solver is the exact shortest-augmenting-path routine from
scipy; a factorial brute-force oracle is kept alongside it so the solver
can be checked against every possible matching on small instances.

Operator-valued clouds are handled by flattening each matrix to its
``d*d`` coefficient vector, i.e. by working in the Hilbert-Schmidt
geometry.  Since the spectral norm never exceeds the Hilbert-Schmidt norm,
distances computed this way upper-bound the spectral-norm variant, so any
convergence-to-zero conclusion drawn from them is conservative.

Costs are accumulated as squared distances and the square root is taken
once at the end, avoiding cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .hilbert import FuncVec, HsOp

__all__ = [
    "PointCloud",
    "mallows_d2",
    "mallows_bruteforce",
    "mallows_operator_d2",
    "optimal_matching",
]

BRUTE_FORCE_LIMIT = 8

CloudLike = Union["PointCloud", np.ndarray, Sequence[FuncVec]]
OperatorCloudLike = Union["PointCloud", np.ndarray, Sequence[HsOp]]


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An equal-weight empirical measure: one atom per row."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a point cloud needs at least one atom")
        if not np.all(np.isfinite(pts)):
            raise ValueError("cloud contains non-finite values")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_vectors(cls, vectors: Iterable[FuncVec]) -> "PointCloud":
        return cls(np.array([v.coeffs for v in vectors]))

    @classmethod
    def from_operators(cls, operators: Iterable[HsOp]) -> "PointCloud":
        """Embed operators by flattening their coefficient matrices."""
        return cls(np.array([a.mat.ravel() for a in operators]))


def _atoms(cloud: CloudLike) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    if isinstance(cloud, np.ndarray):
        return PointCloud(cloud).points
    return PointCloud.from_vectors(cloud).points


def _operator_atoms(cloud: OperatorCloudLike) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.points
    if isinstance(cloud, np.ndarray):
        if cloud.ndim == 3:
            return PointCloud(cloud.reshape(cloud.shape[0], -1)).points
        return PointCloud(cloud).points
    return PointCloud.from_operators(cloud).points


def _paired(xs: CloudLike, ys: CloudLike) -> tuple[np.ndarray, np.ndarray]:
    ax, ay = _atoms(xs), _atoms(ys)
    if ax.shape[0] != ay.shape[0]:
        raise ValueError(f"cloud sizes differ: {ax.shape[0]} vs {ay.shape[0]}")
    if ax.shape[1] != ay.shape[1]:
        raise ValueError(f"cloud dimensions differ: {ax.shape[1]} vs {ay.shape[1]}")
    return ax, ay


def optimal_matching(xs: CloudLike, ys: CloudLike) -> tuple[float, np.ndarray]:
    """Distance together with the optimal pairing ``i -> match[i]``."""
    ax, ay = _paired(xs, ys)
    cost = cdist(ax, ay, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    match = np.empty(ax.shape[0], dtype=int)
    match[rows] = cols
    total = float(cost[rows, cols].sum())
    return float(np.sqrt(total / ax.shape[0])), match


def mallows_d2(xs: CloudLike, ys: CloudLike) -> float:
    """Exact Mallows distance between two equal-size atom clouds.

    Returns ``sqrt(min_sigma (1/m) sum_i ||x_i - y_sigma(i)||^2)`` where the
    minimum runs over all permutations; zero exactly when the multisets
    coincide.  Raises ``ValueError`` on size or dimension mismatch.
    """
    value, _ = optimal_matching(xs, ys)
    return value


def mallows_bruteforce(xs: CloudLike, ys: CloudLike) -> float:
    """Factorial-enumeration oracle for ``mallows_d2`` (sizes up to 8)."""
    ax, ay = _paired(xs, ys)
    m = ax.shape[0]
    if m > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} atoms, got {m}")
    cost = cdist(ax, ay, "sqeuclidean")
    best = min(sum(cost[i, p[i]] for i in range(m)) for p in permutations(range(m)))
    return float(np.sqrt(best / m))


def mallows_operator_d2(As: OperatorCloudLike, Bs: OperatorCloudLike) -> float:
    """Mallows distance between operator clouds in Hilbert-Schmidt geometry."""
    ax = _operator_atoms(As)
    ay = _operator_atoms(Bs)
    return mallows_d2(ax, ay)
