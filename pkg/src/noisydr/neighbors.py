"""Exact Euclidean distances, neighbour orderings and k-NN sets.

Ties in distance are broken by ascending point index. The same rule is used
for every frame, so a data set always has identical neighbourhoods to itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from noisydr.errors import DataError, ParameterError


def as_matrix(data, name: str = "data") -> np.ndarray:
    """Coerce to a finite float64 2-D array."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ParameterError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric n x n matrix of Euclidean distances with zero diagonal."""

    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def squared(self) -> np.ndarray:
        return self.values**2


@dataclass(frozen=True)
class RankTable:
    """Neighbour ordering for every point.

    ``order[i]`` lists the other n-1 indices by ascending distance from i and
    ``ranks[i, j]`` is the 1-based position of j in that list (0 on the
    diagonal).
    """

    order: np.ndarray
    ranks: np.ndarray

    @property
    def n(self) -> int:
        return self.order.shape[0]

    def rank(self, i: int, j: int) -> int:
        if i == j:
            raise ParameterError("a point has no rank relative to itself")
        return int(self.ranks[i, j])


def pairwise_distances(data) -> DistanceMatrix:
    X = as_matrix(data)
    if X.shape[0] < 2:
        raise ParameterError("need at least two points")
    # pdist evaluates each unordered pair once; squareform mirrors it exactly
    D = squareform(pdist(X, metric="euclidean"))
    return DistanceMatrix(D)


def rank_table(dist: DistanceMatrix | np.ndarray) -> RankTable:
    D = dist.values if isinstance(dist, DistanceMatrix) else np.asarray(dist, float)
    n = D.shape[0]
    work = D.copy()
    # self sorts first even when duplicates sit at distance 0
    np.fill_diagonal(work, -1.0)
    full = np.argsort(work, axis=1, kind="stable")
    order = full[:, 1:]
    ranks = np.zeros((n, n), dtype=np.int64)
    rows = np.arange(n)[:, None]
    ranks[rows, order] = np.arange(1, n, dtype=np.int64)[None, :]
    return RankTable(order=order, ranks=ranks)


def knn_sets(table: RankTable, k: int) -> list[frozenset[int]]:
    n = table.n
    if not 1 <= k <= n - 1:
        raise ParameterError(f"k must lie in [1, {n - 1}], got {k}")
    return [frozenset(int(j) for j in row[:k]) for row in table.order]
