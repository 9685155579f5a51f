"""Quality of an embedding relative to a reference data set.

``f(D1, D2)`` scores how well ``D2`` (an embedding) represents ``D1`` (the
raw observations or the signal). Trustworthiness looks at neighbourhood
intrusions, Shepard goodness at the rank correlation of all pairwise
distances, and the average silhouette width at cluster separation.

Reference geometry (distances, neighbour ranks, distance ranks) is cached on
a :class:`Geometry`, so scoring many embeddings against one frame stays cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import rankdata

from noisydr.datagen import make_rng
from noisydr.errors import ParameterError
from noisydr.neighbors import as_matrix, pairwise_distances, rank_table

FRAMES = ("raw_data", "signal")


@dataclass(frozen=True)
class MetricReport:
    metric_name: str
    value: float
    k: int | None = None
    subsample_size: int | None = None
    subsample_seed: int | None = None
    reference_frame: str | None = None
    degenerate: bool = False


class Geometry:
    """Lazily cached distance structures for one point set."""

    def __init__(self, data, frame: str | None = None):
        self.data = as_matrix(data)
        self.frame = frame

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @cached_property
    def distances(self):
        return pairwise_distances(self.data)

    @cached_property
    def ranks(self):
        return rank_table(self.distances)

    @cached_property
    def condensed(self) -> np.ndarray:
        return pdist(self.data)

    @cached_property
    def condensed_ranks(self) -> np.ndarray:
        return rankdata(self.condensed, method="average")


ReferenceFrame = Geometry


def _as_geometry(D) -> Geometry:
    return D if isinstance(D, Geometry) else Geometry(D)


def _check_trust_args(n1: int, n2: int, k: int) -> None:
    if n1 != n2:
        raise ParameterError(f"row counts differ: {n1} vs {n2}")
    if n1 < 4:
        raise ParameterError("trustworthiness needs at least 4 points")
    if not (isinstance(k, (int, np.integer)) and 1 <= k and 3 * k < 2 * n1 - 1):
        raise ParameterError(f"k must satisfy 1 <= k < (2n-1)/3 = {(2 * n1 - 1) / 3:.3g}, got {k}")


def _intrusion_sum(ref: Geometry, emb: Geometry, k: int, rows: np.ndarray) -> float:
    neigh = emb.ranks.order[rows, :k]
    r = ref.ranks.ranks[rows[:, None], neigh]
    # j is a high-dimensional neighbour exactly when its rank is <= k
    return float(np.maximum(r - k, 0).sum())


def trustworthiness(D1, D2, k: int, frame: str | None = None) -> MetricReport:
    """Exact trustworthiness of embedding ``D2`` with respect to ``D1``.

    Any ``k < (2n - 1) / 3`` is accepted. The normaliser is the largest
    possible penalty only for ``k < n / 2``; beyond that the value can drop
    below 0.
    """
    ref, emb = _as_geometry(D1), _as_geometry(D2)
    n = ref.n
    _check_trust_args(n, emb.n, k)
    penalty = _intrusion_sum(ref, emb, k, np.arange(n))
    value = 1.0 - 2.0 / (n * k * (2 * n - 3 * k - 1)) * penalty
    return MetricReport("trustworthiness", value, k=k, reference_frame=frame or ref.frame)


def trustworthiness_subsampled(D1, D2, k: int, m: int, seed: int, frame: str | None = None) -> MetricReport:
    """Trustworthiness estimated from ``m`` seeded anchor points.

    Neighbourhoods and ranks still use all n points; only the outer sum is
    restricted, and the normaliser uses m in place of n.
    """
    ref, emb = _as_geometry(D1), _as_geometry(D2)
    n = ref.n
    _check_trust_args(n, emb.n, k)
    if not 1 <= m <= n:
        raise ParameterError(f"m must lie in [1, {n}], got {m}")
    rows = np.sort(make_rng(seed).choice(n, size=m, replace=False))
    penalty = _intrusion_sum(ref, emb, k, rows)
    value = 1.0 - 2.0 / (m * k * (2 * n - 3 * k - 1)) * penalty
    return MetricReport(
        "trustworthiness",
        value,
        k=k,
        subsample_size=m,
        subsample_seed=seed,
        reference_frame=frame or ref.frame,
    )


def _rank_correlation(ra: np.ndarray, rb: np.ndarray) -> float | None:
    a = ra - ra.mean()
    b = rb - rb.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    if denom == 0:
        return None
    return float(np.clip((a * b).sum() / denom, -1.0, 1.0))


def shepard_goodness(D1, D2, subsample: tuple[int, int] | None = None, frame: str | None = None) -> MetricReport:
    """Spearman correlation between pairwise distances in the two frames.

    With ``subsample=(m, seed)`` only pairs inside a seeded m-point subset
    are used. If every distance in either frame is equal the correlation is
    undefined; the report then has ``value=nan`` and ``degenerate=True``.
    """
    ref, emb = _as_geometry(D1), _as_geometry(D2)
    n = ref.n
    if n != emb.n:
        raise ParameterError(f"row counts differ: {n} vs {emb.n}")
    if n < 3:
        raise ParameterError("Shepard goodness needs at least 3 points")

    if subsample is None:
        ra, rb = ref.condensed_ranks, emb.condensed_ranks
        m = seed = None
    else:
        m, seed = subsample
        if not 3 <= m <= n:
            raise ParameterError(f"subsample size must lie in [3, {n}], got {m}")
        idx = np.sort(make_rng(seed).choice(n, size=m, replace=False))
        ra = rankdata(pdist(ref.data[idx]), method="average")
        rb = rankdata(pdist(emb.data[idx]), method="average")

    rho = _rank_correlation(ra, rb)
    return MetricReport(
        "shepard_goodness",
        float("nan") if rho is None else rho,
        subsample_size=m,
        subsample_seed=seed,
        reference_frame=frame or ref.frame,
        degenerate=rho is None,
    )


def silhouette(X, labels) -> MetricReport:
    """Average silhouette width. Singleton clusters contribute 0."""
    geom = _as_geometry(X)
    labels = np.asarray(labels)
    if labels.shape != (geom.n,):
        raise ParameterError("labels must have one entry per row")
    classes = np.unique(labels)
    if classes.size < 2:
        raise ParameterError("silhouette needs at least two clusters")

    D = geom.distances.values
    member = labels[None, :] == classes[:, None]  # (c, n)
    sizes = member.sum(axis=1)
    sums = D @ member.T.astype(float)  # (n, c): total distance to each cluster
    own = np.searchsorted(classes, labels)
    own_size = sizes[own]
    with np.errstate(invalid="ignore", divide="ignore"):
        a = sums[np.arange(geom.n), own] / (own_size - 1)
        means = sums / sizes[None, :]
    means[np.arange(geom.n), own] = np.inf
    b = means.min(axis=1)
    top = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(top > 0, (b - a) / top, 0.0)
    s[own_size == 1] = 0.0
    return MetricReport("silhouette", float(s.mean()))
