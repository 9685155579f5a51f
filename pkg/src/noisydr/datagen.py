"""Simulated signal-plus-noise data sets.

A signal ``Y`` (n x r) is placed in data space by zero padding,
``Z = [Y | 0]``, and observed as ``Z + eps`` with i.i.d. Gaussian noise on
every coordinate. All randomness goes through numpy's PCG64 generator seeded
with the caller's integer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from noisydr.errors import IngestionError, ParameterError
from noisydr.matrix_io import read_matrix
from noisydr.neighbors import as_matrix


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class DatasetBundle:
    signal_Y: np.ndarray
    embedded_Z: np.ndarray
    observed: np.ndarray
    noise_sd: float
    seed: int
    labels: np.ndarray | None = field(default=None)

    @property
    def n(self) -> int:
        return self.observed.shape[0]

    @property
    def p(self) -> int:
        return self.observed.shape[1]

    @property
    def r(self) -> int:
        return self.signal_Y.shape[1]


def generate_links(points_per_circle: int = 250, seed: int = 0):
    """Two interlocked unit circles.

    Circle 0 lies in the xy-plane about the origin, circle 1 in the xz-plane
    about (1, 0, 0), so each passes through the other's centre. Points are
    equally spaced in angle; placement is deterministic and ``seed`` is
    accepted only for a uniform generator signature.

    Returns ``(data, labels)`` with data of shape (2 * points_per_circle, 3).
    """
    if points_per_circle < 3:
        raise ParameterError("points_per_circle must be at least 3")
    t = 2.0 * np.pi * np.arange(points_per_circle) / points_per_circle
    zeros = np.zeros_like(t)
    a = np.column_stack([np.cos(t), np.sin(t), zeros])
    b = np.column_stack([1.0 + np.cos(t), zeros, np.sin(t)])
    labels = np.repeat([0, 1], points_per_circle)
    return np.vstack([a, b]), labels


def trefoil_curve(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.column_stack(
        [np.sin(t) + 2.0 * np.sin(2.0 * t), np.cos(t) - 2.0 * np.cos(2.0 * t), -np.sin(3.0 * t)]
    )


def generate_trefoil(n_points: int = 500, seed: int = 0) -> np.ndarray:
    """Trefoil knot sampled at ``n_points`` equally spaced parameters in [0, 2pi).

    Deterministic; ``seed`` is accepted for a uniform generator signature.
    """
    if n_points < 3:
        raise ParameterError("n_points must be at least 3")
    return trefoil_curve(2.0 * np.pi * np.arange(n_points) / n_points)


def load_mammoth(path, n_subsample: int = 500, seed: int = 0) -> np.ndarray:
    """Uniform subsample without replacement of a 3-column point cloud file."""
    cloud = read_matrix(path)
    if cloud.shape[1] != 3:
        raise IngestionError(f"{path}: expected 3 columns, found {cloud.shape[1]}")
    n = cloud.shape[0]
    if not 1 <= n_subsample <= n:
        raise ParameterError(f"n_subsample must lie in [1, {n}], got {n_subsample}")
    idx = make_rng(seed).choice(n, size=n_subsample, replace=False)
    return cloud[idx]


def generate_gaussian_clusters(
    clusters: int = 7,
    points_per_cluster: int = 50,
    dim: int = 7,
    mean_scale: float = 10.0,
    cov_diag_range: tuple[float, float] = (0.5, 2.0),
    seed: int = 0,
):
    """Gaussian clusters with means ``mean_scale * e_i`` and random diagonal covariances.

    Each cluster draws its own diagonal variances uniformly from
    ``cov_diag_range``. Returns ``(data, labels)``.
    """
    if clusters < 1 or points_per_cluster < 1 or dim < 1:
        raise ParameterError("clusters, points_per_cluster and dim must be positive")
    if clusters > dim:
        raise ParameterError(f"clusters ({clusters}) cannot exceed dim ({dim})")
    low, high = cov_diag_range
    if not 0 < low <= high:
        raise ParameterError("cov_diag_range must satisfy 0 < low <= high")

    rng = make_rng(seed)
    blocks = []
    for i in range(clusters):
        mean = np.zeros(dim)
        mean[i] = mean_scale
        variances = rng.uniform(low, high, size=dim)
        draws = rng.standard_normal((points_per_cluster, dim))
        blocks.append(mean + draws * np.sqrt(variances))
    labels = np.repeat(np.arange(clusters), points_per_cluster)
    return np.vstack(blocks), labels


def embed_and_noise(
    signal_Y,
    target_dim: int,
    noise_sd: float,
    seed: int,
    labels=None,
) -> DatasetBundle:
    Y = as_matrix(signal_Y, "signal_Y")
    n, r = Y.shape
    if target_dim < r:
        raise ParameterError(f"target_dim ({target_dim}) is smaller than signal dim ({r})")
    if not noise_sd >= 0:
        raise ParameterError("noise_sd must be nonnegative")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (n,):
            raise ParameterError("labels must have one entry per row")

    Z = np.zeros((n, target_dim))
    Z[:, :r] = Y
    if noise_sd == 0:
        observed = Z.copy()
    else:
        observed = Z + make_rng(seed).normal(0.0, noise_sd, size=Z.shape)
    return DatasetBundle(
        signal_Y=Y,
        embedded_Z=Z,
        observed=observed,
        noise_sd=float(noise_sd),
        seed=int(seed),
        labels=labels,
    )
