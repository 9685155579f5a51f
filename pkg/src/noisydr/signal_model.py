"""PCA signal extraction and the matching inverse embedding.

The principal axes come from an SVD of the column-centred data; eigenvalues
are reported as squared singular values over (n - 1). Each axis is signed so
that its largest-magnitude loading is positive, which makes fits
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from noisydr.errors import ParameterError
from noisydr.neighbors import as_matrix


@dataclass(frozen=True)
class PcaBasis:
    mean_vector: np.ndarray
    eigenvectors: np.ndarray  # p x r, orthonormal columns
    eigenvalues: np.ndarray  # length min(n, p), descending
    variance_retained: float

    @property
    def p(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def r(self) -> int:
        return self.eigenvectors.shape[1]


def _canonical_signs(vt: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(vt.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vt * signs[:, None]


def fit_pca(data, r: int) -> PcaBasis:
    """Fit the leading ``r`` principal axes of ``data``."""
    X = as_matrix(data)
    n, p = X.shape
    if n < 2:
        raise ParameterError("PCA needs at least two rows")
    if not (isinstance(r, (int, np.integer)) and 1 <= r <= min(n - 1, p)):
        raise ParameterError(f"r must be an integer in [1, {min(n - 1, p)}], got {r}")

    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    vt = _canonical_signs(vt)
    eig = s**2 / (n - 1)
    eig[eig < 0] = 0.0
    total = eig.sum()
    retained = float(eig[:r].sum() / total) if total > 0 else 1.0
    return PcaBasis(
        mean_vector=mean,
        eigenvectors=vt[:r].T.copy(),
        eigenvalues=eig,
        variance_retained=retained,
    )


def project(basis: PcaBasis, data) -> np.ndarray:
    """Scores ``(data - mean) @ V_r``: the signal estimate."""
    X = as_matrix(data)
    if X.shape[1] != basis.p:
        raise ParameterError(f"data has {X.shape[1]} columns, basis expects {basis.p}")
    return (X - basis.mean_vector) @ basis.eigenvectors


def inverse_transform(basis: PcaBasis, projected) -> np.ndarray:
    """Map scores back into data space, mean included."""
    Y = as_matrix(projected, "projected")
    if Y.shape[1] != basis.r:
        raise ParameterError(f"projected has {Y.shape[1]} columns, basis has r={basis.r}")
    return Y @ basis.eigenvectors.T + basis.mean_vector


def scree(basis: PcaBasis) -> list[tuple[int, float]]:
    """``(component index, eigenvalue)`` pairs, 1-based, in descending order."""
    return [(i + 1, float(v)) for i, v in enumerate(basis.eigenvalues)]
