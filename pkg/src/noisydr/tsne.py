"""Exact t-SNE.

Gaussian conditional affinities are calibrated per point to a target
perplexity by bisection on log(sigma), symmetrised into joint probabilities,
and matched by a Student-t embedding through gradient descent on the KL
divergence. The optimiser follows the classic recipe: momentum with a switch,
early exaggeration and per-coordinate adaptive gains. The lowest-KL iterate
seen is returned.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from noisydr.datagen import make_rng
from noisydr.errors import DataError, ParameterError, RunError
from noisydr.neighbors import DistanceMatrix, as_matrix, pairwise_distances

Q_FLOOR = 1e-12


class ClampWarning(UserWarning):
    """q_ij fell below the floor where p_ij > 0 and was clamped."""


@dataclass(frozen=True)
class ConditionalAffinities:
    matrix: np.ndarray  # row-stochastic p_{j|i}, zero diagonal
    sigmas: np.ndarray
    target_perplexity: float
    achieved_perplexity: np.ndarray
    converged: np.ndarray  # bool per row


@dataclass(frozen=True)
class AffinityModel:
    P: np.ndarray
    sigmas: np.ndarray
    target_perplexity: float
    achieved_perplexity: np.ndarray

    @property
    def n(self) -> int:
        return self.P.shape[0]


@dataclass(frozen=True)
class TsneSettings:
    n_iter: int = 1000
    learning_rate: float = 200.0
    momentum: float = 0.5
    final_momentum: float = 0.8
    momentum_switch_iter: int = 250
    exaggeration: float = 12.0
    exaggeration_iters: int = 250
    use_gains: bool = True
    min_gain: float = 0.01
    init: str = "pca"  # "pca" or "random"
    init_scale: float = 1e-4  # sd of the first initial coordinate
    init_jitter: float = 0.1  # jitter sd as a fraction of init_scale
    kl_every: int = 10
    perplexity_tol: float = 1e-5
    max_bisect_iter: int = 200

    def __post_init__(self):
        if self.n_iter < 1:
            raise ParameterError("n_iter must be positive")
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be positive")
        if self.init not in ("pca", "random"):
            raise ParameterError(f"unknown init {self.init!r}")
        if self.init_scale <= 0 or self.init_jitter < 0:
            raise ParameterError("init_scale must be positive and init_jitter nonnegative")
        if self.kl_every < 1:
            raise ParameterError("kl_every must be positive")
        if self.exaggeration <= 0:
            raise ParameterError("exaggeration must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "TsneSettings":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown t-SNE settings: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class EmbeddingRun:
    X: np.ndarray
    perplexity: float
    seed: int
    final_kl: float
    initial_kl: float
    iterations: int
    best_iteration: int
    hyperparameters: dict
    X_init: np.ndarray = field(repr=False)
    clamp_events: int = 0


# ---------------------------------------------------------------- affinities


def _row_perplexity(sq_shifted: np.ndarray, log_sigma: np.ndarray, mask: np.ndarray):
    beta = 0.5 * np.exp(-2.0 * log_sigma)
    w = np.exp(-sq_shifted * beta[:, None])
    p = w / w.sum(axis=1, keepdims=True)
    logp = np.log2(p, out=np.zeros_like(p), where=p > 0)
    H = -(p * logp).sum(axis=1)
    return p, np.exp2(H)


def conditional_affinities(
    dist: DistanceMatrix | np.ndarray,
    perplexity: float,
    tol: float = 1e-5,
    max_iter: int = 200,
) -> ConditionalAffinities:
    """Per-point Gaussian affinities whose perplexity matches ``perplexity``.

    Rows that miss ``tol`` after ``max_iter`` bisection steps are flagged in
    ``converged`` and a warning is issued; the closest bandwidth found is kept.
    """
    D = dist.values if isinstance(dist, DistanceMatrix) else np.asarray(dist, float)
    n = D.shape[0]
    if not 1 < perplexity < n:
        raise ParameterError(f"perplexity must lie in (1, {n}), got {perplexity}")
    if tol <= 0:
        raise ParameterError("tol must be positive")

    mask = np.eye(n, dtype=bool)
    sq = D**2
    sq_off = np.where(mask, np.inf, sq)
    # shift by the nearest distance so the kernel never underflows entirely
    sq_shifted = sq_off - sq_off.min(axis=1, keepdims=True)

    lo = np.full(n, np.log(1e-20))
    hi = np.full(n, np.log(1e20))
    log_sigma = np.zeros(n)
    best = np.zeros(n)
    best_err = np.full(n, np.inf)
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        log_sigma = np.where(active, mid, log_sigma)
        _, perp = _row_perplexity(sq_shifted, log_sigma, mask)
        err = np.abs(perp - perplexity)
        better = active & (err < best_err)
        best[better] = log_sigma[better]
        best_err[better] = err[better]
        active &= err > tol
        if not active.any():
            break
        too_wide = active & (perp > perplexity)
        hi = np.where(too_wide, mid, hi)
        lo = np.where(active & ~too_wide, mid, lo)

    P, achieved = _row_perplexity(sq_shifted, best, mask)
    converged = np.abs(achieved - perplexity) <= tol
    if not converged.all():
        warnings.warn(
            f"perplexity calibration missed tol on {int((~converged).sum())} rows",
            RuntimeWarning,
            stacklevel=2,
        )
    return ConditionalAffinities(
        matrix=P,
        sigmas=np.exp(best),
        target_perplexity=float(perplexity),
        achieved_perplexity=achieved,
        converged=converged,
    )


def symmetrize(conditional: ConditionalAffinities | np.ndarray) -> AffinityModel:
    """Joint probabilities ``p_ij = (p_{i|j} + p_{j|i}) / 2n``."""
    if isinstance(conditional, ConditionalAffinities):
        C = conditional.matrix
        sigmas = conditional.sigmas
        target = conditional.target_perplexity
        achieved = conditional.achieved_perplexity
    else:
        C = np.asarray(conditional, dtype=float)
        sigmas = np.full(C.shape[0], np.nan)
        target = float("nan")
        achieved = np.full(C.shape[0], np.nan)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DataError("conditional matrix must be square")
    if np.any(np.diag(C) != 0) or np.any(C < 0):
        raise DataError("conditional matrix needs a zero diagonal and nonnegative entries")
    if np.max(np.abs(C.sum(axis=1) - 1.0)) > 1e-8:
        raise DataError("conditional rows must sum to 1")
    n = C.shape[0]
    P = (C + C.T) / (2.0 * n)
    return AffinityModel(P=P, sigmas=sigmas, target_perplexity=target, achieved_perplexity=achieved)


def joint_affinities(data_or_dist, perplexity: float, tol: float = 1e-5, max_iter: int = 200):
    dist = data_or_dist if isinstance(data_or_dist, DistanceMatrix) else pairwise_distances(data_or_dist)
    return symmetrize(conditional_affinities(dist, perplexity, tol, max_iter))


# ------------------------------------------------------- objective, gradient


def _student_kernel(X: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - X[None, :, :]
    W = 1.0 / (1.0 + (diff * diff).sum(axis=-1))
    np.fill_diagonal(W, 0.0)
    return W


def low_dim_similarities(X) -> np.ndarray:
    X = as_matrix(X, "X")
    if X.shape[0] < 2:
        raise ParameterError("need at least two points")
    W = _student_kernel(X)
    return W / W.sum()


def _P_of(P) -> np.ndarray:
    return P.P if isinstance(P, AffinityModel) else np.asarray(P, dtype=float)


def kl_divergence(P, Q) -> float:
    """KL(P || Q) over off-diagonal pairs with 0 log 0 = 0.

    Entries with q_ij below 1e-12 where p_ij > 0 are clamped and reported
    through a :class:`ClampWarning`.
    """
    Pm = _P_of(P)
    Q = np.asarray(Q, dtype=float)
    if Pm.shape != Q.shape:
        raise ParameterError("P and Q shapes differ")
    support = Pm > 0
    np.fill_diagonal(support, False)
    q = Q[support]
    clamped = int((q < Q_FLOOR).sum())
    if clamped:
        warnings.warn(f"{clamped} q_ij entries clamped at {Q_FLOOR}", ClampWarning, stacklevel=2)
        q = np.maximum(q, Q_FLOOR)
    p = Pm[support]
    return max(float(np.sum(p * np.log(p / q))), 0.0)


def kl_gradient(P, X) -> np.ndarray:
    """Analytic gradient ``4 sum_j (p_ij - q_ij) w_ij (x_i - x_j)``."""
    Pm = _P_of(P)
    X = as_matrix(X, "X")
    if Pm.shape[0] != X.shape[0]:
        raise ParameterError("P and X disagree on n")
    W = _student_kernel(X)
    M = (Pm - W / W.sum()) * W
    return 4.0 * (M.sum(axis=1)[:, None] * X - M @ X)


# ---------------------------------------------------------------- optimiser


@numba.njit(cache=True)
def _gradient_kernel(Y, P, alpha, W, grad, want_kl):
    """Fill ``grad`` with the gradient for exaggerated ``alpha * P``.

    ``W`` is n x n scratch for the Student weights. Returns (sum of weights,
    sum_{i!=j} p_ij log q_ij, clamp count); the last two are 0 unless
    ``want_kl``.
    """
    n, q = Y.shape
    Z = 0.0
    for i in range(n):
        W[i, i] = 0.0
        for j in range(i + 1, n):
            d = 0.0
            for c in range(q):
                t = Y[i, c] - Y[j, c]
                d += t * t
            w = 1.0 / (1.0 + d)
            W[i, j] = w
            W[j, i] = w
            Z += w
    Z *= 2.0
    if not Z > 0.0:
        # every pair infinitely far apart: the layout has blown up
        return 0.0, 0.0, 0
    invZ = 1.0 / Z
    logZ = np.log(Z)
    acc = np.zeros(q)
    plogq = 0.0
    clamps = 0
    for i in range(n):
        for c in range(q):
            acc[c] = 0.0
        for j in range(n):
            w = W[i, j]
            pij = P[i, j]
            m = (alpha * pij - w * invZ) * w
            for c in range(q):
                acc[c] += m * (Y[i, c] - Y[j, c])
            if want_kl and pij > 0.0 and j != i:
                if w * invZ < 1e-12:
                    clamps += 1
                    plogq += pij * np.log(1e-12)
                else:
                    plogq += pij * (np.log(w) - logZ)
        for c in range(q):
            grad[i, c] = 4.0 * acc[c]
    return Z, plogq, clamps


def gradient_step_reference(P, Y, alpha=1.0):
    """Gradient from the compiled kernel, for cross-checking against :func:`kl_gradient`."""
    Y = np.ascontiguousarray(Y, dtype=float)
    W = np.zeros((Y.shape[0], Y.shape[0]))
    grad = np.zeros_like(Y)
    _gradient_kernel(Y, np.ascontiguousarray(_P_of(P)), float(alpha), W, grad, False)
    return grad


@numba.njit(cache=True)
def _optimize(
    P, Y, plogp, n_iter, lr, mom0, mom1, mom_switch, exag, exag_iters, use_gains, min_gain, kl_every
):
    n, q = Y.shape
    W = np.zeros((n, n))
    grad = np.zeros((n, q))
    update = np.zeros((n, q))
    gains = np.ones((n, q))
    best_Y = Y.copy()
    best_kl = np.inf
    initial_kl = np.nan
    best_iter = 0
    clamps = 0
    for it in range(n_iter + 1):
        alpha = exag if it < exag_iters else 1.0
        want_kl = it % kl_every == 0 or it == n_iter
        Z, plogq, cl = _gradient_kernel(Y, P, alpha, W, grad, want_kl)
        if Z == 0.0:
            return best_Y, best_kl, initial_kl, best_iter, clamps, it
        if want_kl:
            clamps += cl
            kl = plogp - plogq
            if it == 0:
                initial_kl = kl
            if kl < best_kl:
                best_kl = kl
                best_iter = it
                best_Y[:, :] = Y
        if it == n_iter:
            break
        mom = mom0 if it < mom_switch else mom1
        for i in range(n):
            for c in range(q):
                g = grad[i, c]
                if use_gains:
                    if (g > 0.0) != (update[i, c] > 0.0):
                        gains[i, c] += 0.2
                    else:
                        gains[i, c] *= 0.8
                    if gains[i, c] < min_gain:
                        gains[i, c] = min_gain
                update[i, c] = mom * update[i, c] - lr * gains[i, c] * g
                Y[i, c] += update[i, c]
        for c in range(q):
            s = 0.0
            for i in range(n):
                s += Y[i, c]
            s /= n
            for i in range(n):
                Y[i, c] -= s
        for i in range(n):
            for c in range(q):
                if not np.isfinite(Y[i, c]):
                    return best_Y, best_kl, initial_kl, best_iter, clamps, it
    return best_Y, best_kl, initial_kl, best_iter, clamps, -1


def _classical_scores(D: np.ndarray, q: int) -> np.ndarray:
    """Top-q classical MDS coordinates, equal to PCA scores for Euclidean distances."""
    n = D.shape[0]
    J = np.eye(n) - 1.0 / n
    B = -0.5 * J @ (D**2) @ J
    vals, vecs = np.linalg.eigh(B)
    idx = np.argsort(vals)[::-1][:q]
    scores = vecs[:, idx] * np.sqrt(np.maximum(vals[idx], 0.0))
    # same sign rule as the PCA path: largest-magnitude entry positive
    k = np.argmax(np.abs(scores), axis=0)
    signs = np.sign(scores[k, np.arange(q)])
    signs[signs == 0] = 1.0
    return scores * signs


def leading_scores(source, q: int) -> np.ndarray:
    """Leading principal scores of a data matrix or Euclidean DistanceMatrix."""
    if isinstance(source, DistanceMatrix):
        n = source.n
        return _classical_scores(source.values, min(q, n - 1))
    from noisydr.signal_model import fit_pca, project

    X = np.asarray(source, dtype=float)
    r = min(q, X.shape[0] - 1, X.shape[1])
    return project(fit_pca(X, r), X)


def initial_layout(scores: np.ndarray | None, n: int, q: int, settings: TsneSettings, rng) -> np.ndarray:
    """Starting layout: principal scores scaled so the first column has sd
    ``init_scale``, plus Gaussian jitter. Random init ignores ``scores``."""
    scale = settings.init_scale
    if settings.init == "random" or scores is None:
        return rng.normal(0.0, scale, size=(n, q))
    sd = scores[:, 0].std()
    Y0 = np.zeros((n, q))
    if sd > 0:
        Y0[:, : scores.shape[1]] = scores * (scale / sd)
    return Y0 + rng.normal(0.0, settings.init_jitter * scale, size=(n, q))


def optimize_embedding(
    affinity: AffinityModel,
    Y0: np.ndarray,
    settings: TsneSettings,
    seed: int,
) -> EmbeddingRun:
    """Gradient descent from a given start layout on fixed affinities."""
    P = np.ascontiguousarray(affinity.P, dtype=float)
    pos = P > 0
    plogp = float(np.sum(P[pos] * np.log(P[pos])))
    Y = np.ascontiguousarray(Y0, dtype=float).copy()
    s = settings
    best_Y, best_kl, initial_kl, best_iter, clamps, fail = _optimize(
        P,
        Y,
        plogp,
        s.n_iter,
        float(s.learning_rate),
        float(s.momentum),
        float(s.final_momentum),
        s.momentum_switch_iter,
        float(s.exaggeration),
        s.exaggeration_iters,
        bool(s.use_gains),
        float(s.min_gain),
        s.kl_every,
    )
    if fail >= 0:
        raise RunError(f"embedding diverged at iteration {fail}", iteration=int(fail))
    if clamps:
        warnings.warn(f"{clamps} q_ij entries clamped during optimisation", ClampWarning, stacklevel=2)
    return EmbeddingRun(
        X=best_Y,
        perplexity=affinity.target_perplexity,
        seed=int(seed),
        final_kl=max(float(best_kl), 0.0),
        initial_kl=max(float(initial_kl), 0.0),
        iterations=s.n_iter,
        best_iteration=int(best_iter),
        hyperparameters=asdict(s),
        X_init=np.asarray(Y0, dtype=float).copy(),
        clamp_events=int(clamps),
    )


def run_tsne(
    data_or_dist,
    perplexity: float,
    q: int = 2,
    seed: int = 0,
    settings: TsneSettings | None = None,
) -> EmbeddingRun:
    """Embed a data matrix (or a precomputed DistanceMatrix) in ``q`` dimensions."""
    settings = settings or TsneSettings()
    if q < 1:
        raise ParameterError("q must be at least 1")
    if isinstance(data_or_dist, DistanceMatrix):
        dist = data_or_dist
        source = dist
    else:
        source = as_matrix(data_or_dist)
        dist = pairwise_distances(source)
    n = dist.n
    affinity = symmetrize(
        conditional_affinities(dist, perplexity, settings.perplexity_tol, settings.max_bisect_iter)
    )
    scores = leading_scores(source, q) if settings.init == "pca" else None
    Y0 = initial_layout(scores, n, q, settings, make_rng(seed))
    return optimize_embedding(affinity, Y0, settings, seed)
