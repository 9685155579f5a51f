"""Perplexity sweeps scored against both the raw data and the signal.

For every grid perplexity the embedding is repeated with distinct seeds and
each run is scored with trustworthiness and Shepard goodness against the
observed matrix and against the signal. The summary picks, per frame, the
perplexity whose aggregated trustworthiness is largest.

Cell seeds are ``base_seed XOR h(i, j)`` where ``h`` is the first 8 bytes
(little endian) of BLAKE2b over the ASCII string ``"{i}:{j}"``, with ``i``
the grid index and ``j`` the repeat index.
"""

from __future__ import annotations

import hashlib
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from noisydr.datagen import make_rng
from noisydr.errors import IngestionError, ParameterError, RunError
from noisydr.metrics import Geometry, shepard_goodness, trustworthiness, trustworthiness_subsampled
from noisydr.neighbors import as_matrix
from noisydr.signal_model import PcaBasis, fit_pca, project
from noisydr.tsne import (
    TsneSettings,
    conditional_affinities,
    initial_layout,
    leading_scores,
    optimize_embedding,
    symmetrize,
)

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


def cell_seed(base_seed: int, grid_index: int, repeat_index: int) -> int:
    digest = hashlib.blake2b(f"{grid_index}:{repeat_index}".encode("ascii"), digest_size=8).digest()
    return (int(base_seed) & MASK64) ^ int.from_bytes(digest, "little")


@dataclass(frozen=True)
class SweepConfig:
    grid: tuple[float, ...]
    repeats: int = 1
    k: int = 10
    signal_dim: int | None = None  # None: the caller supplies the signal
    subsample: tuple[int, int] | None = None  # (m, seed) for both metrics
    settings: TsneSettings = field(default_factory=TsneSettings)
    base_seed: int = 0
    aggregate: str = "mean"
    workers: int = 1
    q: int = 2

    def __post_init__(self):
        grid = tuple(float(g) for g in self.grid)
        object.__setattr__(self, "grid", grid)
        if not grid:
            raise ParameterError("grid must not be empty")
        if any(g <= 1 for g in grid):
            raise ParameterError("every grid perplexity must exceed 1")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ParameterError("grid must be strictly ascending")
        if self.repeats < 1:
            raise ParameterError("repeats must be at least 1")
        if self.aggregate not in ("mean", "max"):
            raise ParameterError("aggregate must be 'mean' or 'max'")
        if self.workers < 1:
            raise ParameterError("workers must be at least 1")
        if self.signal_dim is not None and self.signal_dim < 1:
            raise ParameterError("signal_dim must be positive")
        if self.subsample is not None:
            object.__setattr__(self, "subsample", (int(self.subsample[0]), int(self.subsample[1])))


@dataclass(frozen=True)
class SweepRecord:
    perplexity: float
    repeat_index: int
    seed: int
    trust_vs_raw: float
    trust_vs_signal: float
    shepard_vs_raw: float
    shepard_vs_signal: float
    final_kl: float


@dataclass(frozen=True)
class CellFailure:
    perplexity: float
    repeat_index: int
    seed: int
    error: str
    iteration: int | None = None


@dataclass(frozen=True)
class SweepSummary:
    per_perplexity: list[dict]
    aggregate: str
    optimal_vs_raw: float | None
    optimal_vs_signal: float | None
    valid: bool
    failures: int


@dataclass
class SweepResult:
    records: list[SweepRecord]
    summary: SweepSummary
    failures: list[CellFailure]
    embeddings: dict[tuple[int, int], np.ndarray]


def extract_signal(observed, r: int) -> tuple[np.ndarray, PcaBasis]:
    basis = fit_pca(observed, r)
    return project(basis, observed), basis


def scale_perplexity_for_subsample(perp_prime: float, rho: float) -> float:
    """Perplexity for the full data matching ``perp_prime`` used on a rho-sample."""
    if not 0 < rho <= 1:
        raise ParameterError(f"rho must lie in (0, 1], got {rho}")
    if perp_prime <= 1:
        raise ParameterError("perp_prime must exceed 1")
    return perp_prime / rho


def _score(raw: Geometry, signal: Geometry, X: np.ndarray, k: int, subsample):
    emb = Geometry(X)
    if subsample is None:
        t_raw = trustworthiness(raw, emb, k).value
        t_sig = trustworthiness(signal, emb, k).value
    else:
        m, seed = subsample
        t_raw = trustworthiness_subsampled(raw, emb, k, m, seed).value
        t_sig = trustworthiness_subsampled(signal, emb, k, m, seed).value
    s_raw = shepard_goodness(raw, emb, subsample).value
    s_sig = shepard_goodness(signal, emb, subsample).value
    return t_raw, t_sig, s_raw, s_sig


class _SweepContext:
    """Everything one cell needs; built once per process."""

    def __init__(self, observed, signal, config: SweepConfig):
        self.config = config
        self.raw = Geometry(observed, "raw_data")
        self.signal = Geometry(signal, "signal")
        s = config.settings
        self.scores = leading_scores(self.raw.data, config.q) if s.init == "pca" else None
        self._affinity_key = None
        self._affinity = None

    def affinity(self, i: int):
        if self._affinity_key != i:
            s = self.config.settings
            cond = conditional_affinities(
                self.raw.distances, self.config.grid[i], s.perplexity_tol, s.max_bisect_iter
            )
            self._affinity = symmetrize(cond)
            self._affinity_key = i
        return self._affinity

    def run_cell(self, i: int, j: int):
        cfg = self.config
        seed = cell_seed(cfg.base_seed, i, j)
        perp = cfg.grid[i]
        try:
            Y0 = initial_layout(self.scores, self.raw.n, cfg.q, cfg.settings, make_rng(seed))
            run = optimize_embedding(self.affinity(i), Y0, cfg.settings, seed)
        except RunError as exc:
            return CellFailure(perp, j, seed, str(exc), exc.iteration), None
        scores = _score(self.raw, self.signal, run.X, cfg.k, cfg.subsample)
        return SweepRecord(perp, j, seed, *scores, run.final_kl), run.X


_WORKER_CTX: _SweepContext | None = None


def _init_worker(observed, signal, config):
    global _WORKER_CTX
    _WORKER_CTX = _SweepContext(observed, signal, config)


def _worker_cell(ij):
    return ij, _WORKER_CTX.run_cell(*ij)


def summarize(records: list[SweepRecord], config: SweepConfig, failures: int = 0) -> SweepSummary:
    agg = np.mean if config.aggregate == "mean" else np.max
    rows = []
    valid = True
    for perp in config.grid:
        cell = [r for r in records if r.perplexity == perp]
        row = {"perplexity": perp, "n_runs": len(cell)}
        for name, attr in (
            ("trust_raw", "trust_vs_raw"),
            ("trust_signal", "trust_vs_signal"),
            ("shep_raw", "shepard_vs_raw"),
            ("shep_signal", "shepard_vs_signal"),
            ("final_kl", "final_kl"),
        ):
            vals = np.array([getattr(r, attr) for r in cell], dtype=float)
            finite = vals[np.isfinite(vals)]
            row[f"mean_{name}"] = float(np.mean(finite)) if finite.size else None
            row[f"max_{name}"] = float(np.max(finite)) if finite.size else None
            row[f"sd_{name}"] = float(np.std(finite, ddof=1)) if finite.size > 1 else None
        if not cell:
            valid = False
        rows.append(row)

    def best(attr):
        if not valid:
            return None
        vals = np.array(
            [agg([getattr(r, attr) for r in records if r.perplexity == p]) for p in config.grid]
        )
        # argmax returns the first maximum, i.e. the smaller perplexity on ties
        return config.grid[int(np.argmax(vals))]

    return SweepSummary(
        per_perplexity=rows,
        aggregate=config.aggregate,
        optimal_vs_raw=best("trust_vs_raw"),
        optimal_vs_signal=best("trust_vs_signal"),
        valid=valid,
        failures=failures,
    )


def run_sweep(observed, config: SweepConfig, signal_Y=None) -> SweepResult:
    """Run every (perplexity, repeat) cell and summarise.

    The signal frame is ``signal_Y`` when given, otherwise the first
    ``config.signal_dim`` principal scores of ``observed``.
    """
    observed = as_matrix(observed, "observed")
    n = observed.shape[0]
    if signal_Y is None:
        if config.signal_dim is None:
            raise ParameterError("either signal_Y or config.signal_dim is required")
        signal_Y, _ = extract_signal(observed, config.signal_dim)
    signal_Y = as_matrix(signal_Y, "signal_Y")
    if signal_Y.shape[0] != n:
        raise ParameterError("signal and observed row counts differ")
    if config.grid[-1] >= n:
        raise ParameterError(f"grid perplexities must be below n = {n}")

    cells = [(i, j) for i in range(len(config.grid)) for j in range(config.repeats)]
    outcomes: dict[tuple[int, int], tuple] = {}
    if config.workers == 1:
        ctx = _SweepContext(observed, signal_Y, config)
        for ij in cells:
            outcomes[ij] = ctx.run_cell(*ij)
    else:
        with ProcessPoolExecutor(
            max_workers=config.workers,
            initializer=_init_worker,
            initargs=(observed, signal_Y, config),
        ) as pool:
            for ij, out in pool.map(_worker_cell, cells, chunksize=config.repeats):
                outcomes[ij] = out

    records, failures, embeddings = [], [], {}
    for ij in cells:
        res, X = outcomes[ij]
        if isinstance(res, CellFailure):
            log.warning("cell %s failed: %s", ij, res.error)
            failures.append(res)
        else:
            records.append(res)
            embeddings[ij] = X
    return SweepResult(records, summarize(records, config, len(failures)), failures, embeddings)


def evaluate_external(
    observed,
    embedding,
    k: int = 10,
    r: int | None = None,
    signal_Y=None,
    subsample: tuple[int, int] | None = None,
) -> dict:
    """Score an embedding computed elsewhere in both frames."""
    observed = as_matrix(observed, "observed")
    embedding = as_matrix(embedding, "embedding")
    if embedding.shape[0] != observed.shape[0]:
        raise IngestionError(
            f"embedding has {embedding.shape[0]} rows, observed has {observed.shape[0]}"
        )
    if signal_Y is None:
        if r is None:
            raise ParameterError("either r or signal_Y is required")
        signal_Y, _ = extract_signal(observed, r)
    raw = Geometry(observed, "raw_data")
    sig = Geometry(signal_Y, "signal")
    t_raw, t_sig, s_raw, s_sig = _score(raw, sig, embedding, k, subsample)
    return {
        "trust_raw": t_raw,
        "trust_signal": t_sig,
        "shep_raw": s_raw,
        "shep_signal": s_sig,
        "k": k,
        "r": r,
        "subsample": list(subsample) if subsample else None,
        "n": int(observed.shape[0]),
    }


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
