"""Matrix factorization of the unified weighted adjacency.

Every node has an input vector ``x`` and a context vector ``y``; each stored
entry ``(i, j, w)`` of the symmetric adjacency is fitted as ``x_i . y_j ~ w``
with per-pair loss

    (w - x_i . y_j)**2 + lam * (|x_i|**2 + |y_j|**2)

plus ``k`` sampled non-adjacent pairs per observed entry fitted to zero.
User-user edges are ordinary observations here.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import DivergenceError
from ..graph import TrainingStructure
from ._hogwild import run_sharded, split
from .model import Backend, EmbeddingModel, TrainConfig, initial_tables

MAX_NEGATIVE_TRIES = 16


def mf_pair_loss(x: np.ndarray, y: np.ndarray, w: float, lam: float) -> float:
    err = w - x @ y
    return err * err + lam * (x @ x + y @ y)


def mf_pair_grad(x: np.ndarray, y: np.ndarray, w: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    err = w - x @ y
    return -2.0 * err * y + 2.0 * lam * x, -2.0 * err * x + 2.0 * lam * y


@njit(cache=True, fastmath=True)
def _mf_step(x, y, i, j, target, lr, lam):
    """One SGD step on pair (i, j); returns the pre-update loss."""
    dims = x.shape[1]
    dot = 0.0
    norm = 0.0
    for d in range(dims):
        dot += x[i, d] * y[j, d]
        norm += x[i, d] * x[i, d] + y[j, d] * y[j, d]
    err = target - dot
    for d in range(dims):
        xd = x[i, d]
        yd = y[j, d]
        x[i, d] = xd - lr * (-2.0 * err * yd + 2.0 * lam * xd)
        y[j, d] = yd - lr * (-2.0 * err * xd + 2.0 * lam * yd)
    return err * err + lam * norm


@njit(cache=True)
def _adjacent(indptr, indices, i, j):
    lo = indptr[i]
    hi = indptr[i + 1]
    p = lo + np.searchsorted(indices[lo:hi], j)
    return p < hi and indices[p] == j


@njit(cache=True, nogil=True)
def _train_mf(x, y, indptr, indices, weights, entry_rows, entries, k, lr0, lr_min, lam, epochs, losses, seed):
    """Returns the first epoch with a non-finite loss, or -1."""
    np.random.seed(seed)
    n = x.shape[0]
    total = max(1, epochs * entries.size)
    done = 0
    for ep in range(epochs):
        order = entries[np.random.permutation(entries.size)]
        loss = 0.0
        for e in order:
            lr = max(lr_min, lr0 * (1.0 - done / total))
            done += 1
            i = entry_rows[e]
            loss += _mf_step(x, y, i, indices[e], weights[e], lr, lam)
            for _ in range(k):
                for _ in range(MAX_NEGATIVE_TRIES):
                    j = np.random.randint(0, n)
                    if j != i and not _adjacent(indptr, indices, i, j):
                        loss += _mf_step(x, y, i, j, 0.0, lr, lam)
                        break
        losses[ep] += loss
        if not np.isfinite(loss):
            return ep
    return -1


def train_mf(g, cfg: TrainConfig, init: EmbeddingModel | None = None, epochs: int | None = None) -> EmbeddingModel:
    graph = g.graph if isinstance(g, TrainingStructure) else g
    epochs = cfg.epochs if epochs is None else epochs
    x, y = initial_tables(graph.nodes, cfg, init)
    indptr = graph.indptr.astype(np.int64)
    indices = graph.indices.astype(np.int64)
    weights = graph.weights.astype(np.float64)
    entry_rows = np.repeat(np.arange(graph.num_nodes, dtype=np.int64), np.diff(indptr))
    losses = np.zeros(epochs)
    if epochs and weights.size:
        shards = split(np.arange(weights.size, dtype=np.int64), cfg.workers)
        results = run_sharded(
            _train_mf, shards, cfg.seed, 0,
            lambda entries: (x, y, indptr, indices, weights, entry_rows, entries, cfg.negative_samples,
                             cfg.learning_rate, cfg.min_learning_rate, cfg.regularization, epochs, losses),
        )
        bad = [r for r in results if r >= 0]
        if bad or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            ep = min(bad) if bad else epochs - 1
            lr = max(cfg.min_learning_rate, cfg.learning_rate * (1 - ep / epochs))
            raise DivergenceError(ep + 1, lr)
    hp = {**cfg.to_dict(), "epochs": epochs, "epoch_losses": [float(v) for v in losses]}
    return EmbeddingModel(graph.nodes, x, y, Backend.MF, cfg.seed, hp)
