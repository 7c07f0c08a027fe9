"""Skip-gram with negative sampling over random-walk contexts.

Two ways of producing (anchor, context) pairs share one update rule:

* DeepWalk: truncated weighted walks from every node, window contexts.
* HPE-style: draw an edge by weight, extend it into a short walk, and pair
  the walk's first node with every later node.  Anchor and context share one
  vector table (first-order proximity), so linked nodes embed close together
  and a node is never drawn as its own negative.

Edge weights only shape the sampling; each pair carries unit loss weight.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..graph import TrainingStructure, WeightedGraph
from ._hogwild import run_sharded, shares, split
from .model import Backend, EmbeddingModel, TrainConfig, initial_tables
from .sampling import GraphSampler, _alias_draw, _step

MAX_EXP = 6.0


@njit(cache=True, inline="always")
def _sigmoid(f):
    if f > MAX_EXP:
        return 1.0
    if f < -MAX_EXP:
        return 0.0
    return 1.0 / (1.0 + math.exp(-f))


@njit(cache=True, fastmath=True)
def _sgns_pair(x, y, a, c, neg_prob, neg_alias, k, lr, grad, shared):
    """One positive and ``k`` negative logistic updates; ``shared`` means y is x."""
    dims = x.shape[1]
    grad[:] = 0.0
    for s in range(k + 1):
        if s == 0:
            target = c
            label = 1.0
        else:
            target = _alias_draw(neg_prob, neg_alias, 0, neg_prob.size)
            if target == c or (shared and target == a):
                continue
            label = 0.0
        f = 0.0
        for d in range(dims):
            f += x[a, d] * y[target, d]
        g = (label - _sigmoid(f)) * lr
        for d in range(dims):
            grad[d] += g * y[target, d]
            y[target, d] += g * x[a, d]
    for d in range(dims):
        x[a, d] += grad[d]


@njit(cache=True, nogil=True)
def _train_walks(x, y, walks, rows, window, neg_prob, neg_alias, k, lr0, lr_min, epochs, seed):
    np.random.seed(seed)
    grad = np.empty(x.shape[1])
    total = max(1, epochs * rows.size)
    done = 0
    pairs = 0
    width = walks.shape[1]
    for _ in range(epochs):
        for r in rows:
            lr = max(lr_min, lr0 * (1.0 - done / total))
            done += 1
            length = width
            for t in range(width):
                if walks[r, t] < 0:
                    length = t
                    break
            for i in range(length):
                a = walks[r, i]
                for j in range(max(0, i - window), min(length, i + window + 1)):
                    c = walks[r, j]
                    if j == i or c == a:
                        continue
                    _sgns_pair(x, y, a, c, neg_prob, neg_alias, k, lr, grad, False)
                    pairs += 1
    return pairs


@njit(cache=True, nogil=True)
def _train_edge_walks(
    x, indptr, indices, row_prob, row_alias, entry_rows, edge_prob, edge_alias,
    ell, neg_prob, neg_alias, k, lr0, lr_min, samples, seed,
):
    np.random.seed(seed)
    grad = np.empty(x.shape[1])
    total = max(1, samples)
    pairs = 0
    for s in range(samples):
        lr = max(lr_min, lr0 * (1.0 - s / total))
        e = _alias_draw(edge_prob, edge_alias, 0, edge_prob.size)
        a = entry_rows[e]
        node = indices[e]
        for t in range(ell):
            if t > 0:
                node = _step(node, indptr, indices, row_prob, row_alias)
                if node < 0:
                    break
            if node != a:
                _sgns_pair(x, x, a, node, neg_prob, neg_alias, k, lr, grad, True)
                pairs += 1
    return pairs


def _graph(g) -> WeightedGraph:
    return g.graph if isinstance(g, TrainingStructure) else g


def train_deepwalk(g, cfg: TrainConfig, init: EmbeddingModel | None = None, epochs: int | None = None) -> EmbeddingModel:
    """Weighted DeepWalk. Isolated nodes keep their initial vectors."""
    graph = _graph(g)
    epochs = cfg.epochs if epochs is None else epochs
    sampler = GraphSampler.from_graph(graph)
    walks = sampler.walks(cfg.walks_per_node, cfg.walk_length, cfg.seed)
    x, y = initial_tables(graph.nodes, cfg, init)
    if epochs and graph.num_edges:
        shards = split(np.arange(walks.shape[0], dtype=np.int64), cfg.workers)
        run_sharded(
            _train_walks, shards, cfg.seed, 1,
            lambda rows: (x, y, walks, rows, cfg.window, sampler.neg_prob, sampler.neg_alias,
                          cfg.negative_samples, cfg.learning_rate, cfg.min_learning_rate, epochs),
        )
    return EmbeddingModel(graph.nodes, x, y, Backend.DEEPWALK, cfg.seed, {**cfg.to_dict(), "epochs": epochs})


def hpe_sample_count(graph: WeightedGraph, cfg: TrainConfig, epochs: int) -> int:
    """Edge draws per run: one DeepWalk epoch's worth of walk positions per epoch."""
    if not graph.num_edges:
        return 0
    return epochs * cfg.walks_per_node * cfg.walk_length * graph.num_nodes


def train_hpe(g, cfg: TrainConfig, init: EmbeddingModel | None = None, epochs: int | None = None) -> EmbeddingModel:
    """Edge-sampled short-walk preference embedding with one shared vector table."""
    graph = _graph(g)
    epochs = cfg.epochs if epochs is None else epochs
    x, _ = initial_tables(graph.nodes, cfg, init)
    samples = hpe_sample_count(graph, cfg, epochs)
    if samples:
        s = GraphSampler.from_graph(graph)
        run_sharded(
            _train_edge_walks, shares(samples, cfg.workers), cfg.seed, 2,
            lambda n: (x, s.indptr, s.indices, s.row_prob, s.row_alias, s.entry_rows, s.edge_prob,
                       s.edge_alias, cfg.hpe_walk_length, s.neg_prob, s.neg_alias, cfg.negative_samples,
                       cfg.learning_rate, cfg.min_learning_rate, n),
        )
    return EmbeddingModel(graph.nodes, x, None, Backend.HPE, cfg.seed, {**cfg.to_dict(), "epochs": epochs})
