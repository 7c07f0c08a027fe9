"""Alias tables and graph samplers shared by the skip-gram trainers.

All kernels draw from numba's per-thread generator, seeded explicitly at the
top of each kernel so a single-threaded run is reproducible.
"""
from __future__ import annotations

import numpy as np
from numba import njit

NEGATIVE_POWER = 0.75


@njit(cache=True)
def _alias_into(p, prob, alias, offset):
    """Vose's alias method for ``p`` (non-negative, not necessarily normalized).

    Writes the table into ``prob[offset:offset+len(p)]`` and the matching
    slice of ``alias``; alias entries are local indices.
    """
    n = p.size
    total = p.sum()
    if n == 0 or total <= 0:
        for k in range(n):
            prob[offset + k] = 0.0
            alias[offset + k] = k
        return
    scaled = p * (n / total)
    small = np.empty(n, dtype=np.int64)
    large = np.empty(n, dtype=np.int64)
    ns = 0
    nl = 0
    for k in range(n):
        if scaled[k] < 1.0:
            small[ns] = k
            ns += 1
        else:
            large[nl] = k
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        l = large[nl - 1]
        prob[offset + s] = scaled[s]
        alias[offset + s] = l
        scaled[l] = (scaled[l] + scaled[s]) - 1.0
        if scaled[l] < 1.0:
            nl -= 1
            small[ns] = l
            ns += 1
    while nl > 0:
        nl -= 1
        prob[offset + large[nl]] = 1.0
        alias[offset + large[nl]] = large[nl]
    while ns > 0:
        ns -= 1
        prob[offset + small[ns]] = 1.0
        alias[offset + small[ns]] = small[ns]


@njit(cache=True)
def _alias_draw(prob, alias, offset, n):
    k = np.random.randint(0, n)
    if np.random.random() < prob[offset + k]:
        return k
    return alias[offset + k]


@njit(cache=True)
def _row_alias_tables(indptr, weights):
    prob = np.empty(weights.size, dtype=np.float64)
    alias = np.empty(weights.size, dtype=np.int64)
    for r in range(indptr.size - 1):
        lo = indptr[r]
        hi = indptr[r + 1]
        _alias_into(weights[lo:hi], prob, alias, lo)
    return prob, alias


def alias_table(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.ascontiguousarray(p, dtype=np.float64)
    prob = np.empty(p.size, dtype=np.float64)
    alias = np.empty(p.size, dtype=np.int64)
    _alias_into(p, prob, alias, 0)
    return prob, alias


@njit(cache=True)
def _seed(seed):
    np.random.seed(seed)


@njit(cache=True)
def _draw_many(prob, alias, count, seed):
    np.random.seed(seed)
    out = np.empty(count, dtype=np.int64)
    for k in range(count):
        out[k] = _alias_draw(prob, alias, 0, prob.size)
    return out


def draw(prob: np.ndarray, alias: np.ndarray, count: int, seed: int) -> np.ndarray:
    """``count`` independent draws from an alias table."""
    return _draw_many(prob, alias, count, seed)


class GraphSampler:
    """Weighted transition, edge and negative samplers over a CSR graph."""

    def __init__(self, indptr: np.ndarray, indices: np.ndarray, weights: np.ndarray):
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        self.n = self.indptr.size - 1
        self.row_prob, self.row_alias = _row_alias_tables(self.indptr, self.weights)
        # one entry per stored (directed) CSR slot: drawing a slot by weight is
        # drawing an undirected edge by weight plus a fair orientation
        self.entry_rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        self.edge_prob, self.edge_alias = alias_table(self.weights)
        strength = np.bincount(self.entry_rows, weights=self.weights, minlength=self.n)
        self.noise_dist = strength**NEGATIVE_POWER
        self.neg_prob, self.neg_alias = alias_table(self.noise_dist)

    @classmethod
    def from_graph(cls, graph) -> GraphSampler:
        return cls(graph.indptr, graph.indices, graph.weights)

    def walks(self, walks_per_node: int, walk_length: int, seed: int) -> np.ndarray:
        return _generate_walks(
            self.indptr, self.indices, self.row_prob, self.row_alias, walks_per_node, walk_length, seed
        )

    def draw_edges(self, count: int, seed: int) -> np.ndarray:
        """Indices into the CSR slot arrays, drawn proportionally to weight."""
        return _draw_many(self.edge_prob, self.edge_alias, count, seed)

    def draw_negatives(self, count: int, seed: int) -> np.ndarray:
        return _draw_many(self.neg_prob, self.neg_alias, count, seed)

    def noise_probabilities(self) -> np.ndarray:
        total = self.noise_dist.sum()
        return self.noise_dist / total if total > 0 else self.noise_dist


@njit(cache=True)
def _step(node, indptr, indices, row_prob, row_alias):
    lo = indptr[node]
    deg = indptr[node + 1] - lo
    if deg == 0:
        return -1
    return indices[lo + _alias_draw(row_prob, row_alias, lo, deg)]


@njit(cache=True)
def _generate_walks(indptr, indices, row_prob, row_alias, walks_per_node, walk_length, seed):
    """Truncated weighted random walks; rows are padded with -1 after dead ends."""
    np.random.seed(seed)
    n = indptr.size - 1
    out = np.full((walks_per_node * n, walk_length), -1, dtype=np.int64)
    row = 0
    for _ in range(walks_per_node):
        order = np.random.permutation(n)
        for start in order:
            node = start
            out[row, 0] = node
            for t in range(1, walk_length):
                node = _step(node, indptr, indices, row_prob, row_alias)
                if node < 0:
                    break
                out[row, t] = node
            row += 1
    return out
