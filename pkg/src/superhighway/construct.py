"""Superhighway construction: direct weighted user-user edges across domains.

A user is a candidate when at least ``alpha`` of its neighbors are shared
items.  Every (source candidate, target candidate) pair gets an edge of weight
``beta * |N(u_s) & N(u_t)|``; pairs with no common item are counted but not
materialized.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .errors import CapExceeded, DomainMismatch, EmptySharedItems, InvalidParam
from .graph import (
    CrossDomainSystem,
    Domain,
    Namespace,
    NodeId,
    StructureKind,
    TrainingStructure,
    WeightedGraph,
    merge_highway,
)

DEFAULT_CAP = 10**8


@dataclass(frozen=True)
class ConstructionParams:
    alpha: float
    beta: float

    def __post_init__(self):
        check_alpha(self.alpha)
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise InvalidParam(f"beta must be finite and >= 0, got {self.beta}")


def check_alpha(alpha: float) -> None:
    if not (math.isfinite(alpha) and 0 < alpha <= 1):
        raise InvalidParam(f"alpha must lie in (0, 1], got {alpha}")


@dataclass(frozen=True)
class CandidateSet:
    domain: Domain
    users: frozenset
    smoothness: Mapping[NodeId, float]


@dataclass(frozen=True)
class SuperhighwayEdge:
    src_user: NodeId
    tgt_user: NodeId
    weight: float


def _shared_profile(sys: CrossDomainSystem, domain: Domain):
    """Per-user degree and shared-neighbor count for one domain (node order)."""
    g = sys.domain(domain)
    is_shared = np.fromiter((n in sys.shared_items for n in g.nodes), dtype=bool, count=g.num_nodes)
    deg = g.degrees()
    rows = np.repeat(np.arange(g.num_nodes), deg)
    shared_deg = np.bincount(rows, weights=is_shared[g.indices], minlength=g.num_nodes)
    users = np.fromiter((n.namespace is domain.user_namespace for n in g.nodes), dtype=bool, count=g.num_nodes)
    return g, deg, shared_deg.astype(np.int64), users


def identify_candidates(sys: CrossDomainSystem, domain: Domain, alpha: float) -> CandidateSet:
    """Users of ``domain`` whose shared-item neighbor ratio is at least ``alpha``.

    Zero-degree users are never candidates.
    """
    check_alpha(alpha)
    if not sys.shared_items:
        raise EmptySharedItems("the two domains share no items; superhighways cannot be built")
    domain = Domain(domain)
    g, deg, shared_deg, is_user = _shared_profile(sys, domain)
    smooth = {}
    members = set()
    for k in np.flatnonzero(is_user & (deg > 0)):
        ratio = shared_deg[k] / deg[k]
        if ratio >= alpha:
            node = g.nodes[k]
            members.add(node)
            smooth[node] = float(ratio)
    return CandidateSet(domain, frozenset(members), smooth)


def superhighway_weight(sys: CrossDomainSystem, u_src: NodeId, u_tgt: NodeId, beta: float) -> float:
    if u_src.namespace is not Namespace.SOURCE_USER or u_src not in sys.source:
        raise DomainMismatch(f"{u_src} is not a source-domain user")
    if u_tgt.namespace is not Namespace.TARGET_USER or u_tgt not in sys.target:
        raise DomainMismatch(f"{u_tgt} is not a target-domain user")
    common = sys.source.neighbor_set(u_src) & sys.target.neighbor_set(u_tgt)
    return beta * len(common)


def _incidence(sys: CrossDomainSystem, domain: Domain, users: list[NodeId], shared_index: dict) -> sp.csr_matrix:
    """Binary users x shared-items matrix."""
    g = sys.domain(domain)
    col_of = np.fromiter((shared_index.get(n, -1) for n in g.nodes), dtype=np.int64, count=g.num_nodes)
    rows, cols = [], []
    for r, u in enumerate(users):
        k = g.index_of(u)
        c = col_of[g.indices[g.indptr[k]:g.indptr[k + 1]]]
        c = c[c >= 0]
        rows.append(np.full(c.size, r, dtype=np.int64))
        cols.append(c)
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    return sp.csr_matrix(
        (np.ones(rows.size, dtype=np.int64), (rows, cols)), shape=(len(users), len(shared_index))
    )


class CandidateOverlaps:
    """Candidate sets and raw pairwise overlap counts for one ``alpha``.

    Weights are linear in ``beta``, so one instance serves every ``beta``.
    """

    def __init__(self, sys: CrossDomainSystem, alpha: float, cap: int = DEFAULT_CAP, workers: int = 1):
        self.alpha = alpha
        self.source = identify_candidates(sys, Domain.SOURCE, alpha)
        self.target = identify_candidates(sys, Domain.TARGET, alpha)
        self.src_users = sorted(self.source.users)
        self.tgt_users = sorted(self.target.users)
        self.candidate_pairs = len(self.src_users) * len(self.tgt_users)
        if self.candidate_pairs > cap:
            raise CapExceeded(
                f"{len(self.src_users)} x {len(self.tgt_users)} = {self.candidate_pairs} candidate pairs "
                f"exceeds the cap of {cap}; raise alpha or the cap"
            )
        shared_index = {n: k for k, n in enumerate(sorted(sys.shared_items))}
        b_src = _incidence(sys, Domain.SOURCE, self.src_users, shared_index)
        b_tgt_t = _incidence(sys, Domain.TARGET, self.tgt_users, shared_index).T.tocsc()

        blocks = np.array_split(np.arange(len(self.src_users)), max(1, workers))
        blocks = [b for b in blocks if b.size] or [np.arange(0)]

        def overlap_block(rows: np.ndarray):
            prod = (b_src[rows] @ b_tgt_t).tocoo()
            order = np.lexsort((prod.col, prod.row))
            return rows[prod.row[order]], prod.col[order], prod.data[order]

        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                parts = list(pool.map(overlap_block, blocks))
        else:
            parts = [overlap_block(b) for b in blocks]
        self.rows = np.concatenate([p[0] for p in parts]).astype(np.int64)
        self.cols = np.concatenate([p[1] for p in parts]).astype(np.int64)
        self.counts = np.concatenate([p[2] for p in parts]).astype(np.int64)
        self.shared_items = len(shared_index)

    def edges(self, beta: float) -> list[SuperhighwayEdge]:
        if beta == 0:
            return []
        return [
            SuperhighwayEdge(self.src_users[r], self.tgt_users[c], beta * int(n))
            for r, c, n in zip(self.rows, self.cols, self.counts)
        ]

    def build(self, highway: TrainingStructure, beta: float) -> TrainingStructure:
        """Highway structure plus this alpha's superhighways at scale ``beta``."""
        params = ConstructionParams(self.alpha, beta)
        g = highway.graph
        n = g.num_nodes
        if params.beta > 0 and self.counts.size:
            src_idx = np.fromiter((g.index_of(u) for u in self.src_users), dtype=np.int64, count=len(self.src_users))
            tgt_idx = np.fromiter((g.index_of(u) for u in self.tgt_users), dtype=np.int64, count=len(self.tgt_users))
            r, c = src_idx[self.rows], tgt_idx[self.cols]
            w = params.beta * self.counts.astype(np.float64)
            extra = sp.coo_matrix((np.concatenate([w, w]), (np.concatenate([r, c]), np.concatenate([c, r]))), shape=(n, n))
            matrix = (g._m + extra.tocsr()).tocsr()
            materialized = int(self.counts.size)
        else:
            matrix = g._m
            materialized = 0
        provenance = {
            "alpha": self.alpha,
            "beta": params.beta,
            "candidates_source": len(self.src_users),
            "candidates_target": len(self.tgt_users),
            "candidate_pairs": self.candidate_pairs,
            "edges_materialized": materialized,
            "zero_weight_pairs_skipped": self.candidate_pairs - materialized,
            "shared_items": self.shared_items,
        }
        return TrainingStructure(StructureKind.SUPERHIGHWAY, WeightedGraph(g.nodes, matrix), provenance)


def construct_superhighway(
    sys: CrossDomainSystem,
    params: ConstructionParams,
    cap: int = DEFAULT_CAP,
    workers: int = 1,
    highway: TrainingStructure | None = None,
) -> TrainingStructure:
    overlaps = CandidateOverlaps(sys, params.alpha, cap=cap, workers=workers)
    if highway is None:
        highway = merge_highway(sys)
    return overlaps.build(highway, params.beta)
