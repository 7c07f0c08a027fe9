"""Bipartite domain graphs, the merged cross-domain system and training structures.

Every graph is an immutable symmetric CSR matrix over a sorted node list, so
neighbor order, edge order and everything sampled from them downstream are
deterministic.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import GraphInvariantError, NotFound

logger = logging.getLogger(__name__)


class Namespace(str, enum.Enum):
    ITEM = "I"
    SOURCE_USER = "S"
    TARGET_USER = "T"


class Domain(str, enum.Enum):
    SOURCE = "source"
    TARGET = "target"

    @property
    def user_namespace(self) -> Namespace:
        return Namespace.SOURCE_USER if self is Domain.SOURCE else Namespace.TARGET_USER

    @property
    def other(self) -> Domain:
        return Domain.TARGET if self is Domain.SOURCE else Domain.SOURCE


class StructureKind(str, enum.Enum):
    SINGLE = "single"
    HIGHWAY = "highway"
    SUPERHIGHWAY = "superhighway"


class NodeId(NamedTuple):
    namespace: Namespace
    local_id: str

    def __str__(self) -> str:
        return f"{self.namespace.value}:{self.local_id}"

    def __repr__(self) -> str:
        return f"NodeId({str(self)!r})"

    @classmethod
    def parse(cls, text: str) -> NodeId:
        ns, sep, key = text.partition(":")
        if not sep:
            raise ValueError(f"not a namespaced node key: {text!r}")
        return cls(Namespace(ns), key)

    @property
    def is_item(self) -> bool:
        return self.namespace is Namespace.ITEM

    @property
    def is_user(self) -> bool:
        return self.namespace is not Namespace.ITEM


def item(key: str) -> NodeId:
    return NodeId(Namespace.ITEM, str(key))


def user(domain: Domain, key: str) -> NodeId:
    return NodeId(domain.user_namespace, str(key))


class WeightedGraph:
    """Undirected weighted graph stored as a symmetric CSR matrix.

    ``nodes`` is sorted, so row ``k`` belongs to ``nodes[k]`` and each row's
    column indices are ordered by NodeId. Isolated nodes are allowed.
    """

    def __init__(self, nodes: Iterable[NodeId], matrix: sp.spmatrix | sp.sparray):
        self._nodes = tuple(nodes)
        if list(self._nodes) != sorted(set(self._nodes)):
            raise GraphInvariantError("node list must be sorted and unique")
        m = sp.csr_matrix(matrix, dtype=np.float64)
        n = len(self._nodes)
        if m.shape != (n, n):
            raise GraphInvariantError(f"adjacency shape {m.shape} does not match {n} nodes")
        m.sum_duplicates()
        m.sort_indices()
        self._validate(m)
        m.indptr.flags.writeable = False
        m.indices.flags.writeable = False
        m.data.flags.writeable = False
        self._m = m
        self._index = {node: k for k, node in enumerate(self._nodes)}

    @staticmethod
    def _validate(m: sp.csr_matrix) -> None:
        w = m.data
        if w.size and not (np.all(np.isfinite(w)) and np.all(w > 0)):
            raise GraphInvariantError("edge weights must be finite and positive")
        if m.diagonal().any():
            raise GraphInvariantError("self loops are not allowed")
        if (m != m.T).nnz:
            raise GraphInvariantError("adjacency must be symmetric")

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[tuple[NodeId, NodeId, float]],
        nodes: Iterable[NodeId] = (),
        on_duplicate: str = "error",
    ):
        """Build from undirected ``(u, v, weight)`` triples.

        ``on_duplicate`` is ``"error"`` or ``"max"`` (keep the largest weight).
        """
        pairs: dict[tuple[NodeId, NodeId], float] = {}
        node_set = set(nodes)
        dupes = 0
        for u, v, w in edges:
            key = (u, v) if u <= v else (v, u)
            w = float(w)
            if key in pairs:
                dupes += 1
                if on_duplicate != "max":
                    raise GraphInvariantError(f"duplicate edge {key[0]} -- {key[1]}")
                w = max(w, pairs[key])
            pairs[key] = w
            node_set.add(u)
            node_set.add(v)
        if dupes:
            logger.warning("collapsed %d duplicate edge(s), keeping max weight", dupes)
        ordered = sorted(node_set)
        index = {node: k for k, node in enumerate(ordered)}
        rows = np.fromiter((index[u] for u, _ in pairs), dtype=np.int64, count=len(pairs))
        cols = np.fromiter((index[v] for _, v in pairs), dtype=np.int64, count=len(pairs))
        data = np.fromiter(pairs.values(), dtype=np.float64, count=len(pairs))
        return cls._from_triples(ordered, rows, cols, data)

    @classmethod
    def _from_triples(cls, nodes, rows, cols, data, **kwargs):
        n = len(nodes)
        m = sp.coo_matrix(
            (np.concatenate([data, data]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
            shape=(n, n),
        ).tocsr()
        return cls(nodes, m, **kwargs)

    # -- queries -------------------------------------------------------------

    @property
    def nodes(self) -> tuple[NodeId, ...]:
        return self._nodes

    @property
    def num_nodes(self) -> int:
        return len(self._nodes)

    @property
    def num_edges(self) -> int:
        return self._m.nnz // 2

    @property
    def indptr(self) -> np.ndarray:
        return self._m.indptr

    @property
    def indices(self) -> np.ndarray:
        return self._m.indices

    @property
    def weights(self) -> np.ndarray:
        return self._m.data

    def matrix(self) -> sp.csr_matrix:
        return self._m.copy()

    def __contains__(self, node) -> bool:
        return node in self._index

    def index_of(self, node: NodeId) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise NotFound(f"unknown node {node}") from None

    def neighbors(self, node: NodeId) -> list[tuple[NodeId, float]]:
        k = self.index_of(node)
        lo, hi = self._m.indptr[k], self._m.indptr[k + 1]
        return [
            (self._nodes[j], float(w))
            for j, w in zip(self._m.indices[lo:hi], self._m.data[lo:hi])
        ]

    def neighbor_set(self, node: NodeId) -> frozenset[NodeId]:
        return frozenset(n for n, _ in self.neighbors(node))

    def degree(self, node: NodeId) -> int:
        k = self.index_of(node)
        return int(self._m.indptr[k + 1] - self._m.indptr[k])

    def degrees(self) -> np.ndarray:
        return np.diff(self._m.indptr)

    def strengths(self) -> np.ndarray:
        """Weighted degree of every node, in node order."""
        return np.asarray(self._m.sum(axis=1)).ravel()

    def weight(self, u: NodeId, v: NodeId) -> float:
        return float(self._m[self.index_of(u), self.index_of(v)])

    def edges(self) -> Iterator[tuple[NodeId, NodeId, float]]:
        """Each undirected edge once, as ``(u, v, w)`` with ``u < v``."""
        upper = sp.triu(self._m, k=1, format="csr")
        upper.sort_indices()
        for r in range(upper.shape[0]):
            lo, hi = upper.indptr[r], upper.indptr[r + 1]
            u = self._nodes[r]
            for j, w in zip(upper.indices[lo:hi], upper.data[lo:hi]):
                yield u, self._nodes[j], float(w)

    def edge_dict(self) -> dict[tuple[NodeId, NodeId], float]:
        return {(u, v): w for u, v, w in self.edges()}

    def nodes_in(self, namespace: Namespace) -> list[NodeId]:
        return [n for n in self._nodes if n.namespace is namespace]

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (
            self._nodes == other._nodes
            and np.array_equal(self._m.indptr, other._m.indptr)
            and np.array_equal(self._m.indices, other._m.indices)
            and np.array_equal(self._m.data, other._m.data)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"{type(self).__name__}(nodes={self.num_nodes}, edges={self.num_edges})"


class DomainGraph(WeightedGraph):
    """One domain's bipartite user-item graph."""

    def __init__(self, domain: Domain, nodes, matrix):
        self.domain = Domain(domain)
        super().__init__(nodes, matrix)
        user_ns = self.domain.user_namespace
        kinds = np.array(
            [0 if n.namespace is Namespace.ITEM else 1 if n.namespace is user_ns else 2 for n in self._nodes],
            dtype=np.int8,
        )
        if (kinds == 2).any():
            bad = self._nodes[int(np.argmax(kinds == 2))]
            raise GraphInvariantError(f"{bad} does not belong to the {self.domain.value} domain")
        rows = np.repeat(np.arange(len(kinds)), np.diff(self._m.indptr))
        if (kinds[rows] == kinds[self._m.indices]).any():
            raise GraphInvariantError("domain graph must be bipartite (user-item edges only)")
        self._users = frozenset(n for n, k in zip(self._nodes, kinds) if k == 1)
        self._items = frozenset(n for n, k in zip(self._nodes, kinds) if k == 0)

    @classmethod
    def from_interactions(
        cls,
        domain: Domain,
        interactions: Iterable[tuple[str, str, float]],
        users: Iterable[str] = (),
        items: Iterable[str] = (),
        on_duplicate: str = "max",
    ) -> DomainGraph:
        """Build from raw ``(user_key, item_key, weight)`` triples."""
        domain = Domain(domain)
        edges = ((user(domain, u), item(i), w) for u, i, w in interactions)
        extra = [user(domain, u) for u in users] + [item(i) for i in items]
        g = WeightedGraph.from_edges(edges, nodes=extra, on_duplicate=on_duplicate)
        return cls(domain, g.nodes, g._m)

    def subgraph_without(self, removed: Iterable[tuple[NodeId, NodeId]]) -> DomainGraph:
        """Copy with the given user-item edges removed; the node set is kept."""
        n = self.num_nodes
        keys = set()
        for u, i in removed:
            a, b = self.index_of(u), self.index_of(i)
            keys.add(a * n + b)
            keys.add(b * n + a)
        coo = self._m.tocoo()
        flat = coo.row.astype(np.int64) * n + coo.col
        drop = np.isin(flat, np.fromiter(keys, dtype=np.int64, count=len(keys)))
        if int(drop.sum()) != len(keys):
            raise NotFound("some removed edges are not in the graph")
        keep = ~drop
        m = sp.coo_matrix((coo.data[keep], (coo.row[keep], coo.col[keep])), shape=(n, n)).tocsr()
        return DomainGraph(self.domain, self._nodes, m)

    @property
    def users(self) -> frozenset[NodeId]:
        return self._users

    @property
    def items(self) -> frozenset[NodeId]:
        return self._items

    def __eq__(self, other) -> bool:
        if isinstance(other, DomainGraph) and other.domain is not self.domain:
            return False
        return super().__eq__(other)

    __hash__ = None

    def __repr__(self) -> str:
        return (
            f"DomainGraph({self.domain.value}, users={len(self._users)}, "
            f"items={len(self._items)}, edges={self.num_edges})"
        )


@dataclass(frozen=True, eq=False)
class CrossDomainSystem:
    source: DomainGraph
    target: DomainGraph
    shared_items: frozenset = None

    def __post_init__(self):
        if self.source.domain is not Domain.SOURCE or self.target.domain is not Domain.TARGET:
            raise GraphInvariantError("source/target graphs carry the wrong domain tags")
        shared = self.source.items & self.target.items
        if self.shared_items is not None and frozenset(self.shared_items) != shared:
            raise GraphInvariantError("shared_items does not match items(source) & items(target)")
        object.__setattr__(self, "shared_items", frozenset(shared))

    def domain(self, d: Domain) -> DomainGraph:
        return self.source if Domain(d) is Domain.SOURCE else self.target

    def replace(self, d: Domain, graph: DomainGraph) -> CrossDomainSystem:
        if Domain(d) is Domain.SOURCE:
            return CrossDomainSystem(graph, self.target)
        return CrossDomainSystem(self.source, graph)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CrossDomainSystem):
            return NotImplemented
        return self.source == other.source and self.target == other.target

    __hash__ = None


@dataclass(frozen=True, eq=False)
class TrainingStructure:
    kind: StructureKind
    graph: WeightedGraph
    provenance: dict = field(default_factory=dict)

    @property
    def nodes(self) -> tuple[NodeId, ...]:
        return self.graph.nodes

    def neighbors(self, node: NodeId) -> list[tuple[NodeId, float]]:
        return self.graph.neighbors(node)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrainingStructure):
            return NotImplemented
        return self.kind is other.kind and self.graph == other.graph and self.provenance == other.provenance

    __hash__ = None


def neighbors(g, node: NodeId) -> list[tuple[NodeId, float]]:
    """Adjacent nodes with weights, sorted by NodeId."""
    return g.neighbors(node)


def _as_graph(g) -> WeightedGraph:
    return g.graph if isinstance(g, TrainingStructure) else g


def _reindexed(graph: WeightedGraph, index: dict[NodeId, int]):
    remap = np.fromiter((index[n] for n in graph.nodes), dtype=np.int64, count=graph.num_nodes)
    coo = graph._m.tocoo()
    return remap[coo.row], remap[coo.col], coo.data


def merge_highway(sys: CrossDomainSystem) -> TrainingStructure:
    """Naive union of both domains; shared items become single nodes."""
    nodes = sorted(set(sys.source.nodes) | set(sys.target.nodes))
    index = {n: k for k, n in enumerate(nodes)}
    rs, cs, ds = _reindexed(sys.source, index)
    rt, ct, dt = _reindexed(sys.target, index)
    n = len(nodes)
    m = sp.coo_matrix(
        (np.concatenate([ds, dt]), (np.concatenate([rs, rt]), np.concatenate([cs, ct]))),
        shape=(n, n),
    ).tocsr()
    m.sum_duplicates()
    if m.nnz != sys.source._m.nnz + sys.target._m.nnz:
        raise GraphInvariantError("the two domains share a user-item pair")
    return TrainingStructure(
        StructureKind.HIGHWAY,
        WeightedGraph(nodes, m),
        {"shared_items": len(sys.shared_items)},
    )


def domain_structure(sys: CrossDomainSystem, domain: Domain) -> TrainingStructure:
    """One domain on its own as a ``single`` structure."""
    g = sys.domain(domain)
    return TrainingStructure(
        StructureKind.SINGLE, WeightedGraph(g.nodes, g._m), {"domain": Domain(domain).value}
    )


def single_structure(sys: CrossDomainSystem) -> TrainingStructure:
    return domain_structure(sys, Domain.TARGET)


@dataclass(frozen=True)
class StatsReport:
    users: int
    items: int
    edges: int
    density: float
    user_item_edges: int
    user_user_edges: int = 0
    shared_items: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def stats(g) -> StatsReport:
    """Counts and bipartite density (user-item edges over users x items)."""
    shared = None
    if isinstance(g, TrainingStructure):
        shared = g.provenance.get("shared_items")
    graph = _as_graph(g)
    is_user = np.fromiter((n.is_user for n in graph.nodes), dtype=bool, count=graph.num_nodes)
    users = int(is_user.sum())
    items = graph.num_nodes - users
    rows = np.repeat(np.arange(graph.num_nodes), graph.degrees())
    both_users = is_user[rows] & is_user[graph.indices]
    uu = int(both_users.sum()) // 2
    ui = graph.num_edges - uu
    density = ui / (users * items) if users and items else 0.0
    return StatsReport(users, items, graph.num_edges, density, ui, uu, shared)


def system_stats(sys: CrossDomainSystem) -> dict:
    return {
        "source": stats(sys.source).to_dict(),
        "target": stats(sys.target).to_dict(),
        "shared_items": len(sys.shared_items),
    }
