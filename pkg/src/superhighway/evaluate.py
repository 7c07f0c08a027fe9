"""Query-based evaluation: an item is the query, items are ranked by embedding
similarity, and the user's held-out items are the relevant set."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CoverageError, EmptyEvalSet, InvalidParam, InvalidRanking
from .graph import CrossDomainSystem, Domain, NodeId

MAX_MISSING_FRACTION = 0.05


@dataclass(frozen=True)
class EvalSplit:
    domain: Domain
    holdout_fraction: float
    seed: int
    train_items: dict  # eligible user -> sorted training items
    heldout: dict  # eligible user -> sorted held-out items
    item_degree: dict  # item -> degree in the training graph
    items: tuple  # every item of the evaluated domain, sorted
    excluded_users: int = 0

    @property
    def users(self) -> list[NodeId]:
        return sorted(self.heldout)

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.value,
            "holdout_fraction": self.holdout_fraction,
            "seed": self.seed,
            "excluded_users": self.excluded_users,
            "items": [str(i) for i in self.items],
            "item_degree": {str(i): d for i, d in sorted(self.item_degree.items())},
            "users": {
                str(u): {"train": [str(i) for i in self.train_items[u]], "heldout": [str(i) for i in self.heldout[u]]}
                for u in self.users
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvalSplit:
        parse = NodeId.parse
        users = {parse(u): v for u, v in d["users"].items()}
        return cls(
            Domain(d["domain"]),
            d["holdout_fraction"],
            d["seed"],
            {u: tuple(map(parse, v["train"])) for u, v in users.items()},
            {u: tuple(map(parse, v["heldout"])) for u, v in users.items()},
            {parse(i): deg for i, deg in d["item_degree"].items()},
            tuple(map(parse, d["items"])),
            d.get("excluded_users", 0),
        )


def holdout_count(n: int, fraction: float) -> int:
    """Items held out of a user with ``n`` interactions (round half up, >= 1, <= n - 1)."""
    return min(n - 1, max(1, int(math.floor(fraction * n + 0.5))))


def split(sys: CrossDomainSystem, holdout_fraction: float, seed: int, domain: Domain = Domain.TARGET):
    """Hold out a fraction of each eligible user's interactions in ``domain``.

    Returns the system with those edges removed (node sets unchanged) and the
    split. Users with fewer than two interactions keep everything.
    """
    if not 0 < holdout_fraction < 1:
        raise InvalidParam(f"holdout_fraction must lie in (0, 1), got {holdout_fraction}")
    domain = Domain(domain)
    g = sys.domain(domain)
    rng = np.random.default_rng(seed)
    train, held, removed = {}, {}, []
    excluded = 0
    for u in sorted(g.users):
        items = [i for i, _ in g.neighbors(u)]
        if len(items) < 2:
            excluded += 1
            continue
        pick = set(rng.choice(len(items), holdout_count(len(items), holdout_fraction), replace=False).tolist())
        held[u] = tuple(i for k, i in enumerate(items) if k in pick)
        train[u] = tuple(i for k, i in enumerate(items) if k not in pick)
        removed.extend((u, i) for i in held[u])
    if not held:
        raise EmptyEvalSet(f"no {domain.value} user has two or more interactions")
    g_train = g.subgraph_without(removed)
    items = tuple(sorted(g.items))
    degree = {i: g_train.degree(i) for i in items}
    s = EvalSplit(domain, holdout_fraction, seed, train, held, degree, items, excluded)
    return sys.replace(domain, g_train), s


def average_precision_at_k(ranked: Sequence, relevant, k: int) -> float:
    """AP@k = sum of precision@i over relevant hits in the top k, over min(|relevant|, k).

    Accumulated in exact rational arithmetic and rounded once.
    """
    if k < 1:
        raise InvalidParam("k must be >= 1")
    if len(set(ranked)) != len(ranked):
        raise InvalidRanking("ranked list contains duplicates")
    relevant = set(relevant)
    if not relevant:
        return 0.0
    hits = 0
    total = Fraction(0)
    for i, node in enumerate(ranked[:k], start=1):
        if node in relevant:
            hits += 1
            total += Fraction(hits, i)
    return float(total / min(len(relevant), k))


@dataclass
class EvalReport:
    map_at_k: float
    k: int
    per_query: list  # (user, query item, AP)
    config: dict = field(default_factory=dict)
    skipped_queries: int = 0
    missing_items: int = 0

    def to_dict(self) -> dict:
        return {
            "map_at_k": self.map_at_k,
            "k": self.k,
            "config": self.config,
            "skipped_queries": self.skipped_queries,
            "missing_items": self.missing_items,
            "per_query": [[str(u), str(q), ap] for u, q, ap in self.per_query],
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvalReport:
        per_query = [(NodeId.parse(u), NodeId.parse(q), ap) for u, q, ap in d["per_query"]]
        return cls(d["map_at_k"], d["k"], per_query, d.get("config", {}),
                   d.get("skipped_queries", 0), d.get("missing_items", 0))


def select_query(train_items, item_degree) -> NodeId:
    """Highest training degree; ties go to the smallest NodeId."""
    return min(train_items, key=lambda i: (-item_degree.get(i, 0), i))


def evaluate(model, split: EvalSplit, k: int = 10, similarity: str = "cosine",
             queries: str = "top-degree", config: dict | None = None) -> EvalReport:
    """MAP@k of item-as-query retrieval over the split's users.

    ``queries`` is ``"top-degree"`` (one query per user) or ``"all"`` (every
    training item of the user is a query).  The candidate pool is every item
    of the split's domain that has a vector, minus the query and the user's
    training items; ties in score are broken by NodeId.
    """
    if k < 1:
        raise InvalidParam("k must be >= 1")
    if similarity not in ("cosine", "dot"):
        raise InvalidParam(f"unknown similarity {similarity!r}")
    if queries not in ("top-degree", "all"):
        raise InvalidParam(f"unknown query mode {queries!r}")
    pool = [i for i in split.items if i in model]
    missing = len(split.items) - len(pool)
    if split.items and missing / len(split.items) > MAX_MISSING_FRACTION:
        raise CoverageError(f"model lacks vectors for {missing} of {len(split.items)} {split.domain.value} items")
    pos = {i: p for p, i in enumerate(pool)}
    mat = model.vectors[[model.index_of(i) for i in pool]] if pool else np.zeros((0, model.dims))
    if similarity == "cosine":
        norms = np.linalg.norm(mat, axis=1, keepdims=True)
        mat = np.divide(mat, norms, out=np.zeros_like(mat), where=norms > 0)
    tie_break = np.arange(len(pool))

    per_query = []
    skipped = 0
    for u in split.users:
        train = split.train_items[u]
        relevant = set(split.heldout[u])
        qs = [select_query(train, split.item_degree)] if queries == "top-degree" else list(train)
        for q in qs:
            if q not in pos:
                skipped += 1
                continue
            scores = mat @ mat[pos[q]]
            banned = [pos[i] for i in train if i in pos]
            scores[banned] = -np.inf
            order = np.lexsort((tie_break, -scores))
            top = [pool[j] for j in order[: k + len(banned)] if np.isfinite(scores[j])][:k]
            per_query.append((u, q, average_precision_at_k(top, relevant, k)))
    if not per_query:
        raise EmptyEvalSet("no evaluable queries")
    mean = math.fsum(ap for _, _, ap in per_query) / len(per_query)
    return EvalReport(mean, k, per_query, dict(config or {}), skipped, missing)
