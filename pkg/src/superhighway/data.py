"""TSV ingestion and a latent-factor generator for synthetic cross-domain data.

Input lines are ``user<TAB>item[<TAB>weight]``; ``#`` lines and blank lines
are ignored.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyDomain, IngestError, InvalidParam
from .graph import CrossDomainSystem, Domain, DomainGraph, NodeId, item, user

logger = logging.getLogger(__name__)


def read_interactions(path, binarize: bool = True, skip_bad_lines: bool = False) -> list[tuple[str, str, float]]:
    rows = []
    bad = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            try:
                rows.append(_parse_line(line, binarize))
            except ValueError as exc:
                if not skip_bad_lines:
                    raise IngestError(path, lineno, str(exc)) from None
                bad += 1
                logger.warning("%s:%d: skipped (%s)", path, lineno, exc)
    if bad:
        logger.warning("%s: skipped %d malformed line(s)", path, bad)
    return rows


def _parse_line(line: str, binarize: bool) -> tuple[str, str, float]:
    fields = line.split("\t")
    if len(fields) not in (2, 3):
        raise ValueError(f"expected 2 or 3 tab-separated fields, got {len(fields)}")
    u, i = fields[0], fields[1]
    if not u or not i:
        raise ValueError("empty user or item key")
    w = 1.0
    if len(fields) == 3:
        try:
            w = float(fields[2])
        except ValueError:
            raise ValueError(f"weight {fields[2]!r} is not a number") from None
        if not math.isfinite(w) or w <= 0:
            raise ValueError(f"weight must be finite and positive, got {fields[2]!r}")
    return u, i, 1.0 if binarize else w


def load_domain(path, domain: Domain, binarize: bool = True, skip_bad_lines: bool = False) -> DomainGraph:
    rows = read_interactions(path, binarize=binarize, skip_bad_lines=skip_bad_lines)
    if not rows:
        raise EmptyDomain(f"{path}: no interactions in the {Domain(domain).value} domain")
    return DomainGraph.from_interactions(domain, rows)


def ingest(source_path, target_path, binarize: bool = True, skip_bad_lines: bool = False) -> CrossDomainSystem:
    sys = CrossDomainSystem(
        load_domain(source_path, Domain.SOURCE, binarize, skip_bad_lines),
        load_domain(target_path, Domain.TARGET, binarize, skip_bad_lines),
    )
    logger.info(
        "ingested source %r, target %r, %d shared items", sys.source, sys.target, len(sys.shared_items)
    )
    return sys


def write_tsv(graph: DomainGraph, path, weights: bool = True) -> None:
    """Export one domain in the ingestion format, sorted by (user, item)."""
    lines = []
    for a, b, w in graph.edges():
        u, i = (a, b) if a.is_user else (b, a)
        lines.append(f"{u.local_id}\t{i.local_id}\t{w!r}" if weights else f"{u.local_id}\t{i.local_id}")
    lines.sort()
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


@dataclass(frozen=True)
class SynthConfig:
    users_s: int = 2000
    users_t: int = 500
    items_s: int = 1500
    items_t: int = 800
    overlap_ratio: float = 0.4
    latent_dims: int = 8
    interactions_per_user: int = 40
    target_interactions_per_user: int | None = None
    noise: float = 0.5
    seed: int = 0

    @property
    def shared(self) -> int:
        return int(math.floor(self.overlap_ratio * self.items_t + 0.5))

    @property
    def target_mean(self) -> int:
        t = self.target_interactions_per_user
        return self.interactions_per_user if t is None else t

    def validate(self) -> None:
        for name in ("users_s", "users_t", "items_s", "items_t", "latent_dims", "interactions_per_user"):
            if getattr(self, name) < 1:
                raise InvalidParam(f"{name} must be positive")
        if self.target_mean < 1:
            raise InvalidParam("target_interactions_per_user must be positive")
        if not 0 <= self.overlap_ratio <= 1:
            raise InvalidParam("overlap_ratio must lie in [0, 1]")
        if self.shared > min(self.items_s, self.items_t):
            raise InvalidParam("more shared items than either catalog holds")
        if not (math.isfinite(self.noise) and self.noise >= 0):
            raise InvalidParam("noise must be >= 0")
        if self.interactions_per_user > self.items_s or self.target_mean > self.items_t:
            raise InvalidParam("interactions_per_user exceeds the item count of a domain")


@dataclass(frozen=True)
class GroundTruth:
    """Latent vectors behind a synthetic system. Never handed to trainers."""

    user_latents: dict
    item_latents: dict

    def score(self, u: NodeId, i: NodeId) -> float:
        return float(self.user_latents[u] @ self.item_latents[i])


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def generate_synthetic(cfg: SynthConfig) -> tuple[CrossDomainSystem, GroundTruth]:
    """Latent-factor cross-domain data.

    Users and items get standard normal latent vectors.  A user's affinity
    to an item is the cosine of their latents plus ``noise`` times standard
    normal noise, and the user takes their top-affinity items; how many is
    geometric with the domain's mean.
    Shared items have one latent vector in both domains.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n_shared = cfg.shared
    shared_keys = [f"x{k:05d}" for k in range(n_shared)]
    source_items = shared_keys + [f"s{k:05d}" for k in range(cfg.items_s - n_shared)]
    target_items = shared_keys + [f"t{k:05d}" for k in range(cfg.items_t - n_shared)]
    all_items = sorted(set(source_items) | set(target_items))
    item_vecs = rng.standard_normal((len(all_items), cfg.latent_dims))
    item_latents = {item(k): v for k, v in zip(all_items, item_vecs)}
    user_latents = {}
    graphs = {}
    for domain, n_users, keys, mean in (
        (Domain.SOURCE, cfg.users_s, source_items, cfg.interactions_per_user),
        (Domain.TARGET, cfg.users_t, target_items, cfg.target_mean),
    ):
        ivecs = np.stack([item_latents[item(k)] for k in keys])
        uvecs = rng.standard_normal((n_users, cfg.latent_dims))
        counts = np.minimum(rng.geometric(1.0 / mean, size=n_users), len(keys))
        affinity = _unit(uvecs) @ _unit(ivecs).T
        affinity += cfg.noise * rng.standard_normal(affinity.shape)
        rows = []
        ukeys = [f"u{k:05d}" for k in range(n_users)]
        for uk, aff, c in zip(ukeys, affinity, counts):
            top = np.argsort(-aff, kind="stable")[:c]
            rows.extend((uk, keys[j], 1.0) for j in top)
        user_latents.update({user(domain, uk): v for uk, v in zip(ukeys, uvecs)})
        graphs[domain] = DomainGraph.from_interactions(domain, rows, items=keys)
    sys = CrossDomainSystem(graphs[Domain.SOURCE], graphs[Domain.TARGET])
    return sys, GroundTruth(user_latents, item_latents)
