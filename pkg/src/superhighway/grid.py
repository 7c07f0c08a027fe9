"""Alpha/beta grid search over superhighway structures."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .construct import DEFAULT_CAP, CandidateOverlaps, ConstructionParams, construct_superhighway
from .embed import Backend, TrainConfig, train
from .errors import InvalidParam, SuperhighwayError
from .evaluate import EvalReport, EvalSplit, evaluate
from .graph import CrossDomainSystem, merge_highway

logger = logging.getLogger(__name__)

DEFAULT_ALPHAS = (0.1, 1.0, 0.1)
DEFAULT_BETAS = (0.5, 1.5, 0.1)


def frange(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic range, rounded to 10 decimals to kill float drift."""
    if not (math.isfinite(start) and math.isfinite(stop) and math.isfinite(step)):
        raise InvalidParam("range bounds must be finite")
    if step <= 0 or start > stop:
        raise InvalidParam(f"malformed range ({start}, {stop}, {step})")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 10) for k in range(n)]


@dataclass
class GridCell:
    alpha: float
    beta: float
    report: EvalReport | None = None
    provenance: dict | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.report is not None

    @property
    def score(self) -> float:
        return self.report.map_at_k if self.report is not None else -math.inf

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "map_at_k": self.report.map_at_k if self.report else None,
            "provenance": self.provenance,
            "error": self.error,
            "report": self.report.to_dict() if self.report else None,
        }


def grid_search(
    sys: CrossDomainSystem,
    split: EvalSplit,
    backend: Backend | str,
    cfg: TrainConfig,
    alphas=None,
    betas=None,
    k: int = 10,
    cap: int = DEFAULT_CAP,
    similarity: str = "cosine",
    queries: str = "top-degree",
    reuse: bool = True,
    workers: int = 1,
) -> list[GridCell]:
    """Construct, train and evaluate every (alpha, beta) cell.

    ``alphas``/``betas`` default to the (0, 1] and [0.5, 1.5] grids in steps
    of 0.1 (see ``frange`` for other ranges).  ``k``, ``similarity`` and
    ``queries`` are passed to ``evaluate``.  ``sys`` must already exclude
    the held-out edges of ``split``.  With ``reuse`` the candidate sets and overlap counts are computed once
    per alpha.  A failing cell is recorded with its error; the search goes
    on.  Cells run on ``workers`` threads; each cell's training stays
    single-threaded, so results do not depend on ``workers``.  Returned
    best first.
    """
    backend = Backend(backend)
    alpha_values = _values(alphas, DEFAULT_ALPHAS)
    beta_values = _values(betas, DEFAULT_BETAS)
    highway = merge_highway(sys)

    def run(alpha, beta, overlaps):
        cell = GridCell(alpha, beta)
        try:
            if overlaps is None:
                structure = construct_superhighway(sys, ConstructionParams(alpha, beta), cap=cap, highway=highway)
            else:
                structure = overlaps.build(highway, beta)
            cell.provenance = dict(structure.provenance)
            model = train(structure, backend, cfg)
            cell.report = evaluate(model, split, k=k, similarity=similarity, queries=queries, config={
                "structure": structure.kind.value, "alpha": alpha, "beta": beta,
                "model": backend.value, "seed": cfg.seed, "domain": split.domain.value,
                "queries": queries,
            })
        except SuperhighwayError as exc:
            cell.error = f"{exc.code}: {exc}"
            logger.warning("grid cell alpha=%g beta=%g failed: %s", alpha, beta, cell.error)
        return cell

    jobs = []
    for alpha in alpha_values:
        overlaps = None
        if reuse:
            try:
                overlaps = CandidateOverlaps(sys, alpha, cap=cap)
            except SuperhighwayError as exc:
                err = f"{exc.code}: {exc}"
                logger.warning("alpha=%g failed: %s", alpha, err)
                jobs.extend(GridCell(alpha, b, error=err) for b in beta_values)
                continue
        jobs.extend((alpha, b, overlaps) for b in beta_values)

    def execute(job):
        return job if isinstance(job, GridCell) else run(*job)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            cells = list(pool.map(execute, jobs))
    else:
        cells = [execute(j) for j in jobs]
    return sorted(cells, key=lambda c: (-c.score, c.alpha, c.beta))


def _values(spec, default) -> list[float]:
    if spec is None:
        return frange(*default)
    values = [float(v) for v in spec]
    if not values:
        raise InvalidParam("empty parameter range")
    return values
