"""Cross-domain collaborative filtering over bipartite graphs with
superhighway (user-user) edges between source and target domains."""

__version__ = "0.1.0"

from .construct import (  # noqa: E402
    CandidateOverlaps,
    ConstructionParams,
    construct_superhighway,
    identify_candidates,
    superhighway_weight,
)
from .graph import (  # noqa: E402
    CrossDomainSystem,
    Domain,
    DomainGraph,
    NodeId,
    StructureKind,
    TrainingStructure,
    WeightedGraph,
    merge_highway,
    single_structure,
)

__all__ = [
    "CandidateOverlaps",
    "ConstructionParams",
    "CrossDomainSystem",
    "Domain",
    "DomainGraph",
    "NodeId",
    "StructureKind",
    "TrainingStructure",
    "WeightedGraph",
    "construct_superhighway",
    "identify_candidates",
    "merge_highway",
    "single_structure",
    "superhighway_weight",
]
