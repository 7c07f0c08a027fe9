"""Versioned on-disk artifacts shared by the CLI stages.

System and structure files have three parts: a magic line naming the kind
and format version, one JSON header line, and a tab-separated edge body.
Anything written by another version, or of another kind, fails to load.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import ArtifactError
from .evaluate import EvalSplit
from .graph import CrossDomainSystem, Domain, DomainGraph, NodeId, StructureKind, TrainingStructure, WeightedGraph

FORMAT_VERSION = 1
MAGIC = "#shx"
SYSTEM = "system"
STRUCTURE = "structure"
EVAL_SCHEMA = "shx-eval/1"
GRID_SCHEMA = "shx-grid/1"


def digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dumps(obj) -> str:
    # insertion order, so short fields such as provenance come before node lists
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _write(path, kind: str, header: dict, body: list[str]) -> None:
    text = f"{MAGIC} {kind} v{FORMAT_VERSION}\n{_dumps(header)}\n" + "".join(line + "\n" for line in body)
    Path(path).write_text(text, encoding="utf-8")


def _read(path, kind: str) -> tuple[dict, list[str]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ArtifactError(f"{path}: no such file") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise ArtifactError(f"{path}: unreadable ({exc})") from None
    lines = text.split("\n")
    magic = lines[0].split(" ")
    if len(magic) != 3 or magic[0] != MAGIC:
        raise ArtifactError(f"{path}: not an shx artifact")
    if magic[1] != kind:
        raise ArtifactError(f"{path}: expected a {kind} artifact, found {magic[1]}")
    if magic[2] != f"v{FORMAT_VERSION}":
        raise ArtifactError(f"{path}: format {magic[2]} is not supported (expected v{FORMAT_VERSION})")
    try:
        header = json.loads(lines[1])
    except (IndexError, json.JSONDecodeError):
        raise ArtifactError(f"{path}: corrupt header") from None
    return header, [line for line in lines[2:] if line]


def _edge_lines(graph: WeightedGraph) -> list[str]:
    return [f"{u}\t{v}\t{w!r}" for u, v, w in graph.edges()]


def _parse_edges(path, lines: list[str]) -> list[tuple[NodeId, NodeId, float]]:
    edges = []
    for lineno, line in enumerate(lines, start=3):
        try:
            u, v, w = line.split("\t")
            edges.append((NodeId.parse(u), NodeId.parse(v), float(w)))
        except ValueError:
            raise ArtifactError(f"{path}:{lineno}: malformed edge line") from None
    return edges


def write_system(path, sys: CrossDomainSystem, splits: dict[Domain, EvalSplit] | None = None) -> None:
    """Store the (training) system together with its held-out splits."""
    header = {
        "edges": {d.value: sys.domain(d).num_edges for d in Domain},
        "nodes": {d.value: [str(n) for n in sys.domain(d).nodes] for d in Domain},
        "splits": {d.value: s.to_dict() for d, s in sorted((splits or {}).items())},
    }
    body = []
    for d in Domain:
        body.extend(f"{d.value}\t{line}" for line in _edge_lines(sys.domain(d)))
    _write(path, SYSTEM, header, body)


def read_system(path) -> tuple[CrossDomainSystem, dict[Domain, EvalSplit]]:
    header, lines = _read(path, SYSTEM)
    per_domain = {d: [] for d in Domain}
    for line in lines:
        d, _, rest = line.partition("\t")
        try:
            per_domain[Domain(d)].append(rest)
        except ValueError:
            raise ArtifactError(f"{path}: unknown domain {d!r} in edge body") from None
    graphs = {}
    try:
        for d in Domain:
            nodes = [NodeId.parse(n) for n in header["nodes"][d.value]]
            g = WeightedGraph.from_edges(_parse_edges(path, per_domain[d]), nodes=nodes)
            graphs[d] = DomainGraph(d, g.nodes, g.matrix())
        splits = {Domain(k): EvalSplit.from_dict(v) for k, v in header.get("splits", {}).items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"{path}: inconsistent system file ({exc})") from None
    return CrossDomainSystem(graphs[Domain.SOURCE], graphs[Domain.TARGET]), splits


def write_structure(path, structure: TrainingStructure, extra: dict | None = None) -> None:
    header = {
        "kind": structure.kind.value,
        "provenance": dict(sorted(structure.provenance.items())),
        "num_edges": structure.graph.num_edges,
        **(extra or {}),
        "nodes": [str(n) for n in structure.graph.nodes],
    }
    _write(path, STRUCTURE, header, _edge_lines(structure.graph))


def read_structure(path) -> tuple[TrainingStructure, dict]:
    header, lines = _read(path, STRUCTURE)
    try:
        nodes = [NodeId.parse(n) for n in header["nodes"]]
        graph = WeightedGraph.from_edges(_parse_edges(path, lines), nodes=nodes)
        structure = TrainingStructure(StructureKind(header["kind"]), graph, header["provenance"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"{path}: inconsistent structure file ({exc})") from None
    if graph.num_edges != header.get("num_edges"):
        raise ArtifactError(f"{path}: edge count does not match the header")
    return structure, header


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def read_json(path, schema: str | tuple[str, ...]) -> dict:
    schemas = (schema,) if isinstance(schema, str) else schema
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ArtifactError(f"{path}: no such file") from None
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"{path}: unreadable ({exc})") from None
    if not isinstance(payload, dict) or payload.get("schema") not in schemas:
        found = payload.get("schema") if isinstance(payload, dict) else None
        raise ArtifactError(f"{path}: expected schema {' or '.join(schemas)}, found {found!r}")
    return payload
