from __future__ import annotations

import enum
import hashlib
import json
import string
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from urllib.parse import quote, unquote

import numpy as np

from ..errors import ArtifactError, InvalidParam, NotFound
from ..graph import NodeId

MODEL_SCHEMA = "shx-model/1"
_KEY_SAFE = string.punctuation.replace("%", "")


class Backend(str, enum.Enum):
    MF = "mf"
    DEEPWALK = "deepwalk"
    HPE = "hpe"

    @property
    def label(self) -> str:
        return {"mf": "MF", "deepwalk": "DeepWalk", "hpe": "HPE"}[self.value]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for every backend; each backend reads the fields it needs.

    ``epochs`` counts passes over the observed edges (MF), over the walk
    corpus (DeepWalk) or over ``walks_per_node * walk_length`` weighted edge
    draws per node (HPE).
    """

    dims: int = 64
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    negative_samples: int = 5
    walks_per_node: int = 10
    walk_length: int = 40
    window: int = 5
    hpe_walk_length: int = 3
    regularization: float = 1e-4
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in ("dims", "epochs", "negative_samples", "walks_per_node", "walk_length",
                     "window", "hpe_walk_length", "workers"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and not isinstance(v, bool) and v > 0):
                raise InvalidParam(f"{name} must be a positive integer, got {v!r}")
        for name in ("learning_rate", "min_learning_rate"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidParam(f"{name} must be positive and finite, got {v!r}")
        if not (np.isfinite(self.regularization) and self.regularization >= 0):
            raise InvalidParam(f"regularization must be >= 0 and finite, got {self.regularization!r}")
        if self.min_learning_rate > self.learning_rate:
            raise InvalidParam("min_learning_rate exceeds learning_rate")
        if self.window > self.walk_length:
            raise InvalidParam("window must not exceed walk_length")

    def replace(self, **changes) -> TrainConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class EmbeddingModel:
    nodes: tuple
    vectors: np.ndarray
    context_vectors: np.ndarray | None
    trainer_tag: Backend
    seed: int
    hyperparams: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = tuple(self.nodes)
        self._index = {n: k for k, n in enumerate(self.nodes)}
        if self.vectors.shape[0] != len(self.nodes):
            raise ValueError("one vector per node required")

    @property
    def dims(self) -> int:
        return int(self.vectors.shape[1])

    def __contains__(self, node) -> bool:
        return node in self._index

    def __getitem__(self, node: NodeId) -> np.ndarray:
        return self.vectors[self.index_of(node)]

    def index_of(self, node: NodeId) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise NotFound(f"no vector for {node}") from None

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingModel):
            return NotImplemented
        same_ctx = (self.context_vectors is None and other.context_vectors is None) or (
            self.context_vectors is not None
            and other.context_vectors is not None
            and np.array_equal(self.context_vectors, other.context_vectors)
        )
        return (
            self.nodes == other.nodes
            and np.array_equal(self.vectors, other.vectors)
            and same_ctx
            and self.trainer_tag == other.trainer_tag
        )

    __hash__ = None

    def save(self, path) -> None:
        """Word2vec text layout with namespaced keys, plus a JSON sidecar."""
        path = Path(path)
        lines = [f"{len(self.nodes)} {self.dims}"]
        for node, row in zip(self.nodes, self.vectors.tolist()):
            key = f"{node.namespace.value}:{quote(node.local_id, safe=_KEY_SAFE)}"
            lines.append(key + " " + " ".join(map(repr, row)))
        body = ("\n".join(lines) + "\n").encode("utf-8")
        path.write_bytes(body)
        meta = {
            "schema": MODEL_SCHEMA,
            "trainer": self.trainer_tag.value,
            "seed": self.seed,
            "hyperparams": self.hyperparams,
            "sha256": hashlib.sha256(body).hexdigest(),
        }
        sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> EmbeddingModel:
        path = Path(path)
        try:
            meta = json.loads(sidecar(path).read_text())
        except FileNotFoundError:
            raise ArtifactError(f"{path}: missing metadata sidecar {sidecar(path).name}") from None
        if meta.get("schema") != MODEL_SCHEMA:
            raise ArtifactError(f"{path}: expected schema {MODEL_SCHEMA}, found {meta.get('schema')!r}")
        body = path.read_bytes()
        if hashlib.sha256(body).hexdigest() != meta["sha256"]:
            raise ArtifactError(f"{path}: content does not match its metadata digest")
        lines = body.decode("utf-8").splitlines()
        n, dims = map(int, lines[0].split())
        nodes, rows = [], []
        for line in lines[1:]:
            key, *vals = line.split(" ")
            ns, _, local = key.partition(":")
            nodes.append(NodeId.parse(f"{ns}:{unquote(local)}"))
            rows.append([float(v) for v in vals])
        vectors = np.array(rows, dtype=np.float64).reshape(n, dims)
        return cls(tuple(nodes), vectors, None, Backend(meta["trainer"]), meta["seed"], meta["hyperparams"])


def sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def initial_tables(nodes, cfg: TrainConfig, init: EmbeddingModel | None = None):
    """Input vectors uniform in +-0.5/dims, context vectors zero.

    Nodes present in ``init`` take its vectors instead; the random draw for
    every other node is unaffected by what ``init`` contains.
    """
    rng = np.random.default_rng(cfg.seed)
    x = (rng.random((len(nodes), cfg.dims)) - 0.5) / cfg.dims
    y = np.zeros((len(nodes), cfg.dims))
    if init is not None:
        if init.dims != cfg.dims:
            raise InvalidParam(f"pretrained dims {init.dims} != configured dims {cfg.dims}")
        for k, node in enumerate(nodes):
            if node in init:
                j = init.index_of(node)
                x[k] = init.vectors[j]
                if init.context_vectors is not None:
                    y[k] = init.context_vectors[j]
    return x, y
