from .mf import mf_pair_grad, mf_pair_loss, train_mf
from .model import Backend, EmbeddingModel, TrainConfig, initial_tables
from .sampling import GraphSampler
from .skipgram import train_deepwalk, train_hpe
from .transfer import train, train_transfer

__all__ = [
    "Backend",
    "EmbeddingModel",
    "GraphSampler",
    "TrainConfig",
    "initial_tables",
    "mf_pair_grad",
    "mf_pair_loss",
    "train",
    "train_deepwalk",
    "train_hpe",
    "train_mf",
    "train_transfer",
]
