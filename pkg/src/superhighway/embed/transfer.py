from __future__ import annotations

from ..graph import CrossDomainSystem, Domain, domain_structure, single_structure
from .model import Backend, EmbeddingModel, TrainConfig
from .mf import train_mf
from .skipgram import train_deepwalk, train_hpe

TRAINERS = {Backend.MF: train_mf, Backend.DEEPWALK: train_deepwalk, Backend.HPE: train_hpe}


def train(structure, backend: Backend | str, cfg: TrainConfig, init: EmbeddingModel | None = None,
          epochs: int | None = None) -> EmbeddingModel:
    return TRAINERS[Backend(backend)](structure, cfg, init=init, epochs=epochs)


def train_transfer(sys: CrossDomainSystem, backend: Backend | str, cfg: TrainConfig,
                   finetune_epochs: int | None = None) -> EmbeddingModel:
    """Pretrain on the source domain, then fine-tune on the target domain.

    Nodes the two structures have in common (the shared items) start the
    fine-tuning from their pretrained input and context vectors.
    """
    pretrained = train(domain_structure(sys, Domain.SOURCE), backend, cfg)
    model = train(single_structure(sys), backend, cfg, init=pretrained, epochs=finetune_epochs)
    model.hyperparams = {**model.hyperparams, "pretrained": True}
    return model
