"""Copy-augmented Transformer, its losses and training loop."""

from csmiles.model.data import Batch, Example, collate, make_example
from csmiles.model.losses import alignment_loss, copy_index_loss, lm_loss, total_loss
from csmiles.model.network import CopyTransformer, ModelConfig, decode_step, gen_prob, mix_distribution
from csmiles.model.train import TrainingConfig, teacher_forcing_ratio, train

__all__ = [
    "Batch",
    "CopyTransformer",
    "Example",
    "ModelConfig",
    "TrainingConfig",
    "alignment_loss",
    "collate",
    "copy_index_loss",
    "decode_step",
    "gen_prob",
    "lm_loss",
    "make_example",
    "mix_distribution",
    "teacher_forcing_ratio",
    "total_loss",
    "train",
]
