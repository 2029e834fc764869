"""Deterministic training loop with annealed teacher forcing of the copy gate."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import torch

from csmiles.exceptions import DivergedLoss, EmptyDataset
from csmiles.model.data import Batch, Example, collate
from csmiles.model.losses import total_loss
from csmiles.model.network import PAD_ID, CopyTransformer, ModelConfig

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("epoch", "lm", "sa", "ci", "total", "tf_tau", "token_acc")


@dataclass
class TrainingConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-9
    lambda_sa: float = 0.1
    lambda_ci: float = 0.1
    epsilon_smooth: float = 0.1
    tf_start: float = 1.0
    tf_end: float = 0.1
    tf_fraction: float = 0.5
    rdrop_enabled: bool = False
    rdrop_alpha: float = 1.0
    enable_copy: bool = True
    enable_sa: bool = True
    enable_ci: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("lr", "lambda_sa", "lambda_ci", "epsilon_smooth", "rdrop_alpha", "tf_start", "tf_end"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def teacher_forcing_ratio(epoch: int, total_epochs: int, cfg: TrainingConfig) -> float:
    """Linear decay from ``tf_start`` to ``tf_end`` over the first ``tf_fraction`` of epochs."""
    span = cfg.tf_fraction * total_epochs
    if span <= 0 or epoch >= span:
        return cfg.tf_end
    return cfg.tf_start + (cfg.tf_end - cfg.tf_start) * epoch / span


@dataclass
class EpochMetrics:
    epoch: int
    lm: float
    sa: float
    ci: float
    total: float
    tf_tau: float
    token_acc: float

    def row(self) -> list[str]:
        return [str(self.epoch)] + [f"{getattr(self, c):.6f}" for c in METRIC_COLUMNS[1:]]


@dataclass
class TrainResult:
    model: CopyTransformer
    history: list[EpochMetrics] = field(default_factory=list)


def batches(examples: Sequence[Example], batch_size: int, order: Sequence[int], epsilon: float) -> list[Batch]:
    return [
        collate([examples[i] for i in order[k : k + batch_size]], epsilon)
        for k in range(0, len(order), batch_size)
    ]


@torch.no_grad()
def token_accuracy(model: CopyTransformer, examples: Sequence[Example], enable_copy: bool = True, batch_size: int = 64) -> float:
    """Teacher-forced argmax accuracy over target tokens including EOS."""
    was_training = model.training
    model.eval()
    hit = total = 0
    for k in range(0, len(examples), batch_size):
        b = collate(examples[k : k + batch_size])
        out = model(b.src, b.tgt_in, enable_copy=enable_copy)
        mask = b.tgt_out != PAD_ID
        hit += int(((out.probs.argmax(-1) == b.tgt_out) & mask).sum())
        total += int(mask.sum())
    model.train(was_training)
    return hit / max(total, 1)


Dataset = Sequence[Example] | Callable[[int], Sequence[Example]]


def train(
    dataset: Dataset,
    model_cfg: ModelConfig,
    cfg: TrainingConfig,
    metrics_path: str | Path | None = None,
    model: CopyTransformer | None = None,
) -> TrainResult:
    """Train a :class:`CopyTransformer`.

    ``dataset`` is either a fixed list of examples or a callable returning
    the examples for a given epoch (used for on-the-fly augmentation).  At
    every target position the ground-truth copy decision replaces the
    model's gate with probability ``teacher_forcing_ratio(epoch)``.
    """
    torch.manual_seed(cfg.seed)
    gen = torch.Generator().manual_seed(cfg.seed)
    model = model or CopyTransformer(model_cfg)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2), eps=cfg.adam_eps)
    result = TrainResult(model)
    writer = None
    handle = None
    if metrics_path is not None:
        handle = open(metrics_path, "w", newline="")
        writer = csv.writer(handle)
        writer.writerow(METRIC_COLUMNS)
    try:
        for epoch in range(cfg.epochs):
            examples = dataset(epoch) if callable(dataset) else dataset
            if not examples:
                raise EmptyDataset("no training examples")
            tau = teacher_forcing_ratio(epoch, cfg.epochs, cfg)
            order = torch.randperm(len(examples), generator=gen).tolist()
            model.train()
            sums = [0.0, 0.0, 0.0, 0.0]
            nb = 0
            for batch in batches(examples, cfg.batch_size, order, cfg.epsilon_smooth):
                gate_mask = torch.rand(batch.tgt_in.shape, generator=gen) < tau
                loss, parts, _ = total_loss(model, batch, cfg, gate_mask)
                if not math.isfinite(parts.total):
                    raise DivergedLoss(f"non-finite loss at epoch {epoch}")
                opt.zero_grad()
                loss.backward()
                opt.step()
                for i, v in enumerate((parts.lm, parts.sa, parts.ci, parts.total)):
                    sums[i] += v
                nb += 1
            acc = token_accuracy(model, examples, cfg.enable_copy)
            m = EpochMetrics(epoch, *(s / nb for s in sums), tau, acc)
            result.history.append(m)
            log.info("epoch %d total=%.4f lm=%.4f acc=%.3f tau=%.2f", epoch, m.total, m.lm, acc, tau)
            if writer is not None:
                writer.writerow(m.row())
    finally:
        if handle is not None:
            handle.close()
    return result
