"""Training objectives: language-model CE (optionally R-Drop), copy-index BCE,
alignment BCE, and their weighted sum."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from csmiles.exceptions import LengthMismatch, ShapeMismatch
from csmiles.model.network import LOG_CLIP, PAD_ID, CopyTransformer, ModelOutput


def _clip(p: torch.Tensor) -> torch.Tensor:
    return p.clamp(LOG_CLIP, 1.0 - LOG_CLIP)


def lm_loss(log_probs: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean token cross-entropy; positions holding the pad id are ignored."""
    if log_probs.shape[:-1] != targets.shape:
        raise LengthMismatch(f"log_probs {tuple(log_probs.shape)} vs targets {tuple(targets.shape)}")
    picked = log_probs.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    mask = targets != PAD_ID
    return -(picked * mask).sum() / mask.sum().clamp_min(1)


def symmetric_kl(p: torch.Tensor, q: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean over unmasked positions of ``(KL(p||q) + KL(q||p)) / 2``."""
    lp, lq = torch.log(p.clamp_min(LOG_CLIP)), torch.log(q.clamp_min(LOG_CLIP))
    kl = 0.5 * ((p * (lp - lq)).sum(-1) + (q * (lq - lp)).sum(-1))
    return (kl * mask).sum() / mask.sum().clamp_min(1)


def copy_index_loss(
    p_gen: torch.Tensor, labels: torch.Tensor, mask: torch.Tensor | None = None
) -> torch.Tensor:
    """``-sum_t [y log p_gen + (1 - y) log(1 - p_gen)]`` per sequence, averaged over the batch.

    ``labels`` use 1 for "generate" and 0 for "copy".
    """
    if p_gen.shape != labels.shape:
        raise LengthMismatch(f"p_gen {tuple(p_gen.shape)} vs labels {tuple(labels.shape)}")
    p = _clip(p_gen)
    y = labels.to(p.dtype)
    bce = -(y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p))
    if mask is not None:
        bce = bce * mask
    if bce.dim() <= 1:
        return bce.sum()
    return bce.sum(-1).mean()


def alignment_loss(
    attn: torch.Tensor,
    sam: torch.Tensor,
    row_mask: torch.Tensor | None = None,
    col_mask: torch.Tensor | None = None,
) -> torch.Tensor:
    """Binary cross-entropy between attention rows and the smoothed alignment.

    ``attn`` and ``sam`` are ``(T, S)`` or ``(B, T, S)``.  Each sequence's sum
    over cells is divided by its number of valid rows; sequences are averaged.
    """
    if attn.shape != sam.shape:
        raise ShapeMismatch(f"attention {tuple(attn.shape)} vs alignment {tuple(sam.shape)}")
    if attn.dim() == 2:
        attn, sam = attn.unsqueeze(0), sam.unsqueeze(0)
        row_mask = None if row_mask is None else row_mask.unsqueeze(0)
        col_mask = None if col_mask is None else col_mask.unsqueeze(0)
    a = _clip(attn)
    s = sam.to(a.dtype)
    cell = -(s * torch.log(a) + (1.0 - s) * torch.log(1.0 - a))
    B, T, S = cell.shape
    rows = torch.ones(B, T, dtype=a.dtype) if row_mask is None else row_mask.to(a.dtype)
    cols = torch.ones(B, S, dtype=a.dtype) if col_mask is None else col_mask.to(a.dtype)
    cell = cell * rows[:, :, None] * cols[:, None, :]
    per_seq = cell.sum((1, 2)) / rows.sum(1).clamp_min(1)
    return per_seq.mean()


@dataclass
class LossBreakdown:
    lm: float
    sa: float
    ci: float
    total: float


def total_loss(
    model: CopyTransformer,
    batch,
    cfg,
    gate_mask: torch.Tensor | None = None,
) -> tuple[torch.Tensor, LossBreakdown, ModelOutput]:
    """``L_LM + lambda_SA * L_SA + lambda_CI * L_CI`` with ablation switches applied.

    ``batch`` is a :class:`csmiles.model.data.Batch`, ``cfg`` a
    :class:`csmiles.model.train.TrainingConfig`.
    """
    gate_value = batch.copy_labels
    out = model(batch.src, batch.tgt_in, gate_mask, gate_value, enable_copy=cfg.enable_copy)
    lm = lm_loss(out.log_probs, batch.tgt_out)
    if cfg.rdrop_enabled:
        out2 = model(batch.src, batch.tgt_in, gate_mask, gate_value, enable_copy=cfg.enable_copy)
        lm = 0.5 * (lm + lm_loss(out2.log_probs, batch.tgt_out))
        lm = lm + cfg.rdrop_alpha * symmetric_kl(out.probs, out2.probs, batch.row_mask)
    sa = alignment_loss(out.attn, batch.sam, batch.row_mask, batch.col_mask)
    ci = copy_index_loss(out.p_gen, batch.copy_labels, batch.row_mask)
    loss = lm
    if cfg.enable_sa and cfg.lambda_sa:
        loss = loss + cfg.lambda_sa * sa
    if cfg.enable_ci and cfg.lambda_ci:
        loss = loss + cfg.lambda_ci * ci
    parts = LossBreakdown(float(lm.detach()), float(sa.detach()), float(ci.detach()), float(loss.detach()))
    return loss, parts, out
