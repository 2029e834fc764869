"""Finite-difference verification of autograd gradients."""

from __future__ import annotations

import copy
from typing import Iterable

import torch

from csmiles.exceptions import GradMismatch
from csmiles.model.data import Batch
from csmiles.model.losses import alignment_loss, copy_index_loss, lm_loss
from csmiles.model.network import CopyTransformer

TERMS = ("lm", "sa", "ci", "total")


def loss_term(model: CopyTransformer, batch: Batch, cfg, term: str) -> torch.Tensor:
    out = model(batch.src, batch.tgt_in, enable_copy=cfg.enable_copy)
    lm = lm_loss(out.log_probs, batch.tgt_out)
    sa = alignment_loss(out.attn, batch.sam, batch.row_mask, batch.col_mask)
    ci = copy_index_loss(out.p_gen, batch.copy_labels, batch.row_mask)
    if term == "lm":
        return lm
    if term == "sa":
        return sa
    if term == "ci":
        return ci
    if term == "total":
        return lm + cfg.lambda_sa * sa + cfg.lambda_ci * ci
    raise ValueError(f"unknown loss term {term!r}")


def grad_check(
    model: CopyTransformer,
    batch: Batch,
    cfg,
    params: Iterable[str] | None = None,
    terms: Iterable[str] = TERMS,
    entries: int = 4,
    step: float = 1e-4,
    tolerance: float = 1e-3,
    floor: float = 1e-8,
    seed: int = 0,
) -> dict[str, dict[str, float]]:
    """Compare autograd gradients with central differences in float64.

    For every term and every selected parameter, ``entries`` random elements
    are probed.  Relative error is ``|g - fd| / max(|g|, |fd|, floor)``.
    Returns ``{term: {param: max relative error}}`` and raises
    :class:`GradMismatch` for the first value above ``tolerance``.
    """
    model = copy.deepcopy(model).double().eval()
    batch = batch.to(torch.float64)
    named = dict(model.named_parameters())
    names = list(named) if params is None else list(params)
    gen = torch.Generator().manual_seed(seed)
    report: dict[str, dict[str, float]] = {}
    for term in terms:
        model.zero_grad()
        loss_term(model, batch, cfg, term).backward()
        analytic = {n: named[n].grad.detach().clone() if named[n].grad is not None else torch.zeros_like(named[n]) for n in names}
        report[term] = {}
        for name in names:
            p = named[name]
            flat = p.data.view(-1)
            picks = torch.randperm(flat.numel(), generator=gen)[:entries].tolist()
            worst = 0.0
            for idx in picks:
                orig = flat[idx].item()
                with torch.no_grad():
                    flat[idx] = orig + step
                    up = loss_term(model, batch, cfg, term).item()
                    flat[idx] = orig - step
                    down = loss_term(model, batch, cfg, term).item()
                    flat[idx] = orig
                fd = (up - down) / (2 * step)
                g = analytic[name].view(-1)[idx].item()
                rel = abs(g - fd) / max(abs(g), abs(fd), floor)
                worst = max(worst, rel)
            report[term][name] = worst
            if worst >= tolerance:
                raise GradMismatch(f"{term}:{name}", worst)
    return report
