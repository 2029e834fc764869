"""Tensorised training examples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from csmiles.alignment import copy_labels, smooth
from csmiles.codec import Vocabulary
from csmiles.model.network import PAD_ID


@dataclass
class Example:
    """One source/target pair in id space.

    ``sam`` is the binary alignment with one row per target token plus a
    final all-zero row for EOS, and one column per source id.
    """

    src: list[int]
    tgt: list[int]
    sam: np.ndarray

    def __post_init__(self) -> None:
        expected = (len(self.tgt) + 1, len(self.src))
        if self.sam.shape != expected:
            raise ValueError(f"alignment shape {self.sam.shape}, expected {expected}")


def make_example(src: Sequence[int], tgt: Sequence[int], sam: np.ndarray | None = None, n_prefix: int = 0) -> Example:
    """Build an :class:`Example`, padding ``sam`` with the EOS row and
    ``n_prefix`` leading zero columns (for prepended class tokens)."""
    rows, cols = len(tgt), len(src)
    full = np.zeros((rows + 1, cols), dtype=np.uint8)
    if sam is not None:
        full[:rows, n_prefix:] = sam
    return Example(list(src), list(tgt), full)


@dataclass
class Batch:
    src: torch.Tensor  # (B, S)
    tgt_in: torch.Tensor  # (B, T) SOS + target
    tgt_out: torch.Tensor  # (B, T) target + EOS
    sam: torch.Tensor  # (B, T, S) smoothed alignment
    sam_binary: torch.Tensor  # (B, T, S)
    copy_labels: torch.Tensor  # (B, T) 1 = generate
    row_mask: torch.Tensor  # (B, T)
    col_mask: torch.Tensor  # (B, S)

    def to(self, dtype: torch.dtype) -> Batch:
        return Batch(
            self.src,
            self.tgt_in,
            self.tgt_out,
            self.sam.to(dtype),
            self.sam_binary,
            self.copy_labels.to(dtype),
            self.row_mask.to(dtype),
            self.col_mask.to(dtype),
        )


def collate(examples: Sequence[Example], epsilon: float = 0.1, sos_id: int = Vocabulary.sos_id, eos_id: int = Vocabulary.eos_id) -> Batch:
    B = len(examples)
    S = max(len(e.src) for e in examples)
    T = max(len(e.tgt) for e in examples) + 1
    src = torch.full((B, S), PAD_ID, dtype=torch.long)
    tgt_in = torch.full((B, T), PAD_ID, dtype=torch.long)
    tgt_out = torch.full((B, T), PAD_ID, dtype=torch.long)
    sam = torch.zeros(B, T, S)
    sam_bin = torch.zeros(B, T, S)
    labels = torch.ones(B, T)
    row_mask = torch.zeros(B, T)
    col_mask = torch.zeros(B, S)
    for b, e in enumerate(examples):
        n, m = len(e.src), len(e.tgt) + 1
        src[b, :n] = torch.tensor(e.src)
        tgt_in[b, :m] = torch.tensor([sos_id, *e.tgt])
        tgt_out[b, :m] = torch.tensor([*e.tgt, eos_id])
        sam[b, :m, :n] = torch.from_numpy(smooth(e.sam, epsilon)).float()
        sam_bin[b, :m, :n] = torch.from_numpy(e.sam.astype(np.float32))
        labels[b, :m] = torch.from_numpy(copy_labels(e.sam).astype(np.float32))
        row_mask[b, :m] = 1
        col_mask[b, :n] = 1
    return Batch(src, tgt_in, tgt_out, sam, sam_bin, labels, row_mask, col_mask)
