"""Synthetic probe tasks for the copy gate.

The identity task asks the model to reproduce its input (every target token
is aligned to the matching source position).  The transliteration task
maps each source symbol to a partner from a disjoint alphabet, so nothing
can be copied.
"""

from __future__ import annotations

import random

import numpy as np
import torch

from csmiles.codec import Vocabulary
from csmiles.model.data import Example, collate, make_example
from csmiles.model.network import CopyTransformer

SOURCE_ALPHABET = tuple(f"a{i}" for i in range(10))
TARGET_ALPHABET = tuple(f"b{i}" for i in range(10))


def probe_vocab() -> Vocabulary:
    return Vocabulary([*SOURCE_ALPHABET, *TARGET_ALPHABET])


def _sequences(n: int, rng: random.Random, min_len: int, max_len: int) -> list[list[int]]:
    return [
        [rng.randrange(len(SOURCE_ALPHABET)) for _ in range(rng.randint(min_len, max_len))]
        for _ in range(n)
    ]


def identity_task(n: int, seed: int = 0, min_len: int = 5, max_len: int = 12, vocab: Vocabulary | None = None) -> list[Example]:
    vocab = vocab or probe_vocab()
    rng = random.Random(seed)
    out = []
    for seq in _sequences(n, rng, min_len, max_len):
        ids = vocab.ids(SOURCE_ALPHABET[k] for k in seq)
        out.append(make_example(ids, ids, np.eye(len(ids), dtype=np.uint8)))
    return out


def transliteration_task(n: int, seed: int = 0, min_len: int = 5, max_len: int = 12, vocab: Vocabulary | None = None) -> list[Example]:
    vocab = vocab or probe_vocab()
    rng = random.Random(seed)
    out = []
    for seq in _sequences(n, rng, min_len, max_len):
        src = vocab.ids(SOURCE_ALPHABET[k] for k in seq)
        tgt = vocab.ids(TARGET_ALPHABET[k] for k in seq)
        out.append(make_example(src, tgt, np.zeros((len(tgt), len(src)), dtype=np.uint8)))
    return out


@torch.no_grad()
def copy_probabilities(model: CopyTransformer, examples: list[Example]) -> np.ndarray:
    """Teacher-forced ``1 - p_gen`` at every target token (EOS excluded)."""
    model.eval()
    batch = collate(examples)
    out = model(batch.src, batch.tgt_in)
    values = []
    for b, e in enumerate(examples):
        values.append(1.0 - out.p_gen[b, : len(e.tgt)].double().numpy())
    return np.concatenate(values)
