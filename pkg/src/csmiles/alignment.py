"""SMILES alignment maps from atom-mapped reactions.

Rows index reactant (target) C-SMILES tokens and columns index product
(source) C-SMILES tokens.  Alignment is first computed on raw SMILES tokens,
where atom maps are visible, then projected onto C-SMILES positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from csmiles.chem.tokenizer import Token, TokenKind, tokenize
from csmiles.chem.valence import demapped_token_texts
from csmiles.codec import CSmilesSequence, encode
from csmiles.exceptions import DuplicateAtomMap

DEFAULT_EPSILON = 0.1


@dataclass
class AlignmentMap:
    matrix: np.ndarray  # (|R|, |P|) uint8
    reactant: CSmilesSequence
    product: CSmilesSequence
    raw: np.ndarray  # raw-token level alignment, (|T_R|, |T_P|)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape  # type: ignore[return-value]


def _map_index(tokens: list[Token], side: str) -> dict[int, int]:
    index: dict[int, int] = {}
    for tok in tokens:
        if tok.atom is not None and tok.atom.atom_map is not None:
            m = tok.atom.atom_map
            if m in index:
                raise DuplicateAtomMap(f"atom map {m} appears twice in the {side}")
            index[m] = tok.position
    return index


def _same_map(a: Token, b: Token) -> bool:
    return (
        a.atom is not None
        and b.atom is not None
        and a.atom.atom_map is not None
        and a.atom.atom_map == b.atom.atom_map
    )


def raw_alignment(tokens_p: list[Token], tokens_r: list[Token]) -> np.ndarray:
    """Token-level alignment of reactant tokens (rows) to product tokens."""
    p_maps = _map_index(tokens_p, "product")
    _map_index(tokens_r, "reactants")
    sam = np.zeros((len(tokens_r), len(tokens_p)), dtype=np.uint8)
    anchors: list[tuple[int, int]] = []
    for r in tokens_r:
        if r.atom is None or r.atom.atom_map not in p_maps:
            continue
        i, j = r.position, p_maps[r.atom.atom_map]  # type: ignore[index]
        while i < len(tokens_r) and j < len(tokens_p):
            a, b = tokens_r[i], tokens_p[j]
            if not (a.text == b.text or _same_map(a, b)):
                break
            sam[i, j] = 1
            if a.kind is TokenKind.ATOM:
                anchors.append((i, j))
            i += 1
            j += 1
    # Extend each aligned atom pair over identical neighbouring non-atom tokens.
    for i, j in anchors:
        for step in (-1, 1):
            k = 1
            while 0 <= i + step * k < len(tokens_r) and 0 <= j + step * k < len(tokens_p):
                a, b = tokens_r[i + step * k], tokens_p[j + step * k]
                if a.kind is TokenKind.ATOM or b.kind is TokenKind.ATOM or a.text != b.text:
                    break
                sam[i + step * k, j + step * k] = 1
                k += 1
    return sam


def _spans(seq: CSmilesSequence, n_raw: int) -> list[list[int]]:
    spans: list[list[int]] = [[] for _ in range(n_raw)]
    for pos, src in enumerate(seq.source_span):
        spans[src].append(pos)
    return spans


def build_sam(mapped_product: str, mapped_reactants: str) -> AlignmentMap:
    """Alignment map between the de-mapped C-SMILES of both sides.

    A raw token pair is projected onto C-SMILES cells only when both tokens
    decompose into the identical C-SMILES token list.
    """
    tokens_p = tokenize(mapped_product)
    tokens_r = tokenize(mapped_reactants)
    raw = raw_alignment(tokens_p, tokens_r)

    product = encode("".join(demapped_token_texts(mapped_product)))
    reactant = encode("".join(demapped_token_texts(mapped_reactants)))
    spans_p = _spans(product, len(tokens_p))
    spans_r = _spans(reactant, len(tokens_r))

    sam = np.zeros((len(reactant), len(product)), dtype=np.uint8)
    for i, j in zip(*np.nonzero(raw)):
        rows, cols = spans_r[i], spans_p[j]
        if [reactant.tokens[r] for r in rows] == [product.tokens[c] for c in cols]:
            sam[rows, cols] = 1
    return AlignmentMap(sam, reactant, product, raw)


def smooth(sam: np.ndarray | AlignmentMap, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Label-smoothed alignment: ``(1 - eps) * SAM + eps / |P|``."""
    matrix = sam.matrix if isinstance(sam, AlignmentMap) else sam
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon must be in [0, 1), got {epsilon}")
    n_cols = matrix.shape[1]
    if n_cols == 0:
        return matrix.astype(np.float64)
    return (1.0 - epsilon) * matrix.astype(np.float64) + epsilon / n_cols


def copy_labels(sam: np.ndarray | AlignmentMap) -> np.ndarray:
    """Per-row generate/copy labels: 1 (generate) iff the row has no alignment."""
    matrix = sam.matrix if isinstance(sam, AlignmentMap) else sam
    if matrix.shape[1] == 0:
        return np.ones(matrix.shape[0], dtype=np.int64)
    return (matrix.max(axis=1) == 0).astype(np.int64)
