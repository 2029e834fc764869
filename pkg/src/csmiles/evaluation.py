"""Accuracy, validity, edit-distance analytics and attention dumps."""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np
import torch

from csmiles.chem.canonical import canonical_smiles
from csmiles.chem.valence import demap_smiles
from csmiles.codec import encode, raw_tokens
from csmiles.decoding import Candidate, is_valid_smiles
from csmiles.exceptions import CSmilesError, GoldParseError
from csmiles.model.network import CopyTransformer

DEFAULT_KS = (1, 3, 5, 10)


def levenshtein(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Token-level edit distance with unit insert, delete and substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def molecule_multiset(smiles: str) -> tuple[str, ...]:
    """Sorted canonical strings of the '.'-separated molecules, maps stripped."""
    return tuple(sorted(canonical_smiles(part) for part in smiles.split(".")))


def _candidate_key(cand: Candidate | str | None) -> tuple[str, ...] | None:
    smiles = cand.smiles if isinstance(cand, Candidate) else cand
    if smiles is None:
        return None
    try:
        return molecule_multiset(smiles)
    except CSmilesError:
        return None


def topk_accuracy(
    predictions: Sequence[Sequence[Candidate | str | None]],
    gold: Sequence[str],
    ks: Sequence[int] = DEFAULT_KS,
) -> dict[int, float]:
    """Fraction of records whose gold reactant set is among the first k candidates."""
    if len(predictions) != len(gold):
        raise ValueError("predictions and gold differ in length")
    hits = {k: 0 for k in ks}
    for n, (cands, g) in enumerate(zip(predictions, gold)):
        try:
            target = molecule_multiset(g)
        except CSmilesError as exc:
            raise GoldParseError(f"gold record {n} does not parse: {exc}") from exc
        rank = next((i for i, c in enumerate(cands) if _candidate_key(c) == target), None)
        for k in ks:
            hits[k] += rank is not None and rank < k
    total = max(len(gold), 1)
    return {k: hits[k] / total for k in ks}


def _is_valid(cand: Candidate | str | bool | None) -> bool:
    if isinstance(cand, bool):  # flag already decided, e.g. read back from a predictions file
        return cand
    return cand.valid if isinstance(cand, Candidate) else is_valid_smiles(cand)


def validity(
    predictions: Sequence[Sequence[Candidate | str | bool | None]],
    ks: Sequence[int] = DEFAULT_KS,
) -> dict[int, float]:
    """Mean fraction of the first k candidates that parse and pass valence."""
    sums = {k: 0.0 for k in ks}
    for cands in predictions:
        flags = [_is_valid(c) for c in cands]
        for k in ks:
            head = flags[:k]
            sums[k] += sum(head) / len(head) if head else 0.0
    total = max(len(predictions), 1)
    return {k: sums[k] / total for k in ks}


@dataclass
class EditDistanceReport:
    raw: list[int]  # tokens of the corpus strings as written
    csmiles: list[int]  # C-SMILES of the map-free strings
    raw_demapped: list[int]  # raw tokens after dropping maps

    def _summary(self, values: list[int]) -> tuple[float, float]:
        return statistics.fmean(values), statistics.median(values)

    def summary(self) -> dict[str, float]:
        n = len(self.raw)
        if n == 0:
            return {"reactions": 0}
        raw_mean, raw_med = self._summary(self.raw)
        cs_mean, cs_med = self._summary(self.csmiles)
        dm_mean, dm_med = self._summary(self.raw_demapped)
        return {
            "reactions": n,
            "raw_mean": raw_mean,
            "raw_median": raw_med,
            "csmiles_mean": cs_mean,
            "csmiles_median": cs_med,
            "delta_mean": cs_mean - raw_mean,
            "frac_csmiles_le_raw": sum(c <= r for c, r in zip(self.csmiles, self.raw)) / n,
            "raw_demapped_mean": dm_mean,
            "raw_demapped_median": dm_med,
            "delta_demapped_mean": cs_mean - dm_mean,
            "frac_csmiles_le_raw_demapped": sum(c <= r for c, r in zip(self.csmiles, self.raw_demapped)) / n,
        }


def edit_distance_report(reactions: Iterable[tuple[str, str]]) -> EditDistanceReport:
    """Product-to-reactants token edit distances for (product, reactants) pairs."""
    raw, cs, dm = [], [], []
    for product, reactants in reactions:
        raw.append(levenshtein(raw_tokens(product), raw_tokens(reactants)))
        p, r = demap_smiles(product), demap_smiles(reactants)
        cs.append(levenshtein(encode(p).tokens, encode(r).tokens))
        dm.append(levenshtein(raw_tokens(p), raw_tokens(r)))
    return EditDistanceReport(raw, cs, dm)


# ---------------------------------------------------------------------------
# attention diagnostics


def write_pgm(matrix: np.ndarray, path: Path) -> None:
    """8-bit binary PGM, each row scaled by its maximum."""
    m = np.asarray(matrix, dtype=np.float64)
    peak = m.max(axis=1, keepdims=True) if m.size else m
    scaled = np.divide(m, peak, out=np.zeros_like(m), where=peak > 0)
    pixels = np.rint(scaled * 255).astype(np.uint8)
    rows, cols = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_pgm(path: Path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    cols, rows = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: rows * cols], dtype=np.uint8).reshape(rows, cols)


@torch.no_grad()
def attention_matrix(model: CopyTransformer, src_ids: Sequence[int], tgt_ids: Sequence[int], sos_id: int = 1) -> np.ndarray:
    """Teacher-forced alignment-head attention, one row per target token plus EOS."""
    model.eval()
    src = torch.tensor([list(src_ids)], dtype=torch.long)
    tgt_in = torch.tensor([[sos_id, *tgt_ids]], dtype=torch.long)
    return model(src, tgt_in).attn[0].double().numpy()


def attention_dump(
    model: CopyTransformer,
    src_ids: Sequence[int],
    tgt_ids: Sequence[int],
    sam: np.ndarray,
    prefix: Path | str,
    sos_id: int = 1,
) -> dict[str, Path]:
    """Write ``<prefix>.attn.csv/.pgm`` and ``<prefix>.sam.csv/.pgm``."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    attn = attention_matrix(model, src_ids, tgt_ids, sos_id)
    paths = {}
    for name, matrix, fmt in (("attn", attn, "%.8g"), ("sam", np.asarray(sam, dtype=np.float64), "%.6g")):
        csv_path = prefix.with_name(f"{prefix.name}.{name}.csv")
        pgm_path = prefix.with_name(f"{prefix.name}.{name}.pgm")
        np.savetxt(csv_path, matrix, delimiter=",", fmt=fmt)
        write_pgm(matrix, pgm_path)
        paths[f"{name}_csv"] = csv_path
        paths[f"{name}_pgm"] = pgm_path
    return paths


def aligned_attention_mass(attn: np.ndarray, sam: np.ndarray) -> float:
    """Mean, over rows with at least one aligned cell, of the attention on aligned cells."""
    sam = np.asarray(sam) > 0
    rows = sam.any(axis=1)
    if not rows.any():
        return 0.0
    return float((np.asarray(attn) * sam).sum(axis=1)[rows].mean())


def aligned_vs_unaligned(attn: np.ndarray, sam: np.ndarray) -> tuple[float, float]:
    """Mean attention per aligned cell and per unaligned cell (aligned rows only)."""
    sam = np.asarray(sam) > 0
    rows = sam.any(axis=1)
    a, s = np.asarray(attn)[rows], sam[rows]
    on = float(a[s].mean()) if s.any() else 0.0
    off = float(a[~s].mean()) if (~s).any() else 0.0
    return on, off
