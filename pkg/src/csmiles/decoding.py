"""Inference: greedy and beam decoding over the mixed distribution, and
per-token copy traces."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import torch

from csmiles.chem.canonical import canonical_smiles
from csmiles.chem.graph import parse_smiles
from csmiles.chem.valence import check_valence
from csmiles.codec import Vocabulary, decode
from csmiles.exceptions import CSmilesError
from csmiles.model.network import CopyTransformer

COPY_THRESHOLD = 0.7


@dataclass
class Hypothesis:
    ids: list[int] = field(default_factory=list)
    log_prob: float = 0.0
    p_gen: list[float] = field(default_factory=list)
    source_index: list[int] = field(default_factory=list)
    finished: bool = False

    def extend(self, token: int, logp: float, p_gen: float, src_idx: int, eos_id: int) -> Hypothesis:
        return Hypothesis(
            [*self.ids, token],
            self.log_prob + logp,
            [*self.p_gen, p_gen],
            [*self.source_index, src_idx],
            token == eos_id,
        )

    def copied_fraction(self, threshold: float = COPY_THRESHOLD) -> float:
        if not self.p_gen:
            return 0.0
        return sum(1.0 - g > threshold for g in self.p_gen) / len(self.p_gen)


@dataclass
class Candidate:
    tokens: list[str]
    smiles: str | None  # None when the token sequence does not decode
    canonical: str | None
    valid: bool
    score: float
    hypothesis: Hypothesis

    @property
    def copied_fraction(self) -> float:
        return self.hypothesis.copied_fraction()


def is_valid_smiles(smiles: str | None) -> bool:
    if smiles is None:
        return False
    try:
        graph = parse_smiles(smiles)
    except CSmilesError:
        return False
    return not check_valence(graph)


def make_candidate(hyp: Hypothesis, vocab: Vocabulary, score: float | None = None) -> Candidate:
    ids = hyp.ids[:-1] if hyp.finished else hyp.ids
    tokens = vocab.lookup(ids)
    smiles = canon = None
    try:
        smiles = decode(tokens)
        canon = canonical_smiles(smiles)
    except CSmilesError:
        pass
    valid = hyp.finished and canon is not None and is_valid_smiles(smiles)
    return Candidate(tokens, smiles, canon, valid, hyp.log_prob if score is None else score, hyp)


def _step(model: CopyTransformer, memory, src, prefixes: torch.Tensor, enable_copy: bool):
    out = model.decode(memory.expand(len(prefixes), -1, -1), src.expand(len(prefixes), -1), prefixes, enable_copy=enable_copy)
    return out.log_probs[:, -1], out.p_gen[:, -1], out.attn[:, -1].argmax(-1)


def _limit(model: CopyTransformer, max_len: int | None) -> int:
    # The prefix (SOS + generated tokens) must fit the positional table.
    cap = model.cfg.max_len - 1
    return cap if max_len is None else min(max_len, cap)


@torch.no_grad()
def greedy_decode(
    model: CopyTransformer,
    src_ids: Sequence[int],
    max_len: int | None = None,
    sos_id: int = Vocabulary.sos_id,
    eos_id: int = Vocabulary.eos_id,
    enable_copy: bool = True,
) -> Hypothesis:
    """Argmax decoding until EOS or ``max_len`` generated tokens."""
    model.eval()
    src = torch.tensor([list(src_ids)], dtype=torch.long)
    memory = model.encode(src)
    hyp = Hypothesis()
    for _ in range(_limit(model, max_len)):
        prefix = torch.tensor([[sos_id, *hyp.ids]], dtype=torch.long)
        logp, p_gen, src_idx = _step(model, memory, src, prefix, enable_copy)
        lp, tok = logp[0].topk(1)
        hyp = hyp.extend(int(tok), float(lp), float(p_gen[0]), int(src_idx[0]), eos_id)
        if hyp.finished:
            break
    return hyp


@torch.no_grad()
def beam_hypotheses(
    model: CopyTransformer,
    src_ids: Sequence[int],
    beam_size: int,
    max_len: int | None = None,
    sos_id: int = Vocabulary.sos_id,
    eos_id: int = Vocabulary.eos_id,
    enable_copy: bool = True,
) -> list[Hypothesis]:
    """Length-synchronous beam search; returns up to ``beam_size`` hypotheses.

    Each step ranks the top ``2 * beam_size`` expansions; those ending in EOS
    within the first ``beam_size`` are finalised and the best non-EOS ones
    continue.  Search stops when no live hypothesis can beat the k-th best
    finished score.  Unfinished hypotheses fill remaining slots when the
    length limit is reached.
    """
    if beam_size < 1:
        raise ValueError("beam_size must be at least 1")
    model.eval()
    src = torch.tensor([list(src_ids)], dtype=torch.long)
    memory = model.encode(src)
    alive = [Hypothesis()]
    finished: list[Hypothesis] = []
    for _ in range(_limit(model, max_len)):
        prefixes = torch.tensor([[sos_id, *h.ids] for h in alive], dtype=torch.long)
        logp, p_gen, src_idx = _step(model, memory, src, prefixes, enable_copy)
        scores = torch.tensor([h.log_prob for h in alive], dtype=logp.dtype)[:, None] + logp
        flat = scores.flatten()
        top = flat.topk(min(2 * beam_size, flat.numel()))
        V = logp.shape[1]
        next_alive: list[Hypothesis] = []
        for rank, idx in enumerate(top.indices.tolist()):
            b, tok = divmod(idx, V)
            hyp = alive[b].extend(tok, float(logp[b, tok]), float(p_gen[b]), int(src_idx[b]), eos_id)
            if hyp.finished:
                if rank < beam_size:
                    finished.append(hyp)
            elif len(next_alive) < beam_size:
                next_alive.append(hyp)
        alive = next_alive
        if not alive:
            break
        # Scores only decrease, so stop once no live hypothesis can still
        # displace the k-th best finished one.
        if len(finished) >= beam_size:
            kth = sorted((h.log_prob for h in finished), reverse=True)[beam_size - 1]
            if max(h.log_prob for h in alive) <= kth:
                break
    finished.sort(key=lambda h: -h.log_prob)
    out = finished[:beam_size]
    if len(out) < beam_size:
        out.extend(sorted(alive, key=lambda h: -h.log_prob)[: beam_size - len(out)])
    return out


def beam_search(
    model: CopyTransformer,
    src_ids: Sequence[int],
    vocab: Vocabulary,
    beam_size: int = 10,
    max_len: int | None = None,
    length_penalty: float = 0.0,
    enable_copy: bool = True,
) -> list[Candidate]:
    """Ranked candidates, deduplicated by canonical form.

    Scores are summed log-probabilities divided by ``len ** length_penalty``
    (plain sums at the default of 0).  Candidates that fail to decode or
    violate valence are kept and flagged ``valid=False``.
    """
    hyps = beam_hypotheses(model, src_ids, beam_size, max_len, vocab.sos_id, vocab.eos_id, enable_copy)
    cands = [
        make_candidate(h, vocab, h.log_prob / max(len(h.ids), 1) ** length_penalty)
        for h in hyps
    ]
    cands.sort(key=lambda c: -c.score)
    seen: set[str] = set()
    out = []
    for c in cands:
        key = c.canonical if c.canonical is not None else "\x00" + " ".join(c.tokens)
        if key in seen:
            continue
        seen.add(key)
        out.append(c)
    return out


@dataclass(frozen=True)
class TraceRecord:
    step: int
    token: str
    p_gen: float
    copy_prob: float
    copied: bool
    source_index: int
    source_token: str


@torch.no_grad()
def copy_trace(
    model: CopyTransformer,
    src_ids: Sequence[int],
    tgt_ids: Sequence[int],
    vocab: Vocabulary,
    threshold: float = COPY_THRESHOLD,
) -> list[TraceRecord]:
    """Teacher-forced per-token copy decisions for a candidate.

    A token counts as copied when ``1 - p_gen`` exceeds ``threshold``.
    """
    model.eval()
    src = torch.tensor([list(src_ids)], dtype=torch.long)
    tgt_in = torch.tensor([[vocab.sos_id, *tgt_ids]], dtype=torch.long)
    out = model(src, tgt_in)
    records = []
    targets = [*tgt_ids, vocab.eos_id]
    for t, tok in enumerate(targets):
        g = float(out.p_gen[0, t])
        j = int(out.attn[0, t].argmax())
        records.append(
            TraceRecord(t, vocab.tokens[tok], g, 1.0 - g, (1.0 - g) > threshold, j, vocab.tokens[src_ids[j]])
        )
    return records


def write_trace(records: Sequence[TraceRecord], stream: IO[str]) -> None:
    w = csv.writer(stream, delimiter="\t", lineterminator="\n")
    w.writerow(["step", "token", "p_gen", "copy_prob", "copied", "source_index", "source_token"])
    for r in records:
        w.writerow([r.step, r.token, f"{r.p_gen:.6f}", f"{r.copy_prob:.6f}", int(r.copied), r.source_index, r.source_token])


def sequence_log_prob(model: CopyTransformer, src_ids: Sequence[int], tgt_ids: Sequence[int], vocab: Vocabulary) -> float:
    """Total log-probability of ``tgt_ids`` followed by EOS."""
    with torch.no_grad():
        model.eval()
        src = torch.tensor([list(src_ids)], dtype=torch.long)
        tgt_in = torch.tensor([[vocab.sos_id, *tgt_ids]], dtype=torch.long)
        out = model(src, tgt_in)
        targets = torch.tensor([*tgt_ids, vocab.eos_id])
        lp = out.log_probs[0].gather(1, targets[:, None]).sum()
    return float(lp) if math.isfinite(float(lp)) else -math.inf
