"""Transformer encoder-decoder with a pointer-generator output head."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import torch
import torch.nn as nn
import torch.nn.functional as F

from csmiles.exceptions import SequenceTooLong, UnknownId

PAD_ID = 0


@dataclass
class ModelConfig:
    vocab_size: int
    num_layers: int = 2
    num_heads: int = 4
    d_model: int = 64
    d_ff: int = 128
    dropout: float = 0.1
    max_len: int = 256
    alignment_layer: int = -1  # negative counts from the last decoder layer
    alignment_head: int = 0

    def __post_init__(self) -> None:
        if min(self.num_layers, self.num_heads, self.d_model, self.d_ff, self.vocab_size) <= 0:
            raise ValueError("model dimensions must be positive")
        if self.d_model % self.num_heads:
            raise ValueError("d_model must be divisible by num_heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if not -self.num_layers <= self.alignment_layer < self.num_layers:
            raise ValueError("alignment_layer out of range")
        if not 0 <= self.alignment_head < self.num_heads:
            raise ValueError("alignment_head out of range")

    @property
    def alignment_layer_index(self) -> int:
        return self.alignment_layer % self.num_layers

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def gen_prob(h_star, s_t, x_t, w_h, w_s, w_x, b):
    """Generation probability ``sigmoid(w_h.h* + w_s.s + w_x.x + b)`` over the last axis."""
    return torch.sigmoid((h_star * w_h).sum(-1) + (s_t * w_s).sum(-1) + (x_t * w_x).sum(-1) + b)


def mix_distribution(p_vocab, attn, p_gen, source_ids):
    """Blend generation and copy distributions.

    ``P(w) = p_gen * p_vocab(w) + (1 - p_gen) * sum(attn_i for source_ids_i == w)``.
    Shapes: ``p_vocab (..., V)``, ``attn (..., S)``, ``p_gen (...)``,
    ``source_ids`` broadcastable to ``attn``.
    """
    source_ids = source_ids.expand_as(attn)
    copy = torch.zeros_like(p_vocab).scatter_add(-1, source_ids, attn)
    g = p_gen.unsqueeze(-1)
    return g * p_vocab + (1.0 - g) * copy


def sinusoidal_positions(max_len: int, d_model: int) -> torch.Tensor:
    pos = torch.arange(max_len, dtype=torch.float64).unsqueeze(1)
    div = torch.exp(torch.arange(0, d_model, 2, dtype=torch.float64) * (-math.log(10000.0) / d_model))
    pe = torch.zeros(max_len, d_model, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(pos * div)
    pe[:, 1::2] = torch.cos(pos * div)[:, : d_model // 2]
    return pe.float()


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, num_heads: int, dropout: float):
        super().__init__()
        self.h = num_heads
        self.d_k = d_model // num_heads
        self.q = nn.Linear(d_model, d_model)
        self.k = nn.Linear(d_model, d_model)
        self.v = nn.Linear(d_model, d_model)
        self.o = nn.Linear(d_model, d_model)
        self.drop = nn.Dropout(dropout)

    def forward(self, query, key_value, mask):
        """Returns the attended output and the per-head weights ``(B, h, Tq, Tk)``.

        ``mask`` is True where attention is allowed and broadcasts to
        ``(B, h, Tq, Tk)``.  The returned weights are taken before dropout.
        """
        B, Tq, _ = query.shape
        Tk = key_value.shape[1]
        q = self.q(query).view(B, Tq, self.h, self.d_k).transpose(1, 2)
        k = self.k(key_value).view(B, Tk, self.h, self.d_k).transpose(1, 2)
        v = self.v(key_value).view(B, Tk, self.h, self.d_k).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_k)
        scores = scores.masked_fill(~mask, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        out = (self.drop(weights) @ v).transpose(1, 2).reshape(B, Tq, self.h * self.d_k)
        return self.o(out), weights


class FeedForward(nn.Sequential):
    def __init__(self, d_model: int, d_ff: int, dropout: float):
        super().__init__(nn.Linear(d_model, d_ff), nn.ReLU(), nn.Dropout(dropout), nn.Linear(d_ff, d_model))


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.attn = MultiHeadAttention(cfg.d_model, cfg.num_heads, cfg.dropout)
        self.norm2 = nn.LayerNorm(cfg.d_model)
        self.ff = FeedForward(cfg.d_model, cfg.d_ff, cfg.dropout)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, x, mask):
        y = self.norm1(x)
        x = x + self.drop(self.attn(y, y, mask)[0])
        return x + self.drop(self.ff(self.norm2(x)))


class DecoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.num_heads, cfg.dropout)
        self.norm2 = nn.LayerNorm(cfg.d_model)
        self.cross_attn = MultiHeadAttention(cfg.d_model, cfg.num_heads, cfg.dropout)
        self.norm3 = nn.LayerNorm(cfg.d_model)
        self.ff = FeedForward(cfg.d_model, cfg.d_ff, cfg.dropout)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, x, memory, self_mask, cross_mask):
        y = self.norm1(x)
        x = x + self.drop(self.self_attn(y, y, self_mask)[0])
        out, cross = self.cross_attn(self.norm2(x), memory, cross_mask)
        x = x + self.drop(out)
        return x + self.drop(self.ff(self.norm3(x))), cross


@dataclass
class ModelOutput:
    log_probs: torch.Tensor  # (B, T, V) log of the mixed distribution
    probs: torch.Tensor  # (B, T, V) mixed distribution
    p_vocab: torch.Tensor  # (B, T, V)
    p_gen: torch.Tensor  # (B, T) gate computed by the model
    attn: torch.Tensor  # (B, T, S) alignment-head cross-attention
    cross_attn: list[torch.Tensor]  # per layer, (B, h, T, S)
    context: torch.Tensor  # (B, T, d) h*
    states: torch.Tensor  # (B, T, d) decoder states s_t
    inputs: torch.Tensor  # (B, T, d) decoder input embeddings x_t


LOG_CLIP = 1e-7


class CopyTransformer(nn.Module):
    """Encoder-decoder whose output mixes generation with copying from the source.

    One (layer, head) of decoder cross-attention serves as the copy
    distribution and is also the head supervised by the alignment loss.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.embed = nn.Embedding(cfg.vocab_size, cfg.d_model, padding_idx=PAD_ID)
        self.register_buffer("positions", sinusoidal_positions(cfg.max_len + 2, cfg.d_model), persistent=False)
        self.drop = nn.Dropout(cfg.dropout)
        self.encoder = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.num_layers))
        self.decoder = nn.ModuleList(DecoderLayer(cfg) for _ in range(cfg.num_layers))
        self.enc_norm = nn.LayerNorm(cfg.d_model)
        self.dec_norm = nn.LayerNorm(cfg.d_model)
        self.generator = nn.Linear(cfg.d_model, cfg.vocab_size)
        self.gate_h = nn.Parameter(torch.zeros(cfg.d_model))
        self.gate_s = nn.Parameter(torch.zeros(cfg.d_model))
        self.gate_x = nn.Parameter(torch.zeros(cfg.d_model))
        self.gate_b = nn.Parameter(torch.zeros(()))
        self._init_weights()

    def _init_weights(self) -> None:
        for name, p in self.named_parameters():
            if p.dim() > 1:
                nn.init.xavier_uniform_(p)
            elif name.startswith("gate_") and p.dim() == 1:
                nn.init.normal_(p, std=0.02)
        with torch.no_grad():
            self.embed.weight[PAD_ID].zero_()

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        scale = math.sqrt(self.cfg.d_model)
        pos = self.positions[: ids.shape[1]].to(self.embed.weight.dtype)
        return self.drop(self.embed(ids) * scale + pos)

    def check_ids(self, ids: torch.Tensor) -> None:
        if ids.shape[-1] > self.cfg.max_len:
            raise SequenceTooLong(f"sequence of length {ids.shape[-1]} exceeds max_len={self.cfg.max_len}")
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= self.cfg.vocab_size):
            raise UnknownId(f"token id outside [0, {self.cfg.vocab_size})")

    def encode(self, src: torch.Tensor) -> torch.Tensor:
        """Encoder output ``H`` of shape ``(B, S, d)``."""
        self.check_ids(src)
        mask = (src != PAD_ID)[:, None, None, :]
        x = self._embed(src)
        for layer in self.encoder:
            x = layer(x, mask)
        return self.enc_norm(x)

    def decode(
        self,
        memory: torch.Tensor,
        src: torch.Tensor,
        tgt_in: torch.Tensor,
        gate_mask: torch.Tensor | None = None,
        gate_value: torch.Tensor | None = None,
        enable_copy: bool = True,
    ) -> ModelOutput:
        """Teacher-forced decoder pass over ``tgt_in``.

        Where ``gate_mask`` is True the supplied ``gate_value`` replaces the
        model's own p_gen when mixing distributions.
        """
        self.check_ids(tgt_in)
        T = tgt_in.shape[1]
        causal = torch.tril(torch.ones(T, T, dtype=torch.bool, device=tgt_in.device))
        self_mask = causal[None, None] & (tgt_in != PAD_ID)[:, None, None, :]
        cross_mask = (src != PAD_ID)[:, None, None, :]
        x_in = self._embed(tgt_in)
        x = x_in
        cross: list[torch.Tensor] = []
        for layer in self.decoder:
            x, attn = layer(x, memory, self_mask, cross_mask)
            cross.append(attn)
        states = self.dec_norm(x)
        a = cross[self.cfg.alignment_layer_index][:, self.cfg.alignment_head]
        context = a @ memory
        p_gen = gen_prob(context, states, x_in, self.gate_h, self.gate_s, self.gate_x, self.gate_b)
        p_vocab = torch.softmax(self.generator(states), dim=-1)
        if not enable_copy:
            gate = torch.ones_like(p_gen)
        elif gate_mask is not None:
            gate = torch.where(gate_mask, gate_value.to(p_gen.dtype), p_gen)  # type: ignore[union-attr]
        else:
            gate = p_gen
        probs = mix_distribution(p_vocab, a, gate, src[:, None, :])
        return ModelOutput(
            log_probs=torch.log(probs.clamp_min(LOG_CLIP)),
            probs=probs,
            p_vocab=p_vocab,
            p_gen=p_gen,
            attn=a,
            cross_attn=cross,
            context=context,
            states=states,
            inputs=x_in,
        )

    def forward(self, src, tgt_in, gate_mask=None, gate_value=None, enable_copy=True) -> ModelOutput:
        return self.decode(self.encode(src), src, tgt_in, gate_mask, gate_value, enable_copy)


@dataclass
class DecoderStep:
    state: torch.Tensor  # (B, d)
    input: torch.Tensor  # (B, d)
    attn: torch.Tensor  # (B, h, S) alignment-layer cross-attention, all heads
    context: torch.Tensor  # (B, d)
    p_gen: torch.Tensor  # (B,)
    log_probs: torch.Tensor  # (B, V)


@torch.no_grad()
def decode_step(model: CopyTransformer, memory, src, prefix, enable_copy: bool = True) -> DecoderStep:
    """Distribution for the token following ``prefix`` (which starts with SOS)."""
    out = model.decode(memory, src, prefix, enable_copy=enable_copy)
    layer = out.cross_attn[model.cfg.alignment_layer_index]
    return DecoderStep(
        state=out.states[:, -1],
        input=out.inputs[:, -1],
        attn=layer[:, :, -1],
        context=out.context[:, -1],
        p_gen=out.p_gen[:, -1],
        log_probs=out.log_probs[:, -1],
    )


def cross_entropy_terms(log_probs: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    return F.nll_loss(log_probs.transpose(1, 2), targets, ignore_index=PAD_ID, reduction="none")
