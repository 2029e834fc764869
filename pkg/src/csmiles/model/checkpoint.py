"""Binary checkpoint format.

Layout (little endian)::

    b"CSMK1"
    u32 config_len, config bytes (UTF-8 "key = value" lines)
    u32 n_tensors
    per tensor: u32 name_len, name bytes, u32 rank, rank * u32 dims, f32 data
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np
import torch

from csmiles.codec import Vocabulary
from csmiles.exceptions import CSmilesError
from csmiles.model.network import CopyTransformer, ModelConfig

MAGIC = b"CSMK1"


class CheckpointError(CSmilesError, ValueError):
    pass


def _format_config(model_cfg: ModelConfig, vocab: Vocabulary, extra: dict[str, str]) -> bytes:
    lines = [f"model.{k} = {v}" for k, v in model_cfg.to_dict().items()]
    lines += [f"{k} = {v}" for k, v in sorted(extra.items())]
    lines.append("vocab = " + " ".join(vocab.tokens))
    return ("\n".join(lines) + "\n").encode()


def save_checkpoint(path: str | Path, model: CopyTransformer, vocab: Vocabulary, extra: dict[str, str] | None = None) -> str:
    """Write the checkpoint and return its SHA-256 hex digest."""
    config = _format_config(model.cfg, vocab, extra or {})
    state = model.state_dict()
    parts = [MAGIC, struct.pack("<I", len(config)), config, struct.pack("<I", len(state))]
    for name, tensor in state.items():
        data = tensor.detach().cpu().numpy().astype("<f4")
        encoded = name.encode()
        parts.append(struct.pack("<I", len(encoded)) + encoded)
        parts.append(struct.pack("<I", data.ndim) + struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(data.tobytes())
    blob = b"".join(parts)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def _parse_value(raw: str):
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    if raw in ("True", "False"):
        return raw == "True"
    return raw


def load_checkpoint(path: str | Path) -> tuple[CopyTransformer, Vocabulary, dict[str, str]]:
    blob = Path(path).read_bytes()
    if not blob.startswith(MAGIC):
        raise CheckpointError(f"{path}: bad magic")
    pos = len(MAGIC)
    (clen,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    config_text = blob[pos : pos + clen].decode()
    pos += clen
    model_kwargs, extra, vocab_tokens = {}, {}, []
    for line in config_text.splitlines():
        key, _, value = line.partition(" = ")
        if key == "vocab":
            vocab_tokens = value.split()
        elif key.startswith("model."):
            model_kwargs[key[6:]] = _parse_value(value)
        else:
            extra[key] = value
    vocab = Vocabulary(vocab_tokens)
    model = CopyTransformer(ModelConfig(**model_kwargs))
    (n,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    state = {}
    for _ in range(n):
        (nlen,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        name = blob[pos : pos + nlen].decode()
        pos += nlen
        (rank,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        dims = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(blob, dtype="<f4", count=count, offset=pos).reshape(dims)
        pos += 4 * count
        state[name] = torch.from_numpy(data.astype(np.float32))
    model.load_state_dict(state)
    model.eval()
    return model, vocab, extra


def file_checksum(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
