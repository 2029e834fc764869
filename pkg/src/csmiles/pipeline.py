"""Reaction ingestion, augmentation, run configuration and the end-to-end
train / predict / eval steps used by the command line."""

from __future__ import annotations

import enum
import hashlib
import logging
import platform
import random
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch

from csmiles import __version__
from csmiles.alignment import build_sam
from csmiles.chem.canonical import canonical_ranks
from csmiles.chem.graph import MolGraph, parse_smiles, strip_atom_maps
from csmiles.chem.valence import demap_smiles, simplify_brackets
from csmiles.chem.writer import write_smiles
from csmiles.codec import Vocabulary, build_vocab, encode
from csmiles.decoding import Candidate, beam_search
from csmiles.evaluation import DEFAULT_KS, topk_accuracy, validity
from csmiles.exceptions import AllLinesInvalid, CSmilesError, DuplicateAtomMap
from csmiles.model.checkpoint import load_checkpoint, save_checkpoint
from csmiles.model.data import Example, make_example
from csmiles.model.network import CopyTransformer, ModelConfig
from csmiles.model.train import TrainingConfig, train

log = logging.getLogger(__name__)


class Split(enum.Enum):
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


@dataclass(frozen=True)
class ReactionRecord:
    product: str  # atom-mapped, model source
    reactants: str  # atom-mapped, '.'-joined, model target
    reaction_class: int | None = None
    split: Split = Split.TRAIN


class ReactionList(list):
    """A list of records that remembers how many input lines were skipped."""

    skipped: int = 0


def _check_side(smiles: str, side: str) -> None:
    graph = parse_smiles(smiles)
    maps = [a.atom_map for a in graph.atoms if a.atom_map is not None]
    if len(maps) != len(set(maps)):
        raise DuplicateAtomMap(f"repeated atom map in {side}")


def parse_reaction_line(line: str, split: Split = Split.TRAIN) -> ReactionRecord:
    """``[class<TAB>]reactants>[reagents]>product``; reagents are dropped."""
    cls = None
    text = line.strip()
    if "\t" in text:
        head, text = text.split("\t", 1)
        cls = int(head)
    fields_ = text.split(">")
    if len(fields_) != 3 or not fields_[0] or not fields_[2]:
        raise ValueError(f"not a reaction: {line!r}")
    reactants, product = fields_[0], fields_[2]
    _check_side(reactants, "reactants")
    _check_side(product, "product")
    return ReactionRecord(product, reactants, cls, split)


def load_reactions(path: str | Path, split: Split | str = Split.TRAIN) -> ReactionList:
    """Read one reaction per line, skipping (and counting) lines that fail to parse."""
    split = Split(split)
    out = ReactionList()
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    for n, line in enumerate(lines, 1):
        try:
            out.append(parse_reaction_line(line, split))
        except (CSmilesError, ValueError) as exc:
            out.skipped += 1
            log.debug("%s:%d skipped: %s", path, n, exc)
    if out.skipped:
        log.warning("%s: skipped %d of %d lines", path, out.skipped, len(lines))
    if lines and not out:
        raise AllLinesInvalid(f"{path}: no line could be parsed")
    return out


# ---------------------------------------------------------------------------
# augmentation


def _rank_key(graph: MolGraph) -> list[int]:
    # Ranks of the map-free graph, so the traversal order ignores map numbers.
    return canonical_ranks(simplify_brackets(strip_atom_maps(graph)))


def _write_molecules(graph: MolGraph, roots: Iterable[int] = ()) -> str:
    """Write each component canonically, or from whichever of ``roots`` it holds."""
    parts = []
    for comp in graph.components():
        sub = graph.subgraph(comp)
        ranks = _rank_key(sub)
        local = {k: n for n, k in enumerate(comp)}
        root = next((local[r] for r in roots if r in local), ranks.index(0))
        key = write_smiles(simplify_brackets(strip_atom_maps(sub)), ranks.index(0), ranks)
        parts.append((key, write_smiles(sub, root, ranks)))
    parts.sort(key=lambda p: p[0])
    return ".".join(p[1] for p in parts)


def canonical_pair(record: ReactionRecord) -> tuple[str, str]:
    p = parse_smiles(record.product)
    r = parse_smiles(record.reactants)
    return _write_molecules(p), _write_molecules(r)


def augment(record: ReactionRecord, factor: int, rng: random.Random) -> list[tuple[str, str]]:
    """The canonical pair plus ``factor`` root-aligned variants.

    Each variant roots the product at a random atom and roots the reactant
    molecule holding that atom's mapped counterpart at the counterpart.
    """
    if factor < 0:
        raise ValueError("factor must be non-negative")
    p = parse_smiles(record.product)
    r = parse_smiles(record.reactants)
    pairs = [canonical_pair(record)]
    by_map = {a.atom_map: k for k, a in enumerate(r.atoms) if a.atom_map is not None}
    for _ in range(factor):
        root = rng.randrange(len(p.atoms))
        m = p.atoms[root].atom_map
        roots = [by_map[m]] if m in by_map else []
        pairs.append((_write_molecules(p, [root]), _write_molecules(r, roots)))
    return pairs


# ---------------------------------------------------------------------------
# configuration


def class_token(reaction_class: int) -> str:
    return f"<RC_{reaction_class}>"


_CLASS_TOKEN = re.compile(r"^<RC_(\d+)>$")


def strip_class_token(tokens: Sequence[str]) -> tuple[int | None, list[str]]:
    if tokens and (m := _CLASS_TOKEN.match(tokens[0])):
        return int(m.group(1)), list(tokens[1:])
    return None, list(tokens)


@dataclass
class RunConfig:
    train_path: str | None = None
    valid_path: str | None = None
    test_path: str | None = None
    checkpoint_dir: str = "runs/checkpoints"
    output_dir: str = "runs/output"
    model: dict = field(default_factory=dict)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    augment_factor: int = 0
    freeze_augmentation: bool = False
    class_conditioning: bool = False
    beam_size: int = 10
    max_decode_len: int = 200
    length_penalty: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.augment_factor < 0:
            raise ValueError("augment.factor must be non-negative")
        if self.training.seed != self.seed:
            self.training = replace(self.training, seed=self.seed)

    def check_paths(self, *names: str) -> None:
        for name in names:
            value = getattr(self, name)
            if value is None or not Path(value).exists():
                raise FileNotFoundError(f"{name}: {value!r} does not exist")

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size=vocab_size, **self.model)

    def items(self) -> list[tuple[str, object]]:
        out: list[tuple[str, object]] = [
            ("data.train", self.train_path),
            ("data.valid", self.valid_path),
            ("data.test", self.test_path),
            ("paths.checkpoint_dir", self.checkpoint_dir),
            ("paths.output_dir", self.output_dir),
            ("augment.factor", self.augment_factor),
            ("augment.freeze", self.freeze_augmentation),
            ("class_conditioning", self.class_conditioning),
            ("decode.beam_size", self.beam_size),
            ("decode.max_len", self.max_decode_len),
            ("decode.length_penalty", self.length_penalty),
            ("seed", self.seed),
        ]
        out += [(f"model.{k}", v) for k, v in sorted(self.model.items())]
        out += [(f"train.{k}", v) for k, v in self.training.to_dict().items()]
        return out

    def dumps(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.items())

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()


_TOP_LEVEL = {
    "data.train": "train_path",
    "data.valid": "valid_path",
    "data.test": "test_path",
    "paths.checkpoint_dir": "checkpoint_dir",
    "paths.output_dir": "output_dir",
    "augment.factor": "augment_factor",
    "augment.freeze": "freeze_augmentation",
    "class_conditioning": "class_conditioning",
    "decode.beam_size": "beam_size",
    "decode.max_len": "max_decode_len",
    "decode.length_penalty": "length_penalty",
    "seed": "seed",
}
_MODEL_FIELDS = {f.name: f for f in fields(ModelConfig) if f.name != "vocab_size"}
_TRAIN_FIELDS = {f.name: f for f in fields(TrainingConfig)}


def _coerce(value: str, like: object):
    if value in ("None", ""):
        return None
    if isinstance(like, bool):
        if value.lower() in ("true", "1", "yes", "on"):
            return True
        if value.lower() in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"config line {n}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def config_from_mapping(values: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    top: dict[str, object] = {}
    model = dict(cfg.model)
    training = cfg.training.to_dict()
    defaults = RunConfig()
    for key, value in values.items():
        if key in _TOP_LEVEL:
            name = _TOP_LEVEL[key]
            like = getattr(defaults, name)
            top[name] = _coerce(value, like if like is not None else "")
        elif key.startswith("model.") and key[6:] in _MODEL_FIELDS:
            model[key[6:]] = _coerce(value, _MODEL_FIELDS[key[6:]].default)
        elif key.startswith("train.") and key[6:] in _TRAIN_FIELDS:
            training[key[6:]] = _coerce(value, _TRAIN_FIELDS[key[6:]].default)
        else:
            raise ValueError(f"unknown config key {key!r}")
    # The top-level seed wins; a lone train.seed is promoted to it.
    if "seed" in top:
        training["seed"] = top["seed"]
    elif "train.seed" in values:
        top["seed"] = training["seed"]
    return replace(cfg, model=model, training=TrainingConfig(**training), **top)


def load_config(path: str | Path) -> RunConfig:
    return config_from_mapping(parse_config_text(Path(path).read_text()))


def write_manifest(directory: Path, cfg: RunConfig, command: str, artifacts: dict[str, str] | None = None) -> Path:
    """Record everything needed to reproduce the run in ``manifest.txt``."""
    directory.mkdir(parents=True, exist_ok=True)
    lines = [
        f"command = {command}",
        f"config_hash = {cfg.digest()}",
        f"seed = {cfg.seed}",
        f"csmiles_version = {__version__}",
        f"python_version = {platform.python_version()}",
        f"torch_version = {torch.__version__}",
        f"numpy_version = {np.__version__}",
    ]
    lines += [f"artifact.{k} = {v}" for k, v in sorted((artifacts or {}).items())]
    lines += [f"config.{k} = {v}" for k, v in cfg.items()]
    path = directory / "manifest.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# examples


STRUCTURAL_EXTRAS = tuple("()=#-.:/\\") + tuple(str(d) for d in range(1, 10))


def source_tokens(product: str, reaction_class: int | None = None) -> list[str]:
    tokens = encode(demap_smiles(product)).tokens
    return [class_token(reaction_class), *tokens] if reaction_class is not None else tokens


def target_tokens(reactants: str) -> list[str]:
    return encode(demap_smiles(reactants)).tokens


def make_vocab(records: Iterable[ReactionRecord], class_conditioning: bool = False) -> Vocabulary:
    records = list(records)
    corpus = []
    classes = set()
    for rec in records:
        corpus.append(source_tokens(rec.product))
        corpus.append(target_tokens(rec.reactants))
        if rec.reaction_class is not None:
            classes.add(rec.reaction_class)
    extra = list(STRUCTURAL_EXTRAS)
    if class_conditioning:
        extra += [class_token(c) for c in sorted(classes)]
    return build_vocab(corpus, extra)


def pair_example(
    product: str,
    reactants: str,
    vocab: Vocabulary,
    reaction_class: int | None = None,
) -> Example:
    sam = build_sam(product, reactants)
    src = source_tokens(product, reaction_class)
    n_prefix = len(src) - len(sam.product)
    return make_example(vocab.ids(src), vocab.ids(sam.reactant.tokens), sam.matrix, n_prefix)


def record_examples(
    records: Sequence[ReactionRecord],
    vocab: Vocabulary,
    factor: int = 0,
    rng: random.Random | None = None,
    class_conditioning: bool = False,
) -> list[Example]:
    rng = rng or random.Random(0)
    out = []
    for rec in records:
        cls = rec.reaction_class if class_conditioning else None
        for product, reactants in augment(rec, factor, rng):
            out.append(pair_example(product, reactants, vocab, cls))
    return out


def training_data(records: Sequence[ReactionRecord], vocab: Vocabulary, cfg: RunConfig):
    """Examples for :func:`train`: a list, or a per-epoch callable when augmenting."""
    if cfg.augment_factor == 0:
        return record_examples(records, vocab, 0, None, cfg.class_conditioning)
    if cfg.freeze_augmentation:
        return record_examples(records, vocab, cfg.augment_factor, random.Random(cfg.seed), cfg.class_conditioning)

    def per_epoch(epoch: int) -> list[Example]:
        rng = random.Random(cfg.seed * 1_000_003 + epoch)
        return record_examples(records, vocab, cfg.augment_factor, rng, cfg.class_conditioning)

    return per_epoch


# ---------------------------------------------------------------------------
# run steps


@dataclass
class TrainArtifacts:
    checkpoint: Path
    metrics: Path
    manifest: Path
    checksum: str


def run_train(cfg: RunConfig, command: str = "train") -> TrainArtifacts:
    cfg.check_paths("train_path")
    records = load_reactions(cfg.train_path, Split.TRAIN)  # type: ignore[arg-type]
    vocab = make_vocab(records, cfg.class_conditioning)
    model_cfg = cfg.model_config(len(vocab))
    ckdir = Path(cfg.checkpoint_dir)
    ckdir.mkdir(parents=True, exist_ok=True)
    metrics = ckdir / "metrics.csv"
    result = train(training_data(records, vocab, cfg), model_cfg, cfg.training, metrics)
    ckpt = ckdir / "model.csmk"
    extra = {"class_conditioning": str(cfg.class_conditioning)}
    checksum = save_checkpoint(ckpt, result.model, vocab, extra)
    manifest = write_manifest(ckdir, cfg, command, {"checkpoint": ckpt.name, "checkpoint_sha256": checksum, "metrics": metrics.name})
    return TrainArtifacts(ckpt, metrics, manifest, checksum)


@dataclass
class Predictions:
    candidates: list[list[Candidate]]
    path: Path


def predict_records(
    model: CopyTransformer,
    vocab: Vocabulary,
    records: Sequence[ReactionRecord],
    beam_size: int,
    max_len: int,
    class_conditioning: bool = False,
    length_penalty: float = 0.0,
) -> list[list[Candidate]]:
    out = []
    for rec in records:
        cls = rec.reaction_class if class_conditioning else None
        src = vocab.ids(source_tokens(canonical_pair(rec)[0], cls))
        out.append(beam_search(model, src, vocab, beam_size, max_len, length_penalty))
    return out


PREDICTION_COLUMNS = ("input_idx", "rank", "score", "smiles", "valid", "copied_fraction")


def write_predictions(cands: Sequence[Sequence[Candidate]], path: Path) -> None:
    with open(path, "w") as fh:
        fh.write("\t".join(PREDICTION_COLUMNS) + "\n")
        for i, row in enumerate(cands):
            for rank, c in enumerate(row, 1):
                smiles = c.smiles if c.smiles is not None else "*"
                fh.write(f"{i}\t{rank}\t{c.score:.6f}\t{smiles}\t{int(c.valid)}\t{c.copied_fraction:.4f}\n")


def read_predictions(path: Path) -> dict[int, list[tuple[str | None, bool]]]:
    out: dict[int, list[tuple[str | None, bool]]] = {}
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != PREDICTION_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        for line in fh:
            idx, _, _, smiles, valid, _ = line.rstrip("\n").split("\t")
            out.setdefault(int(idx), []).append((None if smiles == "*" else smiles, valid == "1"))
    return out


def run_predict(cfg: RunConfig, checkpoint: Path, command: str = "predict") -> Predictions:
    cfg.check_paths("test_path")
    model, vocab, extra = load_checkpoint(checkpoint)
    records = load_reactions(cfg.test_path, Split.TEST)  # type: ignore[arg-type]
    cc = extra.get("class_conditioning", "False") == "True"
    cands = predict_records(model, vocab, records, cfg.beam_size, cfg.max_decode_len, cc, cfg.length_penalty)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "predictions.tsv"
    write_predictions(cands, path)
    write_manifest(outdir, cfg, command, {"predictions": path.name, "checkpoint": str(checkpoint)})
    return Predictions(cands, path)


def evaluate_predictions(preds: dict[int, list[tuple[str | None, bool]]], records: Sequence[ReactionRecord], ks: Sequence[int] = DEFAULT_KS) -> dict[str, float]:
    rows = [preds.get(i, []) for i in range(len(records))]
    acc = topk_accuracy([[s for s, _ in r] for r in rows], [rec.reactants for rec in records], ks)
    val = validity([[v for _, v in r] for r in rows], ks)
    metrics = {f"top{k}_accuracy": acc[k] for k in ks}
    metrics.update({f"top{k}_validity": val[k] for k in ks})
    return metrics


def run_eval(cfg: RunConfig, predictions: Path, command: str = "eval") -> dict[str, float]:
    cfg.check_paths("test_path")
    records = load_reactions(cfg.test_path, Split.TEST)  # type: ignore[arg-type]
    metrics = evaluate_predictions(read_predictions(predictions), records)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "metrics.txt"
    path.write_text("".join(f"{k} = {v:.6f}\n" for k, v in metrics.items()))
    write_manifest(outdir, cfg, command, {"metrics": path.name, "predictions": str(predictions)})
    return metrics

