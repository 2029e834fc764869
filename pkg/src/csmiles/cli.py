"""``csmiles`` command line."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np
import torch

from csmiles.alignment import build_sam, smooth
from csmiles.codec import decode, encode
from csmiles.evaluation import attention_dump, edit_distance_report
from csmiles.exceptions import CSmilesError, DivergedLoss
from csmiles.model.checkpoint import load_checkpoint
from csmiles.pipeline import (
    RunConfig,
    Split,
    canonical_pair,
    config_from_mapping,
    load_config,
    load_reactions,
    pair_example,
    run_eval,
    run_predict,
    run_train,
    write_manifest,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("csmiles")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _open_out(path: str | None) -> TextIO:
    return open(path, "w") if path else sys.stdout


def cmd_convert(args, cfg: RunConfig) -> int:
    out = _open_out(args.output)
    with open(args.input) as fh:
        for line in fh:
            text = line.strip()
            if not text:
                continue
            out.write((decode(text) if args.to == "smiles" else str(encode(text))) + "\n")
    if out is not sys.stdout:
        out.close()
    return EXIT_OK


def cmd_align(args, cfg: RunConfig) -> int:
    records = load_reactions(args.input)
    out = _open_out(args.output)
    for n, rec in enumerate(records):
        sam = build_sam(rec.product, rec.reactants)
        values = smooth(sam, args.smooth) if args.smooth is not None else sam.matrix
        out.write(f"# reaction {n} rows={sam.shape[0]} cols={sam.shape[1]}\n")
        if args.dense:
            fmt = "%.6g" if args.smooth is not None else "%d"
            np.savetxt(out, values, delimiter=",", fmt=fmt)
        else:
            for i, j in zip(*np.nonzero(sam.matrix if args.smooth is None else values)):
                v = values[i, j]
                out.write(f"{i}\t{j}\t{v:.6g}\n" if args.smooth is not None else f"{i}\t{j}\t1\n")
    if out is not sys.stdout:
        out.close()
    return EXIT_OK


def cmd_stats(args, cfg: RunConfig) -> int:
    records = load_reactions(args.input)
    report = edit_distance_report((r.product, r.reactants) for r in records)
    out = _open_out(args.output)
    for k, v in report.summary().items():
        out.write(f"{k} = {v:.6f}\n" if isinstance(v, float) else f"{k} = {v}\n")
    if out is not sys.stdout:
        out.close()
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    art = run_train(cfg, "train")
    print(f"checkpoint = {art.checkpoint}")
    print(f"checkpoint_sha256 = {art.checksum}")
    print(f"metrics = {art.metrics}")
    return EXIT_OK


def _checkpoint(args, cfg: RunConfig) -> Path:
    return Path(args.checkpoint or Path(cfg.checkpoint_dir) / "model.csmk")


def cmd_predict(args, cfg: RunConfig) -> int:
    preds = run_predict(cfg, _checkpoint(args, cfg))
    print(f"predictions = {preds.path}")
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    path = Path(args.predictions or Path(cfg.output_dir) / "predictions.tsv")
    for k, v in run_eval(cfg, path).items():
        print(f"{k} = {v:.6f}")
    return EXIT_OK


def cmd_dump_attn(args, cfg: RunConfig) -> int:
    cfg.check_paths("test_path")
    model, vocab, extra = load_checkpoint(_checkpoint(args, cfg))
    records = load_reactions(cfg.test_path, Split.TEST)  # type: ignore[arg-type]
    if not 0 <= args.index < len(records):
        raise UsageError(f"--index {args.index} outside 0..{len(records) - 1}")
    rec = records[args.index]
    cls = rec.reaction_class if extra.get("class_conditioning") == "True" else None
    ex = pair_example(*canonical_pair(rec), vocab, cls)
    outdir = Path(cfg.output_dir)
    paths = attention_dump(model, ex.src, ex.tgt, ex.sam, outdir / f"attn_{args.index}", vocab.sos_id)
    write_manifest(outdir, cfg, "dump-attn", {k: p.name for k, p in paths.items()})
    for k, p in paths.items():
        print(f"{k} = {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="csmiles", description="C-SMILES retrosynthesis toolkit")
    p.add_argument("--config", help="flat 'key = value' run configuration")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--threads", type=int, help="torch intra-op threads")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("convert", help="SMILES <-> C-SMILES, one per line")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.add_argument("--to", choices=("csmiles", "smiles"), default="csmiles", help="target notation; smiles expects space-separated C-SMILES input")
    s.set_defaults(func=cmd_convert)

    s = sub.add_parser("align", help="alignment maps for atom-mapped reactions")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.add_argument("--dense", action="store_true", help="dense CSV instead of sparse triplets")
    s.add_argument("--smooth", type=float, metavar="EPS", help="emit label-smoothed values")
    s.set_defaults(func=cmd_align)

    s = sub.add_parser("stats", help="edit-distance report for a reaction file")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("train", help="train on data.train")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="beam search over data.test")
    s.add_argument("--checkpoint")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", help="top-k accuracy and validity of predictions")
    s.add_argument("--predictions")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("dump-attn", help="attention and alignment matrices for one test reaction")
    s.add_argument("--checkpoint")
    s.add_argument("--index", type=int, default=0)
    s.set_defaults(func=cmd_dump_attn)
    return p


def _configure_logging() -> None:
    level = os.environ.get("CSMILES_LOG", "warn").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    return config_from_mapping(overrides, cfg) if overrides else cfg


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    if args.threads:
        torch.set_num_threads(args.threads)
    try:
        cfg = _run_config(args)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"csmiles: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergedLoss as exc:
        print(f"csmiles: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CSmilesError, FileNotFoundError, ValueError) as exc:
        print(f"csmiles: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
