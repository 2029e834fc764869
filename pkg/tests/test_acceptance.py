"""Acceptance criteria, one test each.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary prints a
PASS/FAIL line per criterion.  Training runs are shared through
module-scoped fixtures so that every model is trained once.
"""

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
import torch

from csmiles.alignment import build_sam
from csmiles.chem import canonicalize, parse_smiles, strip_atom_maps
from csmiles.chem.tokenizer import tokenize
from csmiles.chem.valence import demap_smiles
from csmiles.codec import build_vocab, decode, encode, encode_atom, raw_tokens
from csmiles.corpus import property_corpus
from csmiles.evaluation import aligned_attention_mass, attention_matrix, edit_distance_report
from csmiles.model.checkpoint import load_checkpoint
from csmiles.model.data import collate
from csmiles.model.gradcheck import grad_check
from csmiles.model.network import CopyTransformer, ModelConfig, mix_distribution
from csmiles.model.synthetic import copy_probabilities, identity_task, probe_vocab, transliteration_task
from csmiles.model.train import TrainingConfig, train
from csmiles.pipeline import (
    RunConfig,
    canonical_pair,
    load_reactions,
    make_vocab,
    pair_example,
    record_examples,
    run_eval,
    run_predict,
    run_train,
)
from sam_cases import SAM_CASES

# Toy-run settings: default desk-scale architecture without dropout.
TOY_EPOCHS = 400
TOY_TRAINING = TrainingConfig(epochs=TOY_EPOCHS, batch_size=8, lr=5e-4, seed=0)


def toy_config(tmp: Path, toy_path, **train_overrides) -> RunConfig:
    return RunConfig(
        train_path=str(toy_path),
        test_path=str(toy_path),
        checkpoint_dir=str(tmp / "ckpt"),
        output_dir=str(tmp / "out"),
        model={"dropout": 0.0},
        training=replace(TOY_TRAINING, **train_overrides),
        beam_size=10,
        seed=0,
    )


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory, toy_path):
    cfg = toy_config(tmp_path_factory.mktemp("toy_a"), toy_path)
    return cfg, run_train(cfg)


@pytest.fixture(scope="module")
def toy_run_repeat(tmp_path_factory, toy_path):
    cfg = toy_config(tmp_path_factory.mktemp("toy_b"), toy_path)
    return cfg, run_train(cfg)


@pytest.fixture(scope="module")
def toy_run_without_sa(tmp_path_factory, toy_path):
    cfg = toy_config(tmp_path_factory.mktemp("toy_nosa"), toy_path, lambda_sa=0.0)
    return cfg, run_train(cfg)


def last_metrics(path: Path) -> dict[str, float]:
    lines = path.read_text().splitlines()
    return dict(zip(lines[0].split(","), map(float, lines[-1].split(","))))


def test_criterion_01_table1_fidelity(record_property):
    cases = {
        "[S+]": ["S", "+"],
        "[N-]": ["N", "$"],
        "[SH]": ["S", "H"],
        "[S@]": ["S", "@"],
        "c": ["C", "&"],
        "[OH]": ["O", "H"],
        "[s+]": ["S", "&", "+"],
    }
    wrong = {t: encode_atom(tokenize(t)[0].atom) for t in cases}
    wrong = {t: got for t, got in wrong.items() if got != cases[t]}
    record_property("detail", f"{len(cases) - len(wrong)}/{len(cases)} examples exact")
    assert not wrong


def test_criterion_02_csmiles_round_trip(record_property):
    corpus = property_corpus()
    failures = [
        s for s in corpus
        if canonicalize(parse_smiles(decode(encode(s)))) != canonicalize(strip_atom_maps(parse_smiles(s)))
    ]
    record_property("detail", f"{len(corpus) - len(failures)}/{len(corpus)} molecules round-trip")
    assert len(corpus) >= 1000 and not failures


def _sample_strings(sample_path):
    records = load_reactions(sample_path)
    return records, [demap_smiles(s) for r in records for s in (r.product, r.reactants)]


def test_criterion_03_vocabulary_reduction(record_property, sample_path):
    records, strings = _sample_strings(sample_path)
    raw = build_vocab(raw_tokens(s) for s in strings)
    cs = build_vocab(encode(s).tokens for s in strings)
    composites = [t for t in cs.tokens if "[" in t or "]" in t]
    record_property("detail", f"{len(records)} reactions, raw {len(raw) - 4} tokens vs C-SMILES {len(cs) - 4}, {len(composites)} bracket composites")
    assert len(records) >= 500 and len(cs) < len(raw) and not composites


def test_criterion_04_edit_distance_reduction(record_property, sample_path):
    records = load_reactions(sample_path)
    s = edit_distance_report((r.product, r.reactants) for r in records).summary()
    # Like-for-like: both notations tokenise the same map-free strings.
    mean_ok = s["csmiles_mean"] <= s["raw_demapped_mean"]
    frac_ok = s["frac_csmiles_le_raw_demapped"] >= 0.90
    record_property(
        "detail",
        f"mean C-SMILES {s['csmiles_mean']:.2f} vs raw {s['raw_demapped_mean']:.2f}, "
        f"C-SMILES <= raw in {100 * s['frac_csmiles_le_raw_demapped']:.1f}% "
        f"(against mapped raw strings: {s['raw_mean']:.2f}, {100 * s['frac_csmiles_le_raw']:.1f}%)",
    )
    assert mean_ok and frac_ok


def test_criterion_05_sam_oracle(record_property):
    bad = []
    for name, product, reactants, shape, cells in SAM_CASES:
        expected = np.zeros(shape, dtype=np.uint8)
        for i, j in cells:
            expected[i, j] = 1
        sam = build_sam(product, reactants).matrix
        if sam.shape != shape or not np.array_equal(sam, expected):
            bad.append(name)
    record_property("detail", f"{len(SAM_CASES) - len(bad)}/{len(SAM_CASES)} hand-traced maps match")
    assert len(SAM_CASES) == 10 and not bad


def test_criterion_06_distribution_normalisation(record_property):
    g = torch.Generator().manual_seed(0)
    worst = 0.0
    draws = 0
    for V, S in ((5, 3), (40, 12), (120, 60), (300, 150)):
        n = 2500
        p_vocab = torch.softmax(torch.randn(n, V, generator=g) * 3, -1)
        attn = torch.softmax(torch.randn(n, S, generator=g) * 3, -1)
        p_gen = torch.rand(n, generator=g)
        src = torch.randint(0, V, (n, S), generator=g)
        mixed = mix_distribution(p_vocab, attn, p_gen, src)
        worst = max(worst, float((mixed.sum(-1) - 1).abs().max()))
        draws += n
    record_property("detail", f"{draws} draws, max |sum - 1| = {worst:.2e}")
    assert draws == 10_000 and worst < 1e-6


def test_criterion_07_gradient_correctness(record_property, toy_path):
    records = load_reactions(toy_path)[:3]
    vocab = make_vocab(records)
    batch = collate(record_examples(records, vocab))
    torch.manual_seed(0)
    model = CopyTransformer(ModelConfig(vocab_size=len(vocab), num_layers=2, num_heads=2, d_model=8, d_ff=16, dropout=0.0))
    report = grad_check(model, batch, TrainingConfig(), entries=3, step=1e-4, tolerance=1e-3)
    worst = {term: max(v.values()) for term, v in report.items()}
    record_property("detail", ", ".join(f"{t} {e:.1e}" for t, e in worst.items()) + f" over {len(report['lm'])} tensors")
    assert set(worst) == {"lm", "sa", "ci", "total"} and max(worst.values()) < 1e-3


def test_criterion_08_overfit_smoke(record_property, toy_run):
    cfg, art = toy_run
    metrics = last_metrics(art.metrics)
    preds = run_predict(cfg, art.checkpoint)
    scores = run_eval(cfg, preds.path)
    record_property(
        "detail",
        f"{TOY_EPOCHS} epochs, token accuracy {metrics['token_acc']:.3f}, beam-10 top-1 {scores['top1_accuracy']:.3f}",
    )
    assert TOY_EPOCHS <= 500 and metrics["token_acc"] >= 0.95 and scores["top1_accuracy"] >= 0.90


def _probe(task, seed):
    vocab = probe_vocab()
    data = task(256, seed=seed, vocab=vocab)
    held_out = task(64, seed=seed + 1000, vocab=vocab)
    cfg = TrainingConfig(epochs=20, batch_size=16, lr=5e-4, seed=seed)
    model = train(data, ModelConfig(vocab_size=len(vocab), dropout=0.0), cfg).model
    return copy_probabilities(model, held_out)


def test_criterion_09_copy_gate_behaviour(record_property):
    copy_id = _probe(identity_task, 0)
    copy_tr = _probe(transliteration_task, 0)
    above = float((copy_id > 0.7).mean())
    record_property(
        "detail",
        f"identity mean copy {copy_id.mean():.3f} ({100 * above:.1f}% > 0.7), transliteration mean copy {copy_tr.mean():.4f}",
    )
    assert copy_id.mean() > 0.5 and above >= 0.8 and copy_tr.mean() < 0.5


def _aligned_mass(cfg, art, toy_path):
    model, vocab, _ = load_checkpoint(art.checkpoint)
    masses = []
    for rec in load_reactions(toy_path):
        ex = pair_example(*canonical_pair(rec), vocab)
        masses.append(aligned_attention_mass(attention_matrix(model, ex.src, ex.tgt, vocab.sos_id), ex.sam))
    return float(np.mean(masses))


def test_criterion_10_alignment_effect(record_property, toy_run, toy_run_without_sa, toy_path):
    with_sa = _aligned_mass(*toy_run, toy_path)
    without = _aligned_mass(*toy_run_without_sa, toy_path)
    ratio = with_sa / without if without > 0 else float("inf")
    record_property("detail", f"aligned attention mass {with_sa:.3f} with SA vs {without:.3f} without ({ratio:.2f}x)")
    assert ratio >= 2.0


ABLATIONS = {
    "full": {},
    "no_copy": {"enable_copy": False},
    "no_sa": {"enable_sa": False},
    "no_ci": {"enable_ci": False},
}


def test_criterion_11_ablation_scaffolding(record_property, tmp_path, toy_path):
    outputs = {}
    for name, switches in ABLATIONS.items():
        cfg = toy_config(tmp_path / name, toy_path, epochs=30, **switches)
        art = run_train(cfg)
        preds = run_predict(cfg, art.checkpoint)
        run_eval(cfg, preds.path)
        metrics_file = Path(cfg.output_dir) / "metrics.txt"
        outputs[name] = (metrics_file, art.metrics.read_text())
    files = {p for p, _ in outputs.values()}
    curves = {c for _, c in outputs.values()}
    complete = all(len(p.read_text().splitlines()) == 8 for p in files)
    record_property("detail", f"{len(files)} metric files, {len(curves)} distinct training curves")
    assert len(files) == 4 and len(curves) == 4 and complete


def test_criterion_12_determinism(record_property, toy_run, toy_run_repeat):
    (_, a), (_, b) = toy_run, toy_run_repeat
    same_ckpt = a.checksum == b.checksum
    same_csv = a.metrics.read_text() == b.metrics.read_text()
    record_property("detail", f"checkpoint sha256 {a.checksum[:12]} vs {b.checksum[:12]}, metrics identical: {same_csv}")
    assert same_ckpt and same_csv
