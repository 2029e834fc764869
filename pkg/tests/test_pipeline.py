import logging
import random
import subprocess

import pytest

from csmiles.chem import canonicalize, parse_smiles, strip_atom_maps
from csmiles.chem.tokenizer import tokenize
from csmiles.cli import EXIT_DATA, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, main
from csmiles.exceptions import AllLinesInvalid, DivergedLoss
from csmiles.pipeline import (
    ReactionRecord,
    RunConfig,
    Split,
    augment,
    canonical_pair,
    class_token,
    config_from_mapping,
    load_config,
    load_reactions,
    make_vocab,
    parse_config_text,
    parse_reaction_line,
    read_predictions,
    source_tokens,
    strip_class_token,
    write_manifest,
)


def iso(a, b):
    return canonicalize(parse_smiles(a)) == canonicalize(parse_smiles(b))


# loading ------------------------------------------------------------------


def test_parse_line_example():
    rec = parse_reaction_line("[CH3:1]Br.[OH:2][H]>>[CH3:1][OH:2]")
    assert rec.product == "[CH3:1][OH:2]"
    assert rec.reactants == "[CH3:1]Br.[OH:2][H]"
    assert rec.reaction_class is None and rec.split is Split.TRAIN


def test_parse_line_class_and_reagents():
    rec = parse_reaction_line("3\t[CH3:1]Br.[OH:2][H]>O>[CH3:1][OH:2]", Split.TEST)
    assert rec.reaction_class == 3
    assert rec.reactants == "[CH3:1]Br.[OH:2][H]"
    assert rec.split is Split.TEST


@pytest.mark.parametrize("line", ["CCO", "C(C>>CC", "[CH3:1][CH3:1]>>CC", ">>CC", "x\tC>>C"])
def test_parse_line_rejects(line):
    with pytest.raises(ValueError):
        parse_reaction_line(line)


def test_load_counts_skipped(tmp_path, caplog):
    path = tmp_path / "r.txt"
    path.write_text("[CH3:1]Br>>[CH3:1]O\nnot a reaction\n\n# comment\n1\tCC>>C=C\nC(C>>C\n")
    with caplog.at_level(logging.WARNING):
        recs = load_reactions(path, "valid")
    assert len(recs) == 2 and recs.skipped == 2
    assert recs[1].reaction_class == 1 and recs[0].split is Split.VALID
    assert "skipped 2" in caplog.text


def test_load_all_invalid(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("junk\nmore junk\n")
    with pytest.raises(AllLinesInvalid):
        load_reactions(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_reactions(tmp_path / "nope.txt")


def test_bundled_files_load(toy_path, sample_path):
    toy = load_reactions(toy_path)
    sample = load_reactions(sample_path)
    assert len(toy) == 32 and toy.skipped == 0
    assert len(sample) >= 500 and sample.skipped == 0
    assert all(r.reaction_class is not None for r in sample)


# augmentation -------------------------------------------------------------

REC = parse_reaction_line("[CH3:1][C:2](=[O:3])[NH:4][CH2:5][c:6]1[cH:7][cH:8][cH:9][cH:10][cH:11]1"
                          .join(["[CH3:1][C:2](=[O:3])Cl.[NH2:4][CH2:5][c:6]1[cH:7][cH:8][cH:9][cH:10][cH:11]1>>", ""]))


def test_augment_factor_zero():
    assert augment(REC, 0, random.Random(0)) == [canonical_pair(REC)]


def test_augment_pairs_isomorphic():
    pairs = augment(REC, 3, random.Random(1))
    assert len(pairs) == 4
    for product, reactants in pairs:
        assert iso(product, REC.product)
        assert iso(reactants, REC.reactants)


def test_augment_root_alignment():
    rng = random.Random(5)
    seen_roots = set()
    for product, reactants in augment(REC, 20, rng)[1:]:
        first = tokenize(product)[0].atom
        seen_roots.add(first.atom_map)
        mols = reactants.split(".")
        starts = {tokenize(m)[0].atom.atom_map for m in mols}
        assert first.atom_map in starts
    assert len(seen_roots) > 3


def test_augment_rejects_negative():
    with pytest.raises(ValueError):
        augment(REC, -1, random.Random(0))


def test_canonical_pair_is_order_independent():
    swapped = ReactionRecord(REC.product, ".".join(reversed(REC.reactants.split("."))))
    assert canonical_pair(swapped) == canonical_pair(REC)


def test_class_token_reversible():
    toks = source_tokens("[CH3:1][OH:2]", 7)
    assert toks[0] == class_token(7) == "<RC_7>"
    assert strip_class_token(toks) == (7, source_tokens("[CH3:1][OH:2]"))
    assert strip_class_token(["C", "O"]) == (None, ["C", "O"])


def test_vocab_class_tokens_only_when_conditioning(toy_path):
    recs = load_reactions(toy_path)
    assert not any(t.startswith("<RC_") for t in make_vocab(recs).tokens)
    assert any(t.startswith("<RC_") for t in make_vocab(recs, class_conditioning=True).tokens)


# configuration -------------------------------------------------------------


def test_config_parse_and_dump(tmp_path):
    text = "# run\ndata.train = a.txt\nmodel.d_model = 32\nmodel.num_heads = 2\ntrain.lr = 0.001\naugment.factor = 2\nclass_conditioning = true\nseed = 9\n"
    path = tmp_path / "c.cfg"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg.train_path == "a.txt"
    assert cfg.model == {"d_model": 32, "num_heads": 2}
    assert cfg.training.lr == 0.001 and cfg.training.seed == 9
    assert cfg.augment_factor == 2 and cfg.class_conditioning is True
    again = config_from_mapping(parse_config_text(cfg.dumps()))
    assert again == cfg and again.digest() == cfg.digest()


def test_config_errors():
    with pytest.raises(ValueError):
        config_from_mapping({"model.nonsense": "1"})
    with pytest.raises(ValueError):
        parse_config_text("just words")
    with pytest.raises(ValueError):
        config_from_mapping({"augment.factor": "-1"})
    with pytest.raises(ValueError):
        config_from_mapping({"class_conditioning": "maybe"})


def test_manifest_contents(tmp_path):
    cfg = RunConfig(seed=4)
    path = write_manifest(tmp_path, cfg, "train", {"checkpoint": "model.csmk"})
    text = path.read_text()
    for needle in ("command = train", f"config_hash = {cfg.digest()}", "seed = 4", "torch_version", "artifact.checkpoint = model.csmk", "config.model"[:6]):
        assert needle in text
    values = dict(line.split(" = ", 1) for line in text.splitlines() if line.startswith("config."))
    rebuilt = config_from_mapping({k[7:]: v for k, v in values.items()})
    assert rebuilt.digest() == cfg.digest()


# command line --------------------------------------------------------------


def write_run_config(tmp_path, toy_path, **extra):
    lines = {
        "data.train": str(toy_path),
        "data.test": str(toy_path),
        "paths.checkpoint_dir": str(tmp_path / "ckpt"),
        "paths.output_dir": str(tmp_path / "out"),
        "model.d_model": "16",
        "model.num_heads": "2",
        "model.d_ff": "32",
        "model.num_layers": "1",
        "model.dropout": "0.0",
        "train.epochs": "2",
        "train.batch_size": "16",
        "decode.beam_size": "3",
        "decode.max_len": "40",
        **extra,
    }
    path = tmp_path / "run.cfg"
    path.write_text("".join(f"{k} = {v}\n" for k, v in lines.items()))
    return path


def test_cli_convert(tmp_path, capsys):
    src = tmp_path / "m.smi"
    src.write_text("c1ccccc1\n[NH4+]\n\n")
    assert main(["convert", str(src)]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out == ["C & 1 C & C & C & C & C & 1", "N H H H H +"]
    back = tmp_path / "t.txt"
    back.write_text("\n".join(out) + "\n")
    dest = tmp_path / "s.smi"
    assert main(["convert", "--to", "smiles", str(back), "-o", str(dest)]) == EXIT_OK
    assert dest.read_text().split() == ["c1ccccc1", "[NH4+]"]


def test_cli_align(tmp_path, capsys):
    src = tmp_path / "r.txt"
    src.write_text("[C:1][O:2]>>[C:1]=[O:2]\n")
    assert main(["align", str(src)]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["# reaction 0 rows=2 cols=3", "0\t0\t1", "1\t2\t1"]
    assert main(["align", "--dense", "--smooth", "0.1", str(src)]) == EXIT_OK
    dense = capsys.readouterr().out.splitlines()[1:]
    assert [float(v) for v in dense[0].split(",")] == pytest.approx([0.9 + 0.1 / 3, 0.1 / 3, 0.1 / 3])


def test_cli_stats(sample_path, capsys):
    assert main(["stats", str(sample_path)]) == EXIT_OK
    out = dict(line.split(" = ") for line in capsys.readouterr().out.splitlines())
    assert int(out["reactions"]) >= 500
    assert float(out["csmiles_mean"]) <= float(out["raw_mean"])


def test_cli_train_predict_eval_dump(tmp_path, toy_path, capsys):
    cfg = write_run_config(tmp_path, toy_path)
    assert main(["--config", str(cfg), "train"]) == EXIT_OK
    out = dict(line.split(" = ") for line in capsys.readouterr().out.splitlines())
    ckpt = tmp_path / "ckpt" / "model.csmk"
    assert out["checkpoint"] == str(ckpt) and ckpt.exists()
    metrics = (tmp_path / "ckpt" / "metrics.csv").read_text().splitlines()
    assert metrics[0] == "epoch,lm,sa,ci,total,tf_tau,token_acc" and len(metrics) == 3
    assert (tmp_path / "ckpt" / "manifest.txt").exists()

    assert main(["--config", str(cfg), "predict"]) == EXIT_OK
    preds = read_predictions(tmp_path / "out" / "predictions.tsv")
    assert set(preds) == set(range(32)) and all(1 <= len(v) <= 3 for v in preds.values())

    assert main(["--config", str(cfg), "eval"]) == EXIT_OK
    lines = (tmp_path / "out" / "metrics.txt").read_text().splitlines()
    keys = [line.split(" = ")[0] for line in lines]
    assert len(keys) == 8
    assert set(keys) == {f"top{k}_{m}" for k in (1, 3, 5, 10) for m in ("accuracy", "validity")}
    capsys.readouterr()

    assert main(["--config", str(cfg), "dump-attn", "--index", "2"]) == EXIT_OK
    for suffix in ("attn.csv", "attn.pgm", "sam.csv", "sam.pgm"):
        assert (tmp_path / "out" / f"attn_2.{suffix}").exists()
    assert main(["--config", str(cfg), "dump-attn", "--index", "99"]) == EXIT_USAGE


def test_cli_same_config_same_checksum(tmp_path, toy_path, capsys):
    sums = []
    for k in range(2):
        run = tmp_path / f"r{k}"
        run.mkdir()
        cfg = write_run_config(run, toy_path)
        assert main(["--config", str(cfg), "--seed", "5", "train"]) == EXIT_OK
        out = dict(line.split(" = ") for line in capsys.readouterr().out.splitlines())
        sums.append((out["checkpoint_sha256"], (run / "ckpt" / "metrics.csv").read_text()))
    assert sums[0] == sums[1]


def test_cli_set_override(tmp_path, toy_path, capsys):
    cfg = write_run_config(tmp_path, toy_path)
    assert main(["--config", str(cfg), "--set", "train.epochs=1", "train"]) == EXIT_OK
    assert len((tmp_path / "ckpt" / "metrics.csv").read_text().splitlines()) == 2
    assert main(["--config", str(cfg), "--set", "train.epochs", "train"]) == EXIT_USAGE


def test_cli_exit_codes(tmp_path, toy_path):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == EXIT_USAGE
    assert main(["stats", str(tmp_path / "missing.txt")]) == EXIT_DATA
    bad = tmp_path / "bad.txt"
    bad.write_text("junk\n")
    assert main(["stats", str(bad)]) == EXIT_DATA
    cfg = write_run_config(tmp_path, toy_path)
    assert main(["--config", str(cfg), "--set", "model.bogus=1", "train"]) == EXIT_DATA
    assert main(["--config", str(cfg), "predict", "--checkpoint", str(tmp_path / "none.csmk")]) == EXIT_DATA


def test_cli_divergence_exit_code(tmp_path, toy_path, monkeypatch):
    import csmiles.cli as cli

    def boom(cfg, command):
        raise DivergedLoss("non-finite loss at epoch 0")

    monkeypatch.setattr(cli, "run_train", boom)
    cfg = write_run_config(tmp_path, toy_path)
    assert main(["--config", str(cfg), "train"]) == EXIT_DIVERGED


def test_console_script_installed(tmp_path):
    src = tmp_path / "m.smi"
    src.write_text("[s+]\n")
    done = subprocess.run(["csmiles", "convert", str(src)], capture_output=True, text=True, env={"CSMILES_LOG": "error", "PATH": "/usr/local/bin:/usr/bin:/bin"})
    assert done.returncode == 0 and done.stdout == "S & +\n"


def test_seed_is_shared_with_training():
    assert RunConfig(seed=4).training.seed == 4
    assert config_from_mapping({"train.seed": "7"}).seed == 7
    assert config_from_mapping({"train.seed": "7", "seed": "3"}).training.seed == 3
