import subprocess
import sys

import pytest

from mgembed import cli
from mgembed.pipeline import load_config

TINY = """\
# small enough for a few seconds per run
seed=5
synth.users=200
synth.sellers=40
synth.attributes=20
synth.communities=4
synth.p_intra=0.1
synth.p_inter=0.01
embed.dimension=8
embed.epochs=2
mimic.epochs=5
classify.max_iter=20
eval.curve=0.5,1.0
eval.folds=3
"""


@pytest.fixture
def conf(tmp_path):
    path = tmp_path / "tiny.conf"
    path.write_text(TINY)
    return str(path)


def run(*argv):
    return cli.main([str(a) for a in argv])


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_usage_errors_exit_1(tmp_path, conf, capsys):
    with pytest.raises(SystemExit) as info:
        run()
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        run("e2e", "nonsense", tmp_path)
    assert info.value.code == 1
    assert run("synth", tmp_path / "d", "-o", "no.such.key=1") == 1
    assert run("synth", tmp_path / "d", "--workers", "0") == 1
    assert run("synth", tmp_path / "d", "-o", "synth.p_intra=7") == 1


def test_missing_input_exits_2(tmp_path, capsys):
    assert run("train-embed", tmp_path / "missing.edges", tmp_path / "x.emb") == 2
    assert "missing.edges" in capsys.readouterr().err
    bad = tmp_path / "bad.pred"
    bad.write_text("a 7 0.1\n")
    assert run("evaluate", bad, tmp_path / "ev") == 2


def test_fuse_requires_task_inputs(tmp_path, capsys):
    assert run("fuse", "buying", tmp_path / "ds", "--friendship", tmp_path / "f.emb") == 1


def test_evaluate_perfect_scores(tmp_path, capsys):
    pred = tmp_path / "p.pred"
    pred.write_text("a 0 0.0\nb 1 1.0\nc 1 1.0\nd 0 0.0\n")
    assert run("evaluate", pred, tmp_path / "ev") == 0
    report = (tmp_path / "ev.report").read_text()
    assert "auc=1.0\n" in report and "accuracy=1.0\n" in report


def test_train_embed_is_byte_identical_and_seed_checked(tmp_path, conf, capsys):
    data = tmp_path / "data"
    assert run("synth", data, "--config", conf) == 0
    for out in ("a.emb", "b.emb"):
        assert run("train-embed", data / "friendship.edges", tmp_path / out, "--config", conf) == 0
    assert read(tmp_path / "a.emb") == read(tmp_path / "b.emb")
    capsys.readouterr()
    assert run("train-embed", data / "friendship.edges", tmp_path / "c.emb",
               "--config", conf, "--seed", "6") == 2
    assert "seed=5" in capsys.readouterr().err
    assert not (tmp_path / "c.emb").exists()


def test_mimic_fuse_classify_chain(tmp_path, conf, capsys):
    data = tmp_path / "data"
    common = ("--config", conf)
    assert run("synth", data, *common) == 0
    assert run("train-embed", data / "friendship.edges", tmp_path / "f.emb", *common) == 0
    assert run("train-embed", data / "purchases.edges", tmp_path / "t.emb", *common) == 0
    assert run("mimic", "train", data / "friendship.edges", tmp_path / "t.emb", tmp_path / "m", *common) == 0
    assert run("mimic", "infer", tmp_path / "m", data / "friendship.edges", tmp_path / "t.emb",
               tmp_path / "tm.emb", *common) == 0
    assert run("fuse", "credit", tmp_path / "ds", "--friendship", tmp_path / "f.emb",
               "--transaction", tmp_path / "t.emb", "--transaction-mimic", tmp_path / "tm.emb",
               "--labels", data / "credit.labels", *common) == 0
    assert run("classify", tmp_path / "ds", tmp_path / "clf", "--kind", "knn", *common) == 0
    assert run("learning-curve", tmp_path / "ds", tmp_path / "lc.csv", *common) == 0
    assert (tmp_path / "lc.csv").read_text().count("\n") == 3
    assert run("classify", tmp_path / "ds", tmp_path / "rfe", "--rfe", *common) == 0
    assert (tmp_path / "rfe.rfe").read_text().startswith("selected=")


def test_chained_stages_equal_e2e(tmp_path, conf, capsys):
    """Running each stage by hand reproduces the e2e artifacts byte for byte."""
    e2e, man = tmp_path / "e2e", tmp_path / "manual"
    assert run("e2e", "buying", e2e, "--config", conf) == 0
    common = ("--config", conf)
    d = man / "data"
    steps = [
        ("synth", d),
        ("train-embed", d / "friendship.edges", man / "friendship.emb"),
        ("train-embed", d / "purchases.edges", man / "transaction.emb"),
        ("train-embed", d / "attributes.edges", man / "attribute.emb"),
        ("mimic", "train", d / "friendship.edges", man / "transaction.emb", man / "transaction.mimic"),
        ("mimic", "infer", man / "transaction.mimic", d / "friendship.edges",
         man / "transaction.emb", man / "transaction_mimic.emb"),
        ("fuse", "buying", man / "dataset.txt", "--pairs", d / "purchases_cold.edges",
         "--friendship", man / "friendship.emb", "--transaction", man / "transaction.emb",
         "--attribute", man / "attribute.emb", "--transaction-mimic", man / "transaction_mimic.emb"),
        ("classify", man / "dataset.txt", man / "classifier", "--kind", "mlp"),
        ("evaluate", man / "classifier.pred", man / "eval"),
    ]
    for step in steps:
        assert run(*step, *common) == 0, step
    manifest = (e2e / "e2e.manifest").read_text()
    assert "seed=5\n" in manifest and "classifier=mlp\n" in manifest
    for name in ("friendship.emb", "transaction.emb", "attribute.emb", "transaction_mimic.emb",
                 "dataset.txt", "classifier.model", "classifier.pred", "eval.report",
                 "eval.roc.csv", "data/friendship.edges"):
        assert read(e2e / name) == read(man / name), name


def test_config_round_trip(tmp_path):
    from mgembed.pipeline import write_config
    cfg = load_config(None, ["seed=3", "embed.dimension=16", "synth.communities=2",
                             "synth.community_credit_rates=0.1,0.2"])
    write_config(cfg, tmp_path / "c.conf")
    back = load_config(str(tmp_path / "c.conf"))
    assert back.items() == cfg.items()


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mgembed.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "e2e" in proc.stdout
