import json

import pytest

from lyrnet import cli, diagnostics
from lyrnet.autodiff import Tensor
from test_diagnostics import wrong_tanh
from lyrnet import autodiff as ad


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus.jsonl"
    assert run("generate", "--out", corpus, "--n-per-quadrant", 3, "--vocab-size", 40, "--seed", 1) == 0
    config = root / "config.json"
    config.write_text(json.dumps({"encoder": {"n_layers": 1, "d_model": 16, "d_ff": 32, "dropout_p": 0.0}}))
    assert run("train", "--corpus", corpus, "--config", config, "--epochs", 2, "--seed", 0, "--out", root / "run") == 0
    return root, corpus, config


def test_generate_and_manifest(tmp_path):
    out = tmp_path / "c.jsonl"
    assert run("generate", "--out", out, "--n-per-quadrant", 2) == 0
    assert len(out.read_text().splitlines()) == 8
    manifest = json.loads((tmp_path / "c.jsonl.manifest.json").read_text())
    assert manifest["subcommand"] == "generate" and str(out) in manifest["outputs"]
    assert {"version", "seed", "config", "inputs", "started", "finished"} <= set(manifest)


def test_train_writes_checkpoint_metrics_and_manifest(trained):
    root, _, _ = trained
    assert {p.name for p in (root / "run").iterdir()} == {"model.ckpt", "metrics.json", "manifest.json"}
    manifest = json.loads((root / "run" / "manifest.json").read_text())
    assert manifest["config"]["mode"] == "multi-task"
    assert manifest["config"]["training"]["epochs"] == 2
    assert manifest["config"]["encoder"]["d_model"] == 16


def test_evaluate_report_schema(trained, tmp_path):
    root, corpus, _ = trained
    out = tmp_path / "report.json"
    details, preds = tmp_path / "details.json", tmp_path / "preds.jsonl"
    assert run("evaluate", "--checkpoint", root / "run" / "model.ckpt", "--corpus", corpus, "--out", out,
               "--details", details, "--predictions", preds) == 0
    report = json.loads(out.read_text())
    assert report["n_examples"] == 12 and 0 <= report["agreement_rate"] <= 1
    for task in ("quadrant", "valence", "arousal"):
        assert set(report["tasks"][task]) == {"accuracy", "precision", "recall", "macro_f1"}
    assert len(preds.read_text().splitlines()) == 12
    assert "per_class" in json.loads(details.read_text())["tasks"]["quadrant"]


def test_predict_schema_and_determinism(trained, capsys, tmp_path):
    root, _, _ = trained
    lyrics = tmp_path / "song.txt"
    lyrics.write_text("bright0 la1 la2")
    args = ["predict", "--checkpoint", root / "run" / "model.ckpt", "--text", "storm1 la3", "--text", "!!!",
            "--file", lyrics]
    assert run(*args) == 0
    first = capsys.readouterr()
    assert run(*args) == 0
    assert capsys.readouterr().out == first.out
    rows = [json.loads(line) for line in first.out.splitlines()]
    assert [r["id"] for r in rows] == ["text-0", "text-1", "song.txt"]
    assert set(rows[0]) == {"id", "predicted", "logits", "agreement", "degenerate"}
    assert rows[1]["degenerate"] and not rows[0]["degenerate"]
    assert "no words" in first.err


def test_single_task_mode_recorded(trained, tmp_path):
    root, corpus, config = trained
    out = tmp_path / "single"
    assert run("train", "--corpus", corpus, "--config", config, "--epochs", 1, "--lambdas", "0,1,0", "--out", out) == 0
    assert json.loads((out / "manifest.json").read_text())["config"]["mode"] == "single-task valence"


def test_flags_override_config(trained, tmp_path):
    root, corpus, _ = trained
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"encoder": {"n_layers": 1, "d_model": 16, "d_ff": 32},
                                  "training": {"epochs": 5, "seed": 9}}))
    assert run("train", "--corpus", corpus, "--config", config, "--epochs", 1, "--out", tmp_path / "r") == 0
    training = json.loads((tmp_path / "r" / "manifest.json").read_text())["config"]["training"]
    assert training["epochs"] == 1 and training["seed"] == 9


@pytest.mark.parametrize("argv", [
    ["train", "--corpus", "missing.jsonl", "--out", "x"],
    ["train", "--corpus", "CORPUS", "--lambdas", "1,2", "--out", "x"],
    ["train", "--corpus", "CORPUS", "--lambdas", "0,0,0", "--out", "x"],
    ["frobnicate"],
    ["split", "--corpus", "CORPUS", "--ratios", "0.5,0.2", "--out", "x"],
])
def test_usage_errors_exit_2(trained, tmp_path, monkeypatch, capsys, argv):
    _, corpus, _ = trained
    monkeypatch.chdir(tmp_path)
    assert run(*[str(corpus) if a == "CORPUS" else a for a in argv]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_corpus_prints_usage(capsys, tmp_path):
    assert run("evaluate", "--checkpoint", tmp_path / "a", "--corpus", tmp_path / "b", "--out", tmp_path / "c") == 2
    err = capsys.readouterr().err
    assert "no such file" in err and "usage: lyrnet evaluate" in err


def test_bad_data_and_checkpoint_exit_3(trained, tmp_path):
    root, corpus, _ = trained
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a", "lyrics": "x", "quadrant": "Q1", "valence": "negative"}\n')
    assert run("train", "--corpus", bad, "--out", tmp_path / "o") == 3
    broken = tmp_path / "broken.ckpt"
    broken.write_bytes((root / "run" / "model.ckpt").read_bytes()[:200])
    assert run("evaluate", "--checkpoint", broken, "--corpus", corpus, "--out", tmp_path / "r.json") == 3
    assert not (tmp_path / "r.json.manifest.json").exists()


def test_divergence_exit_4(trained, tmp_path, monkeypatch):
    root, corpus, config = trained
    import lyrnet.training as training

    real = training.model_loss

    def poisoned(*args, **kwargs):
        total, per_task = real(*args, **kwargs)
        return total * Tensor(float("nan")), per_task

    monkeypatch.setattr(training, "model_loss", poisoned)
    assert run("train", "--corpus", corpus, "--config", config, "--epochs", 1, "--out", tmp_path / "d") == 4


def test_gradcheck_exit_codes(monkeypatch, tmp_path, capsys):
    out = tmp_path / "gc.json"
    monkeypatch.setattr(diagnostics, "REGISTRY", {"tanh": diagnostics.REGISTRY["tanh"]})
    assert run("gradcheck", "--out", out) == 0
    assert json.loads(out.read_text())[0]["passed"]

    def corrupted(rng):
        return (lambda x: ad.sum(wrong_tanh(x))), [Tensor(rng.uniform(-2, 2, size=(2, 3)))]

    monkeypatch.setitem(diagnostics.REGISTRY, "wrong_tanh", corrupted)
    assert run("gradcheck") == 5
    assert "failed for: wrong_tanh" in capsys.readouterr().err


def test_fetch_with_fixture_and_cache_env(tmp_path, monkeypatch):
    site = tmp_path / "site"
    assert run("generate", "--fixture-site", "--out", site, "--n-songs", 8, "--n-misspelled", 2, "--n-broken", 1) == 0
    cache = tmp_path / "env-cache"
    monkeypatch.setenv("LYRNET_CACHE_DIR", str(cache))
    out = tmp_path / "records.jsonl"
    assert run("fetch", "--queries", site / "queries.jsonl", "--config", site / "crawl.json", "--out", out) == 0
    assert len(list(cache.iterdir())) == 8
    summary = json.loads((tmp_path / "records.jsonl.summary.json").read_text())
    assert summary["coverage"] == 1.0 and summary["baseline_fetched"] == 6
    flag_cache = tmp_path / "flag-cache"
    assert run("fetch", "--queries", site / "queries.jsonl", "--config", site / "crawl.json", "--out", out,
               "--cache-dir", flag_cache) == 0
    assert len(list(flag_cache.iterdir())) == 8
    corpus = tmp_path / "fetched.jsonl"
    assert run("import", "--input", out, "--format", "crawl", "--out", corpus) == 0
    assert len(corpus.read_text().splitlines()) == 8


def test_split_and_ablate(trained, tmp_path):
    root, corpus, config = trained
    assert run("split", "--corpus", corpus, "--ratios", "0.67,0.33", "--seed", 2, "--out", tmp_path / "s") == 0
    assert sorted(p.name for p in (tmp_path / "s").iterdir()) == ["manifest.json", "test.jsonl", "train.jsonl"]
    assert run("ablate", "--corpus", corpus, "--config", config, "--epochs", 1, "--ratios", "0.67,0.33",
               "--out", tmp_path / "a") == 0
    table = (tmp_path / "a" / "ablation.md").read_text().splitlines()
    assert table[0].startswith("| Classification | Accuracy (Multi-Task)")
    assert [row.split("|")[1].strip() for row in table[2:]] == ["Quadrant", "Valence", "Arousal"]
