import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from plantdx.cli import run
from plantdx.forest import load_model


def _run(capsys, *argv):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def trained(leaf_cache, tmp_path_factory):
    out = tmp_path_factory.mktemp("model") / "potato.json"
    assert run(["train", "--features", str(leaf_cache), "--plant", "Potato", "--trees", "25",
                "--out", str(out)]) == 0
    return out


def test_train_writes_potato_model(trained):
    model = load_model(trained)
    assert model.plant == "Potato"
    assert model.labels == ["Blight", "Leaf_spot", "healthy"]
    assert len(model.trees) == 25 and model.params.seed == 42
    assert len(model.selected_features) >= 2


def test_train_twice_byte_identical(leaf_cache, trained, tmp_path, capsys):
    again = tmp_path / "again.json"
    code, _, _ = _run(capsys, "train", "--features", leaf_cache, "--plant", "Potato", "--trees", 25, "--out", again)
    assert code == 0
    assert again.read_bytes() == trained.read_bytes()


def test_train_from_data_dir_matches_cache(leaf_root, trained, tmp_path, capsys):
    out = tmp_path / "m.json"
    code, _, _ = _run(capsys, "train", "--data-dir", leaf_root, "--plant", "Potato", "--trees", 25, "--out", out)
    assert code == 0 and out.read_bytes() == trained.read_bytes()


def test_predict_prints_json(trained, leaf_root, capsys):
    image = sorted((leaf_root / "Potato___healthy").iterdir())[0]
    code, out, _ = _run(capsys, "predict", "--model", trained, "--image", image)
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {"plant", "label", "confidence", "votes"}
    assert doc["plant"] == "Potato" and doc["label"] in ("Blight", "Leaf_spot", "healthy")
    assert sum(doc["votes"].values()) == 25
    assert doc["confidence"] == doc["votes"][doc["label"]] / 25


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = _run(capsys, "train", "--bogus")
    assert code == 2 and "--bogus" in err


def test_missing_subcommand_is_usage_error(capsys):
    assert _run(capsys)[0] == 2


def test_extract_missing_root(tmp_path, capsys):
    code, _, err = _run(capsys, "extract", "--data-dir", tmp_path / "missing", "--out", tmp_path / "f.csv")
    assert code == 1 and "RootNotFound" in err


def test_extract_writes_cache(leaf_root, leaf_cache, tmp_path, capsys):
    out = tmp_path / "f.csv"
    code, _, err = _run(capsys, "extract", "--data-dir", leaf_root, "--out", out, "--workers", 2)
    assert code == 0 and "36 rows" in err
    assert out.read_bytes() == leaf_cache.read_bytes()


def test_unknown_plant(leaf_cache, tmp_path, capsys):
    code, _, err = _run(capsys, "train", "--features", leaf_cache, "--plant", "Banana", "--out", tmp_path / "m.json")
    assert code == 1 and "UnknownPlant" in err


def test_missing_model_file(tmp_path, capsys):
    code, _, err = _run(capsys, "predict", "--model", tmp_path / "nope.json", "--image", tmp_path / "x.png")
    assert code == 1 and "--model" in err


def test_train_all_writes_per_plant(leaf_cache, tmp_path, capsys):
    code, out, _ = _run(capsys, "train", "--features", leaf_cache, "--plant", "all", "--trees", 5,
                        "--models-dir", tmp_path / "models", "--report-dir", tmp_path / "reports")
    assert code == 0
    assert (tmp_path / "models" / "Potato.json").is_file()
    assert (tmp_path / "reports" / "Potato" / "metrics.json").is_file()
    assert "Potato" in json.loads(out)


def test_report_bundle_deterministic(trained, leaf_cache, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(capsys, "report", "--model", trained, "--features", leaf_cache, "--report-dir", a)[0] == 0
    assert _run(capsys, "report", "--model", trained, "--features", leaf_cache, "--report-dir", b)[0] == 0
    names = sorted(p.name for p in a.iterdir())
    for required in ("metrics.json", "confusion.csv", "confusion.svg", "roc.svg", "correlation.csv",
                     "correlation.svg"):
        assert required in names
    assert [n for n in names if n.startswith("roc_")]
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
    with (a / "confusion.csv").open() as fh:
        rows = list(csv.reader(fh))
    counts = np.array([[int(v) for v in r[1:]] for r in rows[1:]])
    assert counts.sum() == json.loads((a / "metrics.json").read_text())["n_samples"]


def test_evaluate_matches_train_report(trained, leaf_cache, tmp_path, capsys):
    code, out, _ = _run(capsys, "evaluate", "--model", trained, "--features", leaf_cache)
    assert code == 0
    doc = json.loads(out)
    assert 0 <= doc["accuracy"] <= 1 and doc["micro_f1"] == doc["accuracy"]
    code, out, _ = _run(capsys, "train", "--features", leaf_cache, "--plant", "Potato", "--trees", 25,
                        "--out", tmp_path / "m.json")
    assert json.loads(out)["Potato"]["accuracy"] == doc["accuracy"]


def test_crossval(leaf_cache, tmp_path, capsys):
    code, out, _ = _run(capsys, "crossval", "--features", leaf_cache, "--plant", "Potato", "--trees", 10,
                        "--k", 3, "--report-dir", tmp_path / "cv")
    assert code == 0
    doc = json.loads(out)["Potato"]
    assert doc["k"] == 3 and len(doc["fold_accuracies"]) == 3
    assert doc["mean_accuracy"] == pytest.approx(np.mean(doc["fold_accuracies"]))
    assert (tmp_path / "cv" / "roc.svg").is_file()


def test_crossval_too_few_per_class(leaf_cache, capsys):
    code, _, err = _run(capsys, "crossval", "--features", leaf_cache, "--plant", "Potato", "--k", 20)
    assert code == 1 and "TooFewSamplesPerClass" in err


def test_module_entry_point(trained, leaf_root):
    image = sorted((leaf_root / "Potato___Blight").iterdir())[0]
    proc = subprocess.run([sys.executable, "-m", "plantdx", "predict", "--model", str(trained), "--image", str(image)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["plant"] == "Potato"
