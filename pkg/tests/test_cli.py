import io
import json

import pytest

from hybrid_afr import cli
from hybrid_afr.errors import ConfigError
from hybrid_afr.featuregen import GroundTruth
from hybrid_afr.geomextract import truth_report
from hybrid_afr.step_io import read_step_file


def run(*argv):
    buf = io.StringIO()
    code = cli.main([str(a) for a in argv], out=buf)
    return code, buf.getvalue()


def test_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nwidth = 32\nlayers = 3\nepochs = 4\nlr = 0.5\n")
    env = {"HYBRID_AFR_LAYERS": "5", "HYBRID_AFR_EPOCHS": "6"}
    s = cli.resolve_settings({"epochs": 9, "seed": None}, str(cfg), env)
    assert (s["width"], s["layers"], s["epochs"], s["lr"]) == (32, 5, 9, 0.5)
    assert s["seed"] == 0 and s["dropout"] == 0.3
    assert s["workers"] >= 1
    assert set(cli.echo(s)) == set(cli.ECHOED)


@pytest.mark.parametrize("text", ["width 32\n", "colour = red\n", "width = wide\n"])
def test_bad_config_file(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    with pytest.raises(ConfigError):
        cli.resolve_settings({}, str(cfg), {})


def test_bad_env_value():
    with pytest.raises(ConfigError, match="HYBRID_AFR_SEED"):
        cli.resolve_settings({}, None, {"HYBRID_AFR_SEED": "x"})


def test_exit_codes(tmp_path, monkeypatch, capsys):
    assert run("generate", "--n", "3")[0] == 1
    assert "--out" in capsys.readouterr().err
    assert run("frobnicate")[0] == 1
    assert run("--help")[0] == 0
    code, _ = run("graph", "--data", tmp_path / "nowhere", "--out", tmp_path / "g")
    assert code == 1
    assert "manifest.json" in capsys.readouterr().err

    def boom(*a, **k):
        raise RuntimeError("unexpected")

    monkeypatch.setattr(cli, "cmd_generate", boom)
    assert run("generate", "--out", tmp_path / "x")[0] == 2
    assert "internal error" in capsys.readouterr().err


def test_infer_needs_checkpoint_or_labels(tmp_path, sample_models):
    from hybrid_afr.step_io import write_step

    path = tmp_path / "m.step"
    path.write_text(write_step(sample_models[0].solid))
    assert run("infer", path)[0] == 1


def test_palette_fixed():
    cols = cli.palette()
    assert len(cols) == 30 and len(set(cols)) == 30
    assert cols == cli.palette()


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    data, graphs, train = root / "data", root / "graphs", root / "train"
    assert run("generate", "--n", 10, "--seed", 3, "--out", data, "--workers", 1)[0] == 0
    assert run("graph", "--data", data, "--out", graphs, "--workers", 1)[0] == 0
    assert run("train", "--graphs", graphs, "--out", train, "--epochs", 2, "--width", 8, "--layers", 2)[0] == 0
    return root


def test_pipeline_artifacts(pipeline):
    manifest = json.loads((pipeline / "data" / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 3 and manifest["config"]["n"] == 10
    info = json.loads((pipeline / "graphs" / "graphs.json").read_text())
    assert all(v < 5000 for sp in info["splits"].values() for v in sp["vertex_totals"])
    log = (pipeline / "train" / "train_log.txt").read_text().splitlines()
    assert log[0] == "epoch, lr, train_loss, val_face_acc"
    assert log[1].split(", ")[:2] == ["0", "0.01"]
    assert json.loads((pipeline / "train" / "run.json").read_text())["config"]["epochs"] == 2


def test_generate_rerun_identical(pipeline, tmp_path):
    assert run("generate", "--n", 10, "--seed", 3, "--out", tmp_path, "--workers", 2)[0] == 0
    for f in (pipeline / "data").iterdir():
        if f.name != "manifest.json":
            assert (tmp_path / f.name).read_bytes() == f.read_bytes()


def test_eval_report(pipeline):
    code, text = run("eval", "--graphs", pipeline / "graphs", "--checkpoint", pipeline / "train" / "model.ckpt",
                     "--split", "train", "--out", pipeline / "eval")
    assert code == 0
    assert text.startswith("train split: ")
    assert (pipeline / "eval" / "confusion_train.csv").exists()


def test_oracle_labels_reproduce_truth(pipeline):
    data = pipeline / "data"
    for step in sorted(data.glob("*.step"))[:5]:
        labels = step.with_suffix(".labels")
        truth = GroundTruth.from_json(step.with_suffix(".gt.json").read_text())
        want = truth_report(truth, read_step_file(step, labels).labels).text()
        assert run("infer", step, "--labels", labels) == (0, want)
        assert run("extract", step, "--labels", labels) == (0, want)


def test_infer_with_network(pipeline):
    step = sorted((pipeline / "data").glob("*.step"))[0]
    obj = pipeline / "out.obj"
    code, text = run("infer", step, "--checkpoint", pipeline / "train" / "model.ckpt", "--mesh", obj,
                     "--out", pipeline / "rep")
    assert code == 0
    assert text.splitlines()[-1].startswith("Stock | min [")
    assert obj.read_text().startswith("mtllib out.mtl")
    assert (pipeline / "out.mtl").read_text().count("newmtl") == 30
    assert (pipeline / "rep" / "report.json").exists()
