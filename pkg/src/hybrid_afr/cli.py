"""Command line pipeline: generate, graph, train, eval, infer, extract.

Settings come from (highest first) command-line flags, ``HYBRID_AFR_<KEY>``
environment variables, a ``key = value`` file given by ``--config``, and
built-in defaults.  Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import colorsys
import json
import multiprocessing as mp
import os
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import featuregen, gcnn, geomextract, hiergraph, metrics, step_io
from .errors import AFRError, ConfigError, InputError
from .mesh import triangulate
from .taxonomy import N_CLASSES, STOCK, feature_class

ENV_PREFIX = "HYBRID_AFR_"

# name -> (type, default)
SETTINGS: dict[str, tuple[type, object]] = {
    "seed": (int, 0),
    "n": (int, 2000),
    "out": (str, None),
    "data": (str, None),
    "graphs": (str, None),
    "checkpoint": (str, None),
    "labels": (str, None),
    "mesh": (str, None),
    "split": (str, "test"),
    "width": (int, 128),
    "layers": (int, 7),
    "epochs": (int, 100),
    "lr": (float, 0.01),
    "decay": (float, 0.95),
    "dropout": (float, 0.3),
    "cap": (int, hiergraph.VERTEX_CAP),
    "workers": (int, 0),
}
# settings that change results; echoed into every output manifest
ECHOED = ("seed", "n", "width", "layers", "epochs", "lr", "decay", "dropout", "cap", "split")


class UsageError(AFRError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _convert(name: str, raw, source: str):
    typ = SETTINGS[name][0]
    try:
        return typ(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{source}: {name} expects {typ.__name__}, got {raw!r}") from None


def read_config_file(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    out = {}
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_").lower()
        if key not in SETTINGS:
            raise ConfigError(f"{path}:{n}: unknown setting {key!r}")
        out[key] = _convert(key, val, f"{path}:{n}")
    return out


def resolve_settings(flags: dict, config_path: Optional[str] = None, env: Optional[dict] = None) -> dict:
    env = os.environ if env is None else env
    merged = {k: d for k, (_, d) in SETTINGS.items()}
    if config_path:
        merged.update(read_config_file(config_path))
    for k in SETTINGS:
        raw = env.get(ENV_PREFIX + k.upper())
        if raw is not None:
            merged[k] = _convert(k, raw, ENV_PREFIX + k.upper())
    for k, v in flags.items():
        if v is not None and k in SETTINGS:
            merged[k] = v
    if merged["workers"] <= 0:
        merged["workers"] = os.cpu_count() or 1
    return merged


def echo(settings: dict) -> dict:
    return {k: settings[k] for k in ECHOED}


def _need(settings: dict, key: str, cmd: str) -> str:
    val = settings.get(key)
    if not val:
        raise UsageError(f"{cmd}: --{key} is required")
    return val


def _need_file(path: str, what: str) -> str:
    if not os.path.isfile(path):
        raise InputError(f"missing {what}: {path}")
    return path


def model_config(s: dict) -> gcnn.ModelConfig:
    return gcnn.ModelConfig(layers_per_level=s["layers"], width=s["width"], epochs=s["epochs"], lr0=s["lr"],
                            decay=s["decay"], dropout=s["dropout"], seed=s["seed"])


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# commands


def cmd_generate(s: dict, out=sys.stdout) -> int:
    out_dir = _need(s, "out", "generate")
    spec = featuregen.GenSpec(seed=s["seed"], n_models=s["n"])
    t0 = time.time()
    manifest = featuregen.generate_dataset(spec, out_dir, workers=s["workers"])
    manifest["config"] = echo(s)
    featuregen.write_manifest(manifest, os.path.join(out_dir, "manifest.json"))
    sizes = manifest["split_sizes"]
    print(f"wrote {len(manifest['models'])} models to {out_dir} "
          f"(train/val/test {sizes['train']}/{sizes['val']}/{sizes['test']}) in {time.time() - t0:.1f}s", file=out)
    return 0


def _graph_job(args) -> hiergraph.HierGraph:
    step_path, label_path, name = args
    doc = step_io.read_step_file(step_path, label_path)
    return hiergraph.graph_from_model(doc.solid, doc.labels, name)


def build_graphs(jobs: Sequence[tuple], workers: int) -> list[hiergraph.HierGraph]:
    if workers <= 1 or len(jobs) < 2:
        return [_graph_job(j) for j in jobs]
    with mp.get_context("spawn").Pool(min(workers, len(jobs))) as pool:
        return pool.map(_graph_job, jobs, chunksize=max(1, len(jobs) // (4 * workers)))


def cmd_graph(s: dict, out=sys.stdout) -> int:
    data = _need(s, "data", "graph")
    out_dir = _need(s, "out", "graph")
    manifest = featuregen.read_manifest(_need_file(os.path.join(data, "manifest.json"), "dataset manifest"))
    jobs, splits = [], []
    for row in manifest["models"]:
        step_path = os.path.join(data, row["path"])
        label_path = step_path[: -len(".step")] + ".labels"
        _need_file(step_path, "model file")
        _need_file(label_path, "label sidecar")
        jobs.append((step_path, label_path, row["path"][: -len(".step")]))
        splits.append(row["split"])
    graphs = build_graphs(jobs, s["workers"])
    os.makedirs(out_dir, exist_ok=True)
    info = {"config": echo(s), "splits": {}}
    for split in ("train", "val", "test"):
        chosen = [g for g, sp in zip(graphs, splits) if sp == split]
        batches = hiergraph.make_batches(chosen, s["cap"], s["seed"]) if chosen else []
        hiergraph.write_hgb(os.path.join(out_dir, f"{split}.hgb"), batches)
        info["splits"][split] = {
            "graphs": len(chosen),
            "batches": len(batches),
            "vertex_totals": [b.n_vertices for b in batches],
        }
        print(f"{split}: {len(chosen)} graphs in {len(batches)} batches "
              f"(max {max((b.n_vertices for b in batches), default=0)} vertices)", file=out)
    _write_json(os.path.join(out_dir, "graphs.json"), info)
    return 0


def _load_split(graph_dir: str, split: str) -> list[hiergraph.GraphBatch]:
    return hiergraph.read_hgb(_need_file(os.path.join(graph_dir, f"{split}.hgb"), f"{split} batches"))


def cmd_train(s: dict, out=sys.stdout) -> int:
    graph_dir = _need(s, "graphs", "train")
    out_dir = _need(s, "out", "train")
    train_b = _load_split(graph_dir, "train")
    val_b = _load_split(graph_dir, "val")
    cfg = model_config(s)
    os.makedirs(out_dir, exist_ok=True)
    log_path = os.path.join(out_dir, "train_log.txt")
    with open(log_path, "w", encoding="utf-8", newline="\n") as log:
        log.write("epoch, lr, train_loss, val_face_acc\n")

        def emit(line: str) -> None:
            log.write(line + "\n")
            log.flush()
            print(line, file=out)

        result = gcnn.train(train_b, val_b, cfg, log=emit)
    gcnn.save_checkpoint(os.path.join(out_dir, "model.ckpt"), result.model)
    _write_json(os.path.join(out_dir, "run.json"), {"config": echo(s), "best_epoch": result.best_epoch,
                                                    "best_val_face_acc": result.history[result.best_epoch].val_face_acc
                                                    if result.best_epoch >= 0 else None})
    print(f"best epoch {result.best_epoch}; checkpoint {os.path.join(out_dir, 'model.ckpt')}", file=out)
    return 0


def evaluate(model: gcnn.Model, batches: Sequence[hiergraph.GraphBatch]) -> metrics.ConfusionMatrix:
    cm = metrics.ConfusionMatrix(model.config.n_classes)
    for b in batches:
        pred, _ = gcnn.predict(model, b)
        cm.update(b.face_labels, pred)
    return cm


def cmd_eval(s: dict, out=sys.stdout) -> int:
    graph_dir = _need(s, "graphs", "eval")
    ckpt = _need_file(_need(s, "checkpoint", "eval"), "checkpoint")
    split = s["split"]
    if split not in ("train", "val", "test"):
        raise UsageError(f"eval: unknown split {split!r}")
    model = gcnn.load_checkpoint(ckpt)
    cm = evaluate(model, _load_split(graph_dir, split))
    text = metrics.report(cm, title=f"{split} split")
    out.write(text)
    if s.get("out"):
        os.makedirs(s["out"], exist_ok=True)
        with open(os.path.join(s["out"], f"report_{split}.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        np.savetxt(os.path.join(s["out"], f"confusion_{split}.csv"), cm.counts, fmt="%d", delimiter=",")
    return 0


# ---------------------------------------------------------------------------
# inference and extraction


def palette() -> list[tuple[float, float, float]]:
    """One fixed colour per class; the stock face is grey."""
    cols = []
    for c in range(N_CLASSES):
        if c == STOCK:
            cols.append((0.6, 0.6, 0.6))
            continue
        h = (c * 0.618033988749895) % 1.0
        r, g, b = colorsys.hsv_to_rgb(h, 0.75 if c % 2 else 0.55, 0.95 if c % 3 else 0.8)
        cols.append((round(r, 4), round(g, 4), round(b, 4)))
    return cols


def export_obj(solid, face_classes: Sequence[int], obj_path: str) -> None:
    """Triangle mesh grouped by predicted class, with a companion .mtl."""
    mesh = triangulate(solid)
    mtl_path = os.path.splitext(obj_path)[0] + ".mtl"
    cols = palette()
    with open(mtl_path, "w", encoding="utf-8", newline="\n") as fh:
        for c in range(N_CLASSES):
            r, g, b = cols[c]
            fh.write(f"newmtl class_{c:02d}\n# {feature_class(c).display}\nKd {r} {g} {b}\n\n")
    tri_cls = np.asarray(face_classes)[mesh.face_ids]
    with open(obj_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"mtllib {os.path.basename(mtl_path)}\n")
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}\n")
        for c in range(N_CLASSES):
            sel = np.flatnonzero(tri_cls == c)
            if sel.size == 0:
                continue
            fh.write(f"g {feature_class(c).name.replace(' ', '_')}\nusemtl class_{c:02d}\n")
            for t in sel:
                a, b, d = (int(x) + 1 for x in mesh.triangles[t])
                fh.write(f"f {a} {b} {d}\n")


def _report(doc: step_io.StepDocument, labels, s: dict, out) -> int:
    rep = geomextract.extract_model(doc.solid, labels, strict=False)
    out.write(rep.text())
    if s.get("mesh"):
        export_obj(doc.solid, [geomextract._split_label(lab)[0] for lab in labels], s["mesh"])
    if s.get("out"):
        os.makedirs(s["out"], exist_ok=True)
        _write_json(os.path.join(s["out"], "report.json"), rep.to_json())
    return 0


def cmd_infer(s: dict, model_path: str, out=sys.stdout) -> int:
    if s.get("labels"):
        doc = step_io.read_step_file(_need_file(model_path, "model file"), _need_file(s["labels"], "label sidecar"))
        return _report(doc, doc.labels, s, out)
    ckpt = _need_file(_need(s, "checkpoint", "infer"), "checkpoint")
    doc = step_io.read_step_file(_need_file(model_path, "model file"))
    model = gcnn.load_checkpoint(ckpt)
    dummy = [(STOCK, 0)] * len(doc.solid.faces)
    graph = hiergraph.graph_from_model(doc.solid, dummy, os.path.basename(model_path))
    pred, _ = gcnn.predict(model, hiergraph.pack([graph]))
    return _report(doc, [int(c) for c in pred], s, out)


def cmd_extract(s: dict, model_path: str, out=sys.stdout) -> int:
    labels = _need(s, "labels", "extract")
    doc = step_io.read_step_file(_need_file(model_path, "model file"), _need_file(labels, "label sidecar"))
    return _report(doc, doc.labels, s, out)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hybrid-afr", description="Hybrid manufacturing feature recognition and dimension extraction.")
    p.add_argument("--config", help="key = value settings file")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, *names):
        for n in names:
            typ = SETTINGS[n][0]
            sp.add_argument(f"--{n}", type=typ, default=None)

    common(sub.add_parser("generate", help="write a labelled dataset"), "n", "seed", "out", "workers")
    common(sub.add_parser("graph", help="build batched graphs from a dataset"), "data", "out", "seed", "cap",
           "workers")
    common(sub.add_parser("train", help="train a network on batched graphs"), "graphs", "out", "width", "layers",
           "epochs", "lr", "decay", "dropout", "seed")
    common(sub.add_parser("eval", help="score a checkpoint on one split"), "graphs", "checkpoint", "split", "out")
    for name, hlp in (("infer", "recognise and dimension one STEP model"),
                      ("extract", "dimension one STEP model from given labels")):
        sp = sub.add_parser(name, help=hlp)
        sp.add_argument("model")
        common(sp, "checkpoint", "labels", "mesh", "out")
    return p


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        ns = build_parser().parse_args(argv)
        flags = {k: v for k, v in vars(ns).items() if k in SETTINGS}
        s = resolve_settings(flags, ns.config)
        if ns.command == "generate":
            return cmd_generate(s, out)
        if ns.command == "graph":
            return cmd_graph(s, out)
        if ns.command == "train":
            return cmd_train(s, out)
        if ns.command == "eval":
            return cmd_eval(s, out)
        if ns.command == "infer":
            return cmd_infer(s, ns.model, out)
        return cmd_extract(s, ns.model, out)
    except (AFRError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
