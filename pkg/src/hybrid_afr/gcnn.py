"""Hierarchical graph convolutional network on numpy with hand-written gradients.

Pipeline per batch: spatial graph convolutions over mesh facets, mean
pooling of facet embeddings into their faces, a linear transfer map
concatenated to the face features, spatial graph convolutions over the
face adjacency graph (one neighbour weight per edge-convexity class) and
a linear classification head.

One convolution block::

    a_v = W_self h_v + mean_{u in N(v)} relu(U (p_u - p_v) + 1) * (W_nbr[c_uv] h_u) + b
    out = dropout(batchnorm(relu(a))) + skip(h)
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, ContainerError, InputError, NumericError
from .hiergraph import FACE_FEATURES, FACET_FEATURES, N_CONVEXITY, GraphBatch

Params = dict[str, np.ndarray]


@dataclass(frozen=True)
class ModelConfig:
    layers_per_level: int = 7
    width: int = 128
    n_classes: int = 30
    lr0: float = 0.01
    decay: float = 0.95
    lr_floor: float = 1e-5
    epochs: int = 100
    dropout: float = 0.3
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.layers_per_level < 1 or self.width < 1 or self.n_classes < 2:
            raise ConfigError("layers_per_level and width must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.epochs < 0 or self.lr0 <= 0 or not 0 < self.decay <= 1:
            raise ConfigError("invalid schedule settings")

    def lr(self, epoch: int) -> float:
        return max(self.lr0 * self.decay**epoch, self.lr_floor)

    def shape_key(self) -> dict:
        return {"layers_per_level": self.layers_per_level, "width": self.width, "n_classes": self.n_classes}


def xavier_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    bound = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


# ---------------------------------------------------------------------------
# graph structure helpers


class Edges:
    """Directed edge list with segment layouts for gather/scatter by sorting."""

    def __init__(self, links: np.ndarray, classes: Optional[np.ndarray], n_nodes: int, n_classes: int):
        links = np.asarray(links, dtype=np.int64).reshape(-1, 2)
        cls = np.zeros(len(links), dtype=np.int64) if classes is None else np.asarray(classes, dtype=np.int64)
        self.src = np.concatenate([links[:, 0], links[:, 1]])
        self.dst = np.concatenate([links[:, 1], links[:, 0]])
        self.cls = np.concatenate([cls, cls])
        self.n = n_nodes
        self.C = n_classes
        self.deg = np.bincount(self.dst, minlength=n_nodes).astype(np.float64)
        self.inv_deg = np.where(self.deg > 0, 1.0 / np.maximum(self.deg, 1.0), 0.0)
        self.key = self.src * n_classes + self.cls
        self._dst_seg = _segments(self.dst)
        self._key_seg = _segments(self.key)

    @property
    def n_edges(self) -> int:
        return int(self.src.shape[0])

    def sum_to_dst(self, vals: np.ndarray) -> np.ndarray:
        return _segment_sum(vals, self._dst_seg, self.n)

    def sum_to_key(self, vals: np.ndarray) -> np.ndarray:
        return _segment_sum(vals, self._key_seg, self.n * self.C)


def _segments(keys: np.ndarray):
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    if sk.size == 0:
        return order, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    starts = np.flatnonzero(np.r_[True, sk[1:] != sk[:-1]])
    return order, starts, sk[starts]


def _segment_sum(vals: np.ndarray, seg, n_out: int) -> np.ndarray:
    order, starts, ids = seg
    out = np.zeros((n_out,) + vals.shape[1:], dtype=vals.dtype)
    if starts.size:
        out[ids] = np.add.reduceat(vals[order], starts, axis=0)
    return out


@dataclass
class Prepared:
    """A batch plus its precomputed edge layouts."""

    batch: GraphBatch
    facet_edges: Edges
    face_edges: Edges
    pool_seg: tuple
    pool_count: np.ndarray

    @property
    def labels(self) -> np.ndarray:
        return self.batch.face_labels


def prepare(batch: GraphBatch) -> Prepared:
    for name, arr in (("face_pos", batch.face_pos), ("facet_pos", batch.facet_pos)):
        if arr.size and (arr.min() < -1e-9 or arr.max() > 1 + 1e-9):
            raise InputError(f"batch is not normalized ({name} outside [0, 1])")
    fe = Edges(batch.facet_links, None, batch.n_facets, 1)
    ge = Edges(batch.face_links, batch.face_link_conv, batch.n_faces, N_CONVEXITY)
    count = np.bincount(batch.facet_parent, minlength=batch.n_faces).astype(np.float64)
    if np.any(count == 0):
        raise InputError("a face has no facets")
    return Prepared(batch, fe, ge, _segments(batch.facet_parent), count)


# ---------------------------------------------------------------------------
# parameters


def _layer_names(level: str, cfg: ModelConfig) -> list[str]:
    return [f"{level}{i}" for i in range(cfg.layers_per_level)]


def init_params(cfg: ModelConfig, seed: Optional[int] = None) -> tuple[Params, Params]:
    """Fresh (params, running-statistics state)."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed if seed is None else seed, 0x1417]))
    p: Params = {}
    st: Params = {}
    w = cfg.width
    for level, d_in0, C in (("f", FACET_FEATURES, 1), ("g", FACE_FEATURES + w, N_CONVEXITY)):
        for i, name in enumerate(_layer_names(level, cfg)):
            d_in = d_in0 if i == 0 else w
            p[name + ".Ws"] = xavier_init(d_in, w, rng)
            p[name + ".Wn"] = np.concatenate([xavier_init(d_in, w, rng) for _ in range(C)], axis=1)
            p[name + ".U"] = xavier_init(3, w, rng)
            p[name + ".b"] = np.zeros(w)
            p[name + ".gamma"] = np.ones(w)
            p[name + ".beta"] = np.zeros(w)
            if d_in != w:
                p[name + ".Wp"] = xavier_init(d_in, w, rng)
            st[name + ".mean"] = np.zeros(w)
            st[name + ".var"] = np.ones(w)
        if level == "f":
            p["T.W"] = xavier_init(w, w, rng)
            p["T.b"] = np.zeros(w)
    p["H.W"] = xavier_init(w, cfg.n_classes, rng)
    p["H.b"] = np.zeros(cfg.n_classes)
    return p, st


# ---------------------------------------------------------------------------
# forward / backward


def _check(name: str, *arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError(f"non-finite values in {name}")


def _conv_forward(p: Params, st: Params, name: str, H, P, E: Edges, cfg: ModelConfig, train: bool,
                  rng: Optional[np.random.Generator], update_stats: bool):
    Ws, Wn, U = p[name + ".Ws"], p[name + ".Wn"], p[name + ".U"]
    d = Ws.shape[1]
    S = H @ Ws
    Mall = (H @ Wn).reshape(-1, d)
    dP = P[E.src] - P[E.dst]
    Gpre = dP @ U + 1.0
    G = np.maximum(Gpre, 0.0)
    Mg = Mall[E.key]
    msg = G * Mg
    agg = E.sum_to_dst(msg) * E.inv_deg[:, None]
    A = S + agg + p[name + ".b"]
    R = np.maximum(A, 0.0)
    eps = cfg.bn_eps
    if train:
        mu = R.mean(axis=0)
        var = R.var(axis=0)
        if update_stats:
            m = cfg.bn_momentum
            st[name + ".mean"] = (1 - m) * st[name + ".mean"] + m * mu
            st[name + ".var"] = (1 - m) * st[name + ".var"] + m * var
    else:
        mu, var = st[name + ".mean"], st[name + ".var"]
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (R - mu) * inv_std
    Y = p[name + ".gamma"] * xhat + p[name + ".beta"]
    mask = None
    if train and cfg.dropout > 0:
        keep = 1.0 - cfg.dropout
        mask = (rng.random(Y.shape) < keep) / keep
        Y = Y * mask
    skip = H @ p[name + ".Wp"] if name + ".Wp" in p else H
    out = Y + skip
    _check(name, out)
    cache = (H, dP, Gpre, G, Mg, A, xhat, inv_std, mask)
    return out, cache


def _conv_backward(p: Params, name: str, E: Edges, cache, dout, grads: Params):
    H, dP, Gpre, G, Mg, A, xhat, inv_std, mask = cache
    Ws, Wn = p[name + ".Ws"], p[name + ".Wn"]
    d = Ws.shape[1]
    dY = dout * mask if mask is not None else dout
    grads[name + ".gamma"] = (dY * xhat).sum(axis=0)
    grads[name + ".beta"] = dY.sum(axis=0)
    dx = dY * p[name + ".gamma"]
    n = dx.shape[0]
    dR = inv_std / n * (n * dx - dx.sum(axis=0) - xhat * (dx * xhat).sum(axis=0))
    dA = dR * (A > 0)
    grads[name + ".b"] = dA.sum(axis=0)
    grads[name + ".Ws"] = H.T @ dA
    dH = dA @ Ws.T
    dmsg = (dA * E.inv_deg[:, None])[E.dst]
    dG = dmsg * Mg
    dMg = dmsg * G
    grads[name + ".U"] = dP.T @ (dG * (Gpre > 0))
    dMall = E.sum_to_key(dMg).reshape(-1, Wn.shape[1])
    grads[name + ".Wn"] = H.T @ dMall
    dH += dMall @ Wn.T
    if name + ".Wp" in p:
        grads[name + ".Wp"] = H.T @ dout
        dH += dout @ p[name + ".Wp"].T
    else:
        dH += dout
    return dH


def forward(prep: Prepared, p: Params, st: Params, cfg: ModelConfig, train: bool = False,
            rng: Optional[np.random.Generator] = None, update_stats: bool = True):
    """Per-face logits and the cache needed for :func:`backward`."""
    b = prep.batch
    if train and rng is None:
        rng = np.random.default_rng(cfg.seed)
    caches = []
    H = b.facet_feats
    for name in _layer_names("f", cfg):
        H, c = _conv_forward(p, st, name, H, b.facet_pos, prep.facet_edges, cfg, train, rng, update_stats)
        caches.append(c)
    pooled = _segment_sum(H, prep.pool_seg, b.n_faces) / prep.pool_count[:, None]
    Z = pooled @ p["T.W"] + p["T.b"]
    X = np.concatenate([b.face_feats, Z], axis=1)
    H1 = X
    for name in _layer_names("g", cfg):
        H1, c = _conv_forward(p, st, name, H1, b.face_pos, prep.face_edges, cfg, train, rng, update_stats)
        caches.append(c)
    logits = H1 @ p["H.W"] + p["H.b"]
    _check("head", logits)
    return logits, (caches, pooled, H1)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean loss and its gradient with respect to the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -float(logp[np.arange(n), labels].mean())
    g = np.exp(logp)
    g[np.arange(n), labels] -= 1.0
    return loss, g / n


def backward(prep: Prepared, p: Params, cfg: ModelConfig, cache, dlogits: np.ndarray) -> Params:
    caches, pooled, H1 = cache
    grads: Params = {}
    grads["H.W"] = H1.T @ dlogits
    grads["H.b"] = dlogits.sum(axis=0)
    dH = dlogits @ p["H.W"].T
    L = cfg.layers_per_level
    for i, name in reversed(list(enumerate(_layer_names("g", cfg)))):
        dH = _conv_backward(p, name, prep.face_edges, caches[L + i], dH, grads)
    dZ = dH[:, FACE_FEATURES:]
    grads["T.W"] = pooled.T @ dZ
    grads["T.b"] = dZ.sum(axis=0)
    dpool = (dZ @ p["T.W"].T) / prep.pool_count[:, None]
    dH = dpool[prep.batch.facet_parent]
    for i, name in reversed(list(enumerate(_layer_names("f", cfg)))):
        dH = _conv_backward(p, name, prep.facet_edges, caches[i], dH, grads)
    for k, v in grads.items():
        if not np.all(np.isfinite(v)):
            raise NumericError(f"non-finite gradient for {k}")
    return grads


def loss_and_grads(prep: Prepared, p: Params, st: Params, cfg: ModelConfig,
                   rng: Optional[np.random.Generator] = None, update_stats: bool = True,
                   scale: float = 1.0) -> tuple[float, Params]:
    logits, cache = forward(prep, p, st, cfg, True, rng, update_stats)
    loss, dlogits = cross_entropy(logits, prep.labels)
    grads = backward(prep, p, cfg, cache, dlogits * scale)
    return loss * scale, grads


# ---------------------------------------------------------------------------
# optimisation


@dataclass
class Adam:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)

    def step(self, p: Params, grads: Params, lr: float) -> None:
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            p[k] -= lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


@dataclass
class Model:
    config: ModelConfig
    params: Params
    state: Params

    @staticmethod
    def create(cfg: ModelConfig) -> "Model":
        p, st = init_params(cfg)
        return Model(cfg, p, st)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_face_acc: float

    def log_line(self) -> str:
        return f"{self.epoch}, {self.lr:.6g}, {self.train_loss:.6f}, {self.val_face_acc:.6f}"


@dataclass
class TrainResult:
    model: Model
    history: list[EpochRecord]
    best_epoch: int


def face_accuracy(model: Model, preps: Sequence[Prepared]) -> float:
    correct = total = 0
    for prep in preps:
        pred, _ = predict(model, prep)
        correct += int((pred == prep.labels).sum())
        total += len(pred)
    return correct / total if total else 0.0


def train(train_batches: Sequence, val_batches: Sequence, cfg: ModelConfig,
          log: Optional[Callable[[str], None]] = None, model: Optional[Model] = None,
          stop_at: Optional[float] = None) -> TrainResult:
    """Adam training; returns the parameters with the best validation accuracy.

    Without validation batches the training accuracy is tracked instead.
    ``stop_at`` ends training early once that accuracy is reached.
    """
    if not train_batches:
        raise ConfigError("training split is empty")
    tr = [b if isinstance(b, Prepared) else prepare(b) for b in train_batches]
    va = [b if isinstance(b, Prepared) else prepare(b) for b in val_batches]
    model = model or Model.create(cfg)
    opt = Adam()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x7A11]))
    history: list[EpochRecord] = []
    best = (-1.0, -1, None)
    for epoch in range(cfg.epochs):
        lr = cfg.lr(epoch)
        losses = []
        weights = []
        for idx in rng.permutation(len(tr)).tolist():
            prep = tr[idx]
            loss, grads = loss_and_grads(prep, model.params, model.state, cfg, rng)
            opt.step(model.params, grads, lr)
            losses.append(loss)
            weights.append(prep.batch.n_faces)
        train_loss = float(np.average(losses, weights=weights))
        acc = face_accuracy(model, va) if va else face_accuracy(model, tr)
        rec = EpochRecord(epoch, lr, train_loss, acc)
        history.append(rec)
        if log is not None:
            log(rec.log_line())
        if acc > best[0]:
            best = (acc, epoch, ({k: v.copy() for k, v in model.params.items()}, {k: v.copy() for k, v in model.state.items()}))
        if stop_at is not None and acc >= stop_at:
            break
    if best[2] is None:
        return TrainResult(model, history, -1)
    params, state = best[2]
    return TrainResult(Model(cfg, params, state), history, best[1])


def predict_logits(model: Model, batch) -> np.ndarray:
    prep = batch if isinstance(batch, Prepared) else prepare(batch)
    _validate_params(model)
    logits, _ = forward(prep, model.params, model.state, model.config, train=False)
    return logits


def predict(model: Model, batch) -> tuple[np.ndarray, np.ndarray]:
    """Per-face (class, probability) with inference-mode layers."""
    probs = softmax(predict_logits(model, batch))
    cls = probs.argmax(axis=1)
    return cls, probs[np.arange(len(cls)), cls]


def _validate_params(model: Model) -> None:
    ref, ref_st = init_params(model.config, seed=0)
    if set(ref) != set(model.params) or set(ref_st) != set(model.state):
        raise ConfigError("parameters do not match the model configuration")
    for k, v in ref.items():
        if model.params[k].shape != v.shape:
            raise ConfigError(f"parameter {k} has shape {model.params[k].shape}, expected {v.shape}")


# ---------------------------------------------------------------------------
# checkpoints

CKPT_MAGIC = b"HAFRCKPT"
CKPT_VERSION = 1


def save_checkpoint(path, model: Model) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(model))


def checkpoint_bytes(model: Model) -> bytes:
    cfg = json.dumps(asdict(model.config), sort_keys=True).encode("utf-8")
    out = bytearray(CKPT_MAGIC + struct.pack("<II", CKPT_VERSION, len(cfg)) + cfg)
    items = [("p:" + k, v) for k, v in sorted(model.params.items())] + [("s:" + k, v) for k, v in sorted(model.state.items())]
    out += struct.pack("<I", len(items))
    for name, arr in items:
        nb = name.encode("utf-8")
        a = np.ascontiguousarray(arr, dtype="<f8")
        out += struct.pack("<H", len(nb)) + nb + struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
        out += a.tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def load_checkpoint(path_or_bytes, expected: Optional[ModelConfig] = None) -> Model:
    if isinstance(path_or_bytes, (bytes, bytearray)):
        data = bytes(path_or_bytes)
    else:
        with open(path_or_bytes, "rb") as fh:
            data = fh.read()
    if len(data) < 20 or data[:8] != CKPT_MAGIC:
        raise ContainerError("not a checkpoint file")
    if struct.unpack_from("<I", data, len(data) - 4)[0] != zlib.crc32(data[:-4]):
        raise ContainerError("checkpoint checksum mismatch")
    version, clen = struct.unpack_from("<II", data, 8)
    if version != CKPT_VERSION:
        raise ContainerError(f"unsupported checkpoint version {version}")
    pos = 16
    try:
        cfg = ModelConfig(**json.loads(data[pos : pos + clen].decode("utf-8")))
        pos += clen
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        params: Params = {}
        state: Params = {}
        for _ in range(n):
            (ln,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos : pos + ln].decode("utf-8")
            pos += ln
            (nd,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from(f"<{nd}Q", data, pos)
            pos += 8 * nd
            cnt = int(np.prod(shape)) if nd else 1
            arr = np.frombuffer(data, dtype="<f8", count=cnt, offset=pos).astype(np.float64).reshape(shape)
            pos += 8 * cnt
            (params if name.startswith("p:") else state)[name[2:]] = arr
    except (struct.error, ValueError, TypeError, UnicodeDecodeError) as exc:
        raise ContainerError(f"malformed checkpoint: {exc}") from None
    if pos != len(data) - 4:
        raise ContainerError("checkpoint has trailing bytes")
    if expected is not None and expected.shape_key() != cfg.shape_key():
        raise ConfigError(f"checkpoint config {cfg.shape_key()} does not match {expected.shape_key()}")
    model = Model(cfg, params, state)
    _validate_params(model)
    return model


# ---------------------------------------------------------------------------
# finite-difference check


def _patterns(cache) -> list[np.ndarray]:
    caches = cache[0]
    return [np.concatenate([(c[5] > 0).ravel(), (c[2] > 0).ravel()]) for c in caches]


@dataclass
class GradCheck:
    max_rel_error: float
    checked: int
    excluded: int
    worst: str
    per_param: dict = field(default_factory=dict)  # entries compared, by parameter name


def gradient_check(prep: Prepared, model: Model, h: float = 1e-4, seed: int = 0,
                   max_per_param: Optional[int] = None, floor: float = 1e-8) -> GradCheck:
    """Compare analytic gradients with central differences.

    Dropout masks are pinned by reseeding, running statistics are frozen,
    and entries whose perturbation flips any ReLU are skipped (the loss is
    not differentiable there).
    """
    cfg = model.config
    p, st = model.params, model.state

    def run():
        logits, cache = forward(prep, p, st, cfg, True, np.random.default_rng(seed), update_stats=False)
        loss, dl = cross_entropy(logits, prep.labels)
        return loss, dl, cache

    loss0, dl0, cache0 = run()
    grads = backward(prep, p, cfg, cache0, dl0)
    base = _patterns(cache0)
    pick = np.random.default_rng(seed)
    worst = (0.0, "")
    checked = excluded = 0
    per_param: dict[str, int] = {}
    for k in sorted(p):
        per_param[k] = 0
        flat = p[k].reshape(-1)
        idx = np.arange(flat.size)
        if max_per_param is not None and flat.size > max_per_param:
            idx = np.sort(pick.choice(flat.size, max_per_param, replace=False))
        for i in idx.tolist():
            old = flat[i]
            flat[i] = old + h
            lp, _, cp = run()
            flat[i] = old - h
            lm, _, cm = run()
            flat[i] = old
            if any(not np.array_equal(a, b) for a, b in zip(base, _patterns(cp))) or any(
                not np.array_equal(a, b) for a, b in zip(base, _patterns(cm))
            ):
                excluded += 1
                continue
            num = (lp - lm) / (2 * h)
            ana = float(grads[k].reshape(-1)[i])
            rel = abs(num - ana) / max(abs(num), abs(ana), floor)
            checked += 1
            per_param[k] += 1
            if rel > worst[0]:
                worst = (rel, f"{k}[{i}]")
    return GradCheck(worst[0], checked, excluded, worst[1], per_param)
