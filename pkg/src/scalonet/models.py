"""Classifier shapes, checkpoint serialization, and the training loop.

Three model shapes are built here: the trainable custom CNN, and two
transfer-learning-style heads (a three-dense-layer head and a single
dense head behind a range rescale) that sit on small frozen
convolutional backbones standing in for full-size pretrained feature
extractors. Frozen parameters load from a seed or from a
"frozen-backbone" weights file and are never updated.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from scalonet import imaging, nn
from scalonet.dataset import NUM_CLASSES, DatasetManifest
from scalonet.errors import CheckpointError, DataError, TrainingDiverged
from scalonet.util import atomic_write_bytes, fnv1a64, stream_rng

INPUT_SHAPE = (imaging.IMG_SIZE, imaging.IMG_SIZE, 3)

VGG_STYLE = "vgg_style"
INCEPTION_STYLE = "inception_style"

POLICY_PREAUGMENTED = "preaugmented"
POLICY_TRAIN_FOLDS = "train_folds"


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    cfg: tuple  # sorted (key, value) pairs
    frozen: bool = False

    @classmethod
    def make(cls, name, kind, frozen=False, **cfg):
        return cls(name, kind, tuple(sorted(cfg.items())), frozen)

    def get(self, key, default=None):
        return dict(self.cfg).get(key, default)

    def canonical(self) -> str:
        inner = ",".join(f"{k}={v}" for k, v in self.cfg)
        return f"{self.name}:{self.kind}{{{inner}}}f={int(self.frozen)}"


@dataclass(frozen=True)
class ModelSpec:
    input_shape: tuple
    layers: tuple

    def canonical(self) -> str:
        dims = "x".join(str(d) for d in self.input_shape)
        return f"input={dims}|" + ";".join(l.canonical() for l in self.layers)

    def digest(self) -> int:
        return fnv1a64(self.canonical())

    def validate(self):
        shape = tuple(self.input_shape)
        softmax_count = 0
        for ls in self.layers:
            shape = _shape_after(ls, shape)
            if ls.kind == "softmax":
                softmax_count += 1
        if softmax_count != 1 or self.layers[-1].kind != "softmax":
            raise DataError("model must end in exactly one softmax layer")
        if shape != (NUM_CLASSES,):
            raise DataError(f"model output must have width {NUM_CLASSES}, got {shape}")
        return shape


def _shape_after(ls: LayerSpec, shape):
    kind = ls.kind
    if kind == "conv2d":
        h, w, c = shape
        if c != ls.get("in_channels"):
            raise DataError(f"{ls.name}: channel mismatch ({c} vs {ls.get('in_channels')})")
        k, s = ls.get("kernel"), ls.get("stride")
        if ls.get("padding") == "same":
            oh, ow = -(-h // s), -(-w // s)
        else:
            oh, ow = (h - k) // s + 1, (w - k) // s + 1
        return (oh, ow, ls.get("filters"))
    if kind == "batchnorm":
        if shape[-1] != ls.get("channels"):
            raise DataError(f"{ls.name}: channel mismatch")
        return shape
    if kind == "maxpool":
        h, w, c = shape
        win, s = ls.get("window"), ls.get("stride")
        return ((h - win) // s + 1, (w - win) // s + 1, c)
    if kind == "gap":
        return (shape[-1],)
    if kind == "flatten":
        return (int(np.prod(shape)),)
    if kind == "dense":
        if shape != (ls.get("in_features"),):
            raise DataError(f"{ls.name}: feature mismatch ({shape} vs {ls.get('in_features')})")
        return (ls.get("units"),)
    if kind in ("relu", "dropout", "softmax", "rescale"):
        return shape
    raise DataError(f"unknown layer kind {kind!r}")


def _instantiate(ls: LayerSpec, rng, dtype) -> nn.Layer:
    kind = ls.kind
    if kind == "conv2d":
        return nn.Conv2D(
            ls.get("in_channels"), ls.get("filters"), ls.get("kernel"),
            ls.get("stride"), ls.get("padding"),
            rng=rng, dtype=dtype, frozen=ls.frozen, name=ls.name,
        )
    if kind == "batchnorm":
        return nn.BatchNorm(ls.get("channels"), dtype=dtype, frozen=ls.frozen, name=ls.name)
    if kind == "relu":
        return nn.ReLU(name=ls.name)
    if kind == "dropout":
        return nn.Dropout(ls.get("rate"), name=ls.name)
    if kind == "maxpool":
        return nn.MaxPool2D(ls.get("window"), ls.get("stride"), name=ls.name)
    if kind == "gap":
        return nn.GlobalAvgPool(name=ls.name)
    if kind == "flatten":
        return nn.Flatten(name=ls.name)
    if kind == "dense":
        return nn.Dense(ls.get("in_features"), ls.get("units"),
                        rng=rng, dtype=dtype, frozen=ls.frozen, name=ls.name)
    if kind == "softmax":
        return nn.Softmax(name=ls.name)
    if kind == "rescale":
        return nn.Rescale(ls.get("scale"), ls.get("offset"), name=ls.name)
    raise DataError(f"unknown layer kind {kind!r}")


def build_custom_cnn() -> ModelSpec:
    """Four conv blocks (16/32/64/128 filters), then dropout, flatten,
    a 64-wide dense bridge, and the 3-way softmax output."""
    layers = []
    h, w, c = INPUT_SHAPE
    for i, filters in enumerate([16, 32, 64, 128], start=1):
        layers.append(LayerSpec.make(f"conv{i}", "conv2d", in_channels=c,
                                     filters=filters, kernel=3, stride=1, padding="same"))
        layers.append(LayerSpec.make(f"bn{i}", "batchnorm", channels=filters))
        layers.append(LayerSpec.make(f"relu{i}", "relu"))
        layers.append(LayerSpec.make(f"drop{i}", "dropout", rate=0.5))
        layers.append(LayerSpec.make(f"pool{i}", "maxpool", window=2, stride=2))
        c = filters
        h, w = h // 2, w // 2
    layers.append(LayerSpec.make("drop5", "dropout", rate=0.5))
    layers.append(LayerSpec.make("flatten", "flatten"))
    layers.append(LayerSpec.make("fc1", "dense", in_features=h * w * c, units=64))
    layers.append(LayerSpec.make("relu5", "relu"))
    layers.append(LayerSpec.make("fc2", "dense", in_features=64, units=NUM_CLASSES))
    layers.append(LayerSpec.make("softmax", "softmax"))
    spec = ModelSpec(INPUT_SHAPE, tuple(layers))
    spec.validate()
    return spec


BACKBONE_FILTERS = (8, 16, 32)
BACKBONE_CHANNELS = BACKBONE_FILTERS[-1]


def desk_backbone_layers() -> tuple:
    """Small frozen feature extractor: 3 conv-pool blocks, 8/16/32 filters."""
    layers = []
    c = INPUT_SHAPE[2]
    for i, filters in enumerate(BACKBONE_FILTERS, start=1):
        layers.append(LayerSpec.make(f"bb_conv{i}", "conv2d", frozen=True, in_channels=c,
                                     filters=filters, kernel=3, stride=1, padding="same"))
        layers.append(LayerSpec.make(f"bb_relu{i}", "relu"))
        layers.append(LayerSpec.make(f"bb_pool{i}", "maxpool", window=2, stride=2))
        c = filters
    return tuple(layers)


def backbone_spec() -> ModelSpec:
    """Backbone-only spec; used for frozen-weights files (not a classifier)."""
    return ModelSpec(INPUT_SHAPE, desk_backbone_layers())


def build_head(feature_channels: int, variant: str) -> tuple:
    """Classifier head fragment placed on top of a frozen feature extractor."""
    if feature_channels < 1:
        raise DataError("feature_channels must be >= 1")
    if variant == VGG_STYLE:
        return (
            LayerSpec.make("head_drop", "dropout", rate=0.5),
            LayerSpec.make("head_gap", "gap"),
            LayerSpec.make("head_fc1", "dense", in_features=feature_channels, units=256),
            LayerSpec.make("head_relu1", "relu"),
            LayerSpec.make("head_fc2", "dense", in_features=256, units=64),
            LayerSpec.make("head_relu2", "relu"),
            LayerSpec.make("head_fc3", "dense", in_features=64, units=NUM_CLASSES),
            LayerSpec.make("softmax", "softmax"),
        )
    if variant == INCEPTION_STYLE:
        return (
            LayerSpec.make("head_rescale", "rescale", scale=2.0, offset=-1.0),
            LayerSpec.make("head_drop", "dropout", rate=0.5),
            LayerSpec.make("head_gap", "gap"),
            LayerSpec.make("head_fc", "dense", in_features=feature_channels, units=NUM_CLASSES),
            LayerSpec.make("softmax", "softmax"),
        )
    raise DataError(f"unknown head variant {variant!r}")


def ensemble_member_spec(variant: str) -> ModelSpec:
    spec = ModelSpec(INPUT_SHAPE, desk_backbone_layers() + build_head(BACKBONE_CHANNELS, variant))
    spec.validate()
    return spec


def build_desk_backbone(seed: int) -> dict:
    """Deterministic frozen-backbone parameters for a given seed."""
    model = Model(backbone_spec(), stream_rng("desk-backbone", seed))
    return {p.name: p.value.copy() for p in model.params()}


def head_param_count(feature_channels: int, variant: str) -> int:
    return sum(
        int(np.prod(_param_shapes(ls)[name]))
        for ls in build_head(feature_channels, variant)
        for name in _param_shapes(ls)
    )


def _param_shapes(ls: LayerSpec) -> dict:
    if ls.kind == "conv2d":
        k, ci, co = ls.get("kernel"), ls.get("in_channels"), ls.get("filters")
        return {f"{ls.name}/kernel": (k, k, ci, co), f"{ls.name}/bias": (co,)}
    if ls.kind == "dense":
        return {f"{ls.name}/weight": (ls.get("in_features"), ls.get("units")),
                f"{ls.name}/bias": (ls.get("units"),)}
    if ls.kind == "batchnorm":
        c = ls.get("channels")
        return {f"{ls.name}/gamma": (c,), f"{ls.name}/beta": (c,)}
    return {}


class Model:
    """A spec instantiated with parameters; runs forward/backward passes."""

    def __init__(self, spec: ModelSpec, rng, dtype=np.float32):
        self.spec = spec
        self.dtype = dtype
        self.layers = [_instantiate(ls, rng, dtype) for ls in spec.layers]

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def trainable_params(self):
        return [p for p in self.params() if not p.frozen]

    def state_arrays(self):
        return [(name, arr) for layer in self.layers for (name, arr) in layer.state()]

    def num_params(self, trainable_only=False):
        params = self.trainable_params() if trainable_only else self.params()
        return sum(p.value.size for p in params)

    def forward(self, x, train=False, rng=None, start=0, stop=None):
        stop = len(self.layers) if stop is None else stop
        for layer in self.layers[start:stop]:
            x = layer.forward(x, train=train, rng=rng)
        return x

    def backward(self, dy, stop: int, start: int = 0):
        """Backpropagate from layers[stop] down to layers[start] inclusive."""
        for i in range(stop, start - 1, -1):
            layer = self.layers[i]
            layer.input_grad = i != start
            dy = layer.backward(dy)
            layer.input_grad = True
        return dy

    def predict_proba(self, images) -> np.ndarray:
        """Inference-mode probabilities for float images in [0, 1]."""
        x = np.asarray(images, dtype=self.dtype)
        if x.ndim == 3:
            x = x[None]
        return self.forward(x, train=False)

    def set_params(self, arrays: dict, only_frozen=False):
        by_name = {p.name: p for p in self.params()}
        for name, value in arrays.items():
            p = by_name.get(name)
            if p is None:
                raise CheckpointError(f"no parameter named {name!r} in this model")
            if only_frozen and not p.frozen:
                continue
            if p.value.shape != value.shape:
                raise CheckpointError(f"shape mismatch for {name!r}")
            p.value = value.astype(self.dtype).copy()

    def to_checkpoint(self, optimizer: nn.Adam | None = None) -> "Checkpoint":
        arrays = [(p.name, p.value.astype(np.float32).copy()) for p in self.params()]
        arrays += [(name, arr.astype(np.float32).copy()) for name, arr in self.state_arrays()]
        opt_arrays = None
        opt_t = 0
        if optimizer is not None:
            opt_arrays = [(n, a.astype(np.float32).copy()) for n, a in optimizer.state_arrays()]
            opt_t = optimizer.t
        return Checkpoint(1, self.spec.digest(), "model", arrays, opt_arrays, opt_t)

    def load_checkpoint(self, ckpt: "Checkpoint"):
        if ckpt.digest != self.spec.digest():
            raise CheckpointError("checkpoint digest does not match the model spec")
        params = {p.name: p for p in self.params()}
        state_owners = {name: layer for layer in self.layers for name, _ in layer.state()}
        for name, value in ckpt.arrays:
            if name in params:
                p = params[name]
                if p.value.shape != value.shape:
                    raise CheckpointError(f"shape mismatch for {name!r}")
                p.value = value.astype(self.dtype).copy()
            elif name in state_owners:
                state_owners[name].set_state(name, value.astype(self.dtype).copy())
            else:
                raise CheckpointError(f"unexpected array {name!r} in checkpoint")


@dataclass
class Checkpoint:
    version: int
    digest: int
    role: str
    arrays: list
    opt_arrays: list | None = None
    opt_t: int = 0


_MAGIC = b"CSCKPT1"


def _pack_arrays(arrays) -> bytes:
    parts = [struct.pack("<I", len(arrays))]
    for name, arr in arrays:
        raw = name.encode("utf-8")
        a = np.ascontiguousarray(arr, dtype="<f4")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}I", *a.shape))
        parts.append(a.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, raw, path):
        self.raw = raw
        self.off = 0
        self.path = path

    def take(self, n):
        if self.off + n > len(self.raw):
            raise CheckpointError(f"corrupt checkpoint file {self.path}: truncated")
        out = self.raw[self.off : self.off + n]
        self.off += n
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]


def _unpack_arrays(reader: _Reader):
    count = reader.u32()
    arrays = []
    for _ in range(count):
        name = reader.take(reader.u32()).decode("utf-8")
        rank = reader.u32()
        if rank > 8:
            raise CheckpointError(f"corrupt checkpoint file {reader.path}: bad rank")
        shape = struct.unpack(f"<{rank}I", reader.take(4 * rank))
        size = int(np.prod(shape)) if rank else 1
        data = np.frombuffer(reader.take(4 * size), dtype="<f4").reshape(shape)
        arrays.append((name, data.copy()))
    return arrays


def save_checkpoint(ckpt: Checkpoint, path):
    parts = [_MAGIC, struct.pack("<B", ckpt.version), struct.pack("<Q", ckpt.digest)]
    role = ckpt.role.encode("utf-8")
    parts.append(struct.pack("<H", len(role)))
    parts.append(role)
    parts.append(_pack_arrays(ckpt.arrays))
    if ckpt.opt_arrays is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<B", 1))
        parts.append(struct.pack("<Q", ckpt.opt_t))
        parts.append(_pack_arrays(ckpt.opt_arrays))
    atomic_write_bytes(path, b"".join(parts))


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    r = _Reader(raw, path)
    if r.take(len(_MAGIC)) != _MAGIC:
        raise CheckpointError(f"corrupt checkpoint file {path}: bad magic")
    version = struct.unpack("<B", r.take(1))[0]
    digest = struct.unpack("<Q", r.take(8))[0]
    role_len = struct.unpack("<H", r.take(2))[0]
    role = r.take(role_len).decode("utf-8")
    arrays = _unpack_arrays(r)
    has_opt = struct.unpack("<B", r.take(1))[0]
    opt_arrays = None
    opt_t = 0
    if has_opt:
        opt_t = struct.unpack("<Q", r.take(8))[0]
        opt_arrays = _unpack_arrays(r)
    if r.off != len(raw):
        raise CheckpointError(f"corrupt checkpoint file {path}: trailing bytes")
    return Checkpoint(version, digest, role, arrays, opt_arrays, opt_t)


def save_frozen_backbone(params: dict, path):
    arrays = [(name, arr) for name, arr in sorted(params.items())]
    save_checkpoint(Checkpoint(1, backbone_spec().digest(), "frozen-backbone", arrays), path)


def load_frozen_backbone(path) -> dict:
    ckpt = load_checkpoint(path)
    if ckpt.role != "frozen-backbone":
        raise CheckpointError(f"{path} is not a frozen-backbone file")
    if ckpt.digest != backbone_spec().digest():
        raise CheckpointError("frozen-backbone digest does not match the backbone spec")
    return dict(ckpt.arrays)


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int
    lr: float
    seed: int
    augment_policy: str = POLICY_PREAUGMENTED
    metrics_every: int = 1
    val_fraction: float = 0.2

    def __post_init__(self):
        if self.epochs < 1:
            raise DataError("epochs must be >= 1")
        if self.batch_size < 1:
            raise DataError("batch_size must be >= 1")
        if self.metrics_every < 1:
            raise DataError("metrics_every must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise DataError("val_fraction must be in [0, 1)")
        if self.augment_policy not in (POLICY_PREAUGMENTED, POLICY_TRAIN_FOLDS):
            raise DataError(f"unknown augment policy {self.augment_policy!r}")


@dataclass
class ImageDataset:
    """Decoded images plus labels, ready for batch assembly."""

    record_ids: list
    labels: np.ndarray
    provenance: list
    images: np.ndarray  # (N, 224, 224, 3) float32 in [0, 1]

    @classmethod
    def from_manifest(cls, manifest: DatasetManifest, images_dir) -> "ImageDataset":
        ids, labels, prov, imgs = [], [], [], []
        for e in manifest.entries:
            img = imaging.read_image(os.path.join(os.fspath(images_dir), e.path))
            imgs.append(img.astype(np.float32) / np.float32(255.0))
            ids.append(e.record_id)
            labels.append(int(e.label))
            prov.append(e.provenance)
        if not ids:
            raise DataError("empty dataset")
        return cls(ids, np.array(labels, dtype=np.int64), prov, np.stack(imgs))

    def __len__(self):
        return len(self.record_ids)


@dataclass
class History:
    epochs: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)

    def add(self, epoch, tl, ta, vl, va):
        self.epochs.append(epoch)
        self.train_loss.append(tl)
        self.train_acc.append(ta)
        self.val_loss.append(vl)
        self.val_acc.append(va)

    def __len__(self):
        return len(self.epochs)

    def to_csv_text(self) -> str:
        lines = ["epoch,train_loss,val_loss,train_acc,val_acc"]
        for i, ep in enumerate(self.epochs):
            vl = "" if self.val_loss[i] is None else repr(self.val_loss[i])
            va = "" if self.val_acc[i] is None else repr(self.val_acc[i])
            lines.append(f"{ep},{self.train_loss[i]!r},{vl},{self.train_acc[i]!r},{va}")
        return "\n".join(lines) + "\n"


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: History
    model: Model


def stratified_holdout(labels, val_fraction, rng):
    """Per-class shuffled split; returns (train_idx, val_idx)."""
    labels = np.asarray(labels)
    train_idx, val_idx = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        n_val = int(round(val_fraction * idx.size))
        n_val = min(n_val, idx.size - 1)
        val_idx.extend(idx[:n_val].tolist())
        train_idx.extend(idx[n_val:].tolist())
    return np.array(sorted(train_idx)), np.array(sorted(val_idx))


_PURE_KINDS = {"relu", "maxpool", "flatten", "gap", "rescale"}


def _frozen_prefix_len(model: Model) -> int:
    """Longest leading run of layers that training can never change."""
    n = 0
    has_frozen_params = False
    for layer, ls in zip(model.layers, model.spec.layers):
        if ls.kind in _PURE_KINDS:
            n += 1
        elif ls.kind in ("conv2d", "dense") and ls.frozen:
            n += 1
            has_frozen_params = True
        else:
            break
    return n if has_frozen_params else 0


def _forward_in_chunks(model, images, start=0, stop=None, chunk=8):
    outs = []
    for i in range(0, images.shape[0], chunk):
        outs.append(model.forward(images[i : i + chunk], train=False, start=start, stop=stop))
    return np.concatenate(outs, axis=0)


def _eval_split(model, feats, labels, prefix_len):
    probs = _forward_in_chunks(model, feats, start=prefix_len, chunk=64)
    loss = nn.cross_entropy(probs, labels)
    acc = float((probs.argmax(axis=1) == labels).mean())
    return loss, acc


def _batches(perm, batch_size):
    """Contiguous batches over a permutation; a trailing singleton is folded
    into the previous batch so train-mode batch normalization never sees N=1."""
    batches = [perm[i : i + batch_size] for i in range(0, perm.size, batch_size)]
    if len(batches) > 1 and batches[-1].size == 1:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def train(
    spec: ModelSpec,
    ds: ImageDataset,
    cfg: TrainConfig,
    train_idx=None,
    val_idx=None,
    frozen_params: dict | None = None,
    rng=None,
    dtype=np.float32,
) -> TrainResult:
    """Shuffled mini-batch Adam on categorical cross-entropy.

    Frozen layers are excluded from updates; when the model starts with a
    frozen stack, its activations are precomputed once and training runs
    on the cached features (identical results, large speedup).
    """
    if len(ds) == 0:
        raise DataError("empty dataset")
    if rng is None:
        rng = stream_rng(cfg.seed)
    model = Model(spec, rng, dtype=dtype)
    if frozen_params:
        model.set_params(frozen_params)
    if train_idx is None and val_idx is None:
        if cfg.val_fraction > 0:
            train_idx, val_idx = stratified_holdout(ds.labels, cfg.val_fraction, rng)
        else:
            train_idx = np.arange(len(ds))
            val_idx = np.array([], dtype=np.int64)
    train_idx = np.asarray(train_idx, dtype=np.int64)
    val_idx = np.asarray(val_idx, dtype=np.int64) if val_idx is not None else np.array([], int)

    prefix_len = _frozen_prefix_len(model)
    images = ds.images.astype(dtype, copy=False)
    if prefix_len:
        train_feats = _forward_in_chunks(model, images[train_idx], stop=prefix_len)
        val_feats = _forward_in_chunks(model, images[val_idx], stop=prefix_len) if val_idx.size else None
    else:
        train_feats = images[train_idx]
        val_feats = images[val_idx] if val_idx.size else None
    train_labels = ds.labels[train_idx]
    val_labels = ds.labels[val_idx] if val_idx.size else None

    optimizer = nn.Adam(model.trainable_params(), cfg.lr)
    softmax_at = len(model.layers) - 1
    history = History()
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(train_idx.size)
        for bi, sel in enumerate(_batches(perm, cfg.batch_size)):
            xb = train_feats[sel]
            yb = train_labels[sel]
            probs = model.forward(xb, train=True, rng=rng, start=prefix_len)
            loss = nn.cross_entropy(probs, yb)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, bi)
            grad = nn.softmax_ce_grad(probs, nn.one_hot(yb, NUM_CLASSES, dtype=probs.dtype))
            model.backward(grad, stop=softmax_at - 1, start=prefix_len)
            optimizer.step()
        if epoch % cfg.metrics_every == 0 or epoch == cfg.epochs:
            tl, ta = _eval_split(model, train_feats, train_labels, prefix_len)
            if val_feats is not None:
                vl, va = _eval_split(model, val_feats, val_labels, prefix_len)
            else:
                vl, va = None, None
            history.add(epoch, tl, ta, vl, va)
    return TrainResult(model.to_checkpoint(optimizer), history, model)


def load_model(spec: ModelSpec, ckpt: Checkpoint, dtype=np.float32) -> Model:
    model = Model(spec, stream_rng(0), dtype=dtype)
    model.load_checkpoint(ckpt)
    return model


def predict_image(model: Model, img: np.ndarray) -> np.ndarray:
    """ProbVector for one 224 x 224 x 3 uint8 image."""
    imaging.require_rgb_image(img)
    x = img.astype(model.dtype) / model.dtype(255.0)
    return model.predict_proba(x)[0]
