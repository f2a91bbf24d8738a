"""Soft-voting ensemble combination, confusion-matrix metrics, and
stratified k-fold cross-validation.

Headline precision/recall are macro averages over the three one-vs-rest
classes; micro averages are reported alongside. A zero denominator
never produces NaN: the value is 0.0 and the report carries a flag.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from scalonet import models, nn
from scalonet.dataset import CLASS_NAMES, NUM_CLASSES, PROVENANCE_ORIGINAL, ClassLabel
from scalonet.errors import DataError
from scalonet.util import stream_rng


def validate_probs(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1] != NUM_CLASSES:
        raise DataError(f"probability vectors must have width {NUM_CLASSES}")
    if np.any(p < -1e-9) or np.any(p > 1 + 1e-9):
        raise DataError("probabilities must lie in [0, 1]")
    if np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-6):
        raise DataError("probability vectors must sum to 1 within 1e-6")
    return p


def ensemble_average(preds) -> np.ndarray:
    """Element-wise arithmetic mean of probability vectors (soft voting)."""
    preds = list(preds)
    if not preds:
        raise DataError("ensemble_average needs at least one prediction")
    stack = np.stack([validate_probs(p) for p in preds])
    if any(p.shape != stack[0].shape for p in stack):
        raise DataError("prediction shapes do not match")
    return stack.mean(axis=0)


def argmax_class(p) -> ClassLabel:
    """Predicted label; the lowest index wins ties."""
    p = validate_probs(p)
    if p.ndim != 1:
        raise DataError("argmax_class expects a single probability vector")
    return ClassLabel(int(np.argmax(p)))


def confusion(preds, truth) -> np.ndarray:
    """counts[true][pred] over paired label sequences."""
    preds = np.asarray([int(p) for p in preds])
    truth = np.asarray([int(t) for t in truth])
    if preds.size != truth.size:
        raise DataError("prediction and truth lists must have equal length")
    if preds.size == 0:
        raise DataError("cannot build a confusion matrix from no samples")
    cm = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(cm, (truth, preds), 1)
    return cm


@dataclass
class Metrics:
    accuracy: float
    precision: np.ndarray  # per class
    recall: np.ndarray
    macro_precision: float
    macro_recall: float
    micro_precision: float
    micro_recall: float
    loss: float | None = None
    flags: list = field(default_factory=list)

    def to_record(self, fold) -> dict:
        rec = {
            "fold": fold,
            "loss": self.loss,
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "micro_precision": self.micro_precision,
            "micro_recall": self.micro_recall,
            "flags": sorted(self.flags),
        }
        for i, name in enumerate(CLASS_NAMES):
            rec[f"precision_{name}"] = float(self.precision[i])
            rec[f"recall_{name}"] = float(self.recall[i])
        return rec


def metrics(cm: np.ndarray, loss: float | None = None) -> Metrics:
    """Accuracy plus one-vs-rest precision/recall per the TP ratios."""
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total == 0:
        raise DataError("empty confusion matrix")
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    flags = []
    precision = np.zeros(NUM_CLASSES)
    recall = np.zeros(NUM_CLASSES)
    for i, name in enumerate(CLASS_NAMES):
        if tp[i] + fp[i] > 0:
            precision[i] = tp[i] / (tp[i] + fp[i])
        else:
            flags.append(f"precision_zero_denominator:{name}")
        if tp[i] + fn[i] > 0:
            recall[i] = tp[i] / (tp[i] + fn[i])
        else:
            flags.append(f"recall_zero_denominator:{name}")
    micro_p = float(tp.sum() / (tp.sum() + fp.sum())) if (tp.sum() + fp.sum()) else 0.0
    micro_r = float(tp.sum() / (tp.sum() + fn.sum())) if (tp.sum() + fn.sum()) else 0.0
    return Metrics(
        accuracy=float(tp.sum() / total),
        precision=precision,
        recall=recall,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        micro_precision=micro_p,
        micro_recall=micro_r,
        loss=loss,
        flags=flags,
    )


@dataclass
class FoldPlan:
    k: int
    folds: list  # list of np.ndarray index arrays
    seed: int

    def validate(self, n: int):
        all_idx = np.concatenate(self.folds) if self.folds else np.array([], int)
        if len(np.unique(all_idx)) != all_idx.size:
            raise DataError("folds are not disjoint")
        if sorted(all_idx.tolist()) != list(range(n)):
            raise DataError("folds do not cover all indices")


def kfold_split(labels, k: int = 5, seed: int = 0) -> FoldPlan:
    """Stratified folds: within each class, shuffled indices are dealt
    round-robin; the dealing start rotates between classes so overall
    fold sizes stay within one of each other."""
    labels = np.asarray([int(l) for l in labels])
    if k < 1:
        raise DataError("k must be >= 1")
    rng = stream_rng(seed, "kfold")
    folds = [[] for _ in range(k)]
    offset = 0
    for cls in range(NUM_CLASSES):
        idx = np.flatnonzero(labels == cls)
        if idx.size == 0:
            continue
        if idx.size < k:
            raise DataError(
                f"class {CLASS_NAMES[cls]} has {idx.size} members, fewer than k={k}"
            )
        idx = idx[rng.permutation(idx.size)]
        for i, j in enumerate(idx):
            folds[(offset + i) % k].append(int(j))
        offset = (offset + idx.size) % k
    return FoldPlan(k, [np.array(sorted(f), dtype=np.int64) for f in folds], seed)


def _parent_record_id(rid: str) -> str:
    stem, sep, tail = rid.rpartition("_aug")
    if sep and tail.isdigit():
        return stem
    return rid


@dataclass
class FoldResult:
    fold: int
    metrics: Metrics
    histories: dict  # member name -> models.History


@dataclass
class CvResult:
    folds: list
    mean: dict
    std: dict

    def report_lines(self) -> list:
        lines = [json.dumps(f.metrics.to_record(f.fold), sort_keys=True) for f in self.folds]
        agg = {"fold": "aggregate"}
        for key in sorted(self.mean):
            agg[f"{key}_mean"] = self.mean[key]
            agg[f"{key}_std"] = self.std[key]
        lines.append(json.dumps(agg, sort_keys=True))
        return lines

    def report_text(self) -> str:
        return "\n".join(self.report_lines()) + "\n"


_AGG_KEYS = ("loss", "accuracy", "macro_precision", "macro_recall")


def cross_validate(
    members,
    ds: models.ImageDataset,
    k: int,
    cfg: models.TrainConfig,
) -> CvResult:
    """Train each ensemble member on k-1 folds and soft-vote on the held-out
    fold, for every fold.

    members: list of (name, ModelSpec, frozen_params_or_None). Under the
    train_folds augment policy, folds are planned over original records
    only and augmented copies join the training side of each fold.
    """
    if k < 2:
        raise DataError("cross-validation needs k >= 2")
    prov = np.array([p == PROVENANCE_ORIGINAL for p in ds.provenance])
    if cfg.augment_policy == models.POLICY_TRAIN_FOLDS:
        orig_pos = np.flatnonzero(prov)
        plan = kfold_split(ds.labels[orig_pos], k, cfg.seed)
        folds = [orig_pos[f] for f in plan.folds]
        parents = {rid: i for i, rid in enumerate(ds.record_ids) if prov[i]}
        aug_of = {}
        for i, rid in enumerate(ds.record_ids):
            if not prov[i]:
                parent = _parent_record_id(rid)
                if parent not in parents:
                    raise DataError(f"augmented record {rid!r} has no parent in the manifest")
                aug_of.setdefault(parents[parent], []).append(i)
    else:
        plan = kfold_split(ds.labels, k, cfg.seed)
        folds = plan.folds
        aug_of = {}

    results = []
    for fold_i in range(k):
        val_idx = folds[fold_i]
        train_parts = [folds[j] for j in range(k) if j != fold_i]
        train_idx = np.concatenate(train_parts)
        if aug_of:
            extra = [aug_of.get(int(i), []) for i in train_idx]
            train_idx = np.concatenate([train_idx] + [np.array(e, int) for e in extra if e])
        train_idx = np.sort(train_idx)
        member_probs = []
        histories = {}
        for m_i, (name, spec, frozen) in enumerate(members):
            rng = stream_rng(cfg.seed, fold_i, m_i)
            result = models.train(
                spec, ds, cfg, train_idx=train_idx, val_idx=val_idx,
                frozen_params=frozen, rng=rng,
            )
            histories[name] = result.history
            member_probs.append(result.model.predict_proba(ds.images[val_idx]))
        probs = ensemble_average(member_probs)
        truth = ds.labels[val_idx]
        loss = nn.cross_entropy(probs, truth)
        cm = confusion(probs.argmax(axis=1), truth)
        results.append(FoldResult(fold_i, metrics(cm, loss=loss), histories))

    mean, std = {}, {}
    for key in _AGG_KEYS:
        vals = np.array([getattr(f.metrics, key) for f in results], dtype=np.float64)
        mean[key] = float(vals.mean())
        std[key] = float(vals.std())
    return CvResult(results, mean, std)
