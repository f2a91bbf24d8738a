"""Command-line frontend wiring the pipeline end to end.

Subcommands: synth, prepare, transform, augment, train, crossval,
predict, report. Every command takes ``--config`` (JSON), with
``--seed`` and ``--out`` overrides. Exit codes: 0 success, 1 config
error, 2 data error, 3 training divergence.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from scalonet import dataset, evaluate, imaging, models, synth
from scalonet.config import (
    PROFILE_CUSTOM,
    default_config,
    load_config,
)
from scalonet.cwt import Wavelet, default_scales
from scalonet.dataset import DatasetManifest, ManifestEntry
from scalonet.errors import ConfigError, DataError, ScalonetError, TrainingDiverged
from scalonet.util import atomic_write_text

ENSEMBLE_MEMBERS = (
    ("vgg_a", models.VGG_STYLE),
    ("vgg_b", models.VGG_STYLE),
    ("inception", models.INCEPTION_STYLE),
)


def build_members(cfg) -> list:
    """(name, spec, frozen_params) triples for the configured profile."""
    if cfg.model.profile == PROFILE_CUSTOM:
        return [("custom_cnn", models.build_custom_cnn(), None)]
    members = []
    for i, (name, variant) in enumerate(ENSEMBLE_MEMBERS):
        spec = models.ensemble_member_spec(variant)
        if cfg.model.frozen_weights:
            frozen = models.load_frozen_backbone(cfg.resolve(cfg.model.frozen_weights[i]))
        else:
            frozen = models.build_desk_backbone(cfg.seed + int(cfg.model.backbone_seeds[i]))
        members.append((name, spec, frozen))
    return members


def _train_config(cfg, epochs=None) -> models.TrainConfig:
    t = cfg.train
    return models.TrainConfig(
        epochs=epochs if epochs is not None else t.epochs,
        batch_size=t.batch_size,
        lr=t.lr,
        seed=cfg.seed,
        augment_policy=cfg.augment.policy,
        metrics_every=t.metrics_every,
        val_fraction=t.val_fraction,
    )


def _record_fs(cfg, raw_path) -> float:
    """Sampling rate for a raw record: sidecar '<file>.fs' overrides config."""
    sidecar = raw_path + ".fs"
    if os.path.isfile(sidecar):
        with open(sidecar, "r", encoding="utf-8") as fh:
            return float(fh.read().strip())
    return cfg.input_fs


def _report_failures(failures):
    for rid, msg in failures:
        print(f"record {rid}: {msg}", file=sys.stderr)
    raise DataError(f"{len(failures)} record(s) failed")


def cmd_synth(cfg, args):
    synth.generate_synthetic_dataset(
        cfg.root_dir,
        per_class=cfg.synth.per_class,
        length=cfg.synth.length,
        fs=cfg.synth.fs,
        noise=cfg.synth.noise,
        seed=cfg.seed,
    )
    count = 3 * cfg.synth.per_class
    print(f"synth: wrote {count} records under {cfg.root_dir}")
    if args.config is None:
        path = cfg.out_path("config.json")
        atomic_write_text(path, cfg.to_json())
        print(f"synth: wrote {path}")


def cmd_prepare(cfg, args):
    raw = dataset.build_manifest(cfg.root_dir)
    sig_dir = cfg.out_path("signals")
    os.makedirs(sig_dir, exist_ok=True)
    entries, failures = [], []
    for entry in raw.entries:
        raw_path = os.path.join(cfg.root_dir, entry.path)
        try:
            sig = dataset.load_record(
                raw_path, cfg.input_format, _record_fs(cfg, raw_path),
                label=entry.label, record_id=entry.record_id,
            )
            sig = dataset.fix_length(
                dataset.resample(dataset.normalize(sig), cfg.target_fs), cfg.target_len
            )
        except DataError as exc:
            failures.append((entry.record_id, str(exc)))
            continue
        rel = f"{entry.record_id}.f64"
        sig.samples.astype("<f8").tofile(os.path.join(sig_dir, rel))
        entries.append(ManifestEntry(entry.record_id, rel, entry.label, entry.provenance))
    manifest = DatasetManifest(entries)
    dataset.write_manifest(manifest, os.path.join(sig_dir, "manifest.csv"))
    print(f"prepare: {len(entries)} record(s) -> {sig_dir}")
    if failures:
        _report_failures(failures)


def cmd_transform(cfg, args):
    sig_dir = cfg.out_path("signals")
    manifest = dataset.read_manifest(os.path.join(sig_dir, "manifest.csv"))
    img_dir = cfg.out_path("images")
    os.makedirs(img_dir, exist_ok=True)
    wavelet = Wavelet(cfg.cwt.omega0)
    grid = default_scales(cfg.target_len, cfg.target_fs, cfg.cwt.voices)
    colormap = (
        imaging.load_colormap(cfg.resolve(cfg.render.colormap))
        if cfg.render.colormap
        else imaging.default_colormap()
    )
    entries, failures = [], []
    for entry in manifest.entries:
        try:
            sig = dataset.load_record(
                os.path.join(sig_dir, entry.path), "raw-binary-f64", cfg.target_fs,
                label=entry.label, record_id=entry.record_id,
            )
            if sig.samples.size != cfg.target_len:
                raise DataError(
                    f"expected {cfg.target_len} samples, found {sig.samples.size}"
                )
            img = imaging.scalogram_image(
                sig, grid, wavelet, norm=cfg.cwt.norm,
                colormap=colormap, max_cols=cfg.cwt.max_cols,
            )
        except DataError as exc:
            failures.append((entry.record_id, str(exc)))
            continue
        rel = f"{entry.record_id}.png"
        imaging.write_image(os.path.join(img_dir, rel), img)
        entries.append(ManifestEntry(entry.record_id, rel, entry.label, entry.provenance))
    dataset.write_manifest(DatasetManifest(entries), os.path.join(img_dir, "manifest.csv"))
    print(f"transform: {len(entries)} image(s) -> {img_dir}")
    if failures:
        _report_failures(failures)


def cmd_augment(cfg, args):
    img_dir = cfg.out_path("images")
    manifest = dataset.read_manifest(os.path.join(img_dir, "manifest.csv"))
    out = imaging.augment_dataset(
        manifest, img_dir,
        copies_per_record=cfg.augment.copies,
        factor=cfg.augment.factor,
        seed=cfg.seed,
    )
    dataset.write_manifest(out, os.path.join(img_dir, "manifest.csv"))
    print(f"augment: manifest now lists {len(out)} record(s)")


def _load_dataset(cfg) -> models.ImageDataset:
    img_dir = cfg.out_path("images")
    manifest = dataset.read_manifest(os.path.join(img_dir, "manifest.csv"))
    return models.ImageDataset.from_manifest(manifest, img_dir)


def cmd_train(cfg, args):
    ds = _load_dataset(cfg)
    ckpt_dir = cfg.out_path("checkpoints")
    rep_dir = cfg.out_path("reports")
    os.makedirs(ckpt_dir, exist_ok=True)
    os.makedirs(rep_dir, exist_ok=True)
    tc = _train_config(cfg)
    for i, (name, spec, frozen) in enumerate(build_members(cfg)):
        rng = models.stream_rng(cfg.seed, "train", i)
        result = models.train(spec, ds, tc, frozen_params=frozen, rng=rng)
        models.save_checkpoint(result.checkpoint, os.path.join(ckpt_dir, f"{name}.ckpt"))
        atomic_write_text(
            os.path.join(rep_dir, f"history_{name}.csv"), result.history.to_csv_text()
        )
        last = result.history
        print(
            f"train[{name}]: epoch {last.epochs[-1]} "
            f"train_acc={last.train_acc[-1]:.4f} train_loss={last.train_loss[-1]:.4f}"
        )


def cmd_crossval(cfg, args):
    ds = _load_dataset(cfg)
    rep_dir = cfg.out_path("reports")
    os.makedirs(rep_dir, exist_ok=True)
    tc = _train_config(cfg, epochs=cfg.crossval_epochs)
    result = evaluate.cross_validate(build_members(cfg), ds, cfg.k, tc)
    atomic_write_text(os.path.join(rep_dir, "crossval.jsonl"), result.report_text())
    for fold in result.folds:
        for name, hist in fold.histories.items():
            atomic_write_text(
                os.path.join(rep_dir, f"history_fold{fold.fold}_{name}.csv"),
                hist.to_csv_text(),
            )
    print(
        f"crossval: k={cfg.k} mean_accuracy={result.mean['accuracy']:.4f} "
        f"mean_loss={result.mean['loss']:.4f}"
    )


def cmd_predict(cfg, args):
    if not args.images:
        raise ConfigError("predict needs at least one image path")
    ckpt_dir = cfg.out_path("checkpoints")
    loaded = []
    for name, spec, _frozen in build_members(cfg):
        path = os.path.join(ckpt_dir, f"{name}.ckpt")
        loaded.append(models.load_model(spec, models.load_checkpoint(path)))
    lines = []
    for image_path in args.images:
        img = imaging.read_image(image_path)
        probs = evaluate.ensemble_average([m.predict_proba(img.astype(np.float32) / 255.0) for m in loaded])[0]
        label = evaluate.argmax_class(probs)
        rid = os.path.splitext(os.path.basename(image_path))[0]
        lines.append(f"{rid} {probs[0]:.6f} {probs[1]:.6f} {probs[2]:.6f} {label.name}")
    text = "\n".join(lines) + "\n"
    rep_dir = cfg.out_path("reports")
    os.makedirs(rep_dir, exist_ok=True)
    atomic_write_text(os.path.join(rep_dir, "predictions.txt"), text)
    print(text, end="")


def cmd_report(cfg, args):
    import json

    rep_dir = cfg.out_path("reports")
    path = os.path.join(rep_dir, "crossval.jsonl")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            records = [json.loads(line) for line in fh if line.strip()]
    except OSError as exc:
        raise DataError(f"cannot read crossval report {path}: {exc}") from exc
    agg = next((r for r in records if r.get("fold") == "aggregate"), None)
    if agg is None:
        raise DataError(f"no aggregate record in {path}")
    rows = [
        ("Loss", agg["loss_mean"]),
        ("Accuracy", agg["accuracy_mean"]),
        ("Precision", agg["macro_precision_mean"]),
        ("Recall", agg["macro_recall_mean"]),
    ]
    lines = ["Evaluation metrics (validation folds, ensemble):"]
    lines += [f"  {name:<10} {value:.4f}" for name, value in rows]
    text = "\n".join(lines) + "\n"
    atomic_write_text(os.path.join(rep_dir, "summary.txt"), text)
    print(text, end="")


_COMMANDS = {
    "synth": cmd_synth,
    "prepare": cmd_prepare,
    "transform": cmd_transform,
    "augment": cmd_augment,
    "train": cmd_train,
    "crossval": cmd_crossval,
    "predict": cmd_predict,
    "report": cmd_report,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="scalonet",
        description="ECG scalogram classification pipeline",
    )
    sub = p.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="pipeline config JSON")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out", default=None, help="override the output directory")
        if name == "predict":
            sp.add_argument("images", nargs="*", help="image files to classify")
    return p


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        else:
            if args.command != "synth":
                raise ConfigError(f"{args.command} requires --config")
            if args.seed is None:
                raise ConfigError("synth without --config requires --seed")
            cfg = default_config(args.seed)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out_dir = os.path.abspath(args.out)
            if args.config is None:
                # default-config synth: anchor the whole workspace at --out
                cfg._base_dir = cfg.out_dir
        os.makedirs(cfg.out, exist_ok=True)
        _COMMANDS[args.command](cfg, args)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3
    except (DataError, ScalonetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    raise SystemExit(run())


if __name__ == "__main__":
    main()
