"""Pipeline configuration: one JSON file drives every CLI command.

Relative paths resolve against the directory holding the config file.
A seed must be present (no wall-clock seeding anywhere); ``--seed`` and
``--out`` flags override the file.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

from scalonet.cwt import NORM_L1, NORM_L2
from scalonet.errors import ConfigError
from scalonet.models import POLICY_PREAUGMENTED, POLICY_TRAIN_FOLDS

PROFILE_CUSTOM = "custom_cnn"
PROFILE_ENSEMBLE = "ensemble"

# Paper-profile training defaults: the custom CNN table lists 200 epochs,
# batch 128, Adam at 0.05; the ensemble table lists 80 epochs at batch 1.
PROFILE_TRAIN_DEFAULTS = {
    PROFILE_CUSTOM: dict(epochs=200, batch_size=128, lr=0.05),
    PROFILE_ENSEMBLE: dict(epochs=80, batch_size=1, lr=0.05),
}
CROSSVAL_DEFAULT_EPOCHS = 20


@dataclass
class CwtSection:
    omega0: float = 6.0
    voices: int = 12
    norm: str = NORM_L1
    max_cols: int = 1024


@dataclass
class RenderSection:
    colormap: str | None = None


@dataclass
class AugmentSection:
    factor: float = 0.2
    copies: int = 2
    policy: str = POLICY_PREAUGMENTED


@dataclass
class ModelSection:
    profile: str = PROFILE_ENSEMBLE
    backbone_seeds: list = field(default_factory=lambda: [1, 2, 3])
    frozen_weights: list | None = None


@dataclass
class TrainSection:
    epochs: int
    batch_size: int
    lr: float
    val_fraction: float = 0.2
    metrics_every: int = 1


@dataclass
class SynthSection:
    per_class: int = 20
    length: int = 65536
    fs: float = 128.0
    noise: float = 0.3


@dataclass
class PipelineConfig:
    seed: int
    dataset_root: str = "raw"
    out_dir: str = "."
    input_format: str = "raw-binary-f64"
    input_fs: float = 128.0
    target_fs: float = 128.0
    target_len: int = 65536
    k: int = 5
    crossval_epochs: int = CROSSVAL_DEFAULT_EPOCHS
    cwt: CwtSection = field(default_factory=CwtSection)
    render: RenderSection = field(default_factory=RenderSection)
    augment: AugmentSection = field(default_factory=AugmentSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection | None = None
    synth: SynthSection = field(default_factory=SynthSection)

    def __post_init__(self):
        if self.train is None:
            self.train = TrainSection(**PROFILE_TRAIN_DEFAULTS[self.model.profile])

    def validate(self):
        if self.seed is None:
            raise ConfigError("a seed is required (no wall-clock seeding)")
        if self.model.profile not in (PROFILE_CUSTOM, PROFILE_ENSEMBLE):
            raise ConfigError(f"unknown model profile {self.model.profile!r}")
        if self.cwt.norm not in (NORM_L1, NORM_L2):
            raise ConfigError(f"unknown cwt normalization {self.cwt.norm!r}")
        if self.augment.policy not in (POLICY_PREAUGMENTED, POLICY_TRAIN_FOLDS):
            raise ConfigError(f"unknown augment policy {self.augment.policy!r}")
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if self.model.frozen_weights is not None and len(self.model.frozen_weights) != 3:
            raise ConfigError("frozen_weights must list exactly 3 files")
        for fname in ("input_fs", "target_fs"):
            if not getattr(self, fname) > 0:
                raise ConfigError(f"{fname} must be positive")
        if self.target_len < 64:
            raise ConfigError("target_len must be >= 64")
        return self

    # resolved paths -----------------------------------------------------
    def resolve(self, rel) -> str:
        base = getattr(self, "_base_dir", ".")
        return os.path.normpath(os.path.join(base, rel))

    @property
    def root_dir(self) -> str:
        return self.resolve(self.dataset_root)

    @property
    def out(self) -> str:
        return self.resolve(self.out_dir)

    def out_path(self, *parts) -> str:
        return os.path.join(self.out, *parts)

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("_base_dir", None)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"


_SECTIONS = {
    "cwt": CwtSection,
    "render": RenderSection,
    "augment": AugmentSection,
    "model": ModelSection,
    "train": TrainSection,
    "synth": SynthSection,
}


def config_from_dict(data: dict, base_dir=".") -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            try:
                kwargs[key] = _SECTIONS[key](**value)
            except TypeError as exc:
                raise ConfigError(f"bad config section {key!r}: {exc}") from exc
        else:
            kwargs[key] = value
    if "seed" not in kwargs:
        raise ConfigError("config must include a seed")
    try:
        cfg = PipelineConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from exc
    cfg._base_dir = os.path.abspath(base_dir)
    return cfg.validate()


def load_config(path) -> PipelineConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


def default_config(seed: int) -> PipelineConfig:
    cfg = PipelineConfig(seed=seed)
    cfg._base_dir = os.path.abspath(".")
    return cfg
