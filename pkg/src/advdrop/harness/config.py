"""Experiment configuration: strict JSON with unknown keys rejected."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..adversarial import LossSpec
from ..errors import ConfigurationError
from ..network import LayerSpec


def default_mlp() -> list[dict]:
    return [
        {"kind": "dense", "units": 512},
        {"kind": "relu"},
        {"kind": "dropout", "keep_prob": 0.5},
        {"kind": "dense", "units": 256},
        {"kind": "relu"},
        {"kind": "adversarial_dropout_slot", "keep_prob": 0.5},
        {"kind": "dense", "units": 10},
        {"kind": "softmax"},
    ]


@dataclass
class DatasetConfig:
    images: str | None = None
    labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    n_train: int | None = None
    n_test: int = 2000


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    label_budget: int = 1000
    architecture: list = field(default_factory=default_mlp)
    loss: dict = field(default_factory=dict)
    epochs: int = 10
    batch_labeled: int = 32
    batch_unlabeled: int = 128
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    ramp_epochs: int = 30
    seed: int = 0
    record_wall_time: bool = False

    def __post_init__(self):
        if isinstance(self.dataset, dict):
            self.dataset = _strict(DatasetConfig, self.dataset, "dataset")
        self.layer_specs = [LayerSpec.from_dict(d) for d in self.architecture]
        try:
            self.loss_spec = LossSpec(**self.loss)
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"loss: {e}") from None
        for name in ("label_budget", "epochs", "batch_labeled", "batch_unlabeled", "ramp_epochs"):
            if getattr(self, name) < (0 if name in ("label_budget", "epochs") else 1):
                raise ConfigurationError(f"{name} is out of range")
        if self.lr < 0:
            raise ConfigurationError("lr must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return _strict(cls, d, "config")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{path}: invalid JSON ({e})") from None
        if not isinstance(doc, dict):
            raise ConfigurationError(f"{path}: top level must be an object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["dataset"] = asdict(self.dataset)
        return out


def _strict(cls, d: dict, where: str):
    if not isinstance(d, dict):
        raise ConfigurationError(f"{where} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {unknown}")
    return cls(**d)
