"""Experiment configuration, loadable from YAML/JSON with dotted overrides."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from acm.errors import InvalidConfig
from acm.stream import DriftConfig, SplitSpec


class Method(enum.Enum):
    ACM = "acm"
    NCM = "ncm"
    SLDA = "slda"
    SGD_LOGISTIC = "sgd_logistic"
    SGD_HINGE = "sgd_hinge"
    BRUTE_KNN = "brute_knn"


@dataclass
class PreprocessConfig:
    scaler: bool = True
    projection_path: str | None = None
    # without a weights file, a seeded random projection to this width
    target_dim: int | None = None


@dataclass
class MetricConfig:
    h: int | None = None  # None: the whole test split
    delay: int | None = 100  # None disables near-future evaluation
    buckets: int = 20


@dataclass
class OutputConfig:
    out_dir: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.format not in ("csv", "jsonl"):
            raise InvalidConfig(f"unknown report format {self.format!r}")


@dataclass
class ExperimentConfig:
    feature_file: str | None = None
    drift: DriftConfig | None = None
    split: SplitSpec = field(default_factory=SplitSpec)
    method: Method = Method.ACM
    method_params: dict[str, Any] = field(default_factory=dict)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    timing: str = "monotonic"  # or "none": latency columns read 0
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.method, str):
            self.method = Method(self.method.lower())
        if isinstance(self.drift, dict):
            self.drift = DriftConfig(**self.drift)
        if isinstance(self.split, dict):
            self.split = SplitSpec(**self.split)
        if isinstance(self.preprocess, dict):
            self.preprocess = PreprocessConfig(**self.preprocess)
        if isinstance(self.metrics, dict):
            self.metrics = MetricConfig(**self.metrics)
        if isinstance(self.output, dict):
            self.output = OutputConfig(**self.output)
        if (self.feature_file is None) == (self.drift is None):
            raise InvalidConfig("give exactly one of feature_file or drift")
        if self.timing not in ("monotonic", "none"):
            raise InvalidConfig(f"unknown timing mode {self.timing!r}")

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path, overrides: list[str] | None = None) -> "ExperimentConfig":
        data = yaml.safe_load(Path(path).read_text()) or {}
        return cls.from_dict(apply_overrides(data, overrides or []))


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``a.b.c=value`` strings; values are parsed as YAML scalars."""
    for item in overrides:
        if "=" not in item:
            raise InvalidConfig(f"override must look like key=value: {item!r}")
        key, raw = item.split("=", 1)
        node = data
        parts = key.strip().split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise InvalidConfig(f"cannot descend into {p!r} in {key!r}")
        node[parts[-1]] = yaml.safe_load(raw)
    return data


def _plain(obj):
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return obj.item()
    return obj
