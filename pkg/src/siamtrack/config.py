"""Run configuration: nested sections, YAML files, dotted overrides."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields

import yaml

from .data import CropSpec
from .loss import LossConfig
from .model import BackboneConfig
from .synthetic import MotionSpec
from .track import PostprocessConfig
from .train import TrainConfig

DATA_ROOT_ENV = "SIAMTRACK_DATA_ROOT"


@dataclass
class SynthConfig:
    num_sequences: int = 8
    length: int = 40
    motion: MotionSpec = field(default_factory=MotionSpec)


@dataclass
class PathsConfig:
    data_root: str = ""
    output_dir: str = "runs"

    def resolved_data_root(self):
        return self.data_root or os.environ.get(DATA_ROOT_ENV, "")


@dataclass
class RunConfig:
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    crop: CropSpec = field(default_factory=CropSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    postprocess: PostprocessConfig = field(default_factory=PostprocessConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    seed: int = 0


def _from_dict(cls, data, path=""):
    if not dataclasses.is_dataclass(cls):
        return data
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        where = path or "config"
        raise ValueError(f"unknown key(s) in {where}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = known[name]
        sub = f.type if dataclasses.is_dataclass(f.type) else _nested_type(cls, name)
        if sub is not None and isinstance(value, dict):
            kwargs[name] = _from_dict(sub, value, f"{path}.{name}" if path else name)
        elif name == "levels" and isinstance(value, (list, tuple)):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def _nested_type(cls, name):
    f = cls.__dataclass_fields__[name]
    if f.default_factory is not dataclasses.MISSING:
        obj = f.default_factory()
        if dataclasses.is_dataclass(obj):
            return type(obj)
    return None


def config_to_dict(cfg) -> dict:
    d = dataclasses.asdict(cfg)

    def tuples_to_lists(obj):
        if isinstance(obj, dict):
            return {k: tuples_to_lists(v) for k, v in obj.items()}
        if isinstance(obj, tuple):
            return list(obj)
        return obj

    return tuples_to_lists(d)


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path) as f:
        data = yaml.safe_load(f) or {}
    return _from_dict(RunConfig, data)


def save_config(cfg: RunConfig, path):
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(cfg), f, sort_keys=True)


def apply_override(cfg: RunConfig, dotted: str, raw: str) -> RunConfig:
    """Apply a 'section.key=value' override, coercing to the field's type."""
    keys = dotted.split(".")
    d = config_to_dict(cfg)
    node = d
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ValueError(f"unknown config section {dotted!r}")
        node = node[k]
    leaf = keys[-1]
    if leaf not in node:
        raise ValueError(f"unknown config key {dotted!r}")
    node[leaf] = _coerce(raw, node[leaf])
    return _from_dict(RunConfig, d)


def _coerce(raw: str, current):
    if isinstance(current, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"cannot parse {raw!r} as bool")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, list):
        return [v.strip() for v in raw.split(",") if v.strip()]
    return raw
