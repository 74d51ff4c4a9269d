"""One JSON document configures a whole run: world, demonstrator, smoothing,
model, and evaluation sections, each with documented defaults. Unknown keys
are rejected, dot-path overrides are supported, and every output artifact is
stamped with the canonical config hash so tables trace back to their inputs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .evalharness import EvalConfig
from .models import ModelConfig
from .primitives import PrimitivesConfig
from .segment import SmoothingConfig
from .sim import WorldConfig


@dataclass(frozen=True)
class RunConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    primitives: PrimitivesConfig = field(default_factory=PrimitivesConfig)
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def validate(self) -> None:
        self.world.validate()
        self.primitives.validate()
        self.smoothing.validate()
        self.model.validate()


def _coerce(value, target_type):
    """Coerce JSON values onto dataclass field types (lists to tuples, ints
    to floats); rejects clearly wrong shapes."""
    origin = typing.get_origin(target_type)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"expected a list for {target_type}, "
                                     f"got {value!r}")
        args = typing.get_args(target_type)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0]) for v in value)
        if len(args) != len(value):
            raise ConfigurationError(f"expected {len(args)} items, "
                                     f"got {len(value)}")
        return tuple(_coerce(v, t) for v, t in zip(value, args))
    if target_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"expected a number, got {value!r}")
        return float(value)
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"expected an integer, got {value!r}")
        return int(value)
    if target_type is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"expected a boolean, got {value!r}")
        return value
    return value


def _dataclass_from_dict(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigurationError(
            f"{path}: unknown keys {sorted(unknown)}; valid keys are "
            f"{sorted(fields)}")
    kwargs = {}
    hints = typing.get_type_hints(cls)
    for name, value in data.items():
        kwargs[name] = _coerce(value, hints[name])
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


_SECTIONS = {
    "world": WorldConfig,
    "primitives": PrimitivesConfig,
    "smoothing": SmoothingConfig,
    "model": ModelConfig,
    "eval": EvalConfig,
}


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("config root must be an object")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigurationError(f"unknown config sections {sorted(unknown)}; "
                                 f"valid sections are {sorted(_SECTIONS)}")
    kwargs = {name: _dataclass_from_dict(cls, data.get(name, {}), name)
              for name, cls in _SECTIONS.items()}
    cfg = RunConfig(**kwargs)
    cfg.validate()
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    return {name: dataclasses.asdict(getattr(cfg, name))
            for name in _SECTIONS}


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config_to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")


def apply_overrides(cfg: RunConfig, overrides: list[tuple[str, str]]
                    ) -> RunConfig:
    """Apply (dot.path, value) pairs, e.g. ("model.beta", "1e-3"). Values are
    parsed as JSON with a bare-string fallback."""
    data = config_to_dict(cfg)
    for dotted, raw in overrides:
        parts = dotted.split(".")
        if len(parts) < 2:
            raise ConfigurationError(
                f"override path {dotted!r} must be section.key")
        node = data
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigurationError(f"unknown override path {dotted!r}")
            node = node[p]
        if parts[-1] not in node:
            raise ConfigurationError(f"unknown override key {dotted!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node[parts[-1]] = value
    return config_from_dict(data)


def _canonical(data: dict) -> bytes:
    return json.dumps(data, sort_keys=True, separators=(",", ":")).encode()


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(_canonical(config_to_dict(cfg))).hexdigest()[:16]


def world_hash(cfg: RunConfig) -> str:
    """Hash of the world section only; artifacts from the same physics are
    comparable even when learning settings differ."""
    return hashlib.sha256(
        _canonical(dataclasses.asdict(cfg.world))).hexdigest()[:16]


def desk_scale_config() -> RunConfig:
    """Reduced network sizes sized for CPU-budget end-to-end studies."""
    return RunConfig(model=ModelConfig(policy_hidden=32, posterior_hidden=48,
                                       prior_width=64))
