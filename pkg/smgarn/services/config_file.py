"""Flat `key = value` experiment files.

    # comment
    embed_dim = 32
    masknet.use_sa = false
    marb.count = 2
    epochs = 4
    lambda = 1.0
    betas = 0.9, 0.999
    variant = marb_ss_sa

Dotted keys address the masknet / gfnet / marb sub-configs; `lo, hi` gives a
pair; `none` clears an optional value. Values are coerced by the pydantic
models, and any error names the 1-based line it came from.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, NoReturn

from pydantic import BaseModel, ValidationError

from smgarn.errors import ConfigFileError, RegistryError
from smgarn.models.variants import apply_variant
from smgarn.schemas import GFNetConfig, MARBConfig, MaskNetConfig, ModelConfig, SynthParams, TrainConfig


MODEL_KEYS = {"embed_dim", "mask_channels", "guidance_case", "variant"}
SUBCONFIGS: dict[str, type[BaseModel]] = {"masknet": MaskNetConfig, "gfnet": GFNetConfig, "marb": MARBConfig}


def _train_keys() -> dict[str, str]:
    keys = {}
    for name, field in TrainConfig.model_fields.items():
        keys[field.alias or name] = field.alias or name
        keys[name] = field.alias or name
    return keys


def parse_config_text(text: str) -> dict[str, tuple[Any, int]]:
    entries: dict[str, tuple[Any, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigFileError(lineno, f"expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigFileError(lineno, "empty key")
        if not value:
            raise ConfigFileError(lineno, f"empty value for {key!r}")
        if key in entries:
            raise ConfigFileError(lineno, f"duplicate key {key!r} (first set on line {entries[key][1]})")
        entries[key] = (_coerce(value), lineno)
    return entries


def _coerce(value: str) -> Any:
    if value.lower() == "none":
        return None
    if "," in value:
        return [part.strip() for part in value.split(",")]
    return value


def _raise_validation(exc: ValidationError, lines: dict[str, int], prefix: str = "") -> NoReturn:
    err = exc.errors()[0]
    loc = ".".join(str(p) for p in err["loc"])
    key = f"{prefix}{loc}" if prefix else loc
    line = lines.get(key) or lines.get(key.split(".", 1)[0]) or min(lines.values(), default=1)
    raise ConfigFileError(line, f"{key}: {err['msg']}") from exc


def split_entries(entries: dict[str, tuple[Any, int]]) -> tuple[dict[str, Any], dict[str, Any], dict[str, int]]:
    model_data: dict[str, Any] = {}
    train_data: dict[str, Any] = {}
    lines: dict[str, int] = {}
    train_keys = _train_keys()
    for key, (value, lineno) in entries.items():
        lines[key] = lineno
        if key in MODEL_KEYS:
            model_data[key] = value
        elif "." in key:
            section, field = key.split(".", 1)
            sub = SUBCONFIGS.get(section)
            if sub is None or field not in sub.model_fields:
                raise ConfigFileError(lineno, f"unknown key {key!r}")
            model_data.setdefault(section, {})[field] = value
        elif key in train_keys:
            train_data[train_keys[key]] = value
        else:
            raise ConfigFileError(lineno, f"unknown key {key!r}")
    return model_data, train_data, lines


def load_experiment_config(path: Path) -> tuple[ModelConfig, TrainConfig]:
    text = Path(path).read_text(encoding="utf-8")
    return parse_experiment_config(text)


def parse_experiment_config(text: str) -> tuple[ModelConfig, TrainConfig]:
    model_data, train_data, lines = split_entries(parse_config_text(text))
    variant = model_data.pop("variant", None)
    try:
        model_cfg = ModelConfig.model_validate(model_data)
    except ValidationError as exc:
        _raise_validation(exc, lines)
    try:
        train_cfg = TrainConfig.model_validate(train_data)
    except ValidationError as exc:
        _raise_validation(exc, lines)
    if variant is not None:
        try:
            model_cfg = apply_variant(model_cfg, variant)
        except RegistryError as exc:
            raise ConfigFileError(lines["variant"], str(exc)) from exc
    return model_cfg, train_cfg


def load_synth_params(path: Path, **overrides: Any) -> SynthParams:
    entries = parse_config_text(Path(path).read_text(encoding="utf-8"))
    lines = {key: lineno for key, (_, lineno) in entries.items()}
    for key, (_, lineno) in entries.items():
        if key not in SynthParams.model_fields:
            raise ConfigFileError(lineno, f"unknown key {key!r}")
    data = {key: value for key, (value, _) in entries.items()}
    data.update(overrides)
    try:
        return SynthParams.model_validate(data)
    except ValidationError as exc:
        _raise_validation(exc, lines)
