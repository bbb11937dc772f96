"""Checkpoint container.

A checkpoint is one `torch.save` archive holding a plain dict:

    format          "smgarn-checkpoint"
    format_version  int, bumped on incompatible layout changes
    model_config    ModelConfig.model_dump(mode="json")
    train_config    TrainConfig.model_dump(mode="json", by_alias=True) or None
    epoch           completed epochs
    global_step     optimizer steps taken
    model_state     state_dict with names like masknet.block1.sa.conv.weight
    optimizer_state optimizer state_dict or None

Only tensors and JSON-like values are stored, so loading uses weights_only=True.
Writes go to a temp file in the target directory and are renamed into place.
"""
from __future__ import annotations

import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import torch
from pydantic import ValidationError

from smgarn.errors import CheckpointError
from smgarn.models.smgarn import SMGARN, build_model
from smgarn.schemas import ModelConfig, TrainConfig


logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "smgarn-checkpoint"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    model_config: ModelConfig
    model_state: dict[str, torch.Tensor]
    epoch: int = 0
    global_step: int = 0
    train_config: TrainConfig | None = None
    optimizer_state: dict[str, Any] | None = None

    def build_model(self, *, device: str | torch.device = "cpu") -> SMGARN:
        model = build_model(self.model_config)
        try:
            model.load_state_dict(self.model_state, strict=True)
        except RuntimeError as exc:
            raise CheckpointError(f"Checkpoint weights do not match its model config: {exc}") from exc
        return model.to(device)


def save_checkpoint(path: Path, ckpt: Checkpoint) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "format_version": FORMAT_VERSION,
        "model_config": ckpt.model_config.model_dump(mode="json"),
        "train_config": None if ckpt.train_config is None else ckpt.train_config.model_dump(mode="json", by_alias=True),
        "epoch": int(ckpt.epoch),
        "global_step": int(ckpt.global_step),
        "model_state": {k: v.detach().cpu() for k, v in ckpt.model_state.items()},
        "optimizer_state": ckpt.optimizer_state,
    }
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    os.close(fd)
    try:
        torch.save(payload, tmp_name)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.debug("Saved checkpoint %s (epoch %d, step %d)", path, ckpt.epoch, ckpt.global_step)


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError as exc:
        raise CheckpointError(f"Checkpoint not found: {path}") from exc
    except Exception as exc:
        raise CheckpointError(f"Cannot read checkpoint {path}: {exc}") from exc

    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not an {CHECKPOINT_FORMAT} archive")
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format_version {version}, expected {FORMAT_VERSION}")
    try:
        model_config = ModelConfig.model_validate(payload["model_config"])
        train_raw = payload.get("train_config")
        train_config = None if train_raw is None else TrainConfig.model_validate(train_raw)
    except (KeyError, ValidationError) as exc:
        raise CheckpointError(f"{path}: invalid config header: {exc}") from exc
    return Checkpoint(
        model_config=model_config,
        model_state=payload["model_state"],
        epoch=int(payload.get("epoch", 0)),
        global_step=int(payload.get("global_step", 0)),
        train_config=train_config,
        optimizer_state=payload.get("optimizer_state"),
    )
