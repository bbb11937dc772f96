from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch

from smgarn.config import get_settings
from smgarn.errors import ConfigurationError, DatasetIOError
from smgarn.models.smgarn import SMGARN
from smgarn.schemas import GuidanceCase
from smgarn.services.images import IMAGE_EXTENSIONS, ImageArray, check_image, read_png, write_png


logger = logging.getLogger(__name__)


def restore_image(
    model: SMGARN, snowy: ImageArray, *, gt_mask: ImageArray | None = None
) -> tuple[ImageArray, ImageArray | None]:
    """Run one (B, 3, H, W) image through the model; returns float64 (restored, mask)."""
    snowy = check_image(snowy, name="snowy", channels=3)
    case = model.cfg.guidance_case
    if case is GuidanceCase.case4_gt_mask and gt_mask is None:
        raise ConfigurationError("guidance_case=case4_gt_mask needs a ground-truth mask for inference")
    param = next(model.parameters())
    x = torch.from_numpy(snowy).to(device=param.device, dtype=param.dtype)
    m_in = None
    if case is GuidanceCase.case4_gt_mask:
        m_in = torch.from_numpy(check_image(gt_mask, name="gt_mask")).to(device=param.device, dtype=param.dtype)

    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            restored, m = model(x, m_in)
    finally:
        model.train(was_training)
    out = restored.detach().cpu().double().numpy()
    mask = None if m is None else m.detach().cpu().double().numpy()
    return np.clip(out, 0.0, 1.0), mask


def list_inputs(path: Path) -> list[Path]:
    path = Path(path)
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.is_file())
    return [path]


def restore_files(
    model: SMGARN, paths: list[Path], out_dir: Path, *, save_mask: bool = False
) -> tuple[list[Path], list[tuple[Path, str]]]:
    """Restore each input to out_dir/<stem>.png; returns (written, (path, reason) failures)."""
    if model.cfg.guidance_case is GuidanceCase.case4_gt_mask:
        raise ConfigurationError("case4_gt_mask checkpoints cannot restore images without ground-truth masks")
    if save_mask and not model.cfg.uses_mask_net:
        logger.warning("Model has no Mask-Net (guidance_case=%s); no masks will be saved", model.cfg.guidance_case.value)
        save_mask = False

    model = model.to(get_settings().device)
    out_dir = Path(out_dir)
    written: list[Path] = []
    failed: list[tuple[Path, str]] = []
    for path in paths:
        if path.suffix.lower() not in IMAGE_EXTENSIONS:
            failed.append((path, "not an image file"))
            continue
        try:
            snowy = read_png(path)
        except DatasetIOError as exc:
            failed.append((path, str(exc)))
            continue
        restored, mask = restore_image(model, snowy)
        target = out_dir / f"{path.stem}.png"
        write_png(target, restored)
        if save_mask and mask is not None:
            write_png(out_dir / f"{path.stem}_mask.png", mask[:, :1])
        written.append(target)
    logger.info("Restored %d image(s) into %s, %d skipped", len(written), out_dir, len(failed))
    return written, failed
