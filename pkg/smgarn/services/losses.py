from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from smgarn.errors import DimensionError, ParameterError


@dataclass(frozen=True)
class LossBundle:
    total: torch.Tensor
    reconstruct: torch.Tensor
    mask: torch.Tensor | None
    lam: float

    def scalars(self) -> dict[str, float | None]:
        return {
            "loss_total": float(self.total.detach()),
            "loss_rec": float(self.reconstruct.detach()),
            "loss_mask": None if self.mask is None else float(self.mask.detach()),
        }


def _l1(pred: torch.Tensor, target: torch.Tensor, *, name: str) -> torch.Tensor:
    if pred.shape != target.shape:
        raise DimensionError(f"{name}: shape mismatch {tuple(pred.shape)} vs {tuple(target.shape)}")
    return F.l1_loss(pred, target, reduction="mean")


def mask_loss(m_pred: torch.Tensor, m_gt: torch.Tensor) -> torch.Tensor:
    return _l1(m_pred, m_gt, name="mask_loss")


def reconstruct_loss(restored: torch.Tensor, clean: torch.Tensor) -> torch.Tensor:
    return _l1(restored, clean, name="reconstruct_loss")


def total_loss(rec: torch.Tensor, mask: torch.Tensor | None, lam: float = 1.0) -> LossBundle:
    """total = rec + lam * mask; a missing mask term leaves total = rec."""
    if lam < 0:
        raise ParameterError(f"lambda must be >= 0, got {lam}")
    total = rec if mask is None else rec + lam * mask
    return LossBundle(total=total, reconstruct=rec, mask=mask, lam=lam)
