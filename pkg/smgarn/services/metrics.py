"""PSNR and SSIM.

Conventions: inputs are unit-interval (B, C, H, W) arrays or tensors. SSIM is
computed on BT.601 luminance with an 11x11 Gaussian window (sigma 1.5),
K1 = 0.01, K2 = 0.03, population statistics, no downsampling; the local map
is averaged over the interior where the window fits (skimage's crop of half a
window at each border), then over batch entries. PSNR is over all elements and capped
for identical inputs.
"""
from __future__ import annotations

import math

import numpy as np
import torch
from skimage.metrics import mean_squared_error, structural_similarity

from smgarn.config import get_settings
from smgarn.errors import DimensionError, SizeError
from smgarn.services.images import ImageArray, check_image, luminance


SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _as_array(x: ImageArray | torch.Tensor, name: str) -> ImageArray:
    if isinstance(x, torch.Tensor):
        x = x.detach().cpu().double().numpy()
    return check_image(x, name=name)


def psnr(a: ImageArray | torch.Tensor, b: ImageArray | torch.Tensor, *, peak: float = 1.0, cap: float | None = None) -> float:
    cap = get_settings().psnr_cap_db if cap is None else cap
    a, b = _as_array(a, "a"), _as_array(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"psnr: shape mismatch {a.shape} vs {b.shape}")
    mse = float(mean_squared_error(a, b))
    if mse == 0.0:
        return cap
    return min(cap, 10.0 * math.log10(peak**2 / mse))


def ssim(
    a: ImageArray | torch.Tensor,
    b: ImageArray | torch.Tensor,
    *,
    window: int = SSIM_WINDOW,
    sigma: float = SSIM_SIGMA,
    k1: float = 0.01,
    k2: float = 0.03,
    peak: float = 1.0,
) -> float:
    a, b = _as_array(a, "a"), _as_array(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"ssim: shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape[2], a.shape[3]) < window:
        raise SizeError(f"ssim: image {a.shape[2]}x{a.shape[3]} is smaller than the {window}x{window} window")
    # skimage derives the Gaussian window from sigma: radius = truncate * sigma
    truncate = ((window - 1) / 2) / sigma
    ya, yb = luminance(a), luminance(b)
    scores = [
        structural_similarity(
            ya[i],
            yb[i],
            data_range=peak,
            gaussian_weights=True,
            sigma=sigma,
            truncate=truncate,
            use_sample_covariance=False,
            K1=k1,
            K2=k2,
        )
        for i in range(ya.shape[0])
    ]
    return float(np.mean(scores))
