from __future__ import annotations

import numpy as np

from smgarn.schemas import SynthParams
from smgarn.services.snow_synthesis import SnowSample, render_clean_scene, synth_sample


def make_samples(n: int = 2, size: tuple[int, int] = (48, 48), seed: int = 0) -> list[SnowSample]:
    H, W = size
    samples = []
    for i in range(1, n + 1):
        clean = render_clean_scene(H, W, np.random.default_rng([seed, i]))
        samples.append(synth_sample(clean, SynthParams(seed=seed * 100 + i), sample_id=f"{i:04d}"))
    return samples


def set_identity_kernel(conv, scale: float = 1.0) -> None:
    """Centre tap `scale` on the channel diagonal, zero elsewhere and zero bias."""
    import torch

    with torch.no_grad():
        conv.weight.zero_()
        k = conv.kernel_size[0] // 2
        for c in range(min(conv.in_channels, conv.out_channels)):
            conv.weight[c, c, k, k] = scale
        if conv.bias is not None:
            conv.bias.zero_()


def zero_module(module) -> None:
    import torch

    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
