from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from smgarn.errors import DimensionError


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel: int = 3
    bias: bool = True

    def __post_init__(self) -> None:
        if self.kernel % 2 == 0 or self.kernel < 1:
            raise DimensionError(f"kernel must be a positive odd int, got {self.kernel}")
        if self.in_channels < 1 or self.out_channels < 1:
            raise DimensionError(f"channels must be >= 1, got {self.in_channels}->{self.out_channels}")

    @property
    def padding(self) -> int:
        return self.kernel // 2

    @property
    def param_count(self) -> int:
        return self.in_channels * self.out_channels * self.kernel**2 + (self.out_channels if self.bias else 0)


def conv_layer(in_channels: int, out_channels: int, kernel: int = 3, *, bias: bool = True) -> nn.Conv2d:
    """Same-padded convolution; fan-in scaled weights, zero bias."""
    spec = ConvSpec(in_channels, out_channels, kernel, bias)
    conv = nn.Conv2d(spec.in_channels, spec.out_channels, spec.kernel, padding=spec.padding, bias=spec.bias)
    if conv.bias is not None:
        nn.init.zeros_(conv.bias)
    return conv


def check_channels(x: torch.Tensor, expected: int, *, name: str) -> None:
    if x.dim() != 4:
        raise DimensionError(f"{name}: expected (B, C, H, W), got shape {tuple(x.shape)}")
    if x.shape[1] != expected:
        raise DimensionError(f"{name}: expected {expected} channels, got {x.shape[1]}")


def check_spatial(a: torch.Tensor, b: torch.Tensor, *, name: str) -> None:
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise DimensionError(f"{name}: (B, H, W) mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


class ConvReLU(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, kernel: int = 3) -> None:
        super().__init__()
        self.conv = conv_layer(in_channels, out_channels, kernel)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_channels(x, self.conv.in_channels, name=type(self).__name__)
        return torch.relu(self.conv(x))
