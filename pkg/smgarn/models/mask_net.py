"""Mask-Net: predicts the snow mask and the mask feature map from a snowy image.

The pixel attention units here are elementwise (Hadamard) products of
convolutional encodings, not similarity-matrix attention.
"""
from __future__ import annotations

import torch
from torch import nn

from smgarn.models.layers import ConvReLU, check_channels, conv_layer
from smgarn.schemas import MaskNetConfig


def self_pixel_attention(x: torch.Tensor, conv: nn.Conv2d) -> torch.Tensor:
    check_channels(x, conv.in_channels, name="self_pixel_attention")
    y = conv(x)
    return y * y


def cross_pixel_attention(x: torch.Tensor, conv1: nn.Conv2d, conv2: nn.Conv2d) -> torch.Tensor:
    check_channels(x, conv1.in_channels, name="cross_pixel_attention")
    check_channels(x, conv2.in_channels, name="cross_pixel_attention")
    return conv1(x) * conv2(x)


class SelfPixelAttention(nn.Module):
    def __init__(self, channels: int, kernel: int = 3) -> None:
        super().__init__()
        self.conv = conv_layer(channels, channels, kernel)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self_pixel_attention(x, self.conv)


class CrossPixelAttention(nn.Module):
    def __init__(self, channels: int, kernel: int = 3) -> None:
        super().__init__()
        self.conv1 = conv_layer(channels, channels, kernel)
        self.conv2 = conv_layer(channels, channels, kernel)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return cross_pixel_attention(x, self.conv1, self.conv2)


class SnowMaskBlock(nn.Module):
    """x + CA(SA(x)); a disabled unit becomes a plain 3x3 conv + ReLU of equal width."""

    def __init__(self, channels: int, *, use_sa: bool = True, use_ca: bool = True, kernel: int = 3) -> None:
        super().__init__()
        self.channels = channels
        self.sa = SelfPixelAttention(channels, kernel) if use_sa else ConvReLU(channels, channels, 3)
        self.ca = CrossPixelAttention(channels, kernel) if use_ca else ConvReLU(channels, channels, 3)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_channels(x, self.channels, name="SnowMaskBlock")
        return x + self.ca(self.sa(x))


class MaskNet(nn.Module):
    def __init__(self, cfg: MaskNetConfig) -> None:
        super().__init__()
        self.cfg = cfg
        c = cfg.embed_dim
        self.conv_in = conv_layer(3, c)
        for i in range(1, cfg.num_blocks + 1):
            self.add_module(
                f"block{i}",
                SnowMaskBlock(c, use_sa=cfg.use_sa, use_ca=cfg.use_ca, kernel=cfg.attention_kernel),
            )
        self.conv_out = conv_layer(c, c)
        self.head = conv_layer(c, cfg.mask_channels)

    def blocks(self) -> list[SnowMaskBlock]:
        return [getattr(self, f"block{i}") for i in range(1, self.cfg.num_blocks + 1)]

    def forward(self, snowy: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (F_mask, m); F_mask is the feature right before the mask head."""
        check_channels(snowy, 3, name="MaskNet input")
        feat = torch.relu(self.conv_in(snowy))
        for block in self.blocks():
            feat = block(feat)
        f_mask = self.conv_out(feat)
        m = torch.sigmoid(self.head(f_mask))
        return f_mask, m
