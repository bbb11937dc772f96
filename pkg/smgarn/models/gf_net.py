"""Guidance-Fusion network.

Snow-image features and mask features are encoded side by side by ResUnits; at
every level the mask encoding is subtracted from the image encoding (adaptive
residual) and all level residuals are fused into F_fuse.
"""
from __future__ import annotations

import torch
from torch import nn

from smgarn.errors import ParameterError
from smgarn.models.layers import check_channels, check_spatial, conv_layer
from smgarn.schemas import FusionMode, FusionNet, GFNetConfig, GuidanceMode


class ResUnit(nn.Module):
    """x + conv3(relu(conv2(relu(conv1(x))))) with a 2C-wide middle."""

    def __init__(self, channels: int) -> None:
        super().__init__()
        self.channels = channels
        self.conv1 = conv_layer(channels, channels)
        self.conv2 = conv_layer(channels, 2 * channels)
        self.conv3 = conv_layer(2 * channels, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_channels(x, self.channels, name="ResUnit")
        return x + self.conv3(torch.relu(self.conv2(torch.relu(self.conv1(x)))))


def res_unit(x: torch.Tensor, unit: ResUnit) -> torch.Tensor:
    return unit(x)


class GFNet(nn.Module):
    def __init__(self, cfg: GFNetConfig) -> None:
        super().__init__()
        self.cfg = cfg
        c = cfg.embed_dim
        self.conv_img = conv_layer(3, c)
        self.conv_mask = conv_layer(c, c)
        for level in range(1, cfg.levels + 1):
            self.add_module(f"ru{level}1", ResUnit(c))
            self.add_module(f"ru{level}2", ResUnit(c))
            if cfg.guidance_mode is GuidanceMode.concat:
                self.add_module(f"cat{level}", conv_layer(2 * c, c))
        fuse_in = c * cfg.levels if cfg.fusion_mode is FusionMode.concat_conv else c
        self.fuse1 = conv_layer(fuse_in, c)
        self.fuse2 = conv_layer(c, c)

    def encode_levels(self, f_snow: torch.Tensor, f_mask: torch.Tensor) -> list[torch.Tensor]:
        """Per-level guidance features from already-lifted image and mask features."""
        check_spatial(f_snow, f_mask, name="GFNet branches")
        levels = []
        for level in range(1, self.cfg.levels + 1):
            f_snow = getattr(self, f"ru{level}1")(f_snow)
            f_mask = getattr(self, f"ru{level}2")(f_mask)
            if self.cfg.guidance_mode is GuidanceMode.residual:
                levels.append(f_snow - f_mask)
            else:
                levels.append(getattr(self, f"cat{level}")(torch.cat([f_snow, f_mask], dim=1)))
        return levels

    def fuse(self, levels: list[torch.Tensor]) -> torch.Tensor:
        if self.cfg.fusion_mode is FusionMode.concat_conv:
            merged = torch.cat(levels, dim=1)
        else:
            merged = torch.stack(levels, dim=0).sum(dim=0)
        return self.fuse2(torch.relu(self.fuse1(merged)))

    def forward(self, snowy: torch.Tensor, f_mask: torch.Tensor) -> torch.Tensor:
        check_channels(snowy, 3, name="GFNet image input")
        check_channels(f_mask, self.cfg.embed_dim, name="GFNet mask feature")
        check_spatial(snowy, f_mask, name="GFNet inputs")
        return self.fuse(self.encode_levels(self.conv_img(snowy), self.conv_mask(f_mask)))


class ConvStackFusion(nn.Module):
    """GF-Net stand-in: a plain conv stack over concat(image, mask) or their difference."""

    def __init__(self, cfg: GFNetConfig) -> None:
        super().__init__()
        if cfg.fusion_net is FusionNet.gfnet:
            raise ParameterError(f"ConvStackFusion needs a conv_stack_* fusion_net, got {cfg.fusion_net.value}")
        self.cfg = cfg
        c = cfg.embed_dim
        self.conv_img = conv_layer(3, c)
        self.conv_mask = conv_layer(c, c)
        first_in = 2 * c if cfg.fusion_net is FusionNet.conv_stack_concat else c
        layers: list[nn.Module] = [conv_layer(first_in, c)]
        for _ in range(cfg.stack_depth - 1):
            layers += [nn.ReLU(), conv_layer(c, c)]
        self.stack = nn.Sequential(*layers)

    def forward(self, snowy: torch.Tensor, f_mask: torch.Tensor) -> torch.Tensor:
        check_channels(snowy, 3, name="ConvStackFusion image input")
        check_channels(f_mask, self.cfg.embed_dim, name="ConvStackFusion mask feature")
        check_spatial(snowy, f_mask, name="ConvStackFusion inputs")
        f_snow, f_guide = self.conv_img(snowy), self.conv_mask(f_mask)
        if self.cfg.fusion_net is FusionNet.conv_stack_concat:
            merged = torch.cat([f_snow, f_guide], dim=1)
        else:
            merged = f_snow - f_guide
        return self.stack(merged)


def build_fusion(cfg: GFNetConfig) -> nn.Module:
    if cfg.fusion_net is FusionNet.gfnet:
        return GFNet(cfg)
    return ConvStackFusion(cfg)
