from __future__ import annotations

import torch
from torch import nn

from smgarn.models.layers import check_channels, conv_layer
from smgarn.schemas import AggMode, MARBConfig, ScaleMode


class MARB(nn.Module):
    """Multi-scale aggregated residual block.

    Three parallel branches (1x1/3x3/5x5, or all 3x3 in single-scale mode), each
    followed by a 3x3 conv. Multi-aggregation pairs the 3x3 branch with each of
    the others, convolves both pairs and merges them; single-aggregation merges
    the three branches in one concat. The block input is added back at the end.
    """

    def __init__(self, channels: int, *, scale_mode: ScaleMode = ScaleMode.multi, agg_mode: AggMode = AggMode.multi) -> None:
        super().__init__()
        self.channels = channels
        self.agg_mode = agg_mode
        c = channels
        k1, k3, k5 = (1, 3, 5) if scale_mode is ScaleMode.multi else (3, 3, 3)
        self.b1 = conv_layer(c, c, k1)
        self.b3 = conv_layer(c, c, k3)
        self.b5 = conv_layer(c, c, k5)
        self.post1 = conv_layer(c, c)
        self.post3 = conv_layer(c, c)
        self.post5 = conv_layer(c, c)
        if agg_mode is AggMode.multi:
            self.agg13 = conv_layer(2 * c, c)
            self.agg53 = conv_layer(2 * c, c)
            self.merge = conv_layer(2 * c, c)
        else:
            self.merge = conv_layer(3 * c, c)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_channels(x, self.channels, name="MARB")
        r1 = torch.relu(self.post1(torch.relu(self.b1(x))))
        r3 = torch.relu(self.post3(torch.relu(self.b3(x))))
        r5 = torch.relu(self.post5(torch.relu(self.b5(x))))
        if self.agg_mode is AggMode.multi:
            n1 = torch.relu(self.agg13(torch.cat([r1, r3], dim=1)))
            n2 = torch.relu(self.agg53(torch.cat([r5, r3], dim=1)))
            return x + self.merge(torch.cat([n1, n2], dim=1))
        return x + self.merge(torch.cat([r1, r3, r5], dim=1))


def marb_forward(x: torch.Tensor, block: MARB) -> torch.Tensor:
    return block(x)


class ReconstructNet(nn.Module):
    def __init__(self, cfg: MARBConfig) -> None:
        super().__init__()
        self.cfg = cfg
        for i in range(1, cfg.count + 1):
            self.add_module(f"marb{i}", MARB(cfg.channels, scale_mode=cfg.scale_mode, agg_mode=cfg.agg_mode))
        self.out = conv_layer(cfg.channels, 3)

    def marbs(self) -> list[MARB]:
        return [getattr(self, f"marb{i}") for i in range(1, self.cfg.count + 1)]

    def features(self, f_fuse: torch.Tensor) -> torch.Tensor:
        """G = F_fuse + MARB_n(...MARB_1(F_fuse)), the global residual before the output conv."""
        check_channels(f_fuse, self.cfg.channels, name="ReconstructNet input")
        chain = f_fuse
        for block in self.marbs():
            chain = block(chain)
        return f_fuse + chain

    def forward(self, f_fuse: torch.Tensor) -> torch.Tensor:
        return torch.clamp(self.out(self.features(f_fuse)), 0.0, 1.0)
