from __future__ import annotations

import torch
from torch import nn

from smgarn.errors import ConfigurationError, DimensionError
from smgarn.models.gf_net import build_fusion
from smgarn.models.layers import ConvReLU, check_channels, check_spatial, conv_layer
from smgarn.models.mask_net import MaskNet
from smgarn.models.reconstruct_net import ReconstructNet
from smgarn.schemas import FusionNet, GuidanceCase, ModelConfig


class SMGARN(nn.Module):
    """Mask-Net -> GF-Net -> Reconstruct-Net, wired per guidance case.

    case3_full / case2_no_maskloss: the predicted mask feature guides GF-Net.
    case1_no_masknet: no Mask-Net; a learned encoding of the snowy image
    stands in for the mask feature, GF-Net becomes a plain conv stack and
    no mask is produced.
    case4_gt_mask: the ground-truth mask, lifted by a 3x3 conv, is the guide.
    """

    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        self.cfg = cfg
        c = cfg.embed_dim
        case = cfg.guidance_case
        gf_cfg = cfg.gfnet
        if cfg.uses_mask_net:
            self.masknet = MaskNet(cfg.masknet)
        elif case is GuidanceCase.case1_no_masknet:
            self.guide = ConvReLU(3, c)
            if gf_cfg.fusion_net is FusionNet.gfnet:
                gf_cfg = gf_cfg.model_copy(update={"fusion_net": FusionNet.conv_stack_concat})
        else:
            self.guide = conv_layer(cfg.mask_channels, c)
        self.gfnet = build_fusion(gf_cfg)
        self.recon = ReconstructNet(cfg.marb)

    def guidance(
        self, snowy: torch.Tensor, gt_mask: torch.Tensor | None
    ) -> tuple[torch.Tensor, torch.Tensor | None]:
        case = self.cfg.guidance_case
        if self.cfg.uses_mask_net:
            return self.masknet(snowy)
        if case is GuidanceCase.case1_no_masknet:
            return self.guide(snowy), None
        if gt_mask is None:
            raise ConfigurationError("guidance_case=case4_gt_mask needs a ground-truth mask at forward time")
        check_spatial(snowy, gt_mask, name="gt_mask")
        if gt_mask.shape[1] == 1 and self.cfg.mask_channels > 1:
            gt_mask = gt_mask.expand(-1, self.cfg.mask_channels, -1, -1)
        check_channels(gt_mask, self.cfg.mask_channels, name="gt_mask")
        return self.guide(gt_mask), None

    def forward(
        self, snowy: torch.Tensor, gt_mask: torch.Tensor | None = None
    ) -> tuple[torch.Tensor, torch.Tensor | None]:
        """Returns (restored image, predicted mask or None)."""
        if snowy.dim() != 4 or snowy.shape[1] != 3:
            raise DimensionError(f"SMGARN expects (B, 3, H, W), got {tuple(snowy.shape)}")
        f_mask, m = self.guidance(snowy, gt_mask)
        f_fuse = self.gfnet(snowy, f_mask)
        return self.recon(f_fuse), m


def build_model(cfg: ModelConfig) -> SMGARN:
    return SMGARN(cfg)


def param_count(cfg: ModelConfig) -> int:
    """Total scalar parameters; built on the meta device so no memory is allocated."""
    with torch.device("meta"):
        model = SMGARN(cfg)
    return sum(p.numel() for p in model.parameters())
