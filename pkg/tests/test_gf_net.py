from __future__ import annotations

import pytest
import torch
from torch import nn

from smgarn.errors import DimensionError, ParameterError
from smgarn.models.gf_net import ConvStackFusion, GFNet, ResUnit, build_fusion, res_unit
from smgarn.schemas import FusionMode, FusionNet, GFNetConfig, GuidanceMode
from smgarn.services.gradcheck import gradient_check
from tests.helpers import zero_module


def _params(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def test_zeroed_res_unit_is_identity():
    unit = ResUnit(5)
    zero_module(unit)
    x = torch.randn(2, 5, 7, 9)
    assert torch.equal(res_unit(x, unit), x)


def test_res_unit_expands_to_twice_the_width():
    unit = ResUnit(6)
    assert unit.conv2.out_channels == 12
    assert unit.conv3.in_channels == 12
    assert _params(unit) == (6 * 6 * 9 + 6) + (6 * 12 * 9 + 12) + (12 * 6 * 9 + 6)


@pytest.mark.parametrize("size", [(64, 64), (97, 101)])
@pytest.mark.parametrize("guidance_mode", list(GuidanceMode))
def test_gf_net_preserves_shape(size, guidance_mode):
    net = GFNet(GFNetConfig(embed_dim=8, guidance_mode=guidance_mode))
    out = net(torch.rand(1, 3, *size), torch.randn(1, 8, *size))
    assert out.shape == (1, 8, *size)


def test_one_feature_per_level():
    net = GFNet(GFNetConfig(embed_dim=4, levels=3))
    levels = net.encode_levels(torch.randn(1, 4, 8, 8), torch.randn(1, 4, 8, 8))
    assert len(levels) == 3
    assert all(level.shape == (1, 4, 8, 8) for level in levels)


def test_matching_branches_cancel_in_residual_mode():
    net = GFNet(GFNetConfig(embed_dim=4, levels=2))
    for level in (1, 2):
        getattr(net, f"ru{level}2").load_state_dict(getattr(net, f"ru{level}1").state_dict())
    f = torch.randn(1, 4, 8, 8)
    for level in net.encode_levels(f, f.clone()):
        assert torch.equal(level, torch.zeros_like(level))


def test_add_fusion_is_narrower_than_concat():
    concat = GFNet(GFNetConfig(embed_dim=8, levels=2, fusion_mode=FusionMode.concat_conv))
    add = GFNet(GFNetConfig(embed_dim=8, levels=2, fusion_mode=FusionMode.add_conv))
    assert concat.fuse1.in_channels == 16
    assert add.fuse1.in_channels == 8
    out = add(torch.rand(1, 3, 16, 16), torch.randn(1, 8, 16, 16))
    assert out.shape == (1, 8, 16, 16)


def test_gf_net_param_count_at_full_width():
    assert _params(GFNet(GFNetConfig())) == 2_714_768


def test_gf_net_rejects_mismatched_inputs():
    net = GFNet(GFNetConfig(embed_dim=4))
    with pytest.raises(DimensionError):
        net(torch.rand(1, 3, 8, 8), torch.randn(1, 4, 8, 9))
    with pytest.raises(DimensionError):
        net(torch.rand(1, 3, 8, 8), torch.randn(1, 5, 8, 8))


@pytest.mark.parametrize("fusion_net", [FusionNet.conv_stack_concat, FusionNet.conv_stack_residual])
def test_conv_stack_fusion(fusion_net):
    cfg = GFNetConfig(embed_dim=4, fusion_net=fusion_net, stack_depth=8)
    net = build_fusion(cfg)
    assert isinstance(net, ConvStackFusion)
    convs = [m for m in net.stack if isinstance(m, nn.Conv2d)]
    assert len(convs) == 8
    assert convs[0].in_channels == (8 if fusion_net is FusionNet.conv_stack_concat else 4)
    assert net(torch.rand(1, 3, 12, 10), torch.randn(1, 4, 12, 10)).shape == (1, 4, 12, 10)


def test_build_fusion_defaults_to_gf_net():
    assert isinstance(build_fusion(GFNetConfig(embed_dim=4)), GFNet)


def test_res_unit_gradients():
    torch.manual_seed(4)
    unit = ResUnit(3).double()
    x = torch.randn(1, 3, 6, 6, dtype=torch.float64)
    weights = torch.randn(1, 3, 6, 6, dtype=torch.float64)
    report = gradient_check(unit, lambda: (unit(x) * weights).sum(), n_samples=12, seed=0)
    assert report.max_rel_err <= 1e-3, report.worst()


@pytest.mark.parametrize("guidance_mode", list(GuidanceMode))
def test_zeroed_gf_net_outputs_zeros(guidance_mode):
    net = GFNet(GFNetConfig(embed_dim=6, guidance_mode=guidance_mode))
    zero_module(net)
    out = net(torch.rand(1, 3, 11, 9), torch.randn(1, 6, 11, 9))
    assert torch.equal(out, torch.zeros_like(out))


def test_conv_stack_fusion_rejects_the_gf_net_setting():
    with pytest.raises(ParameterError, match="gfnet"):
        ConvStackFusion(GFNetConfig(embed_dim=4, fusion_net=FusionNet.gfnet))
