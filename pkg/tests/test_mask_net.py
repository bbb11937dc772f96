from __future__ import annotations

import numpy as np
import pytest
import torch

from smgarn.errors import DimensionError
from smgarn.models.layers import ConvReLU, conv_layer
from smgarn.models.mask_net import (
    CrossPixelAttention,
    MaskNet,
    SelfPixelAttention,
    SnowMaskBlock,
    cross_pixel_attention,
    self_pixel_attention,
)
from smgarn.schemas import MaskNetConfig
from smgarn.services.gradcheck import gradient_check
from tests.helpers import set_identity_kernel, zero_module


def naive_conv(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Direct zero-padded cross-correlation, (1, Ci, H, W) -> (1, Co, H, W)."""
    _, ci, H, W = x.shape
    co, _, k, _ = w.shape
    p = k // 2
    xp = np.pad(x[0], ((0, 0), (p, p), (p, p)))
    out = np.zeros((1, co, H, W))
    for o in range(co):
        for i in range(H):
            for j in range(W):
                acc = b[o]
                for c in range(ci):
                    for u in range(k):
                        for v in range(k):
                            acc += w[o, c, u, v] * xp[c, i + u, j + v]
                out[0, o, i, j] = acc
    return out


def _np(conv: torch.nn.Conv2d) -> tuple[np.ndarray, np.ndarray]:
    return conv.weight.detach().numpy(), conv.bias.detach().numpy()


def test_self_attention_is_non_negative():
    torch.manual_seed(0)
    sa = SelfPixelAttention(4)
    for _ in range(100):
        x = torch.randn(1, 4, 6, 6) * 3
        assert (sa(x) >= 0).all()


def test_cross_attention_reduces_to_square_under_identity_kernels():
    ca = CrossPixelAttention(4).double()
    set_identity_kernel(ca.conv1)
    set_identity_kernel(ca.conv2)
    x = torch.randn(2, 4, 5, 7, dtype=torch.float64)
    torch.testing.assert_close(ca(x), x * x, rtol=0, atol=1e-12)


def test_cross_attention_scalar_example():
    conv1 = conv_layer(1, 1).double()
    conv2 = conv_layer(1, 1).double()
    set_identity_kernel(conv1)
    set_identity_kernel(conv2, 2.0)
    x = torch.full((1, 1, 1, 1), 3.0, dtype=torch.float64)
    assert cross_pixel_attention(x, conv1, conv2).item() == pytest.approx(18.0)


def test_attention_matches_direct_convolution():
    torch.manual_seed(1)
    x = torch.randn(1, 4, 8, 8, dtype=torch.float64)
    sa = SelfPixelAttention(4).double()
    ca = CrossPixelAttention(4).double()
    with torch.no_grad():
        for conv in (sa.conv, ca.conv1, ca.conv2):
            conv.bias.uniform_(-0.5, 0.5)

    xn = x.numpy()
    y = naive_conv(xn, *_np(sa.conv))
    np.testing.assert_allclose(sa(x).detach().numpy(), y * y, atol=1e-6)
    expected = naive_conv(xn, *_np(ca.conv1)) * naive_conv(xn, *_np(ca.conv2))
    np.testing.assert_allclose(ca(x).detach().numpy(), expected, atol=1e-6)


def test_attention_rejects_wrong_channels():
    conv = conv_layer(4, 4)
    with pytest.raises(DimensionError):
        self_pixel_attention(torch.zeros(1, 3, 4, 4), conv)
    with pytest.raises(DimensionError):
        cross_pixel_attention(torch.zeros(1, 3, 4, 4), conv, conv)


def test_zeroed_block_is_identity():
    block = SnowMaskBlock(6)
    zero_module(block)
    x = torch.randn(2, 6, 9, 11)
    assert torch.equal(block(x), x)


def test_disabled_units_become_plain_convs():
    block = SnowMaskBlock(4, use_sa=False, use_ca=True)
    assert isinstance(block.sa, ConvReLU)
    assert isinstance(block.ca, CrossPixelAttention)
    block = SnowMaskBlock(4, use_sa=True, use_ca=False)
    assert isinstance(block.sa, SelfPixelAttention)
    assert isinstance(block.ca, ConvReLU)
    assert block.sa.conv.out_channels == block.ca.conv.out_channels == 4


@pytest.mark.parametrize("size", [(64, 64), (97, 101)])
def test_mask_net_shapes(size):
    cfg = MaskNetConfig(embed_dim=8, num_blocks=2)
    net = MaskNet(cfg)
    f_mask, m = net(torch.rand(2, 3, *size))
    assert f_mask.shape == (2, 8, *size)
    assert m.shape == (2, 1, *size)
    assert (m >= 0).all() and (m <= 1).all()


def test_mask_net_param_count_at_full_width():
    net = MaskNet(MaskNetConfig())
    assert sum(p.numel() for p in net.parameters()) == 456_177


def test_mask_net_rejects_grayscale_input():
    with pytest.raises(DimensionError):
        MaskNet(MaskNetConfig(embed_dim=4))(torch.rand(1, 1, 16, 16))


@pytest.mark.parametrize("module_cls", [SelfPixelAttention, CrossPixelAttention, SnowMaskBlock])
def test_attention_gradients(module_cls):
    torch.manual_seed(2)
    module = module_cls(4).double()
    x = torch.randn(1, 4, 6, 6, dtype=torch.float64)
    weights = torch.randn(1, 4, 6, 6, dtype=torch.float64)
    report = gradient_check(module, lambda: (module(x) * weights).sum(), n_samples=12, seed=0)
    assert len(report.entries) == 12
    assert report.max_rel_err <= 1e-3, report.worst()


def test_mask_net_gradients():
    torch.manual_seed(3)
    net = MaskNet(MaskNetConfig(embed_dim=4)).double()
    x = torch.rand(1, 3, 8, 8, dtype=torch.float64)
    target = torch.rand(1, 1, 8, 8, dtype=torch.float64)
    report = gradient_check(net, lambda: ((net(x)[1] - target) ** 2).sum(), n_samples=12, seed=1)
    assert report.max_rel_err <= 1e-3, report.worst()


def test_zeroed_mask_net_predicts_one_half():
    net = MaskNet(MaskNetConfig(embed_dim=6))
    zero_module(net)
    f_mask, m = net(torch.rand(2, 3, 12, 10))
    assert torch.equal(f_mask, torch.zeros_like(f_mask))
    assert torch.equal(m, torch.full_like(m, 0.5))
