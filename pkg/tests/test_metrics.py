from __future__ import annotations

import numpy as np
import pytest
import torch

from smgarn.errors import DimensionError, SizeError
from smgarn.schemas import EvalReport, ImageScore
from smgarn.services.metrics import psnr, ssim


def const(value: float, shape=(1, 3, 32, 32)) -> np.ndarray:
    return np.full(shape, value, dtype=np.float64)


def test_psnr_examples():
    assert psnr(const(0.0), const(0.5)) == pytest.approx(6.0206, abs=1e-3)
    assert psnr(const(0.0), const(1.0)) == pytest.approx(0.0, abs=1e-3)


def test_psnr_is_capped_for_identical_images():
    img = np.random.default_rng(0).uniform(size=(1, 3, 16, 16))
    assert psnr(img, img) == 100.0
    assert psnr(img, img, cap=50.0) == 50.0


def test_psnr_decreases_with_noise():
    rng = np.random.default_rng(1)
    clean = rng.uniform(0.2, 0.8, size=(1, 3, 64, 64))
    noise = rng.standard_normal(clean.shape)
    scores = [psnr(np.clip(clean + amp * noise, 0, 1), clean) for amp in (0.01, 0.03, 0.1)]
    assert scores[0] > scores[1] > scores[2]


def test_psnr_shape_mismatch():
    with pytest.raises(DimensionError):
        psnr(const(0.0), const(0.0, shape=(1, 3, 32, 31)))


def test_ssim_identical_is_one():
    img = np.random.default_rng(2).uniform(size=(1, 3, 24, 24))
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)


def test_ssim_constant_images_closed_form():
    c1 = (0.01 * 1.0) ** 2
    assert ssim(const(0.0), const(0.5)) == pytest.approx(c1 / (0.25 + c1), abs=1e-6)


def test_ssim_is_symmetric_and_bounded():
    rng = np.random.default_rng(3)
    for _ in range(5):
        a = rng.uniform(size=(1, 3, 20, 20))
        b = rng.uniform(size=(1, 3, 20, 20))
        s = ssim(a, b)
        assert s == pytest.approx(ssim(b, a), abs=1e-12)
        assert -1.0 <= s <= 1.0
        assert s < 1.0


def test_ssim_window_must_fit():
    with pytest.raises(SizeError):
        ssim(const(0.0, shape=(1, 3, 10, 32)), const(0.0, shape=(1, 3, 10, 32)))


def test_metrics_accept_tensors():
    a = torch.zeros(1, 3, 16, 16)
    b = torch.full((1, 3, 16, 16), 0.5)
    assert psnr(a, b) == pytest.approx(6.0206, abs=1e-3)
    assert ssim(a, a) == pytest.approx(1.0)


def test_batch_scores_average_entries():
    rng = np.random.default_rng(4)
    a = rng.uniform(size=(2, 3, 16, 16))
    b = rng.uniform(size=(2, 3, 16, 16))
    expected = (ssim(a[:1], b[:1]) + ssim(a[1:], b[1:])) / 2
    assert ssim(a, b) == pytest.approx(expected, abs=1e-12)


def test_report_summary_format():
    report = EvalReport.from_scores(
        "d", [ImageScore("b", 30.0, 0.95), ImageScore("a", 29.88, 0.93)]
    )
    assert [s.id for s in report.per_image] == ["a", "b"]
    assert report.mean_psnr == pytest.approx(29.94)
    assert report.summary == "29.94/0.94"
