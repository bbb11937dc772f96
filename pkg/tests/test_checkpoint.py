from __future__ import annotations

import pytest
import torch

from smgarn.errors import CheckpointError
from smgarn.models.smgarn import build_model
from smgarn.schemas import ModelConfig, TrainConfig
from smgarn.services.checkpoint import FORMAT_VERSION, Checkpoint, load_checkpoint, save_checkpoint


def _checkpoint(cfg: ModelConfig) -> Checkpoint:
    torch.manual_seed(0)
    model = build_model(cfg)
    return Checkpoint(model_config=cfg, model_state=model.state_dict(), epoch=3, global_step=42,
                      train_config=TrainConfig(lambda_mask=0.5))


def test_round_trip_gives_bitwise_identical_outputs(tmp_path, tiny_cfg):
    ckpt = _checkpoint(tiny_cfg)
    path = tmp_path / "ckpt" / "epoch_0003.pt"
    save_checkpoint(path, ckpt)
    loaded = load_checkpoint(path)

    assert loaded.model_config == tiny_cfg
    assert (loaded.epoch, loaded.global_step) == (3, 42)
    assert loaded.train_config.lambda_mask == 0.5

    batch = torch.rand(2, 3, 24, 20, generator=torch.Generator().manual_seed(1))
    original = ckpt.build_model().eval()
    restored = loaded.build_model().eval()
    with torch.no_grad():
        a, ma = original(batch)
        b, mb = restored(batch)
    assert torch.equal(a, b)
    assert torch.equal(ma, mb)


def test_save_leaves_no_temp_files(tmp_path, tiny_cfg):
    save_checkpoint(tmp_path / "a.pt", _checkpoint(tiny_cfg))
    save_checkpoint(tmp_path / "a.pt", _checkpoint(tiny_cfg))
    assert [p.name for p in tmp_path.iterdir()] == ["a.pt"]


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "nope.pt")


def test_corrupt_file(tmp_path):
    path = tmp_path / "bad.pt"
    path.write_bytes(b"garbage")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_foreign_archive(tmp_path):
    path = tmp_path / "other.pt"
    torch.save({"state_dict": {}}, path)
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_version_mismatch(tmp_path, tiny_cfg):
    path = tmp_path / "a.pt"
    save_checkpoint(path, _checkpoint(tiny_cfg))
    payload = torch.load(path, weights_only=True)
    payload["format_version"] = FORMAT_VERSION + 1
    torch.save(payload, path)
    with pytest.raises(CheckpointError, match="format_version"):
        load_checkpoint(path)


def test_weights_that_do_not_fit_the_config(tmp_path, tiny_cfg):
    ckpt = _checkpoint(tiny_cfg)
    ckpt.model_config = tiny_cfg.with_embed_dim(6)
    save_checkpoint(tmp_path / "a.pt", ckpt)
    loaded = load_checkpoint(tmp_path / "a.pt")
    with pytest.raises(CheckpointError):
        loaded.build_model()
