from __future__ import annotations

import os

import pytest

from smgarn.schemas import ModelConfig, TrainConfig
from smgarn.services.snow_synthesis import SnowSample
from tests.helpers import make_samples


def pytest_collection_modifyitems(config, items):
    if os.environ.get("SMGARN_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="desk-scale run; set SMGARN_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def _settings(monkeypatch):
    monkeypatch.setenv("SMGARN_PROGRESS", "false")
    monkeypatch.setenv("SMGARN_NUM_WORKERS", "0")
    monkeypatch.setenv("SMGARN_DEVICE", "cpu")
    yield


@pytest.fixture
def tiny_cfg() -> ModelConfig:
    return ModelConfig(embed_dim=8, marb={"count": 1})


@pytest.fixture
def tiny_train() -> TrainConfig:
    return TrainConfig(patch_size=32, batch_size=2, epochs=1, seed=0)


@pytest.fixture
def samples() -> list[SnowSample]:
    return make_samples()
