from __future__ import annotations

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="SMGARN_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # 0 = batches assembled in-process (the only mode with a determinism guarantee)
    num_workers: int = Field(default=0, ge=0, le=64)
    prefetch_factor: int = Field(default=2, ge=1, le=16)

    log_level: str = "INFO"
    progress: bool = True
    device: str = "cpu"  # e.g. "cpu", "cuda"

    psnr_cap_db: float = Field(default=100.0, gt=0.0)
    inversion_eps: float = Field(default=0.05, gt=0.0, lt=1.0)

    # mean(R) band for default SynthParams at 128x128, frozen from scripts/calibrate_mask_coverage.py
    mask_coverage_low: float = Field(default=0.02, ge=0.0, le=1.0)
    mask_coverage_high: float = Field(default=0.15, ge=0.0, le=1.0)

    @property
    def mask_coverage_band(self) -> tuple[float, float]:
        return (self.mask_coverage_low, self.mask_coverage_high)


def get_settings() -> Settings:
    return Settings()
