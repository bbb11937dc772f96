from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from smgarn.errors import ParameterError


Range = tuple[float, float]
IntRange = tuple[int, int]


class GuidanceCase(str, enum.Enum):
    case1_no_masknet = "case1_no_masknet"
    case2_no_maskloss = "case2_no_maskloss"
    case3_full = "case3_full"
    case4_gt_mask = "case4_gt_mask"


class FusionMode(str, enum.Enum):
    concat_conv = "concat_conv"
    add_conv = "add_conv"


class GuidanceMode(str, enum.Enum):
    residual = "residual"
    concat = "concat"


class FusionNet(str, enum.Enum):
    gfnet = "gfnet"
    conv_stack_concat = "conv_stack_concat"
    conv_stack_residual = "conv_stack_residual"


class ScaleMode(str, enum.Enum):
    multi = "multi"
    single = "single"


class AggMode(str, enum.Enum):
    multi = "multi"
    single = "single"


class SynthParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    flake_count_range: IntRange = (20, 60)
    flake_radius_range: Range = (1.0, 4.0)
    streak_count_range: IntRange = (5, 15)
    streak_length_range: Range = (10.0, 40.0)
    streak_width_range: Range = (1.0, 2.0)
    streak_angle_range: Range = (-20.0, 20.0)  # degrees from vertical
    opacity_range: Range = (0.6, 1.0)
    transmission_range: Range = (0.75, 0.95)
    atmospheric_range: Range = (0.75, 0.95)
    chroma_jitter: float = 0.05
    binary_mask: bool = False
    seed: int = Field(default=0, ge=0)

    def check(self) -> None:
        """Raise ParameterError on inverted or out-of-domain ranges."""
        bounds: dict[str, tuple[float, float | None]] = {
            "flake_count_range": (0, None),
            "flake_radius_range": (0.0, None),
            "streak_count_range": (0, None),
            "streak_length_range": (0.0, None),
            "streak_width_range": (0.0, None),
            "streak_angle_range": (-180.0, 180.0),
            "opacity_range": (0.0, 1.0),
            "transmission_range": (0.0, 1.0),
            "atmospheric_range": (0.0, 1.0),
        }
        for name, (lo_bound, hi_bound) in bounds.items():
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ParameterError(f"{name}: lo must not exceed hi, got ({lo}, {hi})")
            if lo < lo_bound or (hi_bound is not None and hi > hi_bound):
                upper = "inf" if hi_bound is None else hi_bound
                raise ParameterError(f"{name}: ({lo}, {hi}) outside [{lo_bound}, {upper}]")
        if not 0.0 <= self.chroma_jitter <= 1.0:
            raise ParameterError(f"chroma_jitter must lie in [0, 1], got {self.chroma_jitter}")


class MaskNetConfig(BaseModel):
    embed_dim: int = Field(default=112, ge=1)
    num_blocks: int = Field(default=1, ge=1)
    use_sa: bool = True
    use_ca: bool = True
    mask_channels: int = Field(default=1, ge=1)
    attention_kernel: int = Field(default=3, ge=1)


class GFNetConfig(BaseModel):
    embed_dim: int = Field(default=112, ge=1)
    levels: int = Field(default=2, ge=1)
    fusion_mode: FusionMode = FusionMode.concat_conv
    guidance_mode: GuidanceMode = GuidanceMode.residual
    fusion_net: FusionNet = FusionNet.gfnet
    stack_depth: int = Field(default=8, ge=1)


class MARBConfig(BaseModel):
    channels: int = Field(default=112, ge=1)
    scale_mode: ScaleMode = ScaleMode.multi
    agg_mode: AggMode = AggMode.multi
    count: int = Field(default=3, ge=1)


class ModelConfig(BaseModel):
    embed_dim: int = Field(default=112, ge=1)
    mask_channels: int = Field(default=1, ge=1)
    masknet: MaskNetConfig = Field(default_factory=MaskNetConfig)
    gfnet: GFNetConfig = Field(default_factory=GFNetConfig)
    marb: MARBConfig = Field(default_factory=MARBConfig)
    guidance_case: GuidanceCase = GuidanceCase.case3_full
    variant: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def _propagate_embed_dim(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        embed_dim = data.get("embed_dim", 112)
        mask_channels = data.get("mask_channels", 1)
        for key, field in (("masknet", "embed_dim"), ("gfnet", "embed_dim"), ("marb", "channels")):
            sub = data.get(key)
            if sub is None:
                sub = {}
            elif isinstance(sub, BaseModel):
                continue
            sub = dict(sub)
            sub.setdefault(field, embed_dim)
            if key == "masknet":
                sub.setdefault("mask_channels", mask_channels)
            data[key] = sub
        return data

    @model_validator(mode="after")
    def _check_shared_dims(self) -> "ModelConfig":
        dims = {self.embed_dim, self.masknet.embed_dim, self.gfnet.embed_dim, self.marb.channels}
        if len(dims) != 1:
            raise ValueError(f"sub-configs must share embed_dim={self.embed_dim}, got {sorted(dims)}")
        if self.masknet.mask_channels != self.mask_channels:
            raise ValueError(
                f"masknet.mask_channels={self.masknet.mask_channels} differs from mask_channels={self.mask_channels}"
            )
        return self

    def with_embed_dim(self, embed_dim: int) -> "ModelConfig":
        data = self.model_dump()
        data["embed_dim"] = embed_dim
        data["masknet"]["embed_dim"] = embed_dim
        data["gfnet"]["embed_dim"] = embed_dim
        data["marb"]["channels"] = embed_dim
        return ModelConfig.model_validate(data)

    @property
    def uses_mask_net(self) -> bool:
        return self.guidance_case in {GuidanceCase.case2_no_maskloss, GuidanceCase.case3_full}

    @property
    def uses_mask_loss(self) -> bool:
        return self.guidance_case == GuidanceCase.case3_full

    @property
    def needs_gt_mask(self) -> bool:
        """True when training or inference reads ground-truth mask values."""
        return self.guidance_case in {GuidanceCase.case3_full, GuidanceCase.case4_gt_mask}


class TrainConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    patch_size: int = Field(default=128, ge=8)
    batch_size: int = Field(default=16, ge=1)
    lr_init: float = Field(default=1e-4, gt=0.0)
    lr_halve_every: int = Field(default=100, ge=1)
    epochs: int = Field(default=1, ge=1)
    steps_per_epoch: Optional[int] = Field(default=None, ge=1)
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    weight_decay: float = Field(default=0.0, ge=0.0)
    grad_clip_norm: Optional[float] = Field(default=None, gt=0.0)
    seed: int = Field(default=0, ge=0)
    lambda_mask: float = Field(default=1.0, alias="lambda")
    hflip: bool = True
    vflip: bool = True
    rot90: bool = True
    val_dir: Optional[Path] = None
    checkpoint_every: int = Field(default=1, ge=1)


METRICS_COLUMNS: tuple[str, ...] = ("epoch", "step", "loss_total", "loss_rec", "loss_mask", "lr", "psnr", "ssim")


@dataclass(frozen=True)
class MetricsRecord:
    epoch: int
    step: int
    loss_total: float | None = None
    loss_rec: float | None = None
    loss_mask: float | None = None
    lr: float | None = None
    psnr: float | None = None  # eval rows only
    ssim: float | None = None

    def as_row(self) -> list[str]:
        def fmt(v: float | int | None) -> str:
            if v is None:
                return ""
            return str(v) if isinstance(v, int) else repr(float(v))

        return [fmt(getattr(self, col)) for col in METRICS_COLUMNS]

    @classmethod
    def from_row(cls, row: dict[str, str]) -> "MetricsRecord":
        def num(key: str) -> float | None:
            raw = row.get(key, "")
            return float(raw) if raw else None

        return cls(
            epoch=int(row["epoch"]),
            step=int(row["step"]),
            loss_total=num("loss_total"),
            loss_rec=num("loss_rec"),
            loss_mask=num("loss_mask"),
            lr=num("lr"),
            psnr=num("psnr"),
            ssim=num("ssim"),
        )


@dataclass(frozen=True)
class ImageScore:
    id: str
    psnr_db: float
    ssim: float


@dataclass(frozen=True)
class EvalReport:
    dataset_id: str
    per_image: tuple[ImageScore, ...]
    mean_psnr: float
    mean_ssim: float

    @classmethod
    def from_scores(cls, dataset_id: str, scores: list[ImageScore]) -> "EvalReport":
        if not scores:
            raise ValueError("EvalReport needs at least one scored image")
        # sorted by id so the means do not depend on evaluation order
        ordered = tuple(sorted(scores, key=lambda s: s.id))
        mean_psnr = sum(s.psnr_db for s in ordered) / len(ordered)
        mean_ssim = sum(s.ssim for s in ordered) / len(ordered)
        return cls(dataset_id=dataset_id, per_image=ordered, mean_psnr=mean_psnr, mean_ssim=mean_ssim)

    @property
    def summary(self) -> str:
        return f"{self.mean_psnr:.2f}/{self.mean_ssim:.2f}"
