"""Named model variants for every ablation row, grouped into sweep grids."""
from __future__ import annotations

from collections.abc import Callable

from smgarn.errors import RegistryError
from smgarn.schemas import AggMode, FusionNet, GuidanceCase, GuidanceMode, ModelConfig, ScaleMode


VariantFn = Callable[[ModelConfig], ModelConfig]


def _patch(**sections: dict) -> VariantFn:
    """Variant that overrides fields, nested dicts addressing sub-configs."""

    def apply(base: ModelConfig) -> ModelConfig:
        data = base.model_dump()
        for key, value in sections.items():
            if isinstance(value, dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return ModelConfig.model_validate(data)

    return apply


VARIANTS: dict[str, VariantFn] = {
    # Mask-Net pixel attention grid
    "masknet_baseline": _patch(masknet={"use_sa": False, "use_ca": False}),
    "masknet_sa": _patch(masknet={"use_sa": True, "use_ca": False}),
    "masknet_ca": _patch(masknet={"use_sa": False, "use_ca": True}),
    "masknet_casa": _patch(masknet={"use_sa": True, "use_ca": True}),
    # mask guidance
    "tbl4_case1": _patch(guidance_case=GuidanceCase.case1_no_masknet),
    "tbl4_case2": _patch(guidance_case=GuidanceCase.case2_no_maskloss),
    "tbl4_case3": _patch(guidance_case=GuidanceCase.case3_full),
    "tbl4_case4": _patch(guidance_case=GuidanceCase.case4_gt_mask),
    # GF-Net study
    "tbl5_case1": _patch(gfnet={"fusion_net": FusionNet.conv_stack_concat}),
    "tbl5_case2": _patch(gfnet={"fusion_net": FusionNet.conv_stack_residual}),
    "tbl5_case3": _patch(gfnet={"fusion_net": FusionNet.gfnet, "guidance_mode": GuidanceMode.concat}),
    "tbl5_case4": _patch(gfnet={"fusion_net": FusionNet.gfnet, "guidance_mode": GuidanceMode.residual}),
    # MARB structure grid
    "marb_ss_sa": _patch(marb={"scale_mode": ScaleMode.single, "agg_mode": AggMode.single}),
    "marb_ms_sa": _patch(marb={"scale_mode": ScaleMode.multi, "agg_mode": AggMode.single}),
    "marb_ss_ma": _patch(marb={"scale_mode": ScaleMode.single, "agg_mode": AggMode.multi}),
    "marb_ms_ma": _patch(marb={"scale_mode": ScaleMode.multi, "agg_mode": AggMode.multi}),
}
for _count in range(1, 6):
    VARIANTS[f"marb_count_{_count}"] = _patch(marb={"count": _count})


GRIDS: dict[str, list[str]] = {
    "masknet": ["masknet_baseline", "masknet_sa", "masknet_ca", "masknet_casa"],
    "guidance": ["tbl4_case1", "tbl4_case2", "tbl4_case3", "tbl4_case4"],
    "gfnet": ["tbl5_case1", "tbl5_case2", "tbl5_case3", "tbl5_case4"],
    "marb": ["marb_ss_sa", "marb_ms_sa", "marb_ss_ma", "marb_ms_ma"],
    "marb_count": ["marb_count_1", "marb_count_2", "marb_count_3"],
}


def apply_variant(base: ModelConfig, name: str) -> ModelConfig:
    try:
        fn = VARIANTS[name]
    except KeyError:
        raise RegistryError("variant", name, VARIANTS) from None
    cfg = fn(base)
    return cfg.model_copy(update={"variant": name})


def grid_variants(name: str) -> list[str]:
    try:
        return list(GRIDS[name])
    except KeyError:
        raise RegistryError("grid", name, GRIDS) from None
