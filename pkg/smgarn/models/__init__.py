from smgarn.models.smgarn import SMGARN, build_model, param_count
from smgarn.models.variants import GRIDS, VARIANTS, apply_variant

__all__ = ["SMGARN", "build_model", "param_count", "GRIDS", "VARIANTS", "apply_variant"]
