from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.append(str(Path(__file__).resolve().parents[1]))

import numpy as np

from smgarn.config import get_settings
from smgarn.schemas import SynthParams
from smgarn.services.snow_synthesis import render_snow_mask


def main() -> None:
    parser = argparse.ArgumentParser(description="Monte Carlo mean(R) coverage for the default SynthParams.")
    parser.add_argument("--seeds", type=int, default=100)
    parser.add_argument("--size", type=int, nargs=2, default=(128, 128), metavar=("H", "W"))
    parser.add_argument("--binary", action="store_true", help="threshold R at 0.5")
    args = parser.parse_args()

    H, W = args.size
    coverage = np.array(
        [render_snow_mask(SynthParams(seed=s, binary_mask=args.binary), H, W)[0].mean() for s in range(args.seeds)]
    )
    lo, hi = get_settings().mask_coverage_band
    print(f"{args.seeds} seeds at {H}x{W}: mean {coverage.mean():.4f}, std {coverage.std():.4f}")
    print(f"  min {coverage.min():.4f}  p05 {np.percentile(coverage, 5):.4f}  p95 {np.percentile(coverage, 95):.4f}  max {coverage.max():.4f}")
    outside = int(np.count_nonzero((coverage < lo) | (coverage > hi)))
    print(f"  configured band [{lo}, {hi}]: {outside} seed(s) outside")


if __name__ == "__main__":
    main()
