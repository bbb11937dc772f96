"""Image arrays and PNG boundaries.

In-memory images are float64 arrays of shape (B, C, H, W). Unit-interval images
hold values in [0, 1]; feature maps are unbounded. Files are 8-bit PNG: RGB for
scenes, single-channel grayscale for masks.
"""
from __future__ import annotations

import enum
from pathlib import Path

import numpy as np
import numpy.typing as npt

from smgarn.errors import DatasetIOError, DimensionError, DomainError


ImageArray = npt.NDArray[np.float64]

IMAGE_EXTENSIONS = frozenset({".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp"})


class ValueDomain(str, enum.Enum):
    unit_interval = "unit_interval"
    unbounded = "unbounded"


def check_image(
    arr: npt.ArrayLike,
    *,
    name: str,
    channels: int | tuple[int, ...] | None = None,
    domain: ValueDomain = ValueDomain.unit_interval,
) -> ImageArray:
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 4:
        raise DimensionError(f"{name}: expected rank-4 (B, C, H, W), got shape {out.shape}")
    if min(out.shape) < 1:
        raise DimensionError(f"{name}: every dimension must be >= 1, got shape {out.shape}")
    if channels is not None:
        allowed = (channels,) if isinstance(channels, int) else channels
        if out.shape[1] not in allowed:
            raise DimensionError(f"{name}: expected {allowed} channel(s), got {out.shape[1]}")
    if domain is ValueDomain.unit_interval:
        if not np.all(np.isfinite(out)) or out.min() < 0.0 or out.max() > 1.0:
            raise DomainError(
                f"{name}: values must lie in [0, 1], got range [{np.nanmin(out):g}, {np.nanmax(out):g}]"
            )
    return out


def check_same_grid(named: dict[str, ImageArray]) -> tuple[int, int, int]:
    """All arrays share (B, H, W); returns it."""
    grids = {name: (a.shape[0], a.shape[2], a.shape[3]) for name, a in named.items()}
    first = next(iter(grids.values()))
    for name, grid in grids.items():
        if grid != first:
            detail = ", ".join(f"{n}={g}" for n, g in grids.items())
            raise DimensionError(f"(B, H, W) mismatch: {detail}")
    return first


def to_uint8(img: ImageArray) -> npt.NDArray[np.uint8]:
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def from_uint8(arr: npt.NDArray[np.uint8]) -> ImageArray:
    return arr.astype(np.float64) / 255.0


def read_png(path: Path, *, grayscale: bool = False) -> ImageArray:
    """Read an image file into (1, C, H, W); RGB unless grayscale."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            img = img.convert("L" if grayscale else "RGB")
            arr = np.asarray(img, dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise DatasetIOError(f"Cannot read image {path}: {exc}") from exc
    if grayscale:
        arr = arr[None, None, :, :]
    else:
        arr = arr.transpose(2, 0, 1)[None, ...]
    return from_uint8(arr)


def write_png(path: Path, img: ImageArray) -> None:
    """Write a (1, 1|3, H, W) unit-interval image as 8-bit PNG."""
    from PIL import Image

    img = check_image(img, name=str(path), channels=(1, 3))
    if img.shape[0] != 1:
        raise DimensionError(f"{path}: can only write batch size 1, got {img.shape[0]}")
    data = to_uint8(img[0])
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        if data.shape[0] == 1:
            Image.fromarray(np.ascontiguousarray(data[0])).save(path, format="PNG")
        else:
            Image.fromarray(np.ascontiguousarray(data.transpose(1, 2, 0))).save(path, format="PNG")
    except OSError as exc:
        raise DatasetIOError(f"Cannot write image {path}: {exc}") from exc


def luminance(img: ImageArray) -> npt.NDArray[np.float64]:
    """ITU-R BT.601 luma of (B, 3, H, W) or passthrough for 1 channel; returns (B, H, W)."""
    if img.shape[1] == 1:
        return img[:, 0]
    if img.shape[1] != 3:
        raise DimensionError(f"luminance needs 1 or 3 channels, got {img.shape[1]}")
    return 0.299 * img[:, 0] + 0.587 * img[:, 1] + 0.114 * img[:, 2]
