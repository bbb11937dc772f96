"""Snow image formation.

A snowy image is built in two stages over a clean scene J:

    K = J * (1 - Z*R) + C * Z*R        (snow particles over the scene)
    I = K * T + A * (1 - T)            (veiling effect)

R marks snow location, Z particle opacity, C particle colour, T media
transmission and A atmospheric light. All arithmetic is float64; 8-bit
quantization only happens at file boundaries.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, fields, replace

import cv2
import numpy as np
from scipy.ndimage import gaussian_filter

from smgarn.config import get_settings
from smgarn.errors import DatasetError, DimensionError, SingularityError, SizeError
from smgarn.schemas import SynthParams
from smgarn.services.images import ImageArray, check_image, check_same_grid


logger = logging.getLogger(__name__)

MIN_MASK_SIZE = 16


@dataclass(frozen=True)
class SnowLatents:
    R: ImageArray  # (1, 1, H, W) snow location
    Z: ImageArray  # (1, 1, H, W) snow opacity
    C: ImageArray  # (1, 3, H, W) snow colour
    T: ImageArray  # (1, 1, H, W) transmission
    A: ImageArray  # (1, 3, H, W) atmospheric light

    def map_arrays(self, fn: Callable[[ImageArray], ImageArray]) -> "SnowLatents":
        return SnowLatents(**{f.name: fn(getattr(self, f.name)) for f in fields(self)})

    def as_dict(self) -> dict[str, ImageArray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class SnowSample:
    id: str
    snowy: ImageArray
    clean: ImageArray | None = None
    mask: ImageArray | None = None
    latents: SnowLatents | None = None

    def __post_init__(self) -> None:
        named = {"snowy": self.snowy}
        if self.clean is not None:
            named["clean"] = self.clean
        if self.mask is not None:
            named["mask"] = self.mask
        check_same_grid(named)

    @property
    def has_clean(self) -> bool:
        return self.clean is not None

    @property
    def has_mask(self) -> bool:
        return self.mask is not None

    @property
    def is_complete(self) -> bool:
        return self.has_clean and self.has_mask

    @property
    def size(self) -> tuple[int, int]:
        return (self.snowy.shape[2], self.snowy.shape[3])

    def map_arrays(self, fn: Callable[[ImageArray], ImageArray]) -> "SnowSample":
        """Apply one geometric transform jointly to every aligned array."""
        return replace(
            self,
            snowy=fn(self.snowy),
            clean=None if self.clean is None else fn(self.clean),
            mask=None if self.mask is None else fn(self.mask),
            latents=None if self.latents is None else self.latents.map_arrays(fn),
        )

    def composition_error(self) -> float:
        """Max abs difference between snowy and the formation model over clean + latents."""
        if self.latents is None or self.clean is None:
            raise DatasetError(f"Sample {self.id!r} has no latents/clean image to recompose")
        lat = self.latents
        K = compose_veilfree(self.clean, lat.R, lat.Z, lat.C)
        return float(np.abs(compose_snowy(K, lat.T, lat.A) - self.snowy).max())


def compose_veilfree(J: ImageArray, R: ImageArray, Z: ImageArray, C: ImageArray) -> ImageArray:
    J = check_image(J, name="J")
    R = check_image(R, name="R", channels=(1, J.shape[1]))
    Z = check_image(Z, name="Z", channels=(1, J.shape[1]))
    C = check_image(C, name="C", channels=(1, J.shape[1]))
    check_same_grid({"J": J, "R": R, "Z": Z, "C": C})
    zr = Z * R
    return np.clip(J * (1.0 - zr) + C * zr, 0.0, 1.0)


def compose_snowy(K: ImageArray, T: ImageArray, A: ImageArray) -> ImageArray:
    K = check_image(K, name="K")
    T = check_image(T, name="T", channels=(1, K.shape[1]))
    A = check_image(A, name="A", channels=(1, K.shape[1]))
    check_same_grid({"K": K, "T": T, "A": A})
    return np.clip(K * T + A * (1.0 - T), 0.0, 1.0)


def invert_veilfree(
    K: ImageArray, R: ImageArray, Z: ImageArray, C: ImageArray, *, eps: float | None = None
) -> ImageArray:
    eps = get_settings().inversion_eps if eps is None else eps
    K = check_image(K, name="K")
    R = check_image(R, name="R", channels=(1, K.shape[1]))
    Z = check_image(Z, name="Z", channels=(1, K.shape[1]))
    C = check_image(C, name="C", channels=(1, K.shape[1]))
    check_same_grid({"K": K, "R": R, "Z": Z, "C": C})
    zr = Z * R
    singular = int(np.count_nonzero(zr > 1.0 - eps))
    if singular:
        raise SingularityError(singular, eps)
    return np.clip((K - C * zr) / (1.0 - zr), 0.0, 1.0)


# cv2 fixed-point fraction bits for sub-pixel particle geometry
_SHIFT = 4
_EDGE_SIGMA = 0.5
_MARGIN = 3.0


def _fixed(v: float) -> int:
    return int(round(v * (1 << _SHIFT)))


def _window(cy: float, cx: float, reach: float, H: int, W: int) -> tuple[slice, slice] | None:
    y0, y1 = max(0, int(math.floor(cy - reach))), min(H, int(math.ceil(cy + reach)) + 1)
    x0, x1 = max(0, int(math.floor(cx - reach))), min(W, int(math.ceil(cx + reach)) + 1)
    if y0 >= y1 or x0 >= x1:
        return None
    return (slice(y0, y1), slice(x0, x1))


def _local(win: tuple[slice, slice], cy: float, cx: float) -> tuple[int, int]:
    """Continuous image coords -> fixed-point (x, y) in the window canvas; cv2 puts pixel centres on integers."""
    return _fixed(cx - 0.5 - win[1].start), _fixed(cy - 0.5 - win[0].start)


def _canvas(win: tuple[slice, slice]) -> np.ndarray:
    return np.zeros((win[0].stop - win[0].start, win[1].stop - win[1].start), dtype=np.uint8)


def _coverage(canvas: np.ndarray) -> np.ndarray:
    soft = cv2.GaussianBlur(canvas.astype(np.float64) / 255.0, (0, 0), sigmaX=_EDGE_SIGMA,
                            borderType=cv2.BORDER_CONSTANT)
    return np.clip(soft, 0.0, 1.0)


def _stamp(
    R: np.ndarray, Z: np.ndarray, window: tuple[slice, slice], coverage: np.ndarray, opacity: float
) -> None:
    # union by max coverage; Z follows whichever particle dominates the pixel
    region_r = R[window]
    region_z = Z[window]
    wins = coverage > region_r
    region_r[wins] = coverage[wins]
    region_z[wins] = opacity


def render_snow_mask(params: SynthParams, H: int, W: int) -> tuple[ImageArray, ImageArray]:
    """Render (R, Z) of shape (1, 1, H, W); a pure function of (params, H, W).

    Flakes are filled ellipses and streaks thick line segments, both drawn
    antialiased by OpenCV on a per-particle canvas and softened by a small
    Gaussian before they are merged into R.
    """
    params.check()
    if H < MIN_MASK_SIZE or W < MIN_MASK_SIZE:
        raise SizeError(f"snow mask needs H, W >= {MIN_MASK_SIZE}, got {H}x{W}")

    rng = np.random.default_rng(params.seed)
    R = np.zeros((H, W), dtype=np.float64)
    Z = np.zeros((H, W), dtype=np.float64)

    n_flakes = int(rng.integers(params.flake_count_range[0], params.flake_count_range[1], endpoint=True))
    for _ in range(n_flakes):
        cy, cx = rng.uniform(0.0, H), rng.uniform(0.0, W)
        rx = max(rng.uniform(*params.flake_radius_range), 1e-3)
        ry = rx * rng.uniform(0.6, 1.0)
        theta = rng.uniform(0.0, math.pi)
        opacity = rng.uniform(*params.opacity_range)
        win = _window(cy, cx, rx + _MARGIN, H, W)
        if win is None:
            continue
        canvas = _canvas(win)
        cv2.ellipse(canvas, _local(win, cy, cx), (_fixed(rx), _fixed(ry)), math.degrees(theta), 0, 360, 255,
                    thickness=-1, lineType=cv2.LINE_AA, shift=_SHIFT)
        _stamp(R, Z, win, _coverage(canvas), opacity)

    n_streaks = int(rng.integers(params.streak_count_range[0], params.streak_count_range[1], endpoint=True))
    for _ in range(n_streaks):
        cy, cx = rng.uniform(0.0, H), rng.uniform(0.0, W)
        length = rng.uniform(*params.streak_length_range)
        width = rng.uniform(*params.streak_width_range)
        angle = math.radians(rng.uniform(*params.streak_angle_range))
        opacity = rng.uniform(*params.opacity_range)
        win = _window(cy, cx, length / 2.0 + width + _MARGIN, H, W)
        if win is None:
            continue
        # unit direction, angle measured from vertical
        ddy, ddx = math.cos(angle), math.sin(angle)
        half = length / 2.0
        canvas = _canvas(win)
        cv2.line(canvas, _local(win, cy - ddy * half, cx - ddx * half), _local(win, cy + ddy * half, cx + ddx * half),
                 255, thickness=max(1, int(round(width))), lineType=cv2.LINE_AA, shift=_SHIFT)
        _stamp(R, Z, win, _coverage(canvas), opacity)

    if params.binary_mask:
        R = (R >= 0.5).astype(np.float64)
        Z = np.where(R > 0.0, Z, 0.0)
    return R[None, None], Z[None, None]


def _smooth_field(rng: np.random.Generator, H: int, W: int) -> np.ndarray:
    """Low-frequency random field rescaled to [0, 1]."""
    field = gaussian_filter(rng.standard_normal((H, W)), sigma=max(H, W) / 8.0, mode="reflect")
    span = field.max() - field.min()
    if span < 1e-12:
        return np.full((H, W), 0.5)
    return (field - field.min()) / span


def sample_latents(params: SynthParams, H: int, W: int) -> SnowLatents:
    R, Z = render_snow_mask(params, H, W)
    rng = np.random.default_rng([params.seed, 1])

    t_lo, t_hi = params.transmission_range
    T = t_lo + (t_hi - t_lo) * _smooth_field(rng, H, W)

    a_lo, a_hi = params.atmospheric_range
    gray = rng.uniform(a_lo, a_hi)
    tint = rng.uniform(-0.01, 0.01, size=3)
    A = np.broadcast_to(np.clip(gray + tint, a_lo, a_hi)[:, None, None], (3, H, W))

    C = np.broadcast_to((1.0 - params.chroma_jitter * rng.uniform(0.0, 1.0, size=3))[:, None, None], (3, H, W))

    return SnowLatents(
        R=R,
        Z=Z,
        C=np.array(C, dtype=np.float64)[None],
        T=np.asarray(T, dtype=np.float64)[None, None],
        A=np.array(A, dtype=np.float64)[None],
    )


def synth_sample(clean: ImageArray, params: SynthParams, *, sample_id: str = "0001") -> SnowSample:
    clean = check_image(clean, name="clean", channels=3)
    if clean.shape[0] != 1:
        raise DimensionError(f"clean: expected batch size 1, got {clean.shape[0]}")
    H, W = clean.shape[2], clean.shape[3]
    latents = sample_latents(params, H, W)
    K = compose_veilfree(clean, latents.R, latents.Z, latents.C)
    snowy = compose_snowy(K, latents.T, latents.A)
    return SnowSample(id=sample_id, snowy=snowy, clean=clean, mask=latents.R, latents=latents)


def render_clean_scene(H: int, W: int, rng: np.random.Generator) -> ImageArray:
    """Procedural snow-free scene: sky and ground gradients, blocky structures and discs."""
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    horizon = rng.uniform(0.3, 0.6) * H
    sky_top, sky_low = rng.uniform(0.35, 0.75, size=3), rng.uniform(0.55, 0.95, size=3)
    ground_near, ground_far = rng.uniform(0.05, 0.45, size=3), rng.uniform(0.2, 0.6, size=3)

    sky_t = np.clip(yy / max(horizon, 1.0), 0.0, 1.0)
    ground_t = np.clip((yy - horizon) / max(H - horizon, 1.0), 0.0, 1.0)
    sky = sky_top[:, None, None] * (1 - sky_t) + sky_low[:, None, None] * sky_t
    ground = ground_far[:, None, None] * (1 - ground_t) + ground_near[:, None, None] * ground_t
    img = np.where(yy[None] < horizon, sky, ground)

    for _ in range(int(rng.integers(2, 7))):
        w, h = rng.uniform(0.08, 0.3) * W, rng.uniform(0.1, 0.5) * H
        x0 = rng.uniform(-0.1 * W, W)
        y1 = horizon + rng.uniform(-0.05, 0.2) * H
        inside = (xx >= x0) & (xx < x0 + w) & (yy >= y1 - h) & (yy < y1)
        colour = rng.uniform(0.05, 0.8, size=3)
        img = np.where(inside[None], colour[:, None, None], img)

    for _ in range(int(rng.integers(1, 5))):
        cy, cx, r = rng.uniform(0, H), rng.uniform(0, W), rng.uniform(0.03, 0.12) * min(H, W)
        disc = np.clip(r - np.hypot(yy - cy, xx - cx) + 0.5, 0.0, 1.0)
        colour = rng.uniform(0.1, 0.9, size=3)
        img = img * (1 - disc[None]) + colour[:, None, None] * disc[None]

    texture = np.stack([gaussian_filter(rng.standard_normal((H, W)), sigma=1.5) for _ in range(3)])
    img = img + 0.03 * texture
    return np.clip(img, 0.0, 1.0)[None]
