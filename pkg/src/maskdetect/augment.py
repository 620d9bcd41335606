"""Image preprocessing and augmentation: rescale, shear, zoom, flip, resize.

Geometric operations use inverse mapping with bilinear sampling. Shear and
zoom fill out-of-bounds sources with zero; resize clamps to the border so
constant images stay constant. Pixel centers are at integer coordinates;
resize aligns half-pixel centers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .tensor import FLOAT


@dataclass
class Image:
    """H x W x 3 float pixels plus the value-domain flag ('raw' 0..255 or 'unit' 0..1)."""

    pixels: np.ndarray
    domain: str = "raw"

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ShapeError(f"image must be HxWx3, got {self.pixels.shape}")
        if self.domain not in ("raw", "unit"):
            raise ValueError(f"unknown domain {self.domain!r}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class AugmentConfig:
    shear_max: float = 0.2          # radians
    zoom_range: tuple[float, float] = (0.8, 1.2)
    flip_probability: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.shear_max < 0:
            raise ValueError("shear_max must be >= 0")
        lo, hi = self.zoom_range
        if lo <= 0 or hi <= 0 or lo > hi:
            raise ValueError(f"bad zoom_range {self.zoom_range}")
        if not 0 <= self.flip_probability <= 1:
            raise ValueError("flip_probability must be in [0, 1]")


def rescale_unit(img: Image) -> Image:
    """Divide raw pixels by 255 and flip the domain flag."""
    if img.domain != "raw":
        raise DomainError("image is already in the unit domain")
    return Image(img.pixels / 255.0, "unit")


def _gather(pixels: np.ndarray, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
    h, w = pixels.shape[:2]
    return pixels[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]


def sample_bilinear(pixels: np.ndarray, sy: np.ndarray, sx: np.ndarray, fill_zero: bool) -> np.ndarray:
    """Sample pixels at fractional (sy, sx) grids.

    fill_zero treats anything outside [0, H-1] x [0, W-1] as zero
    contribution; otherwise border values are clamped.
    """
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    fy = (sy - y0)[..., None]
    fx = (sx - x0)[..., None]

    if fill_zero:
        h, w = pixels.shape[:2]

        def term(yy, xx, wy, wx):
            valid = ((yy >= 0) & (yy < h) & (xx >= 0) & (xx < w))[..., None]
            return _gather(pixels, yy, xx) * (wy * wx) * valid

    else:

        def term(yy, xx, wy, wx):
            return _gather(pixels, yy, xx) * (wy * wx)

    return (
        term(y0, x0, 1 - fy, 1 - fx)
        + term(y0, x0 + 1, 1 - fy, fx)
        + term(y0 + 1, x0, fy, 1 - fx)
        + term(y0 + 1, x0 + 1, fy, fx)
    )


def shear_transform(img: Image, theta: float) -> Image:
    """Horizontal shear about the image center row.

    Inverse map: source_x = x + tan(theta) * (y - cy), source_y = y, with
    cy = (H - 1) / 2; out-of-bounds samples fill with zero.
    """
    if abs(theta) > np.pi / 4:
        raise ValueError(f"|theta| must be <= pi/4, got {theta}")
    h, w = img.pixels.shape[:2]
    if theta == 0.0:
        return Image(img.pixels.copy(), img.domain)
    cy = (h - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=FLOAT), np.arange(w, dtype=FLOAT), indexing="ij")
    sx = xx + np.tan(theta) * (yy - cy)
    return Image(sample_bilinear(img.pixels, yy, sx, fill_zero=True), img.domain)


def zoom_transform(img: Image, z: float) -> Image:
    """Scale about the image center by factor z; output size is unchanged.

    z > 1 magnifies the central region; z < 1 shrinks the image with a
    zero-filled border. Inverse map: source = c + (dest - c) / z with
    c = ((H-1)/2, (W-1)/2).
    """
    if z <= 0:
        raise ValueError(f"zoom factor must be positive, got {z}")
    if z == 1.0:
        return Image(img.pixels.copy(), img.domain)
    h, w = img.pixels.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=FLOAT), np.arange(w, dtype=FLOAT), indexing="ij")
    sy = cy + (yy - cy) / z
    sx = cx + (xx - cx) / z
    return Image(sample_bilinear(img.pixels, sy, sx, fill_zero=True), img.domain)


def horizontal_flip(img: Image) -> Image:
    """Mirror columns: pixel (x, y) moves to (W-1-x, y)."""
    return Image(img.pixels[:, ::-1, :].copy(), img.domain)


def resize_bilinear(img: Image, out_h: int, out_w: int) -> Image:
    """Bilinear resize with half-pixel-center alignment and border clamping."""
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"output size must be >= 1, got {out_h}x{out_w}")
    h, w = img.pixels.shape[:2]
    if (out_h, out_w) == (h, w):
        return Image(img.pixels.copy(), img.domain)
    yy, xx = np.meshgrid(np.arange(out_h, dtype=FLOAT), np.arange(out_w, dtype=FLOAT), indexing="ij")
    sy = (yy + 0.5) * (h / out_h) - 0.5
    sx = (xx + 0.5) * (w / out_w) - 0.5
    return Image(sample_bilinear(img.pixels, sy, sx, fill_zero=False), img.domain)


def augment_sample(img: Image, cfg: AugmentConfig, rng: np.random.Generator) -> Image:
    """Training-time chain: rescale, shear, zoom, flip, in that fixed order.

    The stream is consumed in the same fixed order (theta, zoom, flip), so
    results depend only on the stream state, not the parameter values.
    """
    if img.domain != "raw":
        raise DomainError("augmentation starts from a raw-domain image")
    if img.pixels.shape != (150, 150, 3):
        raise ShapeError(f"expected 150x150x3 input, got {img.pixels.shape}")
    out = rescale_unit(img)
    theta = rng.uniform(-cfg.shear_max, cfg.shear_max)
    out = shear_transform(out, theta)
    z = rng.uniform(cfg.zoom_range[0], cfg.zoom_range[1])
    out = zoom_transform(out, z)
    if rng.uniform() < cfg.flip_probability:
        out = horizontal_flip(out)
    return out
