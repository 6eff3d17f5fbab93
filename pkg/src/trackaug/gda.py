"""General image augmentations: grayscale, flip, brightness, blur, rotation.

Each operation is probability-gated and label-aware. Probabilities of 0
short-circuit to a bit-exact identity. The paired-patch helper applies the
photometric transforms with shared draws so template and search stay
consistent, while blur and rotation act on the search side only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d, map_coordinates

from trackaug.geometry import BBox, Patch

__all__ = [
    "GdaConfig",
    "grayscale",
    "horizontal_flip",
    "brightness_jitter",
    "blur",
    "rotate",
    "apply_gda",
    "gaussian_kernel1d",
    "blur_array",
    "rotate_box_corners",
]

# Gaussian kernels below this sigma are effectively a unit impulse
MIN_BLUR_SIGMA = 0.3


@dataclass(frozen=True, slots=True)
class GdaConfig:
    p_gray: float = 0.5
    p_flip: float = 0.5
    p_brightness: float = 0.5
    p_blur: float = 0.05
    p_rotate: float = 0.05
    brightness_magnitude: float = 0.2
    blur_sigma_range: tuple[float, float] = (0.5, 2.0)
    rotate_max_deg: float = 10.0

    def __post_init__(self):
        for name in ("p_gray", "p_flip", "p_brightness", "p_blur", "p_rotate"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if not (0.0 <= self.brightness_magnitude < 1.0):
            raise ValueError(f"brightness_magnitude must be in [0, 1), got {self.brightness_magnitude}")
        lo, hi = self.blur_sigma_range
        if not (0 < lo <= hi):
            raise ValueError(f"blur_sigma_range must be positive and ordered, got {self.blur_sigma_range}")
        if not (0.0 <= self.rotate_max_deg <= 45.0):
            raise ValueError(f"rotate_max_deg must be in [0, 45], got {self.rotate_max_deg}")


def _to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def _gated(p: float, rng) -> bool:
    if p <= 0.0:
        return False
    if p >= 1.0:
        return True
    return rng.random() < p


def _luma(pixels: np.ndarray) -> np.ndarray:
    g = 0.299 * pixels[:, :, 0] + 0.587 * pixels[:, :, 1] + 0.114 * pixels[:, :, 2]
    return _to_uint8(np.repeat(g[:, :, None], 3, axis=2))


def grayscale(patch: Patch, p: float, rng) -> Patch:
    """Replace RGB by replicated luma with probability p."""
    if not _gated(p, rng):
        return patch
    return Patch(_luma(patch.pixels.astype(np.float64)), patch.validity, patch.to_image)


def _flip_pixels(patch: Patch) -> Patch:
    return Patch(patch.pixels[:, ::-1].copy(), patch.validity[:, ::-1].copy(), patch.to_image)


def horizontal_flip(patch: Patch, box: BBox, p: float, rng) -> tuple[Patch, BBox]:
    """Mirror columns and reflect the box with probability p."""
    if not _gated(p, rng):
        return patch, box
    size = patch.out_size
    return _flip_pixels(patch), BBox(size - box.x - box.w, box.y, box.w, box.h)


def _scale_brightness(patch: Patch, factor: float) -> Patch:
    out = _to_uint8(patch.pixels.astype(np.float64) * factor)
    return Patch(out, patch.validity, patch.to_image)


def brightness_jitter(patch: Patch, p: float, magnitude: float, rng) -> Patch:
    """Multiply all channels by a factor in [1-m, 1+m], clamped to [0, 255]."""
    if not _gated(p, rng):
        return patch
    factor = rng.uniform(1.0 - magnitude, 1.0 + magnitude)
    return _scale_brightness(patch, factor)


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian with radius ceil(3*sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def blur_array(values: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur of a float array (edge-replicated)."""
    k = gaussian_kernel1d(sigma)
    out = convolve1d(values.astype(np.float64), k, axis=0, mode="nearest")
    return convolve1d(out, k, axis=1, mode="nearest")


def _blur_patch(patch: Patch, sigma: float) -> Patch:
    if sigma < MIN_BLUR_SIGMA:
        return patch
    return Patch(_to_uint8(blur_array(patch.pixels, sigma)), patch.validity, patch.to_image)


def blur(patch: Patch, p: float, sigma_range: tuple[float, float], rng) -> Patch:
    """Gaussian blur with sigma drawn uniformly from sigma_range."""
    if not _gated(p, rng):
        return patch
    sigma = rng.uniform(sigma_range[0], sigma_range[1])
    return _blur_patch(patch, sigma)


def rotate_box_corners(box: BBox, angle_deg: float, center: tuple[float, float]) -> BBox:
    """Axis-aligned enclosing box of the box's corners rotated about center."""
    theta = math.radians(angle_deg)
    c, s = math.cos(theta), math.sin(theta)
    cx, cy = center
    xs = np.array([box.x, box.x + box.w, box.x, box.x + box.w]) - cx
    ys = np.array([box.y, box.y, box.y + box.h, box.y + box.h]) - cy
    rx = c * xs - s * ys + cx
    ry = s * xs + c * ys + cy
    return BBox(float(rx.min()), float(ry.min()),
                float(rx.max() - rx.min()), float(ry.max() - ry.min()))


def _rotate_patch(patch: Patch, box: BBox, angle_deg: float) -> tuple[Patch, BBox]:
    if angle_deg == 0.0:
        return patch, box
    size = patch.out_size
    center = size / 2.0
    theta = math.radians(angle_deg)
    c, s = math.cos(theta), math.sin(theta)

    # inverse map: output pixel centers back to source coordinates
    ii, jj = np.meshgrid(np.arange(size) + 0.5, np.arange(size) + 0.5, indexing="ij")
    dx = jj - center
    dy = ii - center
    sx = c * dx + s * dy + center
    sy = -s * dx + c * dy + center
    inside = (sx >= 0) & (sx < size) & (sy >= 0) & (sy < size)
    coords = np.stack([sy - 0.5, sx - 0.5])

    fill = patch.pixels.reshape(-1, 3).mean(axis=0)
    out = np.empty_like(patch.pixels)
    for ch in range(3):
        sampled = map_coordinates(patch.pixels[:, :, ch].astype(np.float64), coords, order=1, mode="nearest")
        sampled[~inside] = fill[ch]
        out[:, :, ch] = _to_uint8(sampled)
    validity = map_coordinates(patch.validity.astype(np.uint8), coords, order=0, mode="constant", cval=0)
    validity = (validity > 0) & inside

    new_box = rotate_box_corners(box, angle_deg, (center, center))
    x0 = max(new_box.x, 0.0)
    y0 = max(new_box.y, 0.0)
    x1 = min(new_box.x + new_box.w, float(size))
    y1 = min(new_box.y + new_box.h, float(size))
    if x1 <= x0 or y1 <= y0:
        # rotated label would leave the patch entirely; skip the transform
        return patch, box
    return Patch(out, validity, patch.to_image), BBox(x0, y0, x1 - x0, y1 - y0)


def rotate(patch: Patch, box: BBox, p: float, max_deg: float, rng) -> tuple[Patch, BBox]:
    """Rotate about the patch center by a uniform angle in [-max_deg, max_deg].

    The box becomes the enclosing box of its rotated corners, clipped to
    the patch; exposed corners are mean-filled and marked invalid.
    """
    if not _gated(p, rng):
        return patch, box
    angle = rng.uniform(-max_deg, max_deg)
    return _rotate_patch(patch, box, angle)


def apply_gda(
    template: Patch,
    template_box: BBox,
    search: Patch,
    search_box: BBox,
    cfg: GdaConfig,
    rng,
) -> tuple[Patch, BBox, Patch, BBox]:
    """Apply the full stack to a training pair.

    Grayscale, flip and brightness use one draw per pair so both patches
    stay photometrically and geometrically consistent; blur and rotation
    perturb the search patch only.
    """
    if _gated(cfg.p_gray, rng):
        template = grayscale(template, 1.0, rng)
        search = grayscale(search, 1.0, rng)
    if _gated(cfg.p_flip, rng):
        template, template_box = horizontal_flip(template, template_box, 1.0, rng)
        search, search_box = horizontal_flip(search, search_box, 1.0, rng)
    if _gated(cfg.p_brightness, rng):
        factor = rng.uniform(1.0 - cfg.brightness_magnitude, 1.0 + cfg.brightness_magnitude)
        template = _scale_brightness(template, factor)
        search = _scale_brightness(search, factor)
    if _gated(cfg.p_blur, rng):
        sigma = rng.uniform(cfg.blur_sigma_range[0], cfg.blur_sigma_range[1])
        search = _blur_patch(search, sigma)
    if _gated(cfg.p_rotate, rng):
        angle = rng.uniform(-cfg.rotate_max_deg, cfg.rotate_max_deg)
        search, search_box = _rotate_patch(search, search_box, angle)
    return template, template_box, search, search_box
