"""Box and crop geometry for search/template patch sampling.

Everything here is pure arithmetic on axis-aligned boxes: centered square
crops parameterized by a search radius factor, box jittering, the minimum
radius factor that keeps a jittered crop informative, boundary shifting,
and the affine mapping between image and patch coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

__all__ = [
    "BBox",
    "Point",
    "JitterParams",
    "CropWindow",
    "PatchTransform",
    "Patch",
    "EmptyCropError",
    "InfeasibleBoundaryError",
    "DIRECTIONS",
    "center_crop",
    "jitter",
    "practical_min_gamma",
    "shift_to_boundary",
    "extract_patch",
    "transform_for",
    "map_box_to_patch",
    "map_box_to_image",
]

DIRECTIONS = ("top", "bottom", "left", "right")


class EmptyCropError(ValueError):
    """Crop window has no overlap with the image."""


class InfeasibleBoundaryError(ValueError):
    """No boundary shift satisfies the visibility constraints."""


def _check_finite(name, *values):
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True, slots=True)
class BBox:
    """Axis-aligned box in image pixel coordinates (may extend off-image)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        _check_finite("BBox", self.x, self.y, self.w, self.h)
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"BBox requires w > 0 and h > 0, got {self.w}x{self.h}")

    @property
    def cx(self) -> float:
        return self.x + self.w / 2

    @property
    def cy(self) -> float:
        return self.y + self.h / 2

    @property
    def center(self) -> "Point":
        return Point(self.cx, self.cy)

    @property
    def area(self) -> float:
        return self.w * self.h

    def contains_point(self, px: float, py: float) -> bool:
        """Closed containment test."""
        return self.x <= px <= self.x + self.w and self.y <= py <= self.y + self.h

    def intersection_area(self, other: "BBox") -> float:
        iw = min(self.x + self.w, other.x + other.w) - max(self.x, other.x)
        ih = min(self.y + self.h, other.y + other.h) - max(self.y, other.y)
        if iw <= 0 or ih <= 0:
            return 0.0
        return iw * ih

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True, slots=True)
class Point:
    cx: float
    cy: float

    def __post_init__(self):
        _check_finite("Point", self.cx, self.cy)


@dataclass(frozen=True, slots=True)
class JitterParams:
    """Magnitudes of random center shift and log-scale perturbation."""

    shift_factor: float = 0.0
    scale_factor: float = 0.0

    def __post_init__(self):
        _check_finite("JitterParams", self.shift_factor, self.scale_factor)
        if self.shift_factor < 0 or self.scale_factor < 0:
            raise ValueError("jitter factors must be non-negative")


CROP_KINDS = ("normal", "boundary", "legacy", "template")


@dataclass(frozen=True, slots=True)
class CropWindow:
    """Square crop with the search radius factor that produced it."""

    box: BBox
    gamma: float
    kind: str = "normal"

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")
        if abs(self.box.w - self.box.h) > 1e-6 * self.box.w:
            raise ValueError(f"crop window must be square, got {self.box.w}x{self.box.h}")
        if self.kind not in CROP_KINDS:
            raise ValueError(f"unknown crop kind {self.kind!r}")

    @property
    def side(self) -> float:
        return self.box.w


@dataclass(frozen=True, slots=True)
class PatchTransform:
    """Affine map from patch pixel coordinates to image coordinates:
    image = patch * scale + offset."""

    scale: float
    offset: Point

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class Patch:
    """Resampled square crop: RGB pixels, per-pixel validity, and the
    patch-to-image transform."""

    pixels: np.ndarray      # (S, S, 3) uint8
    validity: np.ndarray    # (S, S) bool, False where the sample fell off-image
    to_image: PatchTransform

    @property
    def out_size(self) -> int:
        return self.pixels.shape[0]


def center_crop(b: BBox, gamma: float) -> CropWindow:
    """Square window of side gamma * sqrt(w*h) centered on the box."""
    if not (math.isfinite(gamma) and gamma > 0):
        raise ValueError(f"gamma must be positive and finite, got {gamma}")
    side = gamma * math.sqrt(b.w * b.h)
    return CropWindow(
        box=BBox(b.cx - side / 2, b.cy - side / 2, side, side),
        gamma=gamma,
        kind="normal",
    )


def jitter(b: BBox, params: JitterParams, rng) -> BBox:
    """Randomly rescale a box (log-uniform per axis) and shift its center.

    The shift is uniform in [-shift, shift] per axis, in units of the
    jittered sqrt-area, so displacement magnitude tracks the jittered box.
    Zero magnitudes return the input box exactly.
    """
    su = rng.uniform(-params.scale_factor, params.scale_factor, size=2)
    w = b.w * math.exp(su[0])
    h = b.h * math.exp(su[1])
    du = rng.uniform(-params.shift_factor, params.shift_factor, size=2)
    s = math.sqrt(w * h)
    # written so the all-zero draw reproduces b bit-exactly
    return BBox(b.x + du[0] * s - (w - b.w) / 2, b.y + du[1] * s - (h - b.h) / 2, w, h)


def practical_min_gamma(b_gt: BBox, b_jit: BBox, gamma_min: float) -> float:
    """Smallest radius factor keeping the true center inside a crop
    centered on the jittered box.

    Uses the larger per-axis center displacement: a square crop of side
    gamma * sqrt(w_jit * h_jit) contains the true center iff its half-side
    covers that displacement on both axes.
    """
    if not (math.isfinite(gamma_min) and gamma_min > 0):
        raise ValueError(f"gamma_min must be positive, got {gamma_min}")
    d = max(abs(b_gt.cx - b_jit.cx), abs(b_gt.cy - b_jit.cy))
    return max(2.0 * d / math.sqrt(b_jit.w * b_jit.h), gamma_min)


def _sample_cut_edge(t0, t1, side, v_min, high_edge, rng):
    """Draw the position of the crop edge that will cut the target span.

    For the crop's low edge the feasible interval is (max(t0, t1-side),
    t1 - v_min*extent]; for the high edge it mirrors to
    [t0 + v_min*extent, min(t1, t0+side)). Both keep the visible span
    fraction in [v_min, 1) and the target's far edge inside the crop.
    """
    extent = t1 - t0
    if high_edge:
        lo = t0 + v_min * extent
        hi = min(t1, t0 + side)
    else:
        lo = max(t0, t1 - side)
        hi = t1 - v_min * extent
    if hi <= lo:
        return None
    u = rng.random()  # in [0, 1); u = 0 lands on the v_min endpoint
    if high_edge:
        return lo + u * (hi - lo)
    return hi - u * (hi - lo)


def shift_to_boundary(crop: CropWindow, target: BBox, direction: str, v_min: float, rng) -> CropWindow:
    """Shift a crop along one axis so the target crosses the named edge.

    After the shift the target is partially outside the window through
    exactly the requested edge, with visible area fraction in [v_min, 1).
    The shift magnitude is uniform over the feasible interval.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if not (0 < v_min < 1):
        raise ValueError(f"v_min must be in (0, 1), got {v_min}")
    if not crop.box.contains_point(target.cx, target.cy):
        raise ValueError("target center must start inside the crop")

    cb = crop.box
    side = crop.side
    high_edge = direction in ("right", "bottom")
    if direction in ("left", "right"):
        # perpendicular axis must fully contain the target, else the
        # target would cross more than the requested edge
        if not (cb.y <= target.y and target.y + target.h <= cb.y + side):
            raise InfeasibleBoundaryError("target not contained along the perpendicular axis")
        edge = _sample_cut_edge(target.x, target.x + target.w, side, v_min, high_edge, rng)
    else:
        if not (cb.x <= target.x and target.x + target.w <= cb.x + side):
            raise InfeasibleBoundaryError("target not contained along the perpendicular axis")
        edge = _sample_cut_edge(target.y, target.y + target.h, side, v_min, high_edge, rng)
    if edge is None:
        raise InfeasibleBoundaryError(
            f"no {direction} shift keeps the visible fraction above {v_min}"
        )

    if direction == "left":
        new = BBox(edge, cb.y, side, side)
    elif direction == "right":
        new = BBox(edge - side, cb.y, side, side)
    elif direction == "top":
        new = BBox(cb.x, edge, side, side)
    else:  # bottom
        new = BBox(cb.x, edge - side, side, side)
    return CropWindow(box=new, gamma=crop.gamma, kind="boundary")


def transform_for(crop: CropWindow, out_size: int) -> PatchTransform:
    """Patch-to-image transform of a crop resampled to out_size."""
    return PatchTransform(scale=crop.side / out_size, offset=Point(crop.box.x, crop.box.y))


def extract_patch(image: np.ndarray, crop: CropWindow, out_size: int) -> Patch:
    """Bilinearly resample a crop window to a square patch.

    Output pixel centers map to image coordinates through the patch
    transform. Samples falling outside the image are filled with the
    per-channel mean of the crop's in-image region and flagged invalid.
    """
    if image.ndim != 3 or image.shape[2] != 3 or image.size == 0:
        raise ValueError(f"image must be non-empty HxWx3, got shape {image.shape}")
    if out_size < 16:
        raise ValueError(f"out_size must be >= 16, got {out_size}")
    ih, iw = image.shape[:2]
    cb = crop.box
    r0 = max(0, math.floor(cb.y))
    r1 = min(ih, math.ceil(cb.y + cb.h))
    c0 = max(0, math.floor(cb.x))
    c1 = min(iw, math.ceil(cb.x + cb.w))
    if r0 >= r1 or c0 >= c1:
        raise EmptyCropError(f"crop {cb.as_tuple()} lies entirely outside a {iw}x{ih} image")
    fill = image[r0:r1, c0:c1].reshape(-1, 3).mean(axis=0)

    tf = transform_for(crop, out_size)
    xs = cb.x + (np.arange(out_size) + 0.5) * tf.scale
    ys = cb.y + (np.arange(out_size) + 0.5) * tf.scale
    valid = ((ys >= 0) & (ys < ih))[:, None] & ((xs >= 0) & (xs < iw))[None, :]

    # sample at pixel centers; edge-replicate for in-image samples whose
    # bilinear support crosses the border
    rows = np.broadcast_to((ys - 0.5)[:, None], (out_size, out_size))
    cols = np.broadcast_to((xs - 0.5)[None, :], (out_size, out_size))
    coords = np.stack([rows, cols])
    out = np.empty((out_size, out_size, 3), dtype=np.uint8)
    for ch in range(3):
        sampled = map_coordinates(image[:, :, ch].astype(np.float64), coords, order=1, mode="nearest")
        sampled[~valid] = fill[ch]
        out[:, :, ch] = np.clip(np.rint(sampled), 0, 255).astype(np.uint8)
    return Patch(pixels=out, validity=valid, to_image=tf)


def map_box_to_patch(b: BBox, crop: CropWindow, out_size: int) -> BBox:
    """Express an image-coordinate box in patch coordinates (not clipped)."""
    tf = transform_for(crop, out_size)
    return BBox(
        (b.x - tf.offset.cx) / tf.scale,
        (b.y - tf.offset.cy) / tf.scale,
        b.w / tf.scale,
        b.h / tf.scale,
    )


def map_box_to_image(b: BBox, transform: PatchTransform) -> BBox:
    """Inverse of map_box_to_patch: patch coordinates back to the image."""
    return BBox(
        b.x * transform.scale + transform.offset.cx,
        b.y * transform.scale + transform.offset.cy,
        b.w * transform.scale,
        b.h * transform.scale,
    )
