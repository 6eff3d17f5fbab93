"""Token-level feature mixing and image-level mixing baselines.

A search patch is tokenized into a grid of per-cell feature vectors; the
object tokens of a distractor patch are statistically aligned to the
search object's token distribution and written over a placed footprint,
subject to an occlusion budget on the search object. Image-level variants
(rectangle paste, mask paste, co-located cell swap) share the same
occlusion control, measured in pixel area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from trackaug.geometry import BBox, Patch

__all__ = [
    "TokenGrid",
    "TokenMask",
    "TokenStats",
    "TfmixConfig",
    "MixOutcome",
    "ImageMixOutcome",
    "TokenImageMixOutcome",
    "EmptyObjectError",
    "NoDistractorError",
    "FootprintTooLargeError",
    "TokenProjection",
    "tokenize",
    "untokenize",
    "object_token_mask",
    "token_stats",
    "normalize_transfer",
    "select_distractor",
    "tfmix",
    "cutmix_bbox",
    "paste_mask",
    "token_image_mix",
]

DEGENERATE_STD = 1e-8


class EmptyObjectError(ValueError):
    """An operation that needs object tokens received an empty mask."""


class NoDistractorError(LookupError):
    """The dataset holds no object other than the query."""


class FootprintTooLargeError(ValueError):
    """The distractor footprint cannot fit inside the target grid."""


@dataclass(frozen=True)
class TokenGrid:
    """Grid of per-cell feature vectors cut from a square patch."""

    values: np.ndarray  # (rows, cols, dim) float64
    patch_size: int

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.size == 0:
            raise ValueError(f"token values must be non-empty (rows, cols, dim), got {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise ValueError("token values must be finite")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class TokenMask:
    """Boolean membership grid paired with a TokenGrid."""

    bits: np.ndarray  # (rows, cols) bool

    def __post_init__(self):
        if self.bits.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {self.bits.shape}")

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def cols(self) -> int:
        return self.bits.shape[1]

    @property
    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True, slots=True)
class TokenStats:
    """Scalar mean and population std over all elements of a token set."""

    mean: float
    std: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.std)) or self.std < 0:
            raise ValueError(f"invalid token stats ({self.mean}, {self.std})")


@dataclass(frozen=True, slots=True)
class TfmixConfig:
    enabled: bool = True
    occl_threshold: float = 0.5
    patch_size: int = 16
    token_overlap_threshold: float = 0.5
    same_category_first: bool = True
    epoch_period: int = 11
    epoch_offset: int = 0
    max_placement_attempts: int = 10
    distractor_gamma: float = 2.0
    fixed_position: bool = False  # keep tokens at the distractor's own grid coordinates

    def __post_init__(self):
        if not (0.0 < self.occl_threshold <= 1.0):
            raise ValueError(f"occl_threshold must be in (0, 1], got {self.occl_threshold}")
        if not (0.0 < self.token_overlap_threshold <= 1.0):
            raise ValueError(f"token_overlap_threshold must be in (0, 1], got {self.token_overlap_threshold}")
        if self.epoch_period < 1:
            raise ValueError(f"epoch_period must be >= 1, got {self.epoch_period}")
        if self.patch_size < 1:
            raise ValueError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.max_placement_attempts < 1:
            raise ValueError(f"max_placement_attempts must be >= 1, got {self.max_placement_attempts}")
        if self.distractor_gamma <= 0:
            raise ValueError(f"distractor_gamma must be positive, got {self.distractor_gamma}")


@dataclass(frozen=True)
class MixOutcome:
    grid: TokenGrid
    replaced: TokenMask
    occluded_fraction: float
    distractor_id: Optional[str]
    stats_source: TokenStats  # distractor object tokens
    stats_target: TokenStats  # search object tokens
    fallback: bool
    offset: tuple[int, int]


@dataclass(frozen=True)
class ImageMixOutcome:
    patch: Patch
    region: tuple[int, int, int, int]  # pasted x, y, w, h in patch pixels
    occluded_fraction: float
    fallback: bool
    pasted_count: int


@dataclass(frozen=True)
class TokenImageMixOutcome:
    patch: Patch
    replaced: np.ndarray  # (rows, cols) bool
    ratio: float


class TokenProjection:
    """Seeded dense linear map applied to flattened cell pixels."""

    def __init__(self, dim_in: int, dim_out: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.matrix = rng.normal(0.0, 1.0 / math.sqrt(dim_in), size=(dim_in, dim_out))

    def __call__(self, flat: np.ndarray) -> np.ndarray:
        return flat @ self.matrix


def _pixels_of(patch) -> np.ndarray:
    return patch.pixels if isinstance(patch, Patch) else np.asarray(patch)


def tokenize(patch, patch_size: int, projection=None) -> TokenGrid:
    """Cut a square patch into cells and flatten each one raster-order.

    Without a projection each token is the raw RGB of its cell
    (dim = 3 * patch_size**2); a projection maps that vector to an
    arbitrary feature dimension.
    """
    pixels = _pixels_of(patch)
    size = pixels.shape[0]
    if size % patch_size != 0:
        raise ValueError(f"patch size {size} not divisible by token size {patch_size}")
    n = size // patch_size
    flat = (
        pixels.astype(np.float64)
        .reshape(n, patch_size, n, patch_size, 3)
        .transpose(0, 2, 1, 3, 4)
        .reshape(n, n, -1)
    )
    if projection is not None:
        flat = projection(flat)
    return TokenGrid(values=flat, patch_size=patch_size)


def untokenize(grid: TokenGrid) -> np.ndarray:
    """Reassemble identity-projection tokens into float pixels."""
    if grid.dim != 3 * grid.patch_size ** 2:
        raise ValueError("only identity-projection grids can be reassembled")
    ps = grid.patch_size
    return (
        grid.values.reshape(grid.rows, grid.cols, ps, ps, 3)
        .transpose(0, 2, 1, 3, 4)
        .reshape(grid.rows * ps, grid.cols * ps, 3)
    )


def object_token_mask(box_in_patch: BBox, grid: TokenGrid, overlap_threshold: float) -> TokenMask:
    """Mark the cells the box covers by at least overlap_threshold of their area."""
    ps = grid.patch_size
    cell_area = float(ps * ps)
    r = np.arange(grid.rows)[:, None]
    c = np.arange(grid.cols)[None, :]
    ih = np.minimum((r + 1) * ps, box_in_patch.y + box_in_patch.h) - np.maximum(r * ps, box_in_patch.y)
    iw = np.minimum((c + 1) * ps, box_in_patch.x + box_in_patch.w) - np.maximum(c * ps, box_in_patch.x)
    overlap = np.clip(ih, 0, None) * np.clip(iw, 0, None) / cell_area
    return TokenMask(bits=overlap >= overlap_threshold)


def token_stats(grid: TokenGrid, mask: TokenMask) -> TokenStats:
    """Scalar mean and population std over every element of the masked tokens."""
    if mask.count == 0:
        raise EmptyObjectError("token mask selects no tokens")
    sel = grid.values[mask.bits]
    return TokenStats(mean=float(sel.mean()), std=float(sel.std()))


def normalize_transfer(tokens: np.ndarray, stats_d: TokenStats, stats_s: TokenStats) -> np.ndarray:
    """Align token values from the distractor's distribution to the search's.

    Each element maps as (x - mean_d) / std_d * std_s + mean_s. A source
    std below the degeneracy floor collapses every element to mean_s.
    """
    if stats_d.std < DEGENERATE_STD:
        return np.full_like(np.asarray(tokens, dtype=np.float64), stats_s.mean)
    return (np.asarray(tokens, dtype=np.float64) - stats_d.mean) / stats_d.std * stats_s.std + stats_s.mean


def select_distractor(index, category, exclude_id, rng):
    """Pick a distractor object, preferring the query's own category.

    `index` is a dataset handle exposing object_ids(), category_of(obj_id)
    and sample_for_object(obj_id, rng). Falls back to any other object
    when the category has no other member.
    """
    others = [o for o in index.object_ids() if o != exclude_id]
    if not others:
        raise NoDistractorError("dataset holds no object besides the query")
    if category is not None:
        same = [o for o in others if index.category_of(o) == category]
        if same:
            others = same
    choice = others[int(rng.integers(len(others)))]
    return index.sample_for_object(choice, rng)


def _mask_bounds(bits: np.ndarray) -> tuple[int, int, int, int]:
    rows = np.nonzero(bits.any(axis=1))[0]
    cols = np.nonzero(bits.any(axis=0))[0]
    return int(rows[0]), int(rows[-1]), int(cols[0]), int(cols[-1])


def tfmix(
    search: TokenGrid,
    search_obj: TokenMask,
    distractor: TokenGrid,
    distractor_obj: TokenMask,
    cfg: TfmixConfig,
    rng,
    distractor_id: Optional[str] = None,
) -> MixOutcome:
    """Transfer the distractor's object tokens into the search grid.

    The distractor footprint is dropped at a uniform in-bounds grid offset;
    placements occluding more than occl_threshold of the search object are
    redrawn, falling back to the minimum-overlap attempt. Transferred
    tokens are renormalized to the search object's token statistics.
    """
    if search.dim != distractor.dim or search.patch_size != distractor.patch_size:
        raise ValueError("search and distractor grids must share dim and patch_size")
    if search_obj.count == 0 or distractor_obj.count == 0:
        raise EmptyObjectError("object masks must be non-empty")
    r0, r1, c0, c1 = _mask_bounds(distractor_obj.bits)
    fh, fw = r1 - r0 + 1, c1 - c0 + 1
    if fh > search.rows or fw > search.cols:
        raise FootprintTooLargeError(
            f"distractor footprint {fh}x{fw} exceeds grid {search.rows}x{search.cols}"
        )

    stats_d = token_stats(distractor, distractor_obj)
    stats_s = token_stats(search, search_obj)

    obj_count = search_obj.count
    rows, cols = np.nonzero(distractor_obj.bits)

    def place(dr, dc):
        placed = np.zeros_like(search_obj.bits)
        placed[rows + dr, cols + dc] = True
        return float((placed & search_obj.bits).sum()) / obj_count, placed

    if cfg.fixed_position:
        # tokens stay at the distractor's own grid coordinates; there is
        # no alternative placement, so a budget overrun is only flagged
        if r1 >= search.rows or c1 >= search.cols:
            raise FootprintTooLargeError(
                "fixed-position footprint falls outside the search grid")
        overlap, placed = place(0, 0)
        fallback = overlap > cfg.occl_threshold
        dr = dc = 0
    else:
        best = None
        accepted = None
        for _ in range(cfg.max_placement_attempts):
            dr = int(rng.integers(-r0, search.rows - 1 - r1 + 1))
            dc = int(rng.integers(-c0, search.cols - 1 - c1 + 1))
            overlap, placed = place(dr, dc)
            if best is None or overlap < best[0]:
                best = (overlap, dr, dc, placed)
            if overlap <= cfg.occl_threshold:
                accepted = (overlap, dr, dc, placed)
                break
        fallback = accepted is None
        overlap, dr, dc, placed = best if fallback else accepted

    values = search.values.copy()
    src = distractor.values[distractor_obj.bits]
    values[placed] = normalize_transfer(src, stats_d, stats_s)
    return MixOutcome(
        grid=TokenGrid(values=values, patch_size=search.patch_size),
        replaced=TokenMask(bits=placed),
        occluded_fraction=overlap,
        distractor_id=distractor_id,
        stats_source=stats_d,
        stats_target=stats_s,
        fallback=fallback,
        offset=(dr, dc),
    )


def _place_rect(area_w, area_h, rect_w, rect_h, target: BBox, occl_threshold, max_attempts, rng):
    """Uniform in-bounds placement of a w x h rectangle under the occlusion budget."""
    if rect_w > area_w or rect_h > area_h:
        raise FootprintTooLargeError(f"paste region {rect_w}x{rect_h} exceeds patch {area_w}x{area_h}")
    best = None
    for _ in range(max_attempts):
        x = int(rng.integers(0, area_w - rect_w + 1))
        y = int(rng.integers(0, area_h - rect_h + 1))
        overlap = BBox(x, y, max(rect_w, 1e-9), max(rect_h, 1e-9)).intersection_area(target) / target.area
        if best is None or overlap < best[0]:
            best = (overlap, x, y)
        if overlap <= occl_threshold:
            return overlap, x, y, False
    return best[0], best[1], best[2], True


def cutmix_bbox(
    search: Patch,
    search_box: BBox,
    distractor: Patch,
    distractor_box: BBox,
    rng,
    occl_threshold: float = 0.5,
    max_attempts: int = 10,
) -> ImageMixOutcome:
    """Paste the distractor's box rectangle (1:1, no resampling) at a random spot."""
    size = search.out_size
    dx0 = max(0, int(round(distractor_box.x)))
    dy0 = max(0, int(round(distractor_box.y)))
    dx1 = min(distractor.out_size, int(round(distractor_box.x + distractor_box.w)))
    dy1 = min(distractor.out_size, int(round(distractor_box.y + distractor_box.h)))
    if dx1 <= dx0 or dy1 <= dy0:
        raise ValueError("distractor box lies outside its patch")
    rect = distractor.pixels[dy0:dy1, dx0:dx1]
    rh, rw = rect.shape[:2]
    overlap, x, y, fallback = _place_rect(size, size, rw, rh, search_box, occl_threshold, max_attempts, rng)
    pixels = search.pixels.copy()
    pixels[y:y + rh, x:x + rw] = rect
    return ImageMixOutcome(
        patch=Patch(pixels, search.validity, search.to_image),
        region=(x, y, rw, rh),
        occluded_fraction=overlap,
        fallback=fallback,
        pasted_count=rw * rh,
    )


def paste_mask(
    search: Patch,
    search_box: BBox,
    distractor: Patch,
    distractor_mask: np.ndarray,
    rng,
    occl_threshold: float = 0.5,
    max_attempts: int = 10,
) -> ImageMixOutcome:
    """Paste only the mask-true distractor pixels (the object, no context)."""
    if distractor_mask.shape != distractor.pixels.shape[:2]:
        raise ValueError("mask shape must match the distractor patch")
    if not distractor_mask.any():
        return ImageMixOutcome(
            patch=Patch(search.pixels.copy(), search.validity, search.to_image),
            region=(0, 0, 0, 0),
            occluded_fraction=0.0,
            fallback=False,
            pasted_count=0,
        )
    ys, xs = np.nonzero(distractor_mask)
    y0, y1, x0, x1 = ys.min(), ys.max(), xs.min(), xs.max()
    sub_mask = distractor_mask[y0:y1 + 1, x0:x1 + 1]
    sub_pix = distractor.pixels[y0:y1 + 1, x0:x1 + 1]
    rh, rw = sub_mask.shape
    size = search.out_size

    # occlusion measured on actually-written pixels inside the target box
    tx0, ty0 = search_box.x, search_box.y
    tx1, ty1 = search_box.x + search_box.w, search_box.y + search_box.h
    best = None
    accepted = None
    for _ in range(max_attempts):
        if rw > size or rh > size:
            raise FootprintTooLargeError(f"mask footprint {rw}x{rh} exceeds patch {size}x{size}")
        x = int(rng.integers(0, size - rw + 1))
        y = int(rng.integers(0, size - rh + 1))
        yy, xx = np.nonzero(sub_mask)
        py, px = yy + y, xx + x
        covered = ((px + 0.5 >= tx0) & (px + 0.5 < tx1) & (py + 0.5 >= ty0) & (py + 0.5 < ty1)).sum()
        overlap = float(covered) / search_box.area
        if best is None or overlap < best[0]:
            best = (overlap, x, y)
        if overlap <= occl_threshold:
            accepted = (overlap, x, y)
            break
    fallback = accepted is None
    overlap, x, y = best if fallback else accepted
    pixels = search.pixels.copy()
    region = pixels[y:y + rh, x:x + rw]
    region[sub_mask] = sub_pix[sub_mask]
    return ImageMixOutcome(
        patch=Patch(pixels, search.validity, search.to_image),
        region=(x, y, rw, rh),
        occluded_fraction=overlap,
        fallback=fallback,
        pasted_count=int(sub_mask.sum()),
    )


def token_image_mix(
    search: Patch,
    distractor: Patch,
    patch_size: int,
    rng,
    ratio_range: tuple[float, float] = (0.3, 0.5),
) -> TokenImageMixOutcome:
    """Swap a random 30-50% of co-located grid cells with the distractor's."""
    size = search.out_size
    if distractor.out_size != size:
        raise ValueError("search and distractor patches must share out_size")
    if size % patch_size != 0:
        raise ValueError(f"patch size {size} not divisible by cell size {patch_size}")
    n = size // patch_size
    total = n * n
    ratio = float(rng.uniform(ratio_range[0], ratio_range[1]))
    k = int(round(ratio * total))
    chosen = rng.permutation(total)[:k]
    replaced = np.zeros(total, dtype=bool)
    replaced[chosen] = True
    replaced = replaced.reshape(n, n)

    pixels = search.pixels.copy()
    for r, c in zip(*np.nonzero(replaced)):
        sl = (slice(r * patch_size, (r + 1) * patch_size), slice(c * patch_size, (c + 1) * patch_size))
        pixels[sl] = distractor.pixels[sl]
    return TokenImageMixOutcome(
        patch=Patch(pixels, search.validity, search.to_image),
        replaced=replaced,
        ratio=ratio,
    )
