"""Search/template cropping strategies and training-pair assembly.

Two croppers are provided. The optimized one draws the search radius
factor dynamically: non-boundary samples jitter the target, compute the
smallest factor that keeps the true center in view, and draw the factor
from that floor up to the configured ceiling, rejecting jitters whose
floor exceeds the ceiling. With a small probability the crop is instead
shifted so the target sits partially at a window edge. The legacy cropper
keeps a fixed factor and never rejects, so it can emit crops that lose
the target entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from trackaug.datasets import Dataset, SamplePair, draw_pair, epoch_schedule, load_frame as load_frame_file, rng_for
from trackaug.gda import GdaConfig, apply_gda
from trackaug.geometry import (
    BBox,
    CropWindow,
    DIRECTIONS,
    InfeasibleBoundaryError,
    JitterParams,
    Patch,
    center_crop,
    extract_patch,
    jitter,
    map_box_to_patch,
    practical_min_gamma,
    shift_to_boundary,
)
from trackaug.mixing import (
    EmptyObjectError,
    FootprintTooLargeError,
    NoDistractorError,
    TfmixConfig,
    object_token_mask,
    select_distractor,
    tfmix,
    tokenize,
    untokenize,
)

__all__ = [
    "AugPolicy",
    "LegacyCropConfig",
    "CropOutcome",
    "MixMetadata",
    "TrainingPair",
    "orc_sample",
    "legacy_sample",
    "template_crop",
    "build_training_pair",
    "Pipeline",
]


@dataclass(frozen=True, slots=True)
class AugPolicy:
    """All augmentation probabilities and magnitudes for one pipeline."""

    gamma_min: float = 2.0
    gamma_max: float = 6.0
    p_boundary: float = 0.05
    jitter: JitterParams = field(default_factory=lambda: JitterParams(3.0, 0.25))
    search_out_size: int = 256
    template_out_size: int = 128
    template_gamma: float = 2.0
    v_min: float = 0.3
    max_retries: int = 20
    gda: GdaConfig = field(default_factory=GdaConfig)
    tfmix: TfmixConfig = field(default_factory=TfmixConfig)

    def __post_init__(self):
        if not (0 < self.gamma_min <= self.gamma_max):
            raise ValueError(f"need 0 < gamma_min <= gamma_max, got [{self.gamma_min}, {self.gamma_max}]")
        if not (0.0 <= self.p_boundary <= 1.0):
            raise ValueError(f"p_boundary must be in [0, 1], got {self.p_boundary}")
        if not (0 < self.v_min < 1):
            raise ValueError(f"v_min must be in (0, 1), got {self.v_min}")
        if self.max_retries < 1:
            raise ValueError(f"max_retries must be >= 1, got {self.max_retries}")
        if self.search_out_size < 16 or self.template_out_size < 16:
            raise ValueError("patch sizes must be >= 16")
        if self.template_gamma <= 0:
            raise ValueError(f"template_gamma must be positive, got {self.template_gamma}")
        if self.tfmix.enabled and self.search_out_size % self.tfmix.patch_size != 0:
            raise ValueError(
                f"search_out_size {self.search_out_size} must be divisible by "
                f"tfmix.patch_size {self.tfmix.patch_size}"
            )


@dataclass(frozen=True, slots=True)
class LegacyCropConfig:
    """Fixed-radius cropper settings (the strategy the optimized one replaces)."""

    gamma_fix: float = 4.0
    jitter: JitterParams = field(default_factory=lambda: JitterParams(3.0, 0.25))

    def __post_init__(self):
        if self.gamma_fix <= 0:
            raise ValueError(f"gamma_fix must be positive, got {self.gamma_fix}")


@dataclass(frozen=True, slots=True)
class CropOutcome:
    window: CropWindow
    gamma: float
    kind: str
    retries_used: int = 0
    direction: Optional[str] = None
    fallback: bool = False


def orc_sample(target: BBox, policy: AugPolicy, rng) -> CropOutcome:
    """Draw one optimized crop for the target.

    Boundary branch (probability p_boundary): draw gamma from the full
    range, center on the target, then shift toward a random direction so
    the target crosses that window edge. Otherwise: jitter the target,
    compute the practical minimum gamma, and accept when it does not
    exceed gamma_max; rejected jitters are redrawn. After max_retries
    failures the crop recenters on the target with a full-range gamma.
    """
    if policy.p_boundary >= 1.0 or (policy.p_boundary > 0.0 and rng.random() < policy.p_boundary):
        for attempt in range(policy.max_retries):
            g = float(rng.uniform(policy.gamma_min, policy.gamma_max))
            direction = DIRECTIONS[int(rng.integers(4))]
            try:
                window = shift_to_boundary(center_crop(target, g), target, direction, policy.v_min, rng)
            except InfeasibleBoundaryError:
                continue
            return CropOutcome(window=window, gamma=g, kind="boundary",
                               retries_used=attempt, direction=direction)
        # no feasible boundary shift; fall through to the normal branch

    retries = 0
    for attempt in range(policy.max_retries):
        b_jit = jitter(target, policy.jitter, rng)
        g_floor = practical_min_gamma(target, b_jit, policy.gamma_min)
        if g_floor <= policy.gamma_max:
            g = float(rng.uniform(g_floor, policy.gamma_max))
            window = center_crop(b_jit, g)
            return CropOutcome(window=window, gamma=g, kind="normal", retries_used=attempt)
        retries = attempt + 1
    g = float(rng.uniform(policy.gamma_min, policy.gamma_max))
    return CropOutcome(window=center_crop(target, g), gamma=g, kind="normal",
                       retries_used=policy.max_retries, fallback=True)


def legacy_sample(target: BBox, gamma_fix: float, jitter_params: JitterParams, rng) -> CropOutcome:
    """Fixed-radius cropper: jitter, then center-crop at gamma_fix.

    No rejection happens, so large shifts can produce crops whose window
    no longer contains the target center.
    """
    b_jit = jitter(target, jitter_params, rng)
    window = center_crop(b_jit, gamma_fix)
    return CropOutcome(
        window=CropWindow(window.box, window.gamma, kind="legacy"),
        gamma=gamma_fix,
        kind="legacy",
    )


def template_crop(target: BBox, policy: AugPolicy) -> CropOutcome:
    """Deterministic centered template crop."""
    window = center_crop(target, policy.template_gamma)
    return CropOutcome(
        window=CropWindow(window.box, window.gamma, kind="template"),
        gamma=policy.template_gamma,
        kind="template",
    )


@dataclass(frozen=True, slots=True)
class MixMetadata:
    applied: bool
    reason: Optional[str] = None
    distractor_id: Optional[str] = None
    occluded_fraction: Optional[float] = None
    fallback: bool = False
    replaced_count: int = 0


@dataclass(frozen=True)
class TrainingPair:
    template: Patch
    template_box: BBox
    search: Patch
    search_box: BBox
    gamma: float
    kind: str
    retries_used: int
    direction: Optional[str]
    mix: MixMetadata
    sample: SamplePair
    epoch: int
    index: int
    seed: int


def _distractor_tokens(distractor: SamplePair, policy: AugPolicy, load_frame, rng):
    frame = load_frame(distractor.search_frame)
    window = center_crop(distractor.search_box, policy.tfmix.distractor_gamma)
    patch = extract_patch(frame, window, policy.search_out_size)
    box = map_box_to_patch(distractor.search_box, window, policy.search_out_size)
    grid = tokenize(patch, policy.tfmix.patch_size)
    mask = object_token_mask(box, grid, policy.tfmix.token_overlap_threshold)
    return grid, mask


def _apply_tfmix(search: Patch, search_box: BBox, sample: SamplePair, policy: AugPolicy,
                 dataset: Optional[Dataset], load_frame, select_rng, place_rng):
    """Mix a distractor into the search patch; reports why when skipped."""
    cfg = policy.tfmix
    if dataset is None:
        return search, MixMetadata(applied=False, reason="no-dataset")
    try:
        category = sample.category if cfg.same_category_first else None
        distractor = select_distractor(dataset, category, sample.sequence_id, select_rng)
    except NoDistractorError:
        return search, MixMetadata(applied=False, reason="no-distractor")
    grid = tokenize(search, cfg.patch_size)
    search_mask = object_token_mask(search_box, grid, cfg.token_overlap_threshold)
    if search_mask.count == 0:
        return search, MixMetadata(applied=False, reason="empty-search-object")
    d_grid, d_mask = _distractor_tokens(distractor, policy, load_frame, select_rng)
    if d_mask.count == 0:
        return search, MixMetadata(applied=False, reason="empty-distractor-object")
    try:
        out = tfmix(grid, search_mask, d_grid, d_mask, cfg, place_rng,
                    distractor_id=distractor.sequence_id)
    except (EmptyObjectError, FootprintTooLargeError) as e:
        return search, MixMetadata(applied=False, reason=type(e).__name__)
    pixels = np.clip(np.rint(untokenize(out.grid)), 0, 255).astype(np.uint8)
    mixed = Patch(pixels, search.validity, search.to_image)
    meta = MixMetadata(
        applied=True,
        distractor_id=out.distractor_id,
        occluded_fraction=out.occluded_fraction,
        fallback=out.fallback,
        replaced_count=out.replaced.count,
    )
    return mixed, meta


def build_training_pair(
    sample: SamplePair,
    policy: AugPolicy,
    epoch: int,
    index: int,
    seed: int,
    load_frame: Callable[[str], np.ndarray],
    dataset: Optional[Dataset] = None,
) -> TrainingPair:
    """Assemble one fully augmented template/search pair.

    All randomness comes from streams keyed by (seed, dataset, epoch,
    index, stage), so the output is a pure function of those coordinates.
    The distractor for token mixing is drawn from `dataset` when the epoch
    schedule enables mixing.
    """
    did = sample.dataset_id

    t_frame = load_frame(sample.template_frame)
    t_outcome = template_crop(sample.template_box, policy)
    template = extract_patch(t_frame, t_outcome.window, policy.template_out_size)
    template_box = map_box_to_patch(sample.template_box, t_outcome.window, policy.template_out_size)

    s_frame = t_frame if sample.search_frame == sample.template_frame else load_frame(sample.search_frame)
    crop_rng = rng_for(seed, did, epoch, index, "crop").generator()
    s_outcome = orc_sample(sample.search_box, policy, crop_rng)
    search = extract_patch(s_frame, s_outcome.window, policy.search_out_size)
    search_box = map_box_to_patch(sample.search_box, s_outcome.window, policy.search_out_size)

    gda_rng = rng_for(seed, did, epoch, index, "gda").generator()
    template, template_box, search, search_box = apply_gda(
        template, template_box, search, search_box, policy.gda, gda_rng)

    if policy.tfmix.enabled and epoch_schedule(epoch, policy.tfmix).tfmix_active:
        select_rng = rng_for(seed, did, epoch, index, "mix-select").generator()
        place_rng = rng_for(seed, did, epoch, index, "mix-place").generator()
        search, mix_meta = _apply_tfmix(
            search, search_box, sample, policy, dataset, load_frame, select_rng, place_rng)
    else:
        mix_meta = MixMetadata(applied=False, reason="inactive-epoch")

    return TrainingPair(
        template=template,
        template_box=template_box,
        search=search,
        search_box=search_box,
        gamma=s_outcome.gamma,
        kind=s_outcome.kind,
        retries_used=s_outcome.retries_used,
        direction=s_outcome.direction,
        mix=mix_meta,
        sample=sample,
        epoch=epoch,
        index=index,
        seed=seed,
    )


class Pipeline:
    """Deterministic sample generator over one or more datasets.

    The dataset for each (epoch, index) is drawn by configured weight,
    then a pair is drawn from it and augmented; every step derives its own
    stream from the coordinates, so samples are reproducible in isolation
    and across any worker partitioning.
    """

    def __init__(self, datasets: list[Dataset], policy: AugPolicy, seed: int,
                 samples_per_epoch: int, epochs: int,
                 weights: Optional[list[float]] = None,
                 max_frame_gap: int = 200,
                 load_frame: Optional[Callable[[str], np.ndarray]] = None):
        if not datasets:
            raise ValueError("pipeline needs at least one dataset")
        if samples_per_epoch < 1 or epochs < 1:
            raise ValueError("samples_per_epoch and epochs must be >= 1")
        if weights is None:
            weights = [1.0] * len(datasets)
        if len(weights) != len(datasets) or any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ValueError("weights must be non-negative with a positive sum")
        self.datasets = list(datasets)
        self.policy = policy
        self.seed = seed
        self.samples_per_epoch = samples_per_epoch
        self.epochs = epochs
        self.cum_weights = np.cumsum(np.asarray(weights, dtype=np.float64))
        self.cum_weights /= self.cum_weights[-1]
        self.max_frame_gap = max_frame_gap
        self.load_frame = load_frame if load_frame is not None else load_frame_file

    def _check_coords(self, epoch: int, index: int):
        if not (0 <= epoch < self.epochs):
            raise IndexError(f"epoch {epoch} out of range [0, {self.epochs})")
        if not (0 <= index < self.samples_per_epoch):
            raise IndexError(f"index {index} out of range [0, {self.samples_per_epoch})")

    def draw_sample(self, epoch: int, index: int) -> tuple[Dataset, SamplePair]:
        self._check_coords(epoch, index)
        pick_rng = rng_for(self.seed, "_pipeline", epoch, index, "pick").generator()
        ds_idx = int(np.searchsorted(self.cum_weights, pick_rng.random(), side="right"))
        ds_idx = min(ds_idx, len(self.datasets) - 1)
        dataset = self.datasets[ds_idx]
        draw_rng = rng_for(self.seed, dataset.dataset_id, epoch, index, "draw").generator()
        return dataset, draw_pair(dataset, draw_rng, max_frame_gap=self.max_frame_gap)

    def pair(self, epoch: int, index: int) -> TrainingPair:
        dataset, sample = self.draw_sample(epoch, index)
        return build_training_pair(
            sample, self.policy, epoch, index, self.seed,
            load_frame=self.load_frame, dataset=dataset)
