"""Training-loop bindings over the trackaug augmentation pipeline.

A handle wraps a validated pipeline config; next_batch materializes any
(epoch, index) range as contiguous numpy buffers whose pixel content is
byte-identical to what the trackaug CLI writes for the same coordinates.

Buffer layout (version 1), for a batch of N samples:

    search          uint8   (N, S, S, 3)   C-order, RGB
    template        uint8   (N, T, T, 3)   C-order, RGB
    search_boxes    float32 (N, 4)         x, y, w, h in search-patch coords
    template_boxes  float32 (N, 4)         x, y, w, h in template-patch coords
    gamma           float32 (N,)           realized search radius factor
    kind            uint8   (N,)           0 normal, 1 boundary, 2 legacy, 3 template
    retries         int32   (N,)           rejected jitter draws before acceptance
    mixed           bool    (N,)           token mixing applied
    occluded_fraction float32 (N,)         -1 when unmixed
    distractor_ids  list[str | None]       provenance of mixed-in objects

Handles hold no mutable state; next_batch is reentrant and identical
coordinates always return identical content regardless of call order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from trackaug.config import open_pipeline as _open
from trackaug.cropping import Pipeline

__all__ = ["BATCH_LAYOUT_VERSION", "KIND_CODES", "Batch", "PipelineHandle", "open_pipeline", "next_batch"]

BATCH_LAYOUT_VERSION = 1

KIND_CODES = {"normal": 0, "boundary": 1, "legacy": 2, "template": 3}


@dataclass(frozen=True)
class PipelineHandle:
    """Opaque reference to a loaded, validated pipeline."""

    pipeline: Pipeline

    @property
    def epochs(self) -> int:
        return self.pipeline.epochs

    @property
    def samples_per_epoch(self) -> int:
        return self.pipeline.samples_per_epoch


@dataclass(frozen=True)
class Batch:
    layout_version: int
    epoch: int
    start_index: int
    search: np.ndarray
    template: np.ndarray
    search_boxes: np.ndarray
    template_boxes: np.ndarray
    gamma: np.ndarray
    kind: np.ndarray
    retries: np.ndarray
    mixed: np.ndarray
    occluded_fraction: np.ndarray
    distractor_ids: list

    def __len__(self) -> int:
        return self.search.shape[0]


def open_pipeline(config_path) -> PipelineHandle:
    """Load and validate a pipeline config exactly as the CLI does.

    Config and dataset problems raise the same ConfigError/DatasetError
    diagnostics the CLI prints.
    """
    return PipelineHandle(pipeline=_open(config_path))


def next_batch(handle: PipelineHandle, epoch: int, start_index: int, count: int) -> Batch:
    """Materialize `count` consecutive samples of one epoch as buffers."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    pipe = handle.pipeline
    if not (0 <= epoch < pipe.epochs):
        raise IndexError(f"epoch {epoch} out of range [0, {pipe.epochs})")
    if not (0 <= start_index and start_index + count <= pipe.samples_per_epoch):
        raise IndexError(
            f"index range [{start_index}, {start_index + count}) exceeds "
            f"samples_per_epoch {pipe.samples_per_epoch}"
        )

    s_size = pipe.policy.search_out_size
    t_size = pipe.policy.template_out_size
    search = np.empty((count, s_size, s_size, 3), dtype=np.uint8)
    template = np.empty((count, t_size, t_size, 3), dtype=np.uint8)
    search_boxes = np.empty((count, 4), dtype=np.float32)
    template_boxes = np.empty((count, 4), dtype=np.float32)
    gamma = np.empty(count, dtype=np.float32)
    kind = np.empty(count, dtype=np.uint8)
    retries = np.empty(count, dtype=np.int32)
    mixed = np.empty(count, dtype=bool)
    occluded = np.full(count, -1.0, dtype=np.float32)
    distractor_ids = []

    for k in range(count):
        pair = pipe.pair(epoch, start_index + k)
        search[k] = pair.search.pixels
        template[k] = pair.template.pixels
        search_boxes[k] = [pair.search_box.x, pair.search_box.y, pair.search_box.w, pair.search_box.h]
        template_boxes[k] = [pair.template_box.x, pair.template_box.y,
                             pair.template_box.w, pair.template_box.h]
        gamma[k] = pair.gamma
        kind[k] = KIND_CODES[pair.kind]
        retries[k] = pair.retries_used
        mixed[k] = pair.mix.applied
        if pair.mix.applied:
            occluded[k] = pair.mix.occluded_fraction
        distractor_ids.append(pair.mix.distractor_id)

    return Batch(
        layout_version=BATCH_LAYOUT_VERSION,
        epoch=epoch,
        start_index=start_index,
        search=search,
        template=template,
        search_boxes=search_boxes,
        template_boxes=template_boxes,
        gamma=gamma,
        kind=kind,
        retries=retries,
        mixed=mixed,
        occluded_fraction=occluded,
        distractor_ids=distractor_ids,
    )
