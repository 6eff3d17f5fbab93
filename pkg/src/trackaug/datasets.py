"""Dataset ingestion, pair drawing, subsetting and deterministic RNG streams.

Two source layouts are supported: COCO-style image annotations (one object
per annotation; template and search come from the same image) and
sequence directories (ordered frames plus a groundtruth file; template and
search are two frames of one sequence). Every random decision flows
through counter-based streams keyed by (seed, dataset, epoch, index,
stage), so output is a pure function of those coordinates.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from trackaug.geometry import BBox

__all__ = [
    "SamplePair",
    "RngStream",
    "DatasetError",
    "Dataset",
    "ImageDataset",
    "SequenceDataset",
    "ScheduleFlags",
    "load_image_dataset",
    "load_sequence_dataset",
    "load_frame",
    "subset_fraction",
    "draw_pair",
    "epoch_schedule",
    "rng_for",
]


class DatasetError(ValueError):
    """Malformed or structurally inconsistent dataset input."""


@dataclass(frozen=True, slots=True)
class SamplePair:
    """Template/search frame pair with annotations and provenance.

    sequence_id identifies the sampled object: the sequence name for video
    data, the annotation id for image data.
    """

    template_frame: str
    template_box: BBox
    search_frame: str
    search_box: BBox
    category: Optional[str]
    dataset_id: str
    sequence_id: str
    frame_indices: tuple[int, int]


@dataclass(frozen=True, slots=True)
class RngStream:
    """Counter-based random stream addressed by a (seed, path) pair.

    Identical coordinates always reproduce the same draw sequence;
    changing any coordinate (including the stage tag) yields a
    statistically independent stream.
    """

    seed: int
    path: tuple

    def generator(self) -> np.random.Generator:
        token = "\x1f".join(str(p) for p in (self.seed, *self.path)).encode()
        key = int.from_bytes(hashlib.sha256(token).digest()[:16], "little")
        return np.random.Generator(np.random.Philox(key=key))


def rng_for(seed: int, dataset_id: str, epoch: int, index: int, stage: str) -> RngStream:
    return RngStream(seed=seed, path=(dataset_id, epoch, index, stage))


@dataclass(frozen=True, slots=True)
class ScheduleFlags:
    tfmix_active: bool


def epoch_schedule(epoch: int, cfg) -> ScheduleFlags:
    """Cadence flags for an epoch.

    Token mixing fires once per epoch_period; with offset 0 the active
    epochs are period-1, 2*period-1, ... An offset shifts the phase, e.g.
    offset 1 selects epochs 0, period, 2*period, ...
    """
    if epoch < 0:
        raise ValueError(f"epoch must be non-negative, got {epoch}")
    if not getattr(cfg, "enabled", True):
        return ScheduleFlags(tfmix_active=False)
    period = cfg.epoch_period
    offset = getattr(cfg, "epoch_offset", 0)
    return ScheduleFlags(tfmix_active=(epoch % period) == (period - 1 + offset) % period)


# --- object records -------------------------------------------------------

@dataclass(frozen=True, slots=True)
class _ImageObject:
    object_id: str
    image_path: str
    box: BBox
    category: Optional[str]


@dataclass(frozen=True, slots=True)
class _Sequence:
    name: str
    frame_paths: tuple[str, ...]
    boxes: tuple[BBox, ...]
    category: Optional[str]


class Dataset:
    """Common interface over image- and sequence-style sources."""

    dataset_id: str

    def object_ids(self) -> list[str]:
        raise NotImplementedError

    def category_of(self, object_id: str) -> Optional[str]:
        raise NotImplementedError

    def sample_for_object(self, object_id: str, rng) -> SamplePair:
        raise NotImplementedError

    def __len__(self) -> int:
        return len(self.object_ids())


class ImageDataset(Dataset):
    def __init__(self, dataset_id: str, objects: list[_ImageObject]):
        self.dataset_id = dataset_id
        self.objects = list(objects)
        self._by_id = {o.object_id: o for o in self.objects}
        self.by_category: dict[Optional[str], list[str]] = {}
        for o in self.objects:
            self.by_category.setdefault(o.category, []).append(o.object_id)

    def object_ids(self) -> list[str]:
        return [o.object_id for o in self.objects]

    def category_of(self, object_id: str) -> Optional[str]:
        return self._by_id[object_id].category

    def sample_for_object(self, object_id: str, rng) -> SamplePair:
        o = self._by_id[object_id]
        return SamplePair(
            template_frame=o.image_path,
            template_box=o.box,
            search_frame=o.image_path,
            search_box=o.box,
            category=o.category,
            dataset_id=self.dataset_id,
            sequence_id=o.object_id,
            frame_indices=(0, 0),
        )


class SequenceDataset(Dataset):
    def __init__(self, dataset_id: str, sequences: list[_Sequence]):
        self.dataset_id = dataset_id
        self.sequences = list(sequences)
        self._by_name = {s.name: s for s in self.sequences}
        self.by_category: dict[Optional[str], list[str]] = {}
        for s in self.sequences:
            self.by_category.setdefault(s.category, []).append(s.name)

    def object_ids(self) -> list[str]:
        return [s.name for s in self.sequences]

    def category_of(self, object_id: str) -> Optional[str]:
        return self._by_name[object_id].category

    def sample_for_object(self, object_id: str, rng, max_frame_gap: int = 200) -> SamplePair:
        s = self._by_name[object_id]
        n = len(s.frame_paths)
        t = int(rng.integers(n))
        lo = max(0, t - max_frame_gap)
        hi = min(n - 1, t + max_frame_gap)
        q = lo + int(rng.integers(hi - lo + 1))
        return SamplePair(
            template_frame=s.frame_paths[t],
            template_box=s.boxes[t],
            search_frame=s.frame_paths[q],
            search_box=s.boxes[q],
            category=s.category,
            dataset_id=self.dataset_id,
            sequence_id=s.name,
            frame_indices=(t, q),
        )


# --- loading --------------------------------------------------------------

def _require(mapping, key, kind, where):
    if key not in mapping:
        raise DatasetError(f"{where}: missing field {key!r}")
    value = mapping[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise DatasetError(f"{where}: field {key!r} must be a number, got {type(value).__name__}")
        return float(value)
    if not isinstance(value, kind):
        raise DatasetError(f"{where}: field {key!r} must be {kind.__name__}, got {type(value).__name__}")
    return value


def load_image_dataset(annotation_path, dataset_id: Optional[str] = None,
                       images_root=None) -> ImageDataset:
    """Load COCO-style annotations: images, annotations with [x,y,w,h]
    bboxes, and categories. Image files resolve lazily at access time."""
    path = Path(annotation_path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DatasetError(f"{path}: cannot parse annotations: {e}") from e
    if not isinstance(raw, dict):
        raise DatasetError(f"{path}: top level must be an object")
    root = Path(images_root) if images_root is not None else path.parent
    did = dataset_id if dataset_id is not None else path.stem

    images = {}
    for i, img in enumerate(raw.get("images", [])):
        where = f"{path}: images[{i}]"
        img_id = _require(img, "id", int, where)
        file_name = _require(img, "file_name", str, where)
        images[img_id] = str(root / file_name)

    categories = {}
    for i, cat in enumerate(raw.get("categories", [])):
        where = f"{path}: categories[{i}]"
        categories[_require(cat, "id", int, where)] = _require(cat, "name", str, where)

    objects = []
    for i, ann in enumerate(raw.get("annotations", [])):
        where = f"{path}: annotations[{i}]"
        ann_id = _require(ann, "id", int, where)
        image_id = _require(ann, "image_id", int, where)
        bbox = _require(ann, "bbox", list, where)
        if len(bbox) != 4 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in bbox):
            raise DatasetError(f"{where}: field 'bbox' must be four numbers")
        if image_id not in images:
            raise DatasetError(f"{where}: field 'image_id' references unknown image {image_id}")
        category = None
        if "category_id" in ann:
            cat_id = _require(ann, "category_id", int, where)
            category = categories.get(cat_id, str(cat_id))
        try:
            box = BBox(*[float(v) for v in bbox])
        except ValueError as e:
            raise DatasetError(f"{where}: field 'bbox' invalid: {e}") from e
        objects.append(_ImageObject(
            object_id=f"ann{ann_id}", image_path=images[image_id], box=box, category=category,
        ))
    return ImageDataset(did, objects)


_FRAME_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def load_sequence_dataset(root, dataset_id: Optional[str] = None) -> SequenceDataset:
    """Load a directory of sequences, each holding ordered frame images,
    a groundtruth.txt of comma-separated x,y,w,h lines (one per frame) and
    an optional meta.txt with a 'category: name' line."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"{root}: not a directory")
    did = dataset_id if dataset_id is not None else root.name
    sequences = []
    for seq_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        gt = seq_dir / "groundtruth.txt"
        if not gt.is_file():
            raise DatasetError(f"sequence {seq_dir.name}: missing groundtruth.txt")
        boxes = []
        for ln, line in enumerate(gt.read_text().splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise DatasetError(
                    f"sequence {seq_dir.name}: groundtruth.txt line {ln}: expected x,y,w,h"
                )
            try:
                boxes.append(BBox(*[float(p) for p in parts]))
            except ValueError as e:
                raise DatasetError(
                    f"sequence {seq_dir.name}: groundtruth.txt line {ln}: {e}"
                ) from e
        frames = sorted(
            str(p) for p in seq_dir.iterdir() if p.suffix.lower() in _FRAME_SUFFIXES
        )
        if len(frames) != len(boxes):
            raise DatasetError(
                f"sequence {seq_dir.name}: {len(frames)} frames but {len(boxes)} groundtruth lines"
            )
        if not frames:
            raise DatasetError(f"sequence {seq_dir.name}: no frames")
        category = None
        meta = seq_dir / "meta.txt"
        if meta.is_file():
            for line in meta.read_text().splitlines():
                if ":" in line:
                    k, v = line.split(":", 1)
                    if k.strip() == "category":
                        category = v.strip()
        sequences.append(_Sequence(
            name=seq_dir.name, frame_paths=tuple(frames), boxes=tuple(boxes), category=category,
        ))
    return SequenceDataset(did, sequences)


def load_frame(path) -> np.ndarray:
    """Read an image file as an RGB uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def subset_fraction(dataset: Dataset, fraction: float, seed: int) -> Dataset:
    """Deterministic subset of ceil(fraction * N) objects, original order kept.

    Sequence datasets subset by sequence, image datasets by image.
    """
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    if isinstance(dataset, SequenceDataset):
        n = len(dataset.sequences)
        k = math.ceil(fraction * n)
        keep = np.sort(rng.permutation(n)[:k])
        return SequenceDataset(dataset.dataset_id, [dataset.sequences[i] for i in keep])
    if isinstance(dataset, ImageDataset):
        paths = sorted({o.image_path for o in dataset.objects})
        k = math.ceil(fraction * len(paths))
        keep = {paths[i] for i in np.sort(rng.permutation(len(paths))[:k])}
        return ImageDataset(dataset.dataset_id, [o for o in dataset.objects if o.image_path in keep])
    raise TypeError(f"unsupported dataset type {type(dataset).__name__}")


def draw_pair(dataset: Dataset, rng, max_frame_gap: int = 200) -> SamplePair:
    """Draw a template/search pair: a random object, then (for sequences)
    two frames at most max_frame_gap indices apart."""
    ids = dataset.object_ids()
    if not ids:
        raise DatasetError(f"dataset {dataset.dataset_id!r} is empty")
    obj = ids[int(rng.integers(len(ids)))]
    if isinstance(dataset, SequenceDataset):
        return dataset.sample_for_object(obj, rng, max_frame_gap=max_frame_gap)
    return dataset.sample_for_object(obj, rng)
