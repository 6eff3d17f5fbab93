"""Pipeline configuration: YAML schema, strict validation, round-tripping.

Unknown keys are rejected everywhere so typos fail loudly. Loading
materializes every default; re-serializing a loaded config is
semantically identical to the original.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from trackaug.cropping import AugPolicy, Pipeline
from trackaug.datasets import (
    Dataset,
    load_image_dataset,
    load_sequence_dataset,
    subset_fraction,
)
from trackaug.gda import GdaConfig
from trackaug.geometry import JitterParams
from trackaug.mixing import TfmixConfig

__all__ = ["ConfigError", "DatasetSpec", "PipelineConfig", "load_config", "open_pipeline"]


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


@dataclass(frozen=True, slots=True)
class DatasetSpec:
    id: str
    type: str
    path: str
    images_root: Optional[str] = None
    weight: float = 1.0
    fraction: float = 1.0
    subset_seed: int = 0

    def __post_init__(self):
        if self.type not in ("image", "sequence"):
            raise ConfigError(f"dataset {self.id!r}: type must be 'image' or 'sequence', got {self.type!r}")
        if self.weight < 0:
            raise ConfigError(f"dataset {self.id!r}: weight must be non-negative")
        if not (0.0 < self.fraction <= 1.0):
            raise ConfigError(f"dataset {self.id!r}: fraction must be in (0, 1]")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    samples_per_epoch: int
    epochs: int
    datasets: tuple[DatasetSpec, ...]
    policy: AugPolicy = field(default_factory=AugPolicy)
    max_frame_gap: int = 200

    def __post_init__(self):
        if self.samples_per_epoch < 1:
            raise ConfigError("samples_per_epoch must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not self.datasets:
            raise ConfigError("datasets must list at least one entry")
        ids = [d.id for d in self.datasets]
        if len(set(ids)) != len(ids):
            raise ConfigError("dataset ids must be unique")
        if self.max_frame_gap < 0:
            raise ConfigError("max_frame_gap must be non-negative")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "samples_per_epoch": self.samples_per_epoch,
            "epochs": self.epochs,
            "max_frame_gap": self.max_frame_gap,
            "datasets": [
                {
                    "id": d.id,
                    "type": d.type,
                    "path": d.path,
                    "images_root": d.images_root,
                    "weight": d.weight,
                    "fraction": d.fraction,
                    "subset_seed": d.subset_seed,
                }
                for d in self.datasets
            ],
            "policy": {
                "gamma_min": self.policy.gamma_min,
                "gamma_max": self.policy.gamma_max,
                "p_boundary": self.policy.p_boundary,
                "v_min": self.policy.v_min,
                "max_retries": self.policy.max_retries,
                "search_out_size": self.policy.search_out_size,
                "template_out_size": self.policy.template_out_size,
                "template_gamma": self.policy.template_gamma,
                "jitter": {
                    "shift": self.policy.jitter.shift_factor,
                    "scale": self.policy.jitter.scale_factor,
                },
                "gda": {
                    "p_gray": self.policy.gda.p_gray,
                    "p_flip": self.policy.gda.p_flip,
                    "p_brightness": self.policy.gda.p_brightness,
                    "p_blur": self.policy.gda.p_blur,
                    "p_rotate": self.policy.gda.p_rotate,
                    "brightness_magnitude": self.policy.gda.brightness_magnitude,
                    "blur_sigma_range": list(self.policy.gda.blur_sigma_range),
                    "rotate_max_deg": self.policy.gda.rotate_max_deg,
                },
                "tfmix": {
                    "enabled": self.policy.tfmix.enabled,
                    "occl_threshold": self.policy.tfmix.occl_threshold,
                    "patch_size": self.policy.tfmix.patch_size,
                    "token_overlap_threshold": self.policy.tfmix.token_overlap_threshold,
                    "same_category_first": self.policy.tfmix.same_category_first,
                    "epoch_period": self.policy.tfmix.epoch_period,
                    "epoch_offset": self.policy.tfmix.epoch_offset,
                    "max_placement_attempts": self.policy.tfmix.max_placement_attempts,
                    "distractor_gamma": self.policy.tfmix.distractor_gamma,
                },
            },
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def _take(raw: dict, where: str, known: dict):
    """Pull typed values out of a mapping, rejecting unknown keys.

    known maps key -> (type or tuple of types, required flag).
    """
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(raw).__name__}")
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"{where}: unknown key {sorted(unknown)[0]!r}")
    out = {}
    for key, (kinds, required) in known.items():
        if key not in raw:
            if required:
                raise ConfigError(f"{where}: missing required key {key!r}")
            continue
        value = raw[key]
        if kinds is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{where}.{key}: expected a number, got {type(value).__name__}")
            value = float(value)
        elif kinds is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{where}.{key}: expected an integer, got {type(value).__name__}")
        elif not isinstance(value, kinds):
            kname = kinds.__name__ if isinstance(kinds, type) else "/".join(k.__name__ for k in kinds)
            raise ConfigError(f"{where}.{key}: expected {kname}, got {type(value).__name__}")
        out[key] = value
    return out


def _parse_jitter(raw, where) -> JitterParams:
    vals = _take(raw, where, {"shift": (float, True), "scale": (float, True)})
    try:
        return JitterParams(vals["shift"], vals["scale"])
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from e


def _parse_gda(raw, where) -> GdaConfig:
    known = {
        "p_gray": (float, False), "p_flip": (float, False), "p_brightness": (float, False),
        "p_blur": (float, False), "p_rotate": (float, False),
        "brightness_magnitude": (float, False), "blur_sigma_range": (list, False),
        "rotate_max_deg": (float, False),
    }
    vals = _take(raw, where, known)
    if "blur_sigma_range" in vals:
        r = vals["blur_sigma_range"]
        if len(r) != 2 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in r):
            raise ConfigError(f"{where}.blur_sigma_range: expected [lo, hi]")
        vals["blur_sigma_range"] = (float(r[0]), float(r[1]))
    try:
        return GdaConfig(**vals)
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from e


def _parse_tfmix(raw, where) -> TfmixConfig:
    known = {
        "enabled": (bool, False), "occl_threshold": (float, False),
        "patch_size": (int, False), "token_overlap_threshold": (float, False),
        "same_category_first": (bool, False), "epoch_period": (int, False),
        "epoch_offset": (int, False), "max_placement_attempts": (int, False),
        "distractor_gamma": (float, False),
    }
    vals = _take(raw, where, known)
    try:
        return TfmixConfig(**vals)
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from e


def _parse_policy(raw, where) -> AugPolicy:
    known = {
        "gamma_min": (float, False), "gamma_max": (float, False),
        "p_boundary": (float, False), "v_min": (float, False),
        "max_retries": (int, False), "search_out_size": (int, False),
        "template_out_size": (int, False), "template_gamma": (float, False),
        "jitter": (dict, False), "gda": (dict, False), "tfmix": (dict, False),
    }
    vals = _take(raw, where, known)
    if "jitter" in vals:
        vals["jitter"] = _parse_jitter(vals["jitter"], f"{where}.jitter")
    if "gda" in vals:
        vals["gda"] = _parse_gda(vals["gda"], f"{where}.gda")
    if "tfmix" in vals:
        vals["tfmix"] = _parse_tfmix(vals["tfmix"], f"{where}.tfmix")
    try:
        return AugPolicy(**vals)
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from e


def _parse_dataset(raw, where) -> DatasetSpec:
    known = {
        "id": (str, True), "type": (str, True), "path": (str, True),
        "images_root": (str, False), "weight": (float, False),
        "fraction": (float, False), "subset_seed": (int, False),
    }
    vals = _take(raw, where, known)
    if vals.get("images_root") is None:
        vals.pop("images_root", None)
    return DatasetSpec(**vals)


def parse_config(raw: dict, where: str = "config") -> PipelineConfig:
    known = {
        "seed": (int, True), "samples_per_epoch": (int, True), "epochs": (int, True),
        "datasets": (list, True), "policy": (dict, False), "max_frame_gap": (int, False),
    }
    vals = _take(raw, where, known)
    specs = []
    for i, d in enumerate(vals["datasets"]):
        # null images_root appears when a serialized config round-trips
        if isinstance(d, dict) and d.get("images_root", "") is None:
            d = {k: v for k, v in d.items() if k != "images_root"}
        specs.append(_parse_dataset(d, f"{where}.datasets[{i}]"))
    vals["datasets"] = tuple(specs)
    if "policy" in vals:
        vals["policy"] = _parse_policy(vals["policy"], f"{where}.policy")
    return PipelineConfig(**vals)


def load_config(path, seed_override: Optional[int] = None) -> PipelineConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}") from e
    cfg = parse_config(raw, where=str(path))
    if seed_override is not None:
        raw["seed"] = seed_override
        cfg = parse_config(raw, where=str(path))
    return cfg


def _load_dataset(spec: DatasetSpec, base_dir: Path) -> Dataset:
    path = Path(spec.path)
    if not path.is_absolute():
        path = base_dir / path
    if spec.type == "image":
        root = spec.images_root
        if root is not None and not Path(root).is_absolute():
            root = str(base_dir / root)
        ds = load_image_dataset(path, dataset_id=spec.id, images_root=root)
    else:
        ds = load_sequence_dataset(path, dataset_id=spec.id)
    if spec.fraction < 1.0:
        ds = subset_fraction(ds, spec.fraction, spec.subset_seed)
    return ds


def open_pipeline(config_path, seed_override: Optional[int] = None) -> Pipeline:
    """Load, validate and bind a config to its datasets."""
    config_path = Path(config_path)
    cfg = load_config(config_path, seed_override=seed_override)
    base = config_path.parent
    datasets = [_load_dataset(spec, base) for spec in cfg.datasets]
    return Pipeline(
        datasets=datasets,
        policy=cfg.policy,
        seed=cfg.seed,
        samples_per_epoch=cfg.samples_per_epoch,
        epochs=cfg.epochs,
        weights=[spec.weight for spec in cfg.datasets],
        max_frame_gap=cfg.max_frame_gap,
    )
