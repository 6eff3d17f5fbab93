"""Deterministic augmentation engine for visual-tracking training data.

Core pieces: square search/template crop geometry, an optimized random
cropper with a dynamic search radius and boundary-sample simulation, the
general augmentation stack (grayscale/flip/brightness/blur/rotation),
token-level feature mixing with image-level baselines, seeded dataset
sampling, and distribution-level analysis reports.
"""

from trackaug.analysis import (
    Histogram,
    MixStatsReport,
    StatsReport,
    SweepReport,
    run_crop_stats,
    run_jitter_sweep,
    run_mix_stats,
    synthetic_targets,
)
from trackaug.config import (
    ConfigError,
    DatasetSpec,
    PipelineConfig,
    load_config,
    open_pipeline,
)
from trackaug.cropping import (
    AugPolicy,
    CropOutcome,
    LegacyCropConfig,
    MixMetadata,
    Pipeline,
    TrainingPair,
    build_training_pair,
    legacy_sample,
    orc_sample,
    template_crop,
)
from trackaug.datasets import (
    Dataset,
    DatasetError,
    ImageDataset,
    RngStream,
    SamplePair,
    SequenceDataset,
    draw_pair,
    epoch_schedule,
    load_frame,
    load_image_dataset,
    load_sequence_dataset,
    rng_for,
    subset_fraction,
)
from trackaug.gda import GdaConfig, apply_gda, blur, brightness_jitter, grayscale, horizontal_flip, rotate
from trackaug.geometry import (
    BBox,
    CropWindow,
    EmptyCropError,
    InfeasibleBoundaryError,
    JitterParams,
    Patch,
    PatchTransform,
    Point,
    center_crop,
    extract_patch,
    jitter,
    map_box_to_image,
    map_box_to_patch,
    practical_min_gamma,
    shift_to_boundary,
    transform_for,
)
from trackaug.mixing import (
    EmptyObjectError,
    FootprintTooLargeError,
    MixOutcome,
    NoDistractorError,
    TfmixConfig,
    TokenGrid,
    TokenMask,
    TokenProjection,
    TokenStats,
    cutmix_bbox,
    normalize_transfer,
    object_token_mask,
    paste_mask,
    select_distractor,
    tfmix,
    token_image_mix,
    token_stats,
    tokenize,
    untokenize,
)

__version__ = "0.1.0"
