"""Distribution-level diagnostics for the cropping and mixing strategies.

Monte-Carlo sweeps over synthetic targets quantify how often a cropper
loses the target, how the realized radius factor and target scale are
distributed, and whether token mixing preserves the target statistics it
promises. Reports are deterministic in (config, n, seed) and exportable
as structured text plus comma-separated tables.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from trackaug.cropping import AugPolicy, LegacyCropConfig, legacy_sample, orc_sample
from trackaug.datasets import rng_for
from trackaug.geometry import BBox, JitterParams
from trackaug.mixing import TfmixConfig, TokenGrid, TokenMask, tfmix, token_stats

__all__ = [
    "Histogram",
    "StatsReport",
    "SweepReport",
    "MixStatsReport",
    "run_crop_stats",
    "run_jitter_sweep",
    "run_mix_stats",
    "synthetic_targets",
]

FRAME_W, FRAME_H = 1920, 1080


@dataclass(frozen=True)
class Histogram:
    """Fixed-range histogram; out-of-range values land in the end bins."""

    edges: np.ndarray
    mass: np.ndarray

    @classmethod
    def from_samples(cls, values, lo: float, hi: float, bins: int) -> "Histogram":
        values = np.asarray(values, dtype=np.float64)
        edges = np.linspace(lo, hi, bins + 1)
        if values.size == 0:
            return cls(edges=edges, mass=np.zeros(bins))
        clipped = np.clip(values, lo, np.nextafter(hi, lo))
        counts, _ = np.histogram(clipped, bins=edges)
        return cls(edges=edges, mass=counts / values.size)

    @property
    def support(self) -> tuple[float, float]:
        nz = np.nonzero(self.mass > 0)[0]
        if nz.size == 0:
            return (math.nan, math.nan)
        return (float(self.edges[nz[0]]), float(self.edges[nz[-1] + 1]))


@dataclass(frozen=True)
class MixResiduals:
    max_mean_residual: float
    max_std_residual: float
    fallback_rate: float
    max_accepted_occl: float
    occl_histogram: Histogram


@dataclass(frozen=True)
class StatsReport:
    n_samples: int
    uninformative_rate: float
    boundary_rate: float
    gamma_histogram: Histogram
    target_scale_histogram: Histogram
    center_offset_histogram: Histogram
    gamma_variance: float
    target_scale_support: tuple[float, float]
    mix_residuals: Optional[MixResiduals] = None

    def lines(self) -> list[str]:
        out = [
            f"n_samples: {self.n_samples}",
            f"uninformative_rate: {self.uninformative_rate:.6f}",
            f"boundary_rate: {self.boundary_rate:.6f}",
            f"gamma_variance: {self.gamma_variance:.6f}",
            f"target_scale_support: [{self.target_scale_support[0]:.6f}, {self.target_scale_support[1]:.6f}]",
        ]
        return out


CropConfig = Union[AugPolicy, LegacyCropConfig]


def synthetic_targets(n: int, rng) -> list[BBox]:
    """Boxes with aspect in [1/3, 3] and area in [0.1%, 10%] of a 1080p frame."""
    area = FRAME_W * FRAME_H * 10 ** rng.uniform(-3, -1, n)
    aspect = np.exp(rng.uniform(math.log(1 / 3), math.log(3), n))
    w = np.sqrt(area * aspect)
    h = np.sqrt(area / aspect)
    cx = rng.uniform(w / 2, FRAME_W - w / 2)
    cy = rng.uniform(h / 2, FRAME_H - h / 2)
    return [BBox(cx[i] - w[i] / 2, cy[i] - h[i] / 2, w[i], h[i]) for i in range(n)]


def run_crop_stats(config: CropConfig, n: int, seed: int,
                   targets: Optional[list[BBox]] = None) -> StatsReport:
    """Monte-Carlo crop statistics over synthetic (or provided) targets.

    A sample counts as uninformative when the target center falls outside
    the window and the crop was not a deliberate boundary sample.
    """
    gen_rng = rng_for(seed, "_analysis", 0, 0, "targets").generator()
    if targets is None:
        targets = synthetic_targets(n, gen_rng)
    else:
        targets = [targets[i % len(targets)] for i in range(n)]

    gammas = np.empty(n)
    scales = np.empty(n)
    offsets = np.empty(n)
    uninformative = 0
    boundary = 0
    for i in range(n):
        rng = rng_for(seed, "_analysis", 0, i, "crop").generator()
        t = targets[i]
        if isinstance(config, AugPolicy):
            out = orc_sample(t, config, rng)
        else:
            out = legacy_sample(t, config.gamma_fix, config.jitter, rng)
        win = out.window.box
        side = out.window.side
        gammas[i] = out.gamma
        scales[i] = math.sqrt(t.w * t.h) / side
        offsets[i] = max(abs(t.cx - win.cx), abs(t.cy - win.cy)) / side
        if out.kind == "boundary":
            boundary += 1
        elif not win.contains_point(t.cx, t.cy):
            uninformative += 1

    return StatsReport(
        n_samples=n,
        uninformative_rate=uninformative / n,
        boundary_rate=boundary / n,
        gamma_histogram=Histogram.from_samples(gammas, 0.0, 10.0, 50),
        target_scale_histogram=Histogram.from_samples(scales, 0.0, 1.0, 50),
        center_offset_histogram=Histogram.from_samples(offsets, 0.0, 1.0, 50),
        gamma_variance=float(np.var(gammas)),
        target_scale_support=(float(scales.min()), float(scales.max())),
    )


@dataclass(frozen=True)
class SweepReport:
    shift_values: tuple[float, ...]
    scale_values: tuple[float, ...]
    cropper: str
    cells: list[tuple[float, float, StatsReport]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("cropper,shift,scale,n,uninformative_rate,boundary_rate,"
                  "gamma_variance,scale_support_lo,scale_support_hi\n")
        for shift, scale, rep in self.cells:
            lo, hi = rep.target_scale_support
            buf.write(f"{self.cropper},{shift},{scale},{rep.n_samples},"
                      f"{rep.uninformative_rate:.6f},{rep.boundary_rate:.6f},"
                      f"{rep.gamma_variance:.6f},{lo:.6f},{hi:.6f}\n")
        return buf.getvalue()


DEFAULT_SHIFTS = (2.0, 3.0, 4.0, 5.0)
DEFAULT_SCALES = (0.15, 0.25, 0.35, 0.45)


def run_jitter_sweep(shift_values, scale_values, config: CropConfig, n: int, seed: int) -> SweepReport:
    """Grid of crop-stat reports over jitter shift x scale magnitudes."""
    cells = []
    for si, shift in enumerate(shift_values):
        for ci, scale in enumerate(scale_values):
            params = JitterParams(float(shift), float(scale))
            cfg = replace(config, jitter=params)
            rep = run_crop_stats(cfg, n, seed + 7919 * (si * len(scale_values) + ci))
            cells.append((float(shift), float(scale), rep))
    return SweepReport(
        shift_values=tuple(float(s) for s in shift_values),
        scale_values=tuple(float(s) for s in scale_values),
        cropper="orc" if isinstance(config, AugPolicy) else "legacy",
        cells=cells,
    )


@dataclass(frozen=True)
class MixStatsReport:
    n_samples: int
    residuals: MixResiduals

    def lines(self) -> list[str]:
        r = self.residuals
        return [
            f"n_samples: {self.n_samples}",
            f"max_mean_residual: {r.max_mean_residual:.3e}",
            f"max_std_residual: {r.max_std_residual:.3e}",
            f"fallback_rate: {r.fallback_rate:.6f}",
        ]


def run_mix_stats(cfg: TfmixConfig, n: int, seed: int) -> MixStatsReport:
    """Verify moment matching over n randomized token mixes.

    Residuals are relative errors of the replaced set's mean/std against
    the search object's stats; the occlusion histogram covers accepted and
    fallback placements alike.
    """
    max_mean = 0.0
    max_std = 0.0
    fallbacks = 0
    max_accepted = 0.0
    occl = np.empty(n)
    for i in range(n):
        rng = rng_for(seed, "_analysis", 0, i, "mix").generator()
        rows = int(rng.integers(4, 13))
        cols = int(rng.integers(4, 13))
        dim = int(rng.integers(3, 20))
        search = TokenGrid(values=rng.normal(10, 5, (rows, cols, dim)), patch_size=1)
        distractor = TokenGrid(values=rng.normal(-2, 3, (rows, cols, dim)), patch_size=1)
        s_bits = np.zeros((rows, cols), dtype=bool)
        s_bits[: int(rng.integers(1, rows)), : int(rng.integers(1, cols))] = True
        d_bits = np.zeros((rows, cols), dtype=bool)
        d_bits[: int(rng.integers(1, rows // 2 + 1)), : int(rng.integers(1, cols // 2 + 1))] = True
        out = tfmix(search, TokenMask(s_bits), distractor, TokenMask(d_bits), cfg, rng)
        moved = token_stats(out.grid, out.replaced)
        denom_m = max(1.0, abs(out.stats_target.mean))
        denom_s = max(1.0, out.stats_target.std)
        max_mean = max(max_mean, abs(moved.mean - out.stats_target.mean) / denom_m)
        max_std = max(max_std, abs(moved.std - out.stats_target.std) / denom_s)
        fallbacks += out.fallback
        if not out.fallback:
            max_accepted = max(max_accepted, out.occluded_fraction)
        occl[i] = out.occluded_fraction
    return MixStatsReport(
        n_samples=n,
        residuals=MixResiduals(
            max_mean_residual=max_mean,
            max_std_residual=max_std,
            fallback_rate=fallbacks / n,
            max_accepted_occl=max_accepted,
            occl_histogram=Histogram.from_samples(occl, 0.0, 1.0, 20),
        ),
    )
