"""Token-level feature mixing, step by step.

Two patches are cut into 16px token cells. The distractor's object
tokens are renormalized to the search object's token statistics (so the
transplant does not stick out photometrically) and written over a random
footprint whose overlap with the search object is capped. With the
identity projection the mixed tokens reassemble into pixels, which is
what the training pipeline ships.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from trackaug import BBox, TfmixConfig
from trackaug.mixing import object_token_mask, tfmix, token_stats, tokenize, untokenize
from trackaug.geometry import Patch, PatchTransform, Point

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(23)


def synthetic_patch(base, obj_color, obj_box, size=128):
    pixels = rng.normal(base, 12, (size, size, 3)).clip(0, 255).astype(np.uint8)
    x, y, w, h = obj_box
    pixels[y:y + h, x:x + w] = obj_color
    return Patch(pixels, np.ones((size, size), dtype=bool), PatchTransform(1.0, Point(0, 0)))


search = synthetic_patch(70, (200, 170, 60), (48, 48, 32, 32))
search_box = BBox(48, 48, 32, 32)
distractor = synthetic_patch(120, (40, 60, 190), (16, 64, 48, 32))
distractor_box = BBox(16, 64, 48, 32)

cfg = TfmixConfig(patch_size=16)
s_grid = tokenize(search, cfg.patch_size)
d_grid = tokenize(distractor, cfg.patch_size)
s_mask = object_token_mask(search_box, s_grid, cfg.token_overlap_threshold)
d_mask = object_token_mask(distractor_box, d_grid, cfg.token_overlap_threshold)
print(f"search object covers {s_mask.count} tokens, distractor {d_mask.count}")

out = tfmix(s_grid, s_mask, d_grid, d_mask, cfg, rng)
print(f"placement offset {out.offset}, occluded fraction {out.occluded_fraction:.2f} "
      f"(budget {cfg.occl_threshold})")

# the transplanted set now carries the search object's statistics
moved = token_stats(out.grid, out.replaced)
print(f"search object stats:  mean {out.stats_target.mean:7.2f}  std {out.stats_target.std:6.2f}")
print(f"transplanted stats:   mean {moved.mean:7.2f}  std {moved.std:6.2f}")

mixed = np.clip(np.rint(untokenize(out.grid)), 0, 255).astype(np.uint8)
strip = Image.new("RGB", (3 * 128 + 8, 128), (15, 15, 15))
strip.paste(Image.fromarray(search.pixels), (0, 0))
strip.paste(Image.fromarray(distractor.pixels), (132, 0))
strip.paste(Image.fromarray(mixed), (264, 0))
strip.save(OUT / "tfmix.png")
print(f"wrote {OUT / 'tfmix.png'} (search | distractor | mixed)")
