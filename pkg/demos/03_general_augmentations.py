"""The probability-gated photometric/geometric stack, one frame at a time.

Applies each transform unconditionally to the same patch and writes a
film strip so the effects are easy to eyeball: original, grayscale,
flipped (box reflected), brightened, blurred, rotated (box re-enclosed).
"""

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from trackaug import BBox, center_crop, extract_patch, map_box_to_patch
from trackaug.gda import blur, brightness_jitter, grayscale, horizontal_flip, rotate

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(11)
frame = rng.integers(30, 110, (240, 320, 3), dtype=np.uint8)
target = BBox(130, 90, 60, 44)
frame[90:134, 130:190] = (210, 160, 40)
frame[100:124, 140:180] = (60, 170, 200)

crop = center_crop(target, 2.5)
patch = extract_patch(frame, crop, 128)
box = map_box_to_patch(target, crop, 128)

stages = [("original", patch, box)]
stages.append(("gray", grayscale(patch, 1.0, rng), box))
fp, fb = horizontal_flip(patch, box, 1.0, rng)
stages.append(("flip", fp, fb))
stages.append(("bright", brightness_jitter(patch, 1.0, 0.35, rng), box))
stages.append(("blur", blur(patch, 1.0, (1.8, 1.8), rng), box))
rp, rb = rotate(patch, box, 1.0, 25.0, rng)
stages.append(("rotate", rp, rb))

strip = Image.new("RGB", (len(stages) * 128, 140), (15, 15, 15))
for i, (name, p, b) in enumerate(stages):
    tile = Image.fromarray(p.pixels)
    draw = ImageDraw.Draw(tile)
    draw.rectangle([b.x, b.y, b.x + b.w, b.y + b.h], outline=(255, 0, 0), width=1)
    strip.paste(tile, (i * 128, 0))
    ImageDraw.Draw(strip).text((i * 128 + 4, 129), name, fill=(255, 255, 0))
strip.save(OUT / "gda_strip.png")
print(f"wrote {OUT / 'gda_strip.png'}")
print("flip reflected the box x:", fb.as_tuple())
print("rotate re-enclosed the box:", tuple(round(v, 1) for v in rb.as_tuple()))
