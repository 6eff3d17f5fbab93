"""Square crop geometry: centered windows, the practical minimum radius
factor, and boundary shifting.

Draws one synthetic scene and overlays three windows on it:
  green  - centered crop at gamma 4
  cyan   - crop centered on a jittered box, with gamma raised to the
           practical minimum so the true center stays in view
  orange - the same crop shifted so the target pokes out of one edge
"""

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from trackaug import (
    BBox,
    JitterParams,
    center_crop,
    jitter,
    practical_min_gamma,
    shift_to_boundary,
)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(7)

# a 480x360 scene with a 48x36 target
scene = rng.integers(20, 90, (360, 480, 3), dtype=np.uint8)
target = BBox(200, 150, 48, 36)
scene[150:186, 200:248] = (220, 180, 60)

# 1. plain centered crop: side = gamma * sqrt(w*h)
plain = center_crop(target, 4.0)
print(f"centered crop at gamma=4: side={plain.side:.1f}, box={plain.box.as_tuple()}")

# 2. jitter the target, then ask for the smallest gamma that keeps the
# true center inside a window centered on the jittered box
b_jit = jitter(target, JitterParams(shift_factor=3.0, scale_factor=0.25), rng)
floor = practical_min_gamma(target, b_jit, gamma_min=2.0)
informative = center_crop(b_jit, floor)
print(f"jittered center offset: ({b_jit.cx - target.cx:+.1f}, {b_jit.cy - target.cy:+.1f})")
print(f"practical minimum gamma: {floor:.2f} "
      f"-> window side {informative.side:.1f}, true center inside: "
      f"{informative.box.contains_point(target.cx, target.cy)}")

# 3. boundary sample: shift a centered window until the target crosses an
# edge, keeping at least 30% of it visible
boundary = shift_to_boundary(center_crop(target, 3.0), target, "left", v_min=0.3, rng=rng)
visible = target.intersection_area(boundary.box) / target.area
print(f"boundary shift left: visible fraction {visible:.2f}")

img = Image.fromarray(scene)
draw = ImageDraw.Draw(img)
for window, color in ((plain, (0, 220, 0)), (informative, (0, 200, 220)), (boundary, (255, 140, 0))):
    b = window.box
    draw.rectangle([b.x, b.y, b.x + b.w, b.y + b.h], outline=color, width=2)
draw.rectangle([target.x, target.y, target.x + target.w, target.y + target.h],
               outline=(255, 0, 0), width=2)
img.save(OUT / "crop_geometry.png")
print(f"wrote {OUT / 'crop_geometry.png'}")
