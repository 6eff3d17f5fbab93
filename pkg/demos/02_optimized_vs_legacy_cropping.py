"""Why the dynamic radius factor matters.

The legacy cropper jitters the target and crops at a fixed factor; once
the shift magnitude outgrows the factor, crops start losing the target.
The optimized cropper rejects such jitters instead and redraws, so its
loss rate is zero at any shift while its realized factor (and hence the
target's apparent scale) stays diverse.
"""

from trackaug import AugPolicy, GdaConfig, JitterParams, LegacyCropConfig, TfmixConfig
from trackaug.analysis import run_crop_stats

N = 20_000
SEED = 3


def orc(shift, scale):
    return AugPolicy(
        jitter=JitterParams(shift, scale),
        gda=GdaConfig(p_gray=0, p_flip=0, p_brightness=0, p_blur=0, p_rotate=0),
        tfmix=TfmixConfig(enabled=False),
    )


print(f"{'shift':>5} | {'legacy loss':>11} | {'orc loss':>8} | {'legacy var(g)':>13} | {'orc var(g)':>10}")
print("-" * 62)
for shift in (2.0, 3.0, 4.0, 5.0):
    legacy = run_crop_stats(LegacyCropConfig(4.0, JitterParams(shift, 0.25)), N, SEED)
    dyn = run_crop_stats(orc(shift, 0.25), N, SEED)
    print(f"{shift:>5.1f} | {legacy.uninformative_rate:>11.4f} | {dyn.uninformative_rate:>8.4f}"
          f" | {legacy.gamma_variance:>13.4f} | {dyn.gamma_variance:>10.4f}")

# at shift 5 against a fixed factor of 4, roughly 84% of legacy crops no
# longer contain the target center: 1 - (4/10)^2
print("\nanalytic legacy loss at shift 5: 1 - (4/10)^2 = 0.84")
