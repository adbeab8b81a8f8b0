"""Time one localisation per radius. The FFT path keeps this nearly flat."""

from covcal import NCCFrontEnd, PerturbSpec, SurfaceSpec, plan_samples, synthetic_pair
from covcal.evaluation import time_localize

pair = synthetic_pair(SurfaceSpec(seed=9), PerturbSpec(noise_sigma=0.05, seed=9))
for r in (4, 8, 16, 32, 48):
    centers = plan_samples(pair, r, 20, 9, "validation").centers
    t = time_localize(pair.reference, pair.query, r, NCCFrontEnd(), centers, repeats=3)
    print(f"radius {r:2d}: {t * 1e3:.2f} ms")
