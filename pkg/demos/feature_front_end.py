"""The same calibration loop with the keypoint sub-patch front end."""

from covcal import CalibrationConfig, PerturbSpec, SurfaceSpec, calibrate, synthetic_pair

pair = synthetic_pair(SurfaceSpec(width=300, height=300, seed=11, texture_scale=4),
                      PerturbSpec(noise_sigma=0.05, seed=11))
cfg = CalibrationConfig(radii=(20, 40, 60), n_samples=40, ovl_threshold=0.0225, match_tol=10,
                        rng_seed=11, front_end={"name": "feature", "subpatch_size": 40, "stride": 20})
out = calibrate(pair, cfg, workers=4)
for r, o in out.curve.points:
    print(f"radius {r:3d}  OVL {o:.4f}")
print("selected", out.selected_radius, "dropped", out.dropped_radii)
