"""Calibrate and validate a patch radius on one synthetic pair with NCC."""

from covcal import CalibrationConfig, EvalConfig, PerturbSpec, SurfaceSpec, calibrate, evaluate, synthetic_pair

pair = synthetic_pair(SurfaceSpec(width=192, height=192, seed=3), PerturbSpec(noise_sigma=0.05, seed=3))
cfg = CalibrationConfig(radii=(2, 4, 6, 8, 12, 16, 24), n_samples=100, rng_seed=3)
out = calibrate(pair, cfg)

print("radius  OVL")
for r, o in out.curve.points:
    print(f"{r:6d}  {o:.4f}")
print(f"selected radius {out.selected_radius:.2f} (rounded {out.rounded_radius})")

rep = evaluate(pair, out, EvalConfig(m_samples=300))
print(rep.to_csv())
print(f"p_g = {rep.p_g}, M at selection = {rep.m_at_selected:.2f}")
