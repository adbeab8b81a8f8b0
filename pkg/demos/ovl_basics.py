"""Overlap between two normals: how separation and spread change OVL."""

from covcal import NormalFit, ovl_weitzman

truth = NormalFit(0.8, 0.05, 200)
print("impostor mean  OVL vs truth N(0.8, 0.05)")
for mu in (0.8, 0.6, 0.4, 0.2, 0.0):
    imp = NormalFit(mu, 0.1, 200)
    print(f"{mu:13.1f}  {ovl_weitzman(truth, imp, -1, 1):.6f}")

# identical distributions overlap completely
print("self overlap:", round(ovl_weitzman(truth, truth, 0.4, 1.2), 6))
