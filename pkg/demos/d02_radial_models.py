"""
Radial functions of the boundary models
=======================================

Compare the worst-case ``|b_n|`` of the open, cardioid, rigid and dual
sphere models over a band, and let the grid search pick the dual-sphere
radius ratio.
"""
import numpy as np

from sphmic import (
    DualSphere,
    OpenCardioid,
    OpenPressure,
    RigidSphere,
    min_abs_bn,
    optimal_dual_alpha,
)

N = 3
kr = np.linspace(0.5, 4.0, 400)

models = {
    "open": OpenPressure(),
    "cardioid": OpenCardioid(),
    "rigid": RigidSphere(1.0),
    "dual 0.7": DualSphere(0.7),
}
print("min |b_n| / 4pi for n = 0..%d over kr in [0.5, 4]" % N)
for name, model in models.items():
    m = min_abs_bn(model, N, kr, r=1.0) / (4 * np.pi)
    print(f"{name:>9}: " + "  ".join(f"{v:.3e}" for v in m))

# the open sphere has a zero in the band, the others stay away from zero
alpha, alphas, scores = optimal_dual_alpha(N, kr)
print(f"best dual-sphere ratio on this band: {alpha:.3f} "
      f"(worst |b_n| {scores.max():.3e})")
