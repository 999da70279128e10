"""
Beamformer designs
==================

Regular (plane-wave decomposition), Dolph-Chebyshev and null-constrained
designs, all in the spherical harmonics domain, plus steering by rotation.
"""
import numpy as np

from sphmic import (
    Direction,
    EulerAngles,
    beam_pattern,
    directivity_index,
    dolph_chebyshev_weights,
    null_constrained_weights,
    pattern_value,
    regular_weights,
    steer_weights,
)

N = 4
pole = Direction(0.0, 0.0)

w_reg = regular_weights(N, pole)
print(f"regular N={N}: peak {pattern_value(w_reg, pole).real:.4f} "
      f"= (N+1)^2/4pi, DI {directivity_index(w_reg):.2f} dB")

# -30 dB equiripple sidelobes
w_dc = dolph_chebyshev_weights(N, pole, 10 ** (30 / 20))
th = np.linspace(0, np.pi, 2001)
bp = beam_pattern(w_dc, th, np.zeros_like(th))
db = 20 * np.log10(np.abs(bp.values) / np.abs(bp.values).max())
print(f"dolph N={N}: DI {directivity_index(w_dc):.2f} dB, "
      f"pattern at 90 deg {db[1000]:.1f} dB")

# put two exact nulls into the Dolph design
nulls = [Direction(1.3, 0.0), Direction(2.2, 1.5)]
w_null = null_constrained_weights(w_dc, nulls)
for d in nulls:
    print(f"null at ({d.theta:.2f}, {d.phi:.2f}): |pattern| = {abs(pattern_value(w_null, d)):.1e}")

# steer the Dolph beam to theta=60deg, phi=45deg
look = Direction(np.pi / 3, np.pi / 4)
w_st = steer_weights(w_dc, EulerAngles(look.phi, look.theta, 0.0))
print(f"steered peak {abs(pattern_value(w_st, look)):.4f} "
      f"vs original {abs(pattern_value(w_dc, pole)):.4f}")
