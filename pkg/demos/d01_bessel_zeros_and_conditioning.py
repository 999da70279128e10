"""
Conditioning of B near Bessel zeros
===================================

An open sphere of pressure microphones loses order ``n`` whenever ``kr``
hits a zero of ``j_n``. Here we sweep ``kr`` for a 32-microphone array and
watch the condition number of B blow up at ``kr = pi`` (first zero of
``j_0``), then repeat for a rigid sphere, which has no such zeros.
"""
import numpy as np

from sphmic import ArrayGeometry, OpenPressure, RigidSphere, condition_numbers
from sphmic.sampling import fibonacci_sphere

r = 0.1
N = 4
s = fibonacci_sphere(32)
open_array = ArrayGeometry.on_sphere(r, s.theta, s.phi, OpenPressure())
rigid_array = ArrayGeometry.on_sphere(r, s.theta, s.phi, RigidSphere(r))

# kr grid that lands exactly on pi
kr = np.sort(np.append(np.linspace(0.5, 5.0, 19), np.pi))
k = kr / r

cond_open = condition_numbers(open_array, N, k)
cond_rigid = condition_numbers(rigid_array, N, k)

print(f"{'kr':>6} {'open':>12} {'rigid':>10}")
for x, a, b in zip(kr, cond_open, cond_rigid):
    print(f"{x:6.3f} {a:12.4g} {b:10.4g}")

# inf means the rank test tripped: order 0 vanished at kr = pi
print("open sphere at kr=pi:", cond_open[np.argmin(abs(kr - np.pi))])
