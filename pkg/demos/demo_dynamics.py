"""Tour of the plant model: equilibria, wheel momentum, free response.

Run:  python3 demos/demo_dynamics.py
"""

import numpy as np

from rwdesat.dynamics import (
    SpacecraftParams,
    eom_rhs,
    equilibrium,
    propagate_zoh,
    rw_momentum,
    wheel_axes,
)

p = SpacecraftParams()
print("spacecraft:", p)
print(f"orbit period: {p.orbit_period:.1f} s  |  wheel accel bound: {p.u_max} rad/s^2")

# The wheel pyramid, row per wheel, in body coordinates.
print("\nwheel spin axes:")
print(np.array_str(wheel_axes(p), precision=4, suppress_small=True))

# Equilibria: commanded pair speeds (a, b) map to wheels (a, b, a, b) and
# the body rotating at the orbit rate. The dynamics are exactly stationary.
v = np.array([-1.0, 1.0])
x_eq = equilibrium(v, p)
print("\nequilibrium for v = (-1, 1):", np.array_str(x_eq, precision=4))
print("RHS residual:", np.max(np.abs(eom_rhs(x_eq, np.zeros(4), p))))

# Wheel momentum cancels transversally at any pair-equal speeds.
x = x_eq.copy()
x[6:10] = (30.0, -12.0, 30.0, -12.0)
print("\nwheel momentum at pair-equal speeds:", rw_momentum(x, p))

# Perturb the pitch and watch the gravity gradient push back.
x = x_eq.copy()
x[1] = 0.05  # 50 mrad pitch offset
print("\npropagating the pitch-perturbed state for half an orbit...")
t, dt = 0.0, 1.0
span = round(p.orbit_period / 12)  # whole seconds for the fixed-step integrator
for _ in range(6):
    x = propagate_zoh(x, np.zeros(4), span, dt, p)
    t += span
    print(f"  t = {t:7.0f} s: pitch = {x[1]:+.4f} rad, "
          f"pitch rate dev = {x[4] + p.n:+.2e} rad/s")
