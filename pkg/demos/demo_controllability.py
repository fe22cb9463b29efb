"""Controllability of the linearized plant across wheel-array geometries.

Shows the rank pattern over the elevation angle, the effort index (degree
of controllability) at a few horizons, and the worst initial condition.

Run:  python3 demos/demo_controllability.py
"""

import math

import numpy as np

from rwdesat.analysis import ctrb_matrix, doc_index, doc_index_restricted
from rwdesat.dynamics import SpacecraftParams
from rwdesat.linmodel import linearize_analytic
from rwdesat.numerics import matrix_rank

r = np.zeros(2)

print("rank of the controllability matrix vs elevation angle:")
for a_deg in (-90, -45, -10, 0, 10, 45, 80, 90):
    p = SpacecraftParams(alpha=math.radians(a_deg), beta=math.radians(10))
    m = linearize_analytic(p, r)
    print(f"  alpha = {a_deg:+3d} deg: rank {matrix_rank(ctrb_matrix(m.A, m.B))}")

print("\neffort index across the elevation range (1 hr horizon):")
for a_deg in (5, 20, 45, 60, 75, 85):
    p = SpacecraftParams(alpha=math.radians(a_deg))
    m = linearize_analytic(p, r)
    res = doc_index(m.A, m.B, 3600.0)
    print(f"  alpha = {a_deg:2d} deg: log10(J) = {math.log10(res.effort):6.3f}")

print("\nlonger maneuvers cost less (alpha = 45 deg):")
for hours in (1, 2, 3, 4):
    p = SpacecraftParams(alpha=math.radians(45))
    m = linearize_analytic(p, r)
    res = doc_index(m.A, m.B, hours * 3600.0)
    print(f"  {hours} hr: log10(J) = {math.log10(res.effort):6.3f}")

print("\nworst unit initial condition (alpha = 45 deg, 1 hr):")
p = SpacecraftParams(alpha=math.radians(45))
m = linearize_analytic(p, r)
res = doc_index(m.A, m.B, 3600.0)
print(" ", np.array_str(res.worst_ic, precision=3, suppress_small=True))
print("  (the pitch-rate direction: the open-loop unstable libration)")

res_w = doc_index_restricted(m.A, m.B, 3600.0, (7, 8, 9, 10))
print("\nhardest wheel-speed combination to unwind:")
print(" ", np.array_str(res_w.worst_ic[6:10], precision=3))
