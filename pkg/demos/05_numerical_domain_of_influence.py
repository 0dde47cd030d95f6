"""How far does a point disturbance travel in one implicit step?

Implicit midpoint solves a global linear system each step, so a point
impulse spreads to every cell immediately, with amplitude falling
geometrically with distance.  This prints the relative amplitude in shells
of width h around the source and the radius at which it drops below 1e-9,
next to the envelope (1 + max|X0|) dt + 3h.
"""

import numpy as np

from driftwave.evolution import DriftSpec, MidpointStepper, build_system, periodic_distance, point_source_state
from driftwave.exterior_calculus import CylinderGrid, VectorFieldSample

g = CylinderGrid(16, 16, 16, axial="periodic", lateral="periodic")
h = g.hx
s = build_system(g, 0, DriftSpec(VectorFieldSample.constant(g, (0, 0, 0.5)), 1.0), variant="full")
origin = (0.5, 0.5, 0.5)
dist = periodic_distance(g, s.dof_positions(), origin)
for frac in (4, 16, 64):
    dt = h / frac
    y = MidpointStepper(s, dt).step(point_source_state(s, origin))
    amp = np.abs(y) * s.field_scale()
    amp /= amp.max()
    shells = [amp[(dist > (r - 0.5) * h) & (dist <= (r + 0.5) * h)].max() for r in range(1, 8)]
    reach = dist[amp > 1e-9].max() / h
    print(f"dt = h/{frac:<3} envelope {s.causal_envelope(dt) / h:.2f} h, 1e-9 radius {reach:.2f} h, shells:",
          " ".join(f"{a:.0e}" for a in shells))
