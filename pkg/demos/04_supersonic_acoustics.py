"""Acoustics in a uniform flow at sub-, trans- and supersonic speeds.

The first-order system stays energy conserving for every Mach number.  The
transformed formulation with a material block only works below Mach 1: at
Mach 1 the transform is singular and above it the block is indefinite.
"""

import warnings

import numpy as np

from driftwave.cartesian import (
    CartesianScenario,
    IndefiniteMaterialWarning,
    SingularTransformError,
    bi_isotropic_M0,
    check_bi_isotropic,
    friedrichs_cartesian_simulate,
    plane_wave_initial,
    transformed_simulate,
)
from driftwave.exterior_calculus import CylinderGrid

g = CylinderGrid(4, 4, 64, axial="periodic", lateral="periodic")
for v0 in (0.0, 0.5, 1.0, 1.5, 3.0):
    u0 = plane_wave_initial(g, v0, [(0, 0, 1)], np.random.default_rng(0))
    traj, rows = friedrichs_cartesian_simulate(CartesianScenario(v0, g, 1e-3, 0.2, initial=u0))
    freqs = ", ".join(f"{r.freq_numeric:+.4f}" for r in rows)
    chk = check_bi_isotropic(v0)
    print(f"v0 = {v0:3.1f}: energy ratio {traj.energy_ratio:.12f}  frequencies [{freqs}]  transform {chk.status}")

print("\nM0 at v0 = 0.5:\n", np.round(bi_isotropic_M0(0.5), 4))
print("eigenvalues:", np.round(np.linalg.eigvalsh(bi_isotropic_M0(0.5)), 4))
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always", IndefiniteMaterialWarning)
    bi_isotropic_M0(1.5)
print("v0 = 1.5:", caught[0].message)
try:
    transformed_simulate(CartesianScenario(1.0, g, 1e-3, 0.01))
except SingularTransformError as exc:
    print("v0 = 1.0:", exc)
