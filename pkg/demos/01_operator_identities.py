"""Randomized check of the commutator and transmutator identities.

Draws 1000 random matrices per identity (skew, symmetric and nearly skew
families) and prints the worst residual of each.
"""

import numpy as np

from driftwave.operator_algebra import (
    check_accretivity,
    random_quasi_skew,
    random_skew,
    run_identity_suite,
    skew_part,
    sym_part,
)

rng = np.random.default_rng(0)

C = np.array([[1.0, 2.0], [0.0, 1.0]])
print("sym part of [[1,2],[0,1]]:", sym_part(C).tolist())
print("skew part:                ", skew_part(C).tolist())

for name, op in (("skew", random_skew(rng, 6)), ("quasi-skew", random_quasi_skew(rng, 6, 0.1)), ("-I", -np.eye(3))):
    rep = check_accretivity(op, eta0=0.5)
    print(f"{name:>10}: min eig of sym part {rep.min_sym_eigenvalue:+.3f}, verdict {rep.verdict}")

print()
for check in run_identity_suite(n_cases=1000, seed=0):
    status = "ok " if check.passed else "BAD"
    print(f"{status} {check.name:<22} worst residual {check.residual:.2e}  ({check.anchor})")
