"""Randomized structural checks of the discrete calculus and the drift system."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .evolution import DriftSpec, build_system, mass_skewness, product_mass
from .exterior_calculus import (
    DIM,
    Cochain,
    CylinderGrid,
    VectorFieldSample,
    codifferential,
    exterior_derivative,
    hodge_star,
    lie_derivative_matrix,
)
from .operator_algebra import IdentityCheck

TWO_PI = 2.0 * np.pi


def _swirl(grid: CylinderGrid) -> VectorFieldSample:
    """A smooth drift field that is non-constant along every axis."""
    return VectorFieldSample.from_function(
        grid,
        lambda x, y, z: (
            0.3 * np.sin(TWO_PI * z),
            0.2 * np.cos(TWO_PI * x),
            1.0 + 0.5 * np.sin(TWO_PI * y) * np.cos(TWO_PI * z),
        ),
    )


def _axial_drift(grid: CylinderGrid) -> VectorFieldSample:
    return VectorFieldSample.from_function(
        grid, lambda x, y, z: (0.0 * x, 0.0 * x, 1.0 + 0.5 * np.sin(TWO_PI * z))
    )


def run_calculus_suite(sizes: Sequence[int] = (4, 8), seed: int = 0, n_samples: int = 8) -> list[IdentityCheck]:
    """Exactness of d, adjointness of d*, Hodge isometry and Cartan commutation.

    Runs on a cylinder (bounded cross-section, periodic axis) and a truncated
    cylinder of each size; both d variants are exercised.
    """
    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(
        ("dd_zero", "adjoint_pairing", "hodge_isometry", "hodge_involution", "cartan_commutation"), 0.0
    )
    cases = 0
    for n in sizes:
        for axial in ("periodic", "truncated"):
            g = CylinderGrid(n, n, n, axial=axial)
            X = _swirl(g)
            for k in range(DIM):
                for variant in ("full", "dirichlet"):
                    dd = g.d(k + 1, variant) @ g.d(k, variant) if k < DIM - 1 else None
                    if dd is not None and dd.nnz:
                        worst["dd_zero"] = max(worst["dd_zero"], float(abs(dd).max()))
                for _ in range(n_samples):
                    cases += 1
                    w = Cochain.random(k, g, rng)
                    e = Cochain.random(k + 1, g, rng)
                    for variant in ("full", "dirichlet"):
                        lhs = exterior_derivative(w, variant).inner(e)
                        rhs = w.inner(codifferential(e, variant))
                        scale = max(w.norm() * e.norm() / min(g.spacings), 1.0)
                        worst["adjoint_pairing"] = max(worst["adjoint_pairing"], abs(lhs - rhs) / scale)
                    star = hodge_star(w)
                    worst["hodge_isometry"] = max(
                        worst["hodge_isometry"], abs(star.norm() - w.norm()) / max(w.norm(), 1.0)
                    )
                    worst["hodge_involution"] = max(
                        worst["hodge_involution"], float(np.abs(hodge_star(star).values - w.values).max())
                    )
                    L0, L1 = lie_derivative_matrix(X, k), lie_derivative_matrix(X, k + 1)
                    dk = g.d(k)
                    a = dk @ (L0 @ w.values)
                    b = L1 @ (dk @ w.values)
                    worst["cartan_commutation"] = max(
                        worst["cartan_commutation"], float(np.abs(a - b).max() / max(np.abs(a).max(), 1.0))
                    )
    anchors = {
        "dd_zero": "d d = 0 (integer incidence)",
        "adjoint_pairing": "<d w, e> = <w, d* e>",
        "hodge_isometry": "||*w|| = ||w||",
        "hodge_involution": "** = (-1)^(k(3-k))",
        "cartan_commutation": "d L_X = L_X d, L_X = d i_X + i_X d",
    }
    thresholds = {
        "dd_zero": 0.0,
        "adjoint_pairing": 1e-13,
        "hodge_isometry": 1e-13,
        "hodge_involution": 1e-13,
        "cartan_commutation": 1e-12,
    }
    return [IdentityCheck(name, anchors[name], worst[name], thresholds[name], cases) for name in worst]


def run_skew_suite(sizes: Sequence[int] = (4, 8), degrees: Sequence[int] = (0, 1, 2)) -> list[IdentityCheck]:
    """``D + [[0, -d*], [d, 0]]`` is skew under the product mass on the torus.

    Uses a constant and a variable axial drift with ``alpha = 1``, ``M0 = I``.
    """
    worst = {"skew_constant_drift": 0.0, "skew_variable_drift": 0.0}
    cases = 0
    for n in sizes:
        g = CylinderGrid(n, n, n, axial="periodic", lateral="periodic")
        fields = {
            "skew_constant_drift": VectorFieldSample.constant(g, (0.0, 0.0, 1.0)),
            "skew_variable_drift": _axial_drift(g),
        }
        for name, X in fields.items():
            for k in degrees:
                cases += 1
                s = build_system(g, k, DriftSpec(X, 1.0), 1.0, 0.0, variant="full")
                worst[name] = max(worst[name], mass_skewness(s.A_skew, product_mass(g, k, "full")))
    anchor = "M (D + [[0,-d*],[d,0]]) + (D + [[0,-d*],[d,0]])^T M = 0"
    return [IdentityCheck(name, anchor, worst[name], 1e-10, cases) for name in worst]
