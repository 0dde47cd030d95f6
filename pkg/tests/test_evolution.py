import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from driftwave.cartesian import IndefiniteMaterialWarning, SingularTransformError
from driftwave.evolution import (
    CommutationError,
    DriftSpec,
    MidpointStepper,
    StateVector,
    assemble_drift_decomposition,
    assemble_exterior_block,
    assemble_M1_tilde,
    bi_isotropic_manifold_M0,
    build_system,
    mass_skewness,
    point_source_state,
    product_mass,
    simulate,
    step_implicit_midpoint,
)
from driftwave.evolution import _min_mass_eig, _weighted_norm
from driftwave.exterior_calculus import CylinderGrid, VectorFieldSample

TWO_PI = 2 * np.pi


def torus(n, lz=1.0):
    return CylinderGrid(n, n, n, lz=lz, axial="periodic", lateral="periodic")


def axial_drift(g, amp=0.5):
    return VectorFieldSample.from_function(g, lambda x, y, z: (0 * x, 0 * x, 1 + amp * np.sin(TWO_PI * z)))


@pytest.fixture
def rng():
    return np.random.default_rng(99)


# -- exterior block ----------------------------------------------------------


@settings(max_examples=20, deadline=None)
@given(
    st.integers(2, 5),
    st.integers(0, 2),
    st.sampled_from(["periodic", "truncated"]),
    st.sampled_from(["full", "dirichlet"]),
)
def test_exterior_block_is_skew(n, k, axial, variant):
    g = CylinderGrid(n, n + 1, n, lx=0.8, axial=axial)
    E = assemble_exterior_block(g, k, variant)
    assert mass_skewness(E, product_mass(g, k, variant)) <= 1e-12


def test_exterior_block_zero_input():
    g = CylinderGrid(3, 3, 3)
    E = assemble_exterior_block(g, 1)
    assert np.all(E @ np.zeros(E.shape[1]) == 0)


def test_exterior_block_invalid_degree():
    with pytest.raises(ValueError):
        assemble_exterior_block(CylinderGrid(2, 2, 2), 3)


def test_exterior_block_is_grad_and_div():
    n = 16
    g = torus(n)
    h = g.hx
    E = assemble_exterior_block(g, 0, "full")
    nv = g.n_cells(0)
    x, y, z = g.vertex_coordinates()
    p = np.sin(TWO_PI * x) * np.cos(TWO_PI * z)
    grad = (E @ np.concatenate([p.ravel(), np.zeros(g.n_cells(1))]))[nv:]
    # hand-coded forward differences times the edge length
    hand = np.concatenate([(np.roll(p, -1, a) - p).ravel() for a in range(3)])
    np.testing.assert_allclose(grad, hand, atol=1e-13)
    # velocity field (v1, v2, v3) sampled at edge midpoints, integrated over edges
    v = [np.cos(TWO_PI * y), np.sin(TWO_PI * z), np.sin(TWO_PI * x)]
    w = np.concatenate([h * v[a].ravel() for a in range(3)])
    div = (E @ np.concatenate([np.zeros(nv), w]))[:nv]
    hand_div = sum((v[a] - np.roll(v[a], 1, a)) / h for a in range(3)).ravel()
    np.testing.assert_allclose(div, hand_div, atol=1e-10)
    # and the continuum limit of the plane wave: grad p / h -> d3 p on z-edges
    zc = g.cell_centers(1)[-n**3:]
    exact = -TWO_PI * np.sin(TWO_PI * zc[:, 0]) * np.sin(TWO_PI * zc[:, 2])
    assert np.abs(grad[-n**3:] / h - exact).max() <= 2 * (TWO_PI * h) ** 2


# -- drift decomposition ------------------------------------------------------


def test_zero_alpha_gives_zero_blocks():
    g = torus(4)
    dec = assemble_drift_decomposition(g, 1, DriftSpec(axial_drift(g), 0.0), 1.0, "full")
    for M in (dec.C_sym, dec.D_skew, dec.remainder):
        assert M.count_nonzero() == 0


@pytest.mark.parametrize("k", [0, 1, 2])
def test_constant_axial_drift_decomposition(k):
    g = torus(6)
    X = VectorFieldSample.constant(g, (0, 0, 1))
    dec = assemble_drift_decomposition(g, k, DriftSpec(X, 1.0), 1.0, "full")
    assert (abs(dec.C_sym).max() if dec.C_sym.nnz else 0.0) <= 1e-12
    assert (abs(dec.remainder).max() if dec.remainder.nnz else 0.0) <= 1e-12
    # D is the central axial difference on both factors
    assert abs(dec.D_skew - dec.covariant_block).max() <= 1e-12
    m = product_mass(g, k, "full")
    assert mass_skewness(dec.D_skew, m) <= 1e-12


@pytest.mark.parametrize("k", [0, 1, 2])
def test_variable_drift_sym_part_bounded(k):
    bound = 0.5 * 0.5 * TWO_PI  # sup |d3 X3| / 2
    norms = []
    for n in (8, 16):
        g = torus(n)
        dec = assemble_drift_decomposition(g, k, DriftSpec(axial_drift(g), 1.0), 1.0, "full")
        m = product_mass(g, k, "full")
        MC = sp.diags(m) @ dec.C_sym
        assert abs(MC - MC.T).max() <= 1e-12
        MD = sp.diags(m) @ dec.D_skew
        assert abs(MD + MD.T).max() <= 1e-12
        norms.append(_weighted_norm(dec.C_sym, m))
    assert norms[1] <= bound + 1e-12
    assert abs(norms[1] - bound) < abs(norms[0] - bound)


def test_drift_identity_reassembles(rng):
    g = CylinderGrid(5, 5, 6, axial="periodic")
    X = axial_drift(g)
    x, y, z = g.vertex_coordinates()
    alpha = 0.5 + 0.3 * np.cos(TWO_PI * z)
    spec = DriftSpec(X, alpha)
    dec = assemble_drift_decomposition(g, 1, spec, 1.0)
    Ad = sp.diags(dec.alpha)
    lhs = Ad @ dec.covariant_block
    rhs = dec.D_skew + dec.C_sym + dec.remainder
    assert abs(lhs - rhs).max() <= 1e-12
    assert spec.commutation_check == 0.0


def test_noncommuting_material_rejected():
    g = torus(4)
    m = product_mass(g, 0, "full")
    n = m.size
    M0 = sp.identity(n, format="csr") + 0.1 * sp.eye(n, k=1) + 0.1 * sp.eye(n, k=-1)
    x, y, z = g.vertex_coordinates()
    spec = DriftSpec(axial_drift(g), 1 + 0.5 * np.sin(TWO_PI * z))
    with pytest.raises(CommutationError):
        assemble_drift_decomposition(g, 0, spec, M0, "full")


def test_unbounded_alpha_rejected():
    g = torus(3)
    with pytest.raises(ValueError):
        DriftSpec(axial_drift(g), np.inf)


# -- M1 tilde and rho0 --------------------------------------------------------


def test_M1_tilde_without_drift_is_M1():
    g = torus(4)
    dec = assemble_drift_decomposition(g, 0, DriftSpec(axial_drift(g), 0.0), 1.0, "full")
    M1 = sp.diags(np.linspace(0.1, 0.3, dec.C_sym.shape[0]))
    assert abs(assemble_M1_tilde(M1, dec) - M1).max() == 0


def test_constant_drift_gives_zero_M1_tilde():
    g = torus(6)
    s = build_system(g, 1, DriftSpec(VectorFieldSample.constant(g, (0, 0, 1)), 1.0), 2.0, 0.0, "full")
    assert _weighted_norm(s.M1_tilde, s.mass) <= 1e-12
    assert s.c == 2.0
    assert s.rho0 == pytest.approx(1 / s.c, abs=1e-12)


def test_generic_scenario_margin():
    g = CylinderGrid(5, 5, 6, axial="periodic")
    X = VectorFieldSample.from_function(
        g, lambda x, y, z: (0 * x, 0 * x, 0.8 + 0.3 * np.cos(TWO_PI * z) * np.sin(np.pi * x) * np.sin(np.pi * y))
    )
    m0 = 1.0 + 0.25 * np.cos(TWO_PI * np.arange(product_mass(g, 1).size) / 7)
    s = build_system(g, 1, DriftSpec(X, 1.0), m0, 0.1)
    assert s.rho0 * s.c - s.M1_sym_norm() >= 1 - 1e-10
    inv = s.invariants()
    assert inv["M0_symmetry"] <= 1e-12
    assert inv["M0_min_eig"] >= s.c - 1e-10
    assert inv["A_skewness"] <= 1e-10
    assert inv["rho0_margin"] > 0


def test_M0_must_be_positive():
    with pytest.raises(ValueError):
        build_system(torus(3), 0, None, -1.0)


# -- stepping ----------------------------------------------------------------


def test_zero_state_stays_zero():
    s = build_system(torus(4), 0, variant="full")
    assert np.all(step_implicit_midpoint(s, np.zeros(s.size), None, 0.1) == 0)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_single_step_conserves_energy(rng, k):
    g = CylinderGrid(6, 6, 6, axial="periodic")
    s = build_system(g, k, DriftSpec(axial_drift(g), 1.0))
    # drop the bounded part so that the generator is exactly skew
    s.M1_tilde = sp.csr_matrix(s.M1_tilde.shape)
    x = rng.standard_normal(s.size)
    y = step_implicit_midpoint(s, x, None, 0.05)
    assert abs(s.energy(y) - s.energy(x)) / s.energy(x) <= 1e-10


def test_state_vector_roundtrip(rng):
    g = CylinderGrid(4, 4, 4, axial="truncated")
    s = build_system(g, 1)
    x = rng.standard_normal(s.size)
    st_ = StateVector.from_flat(s, x, 0.0)
    assert st_.u.degree == 1 and st_.w.degree == 2
    np.testing.assert_array_equal(st_.to_flat(s), x)
    nxt = step_implicit_midpoint(s, st_, None, 0.1)
    assert nxt.time == pytest.approx(0.1)


def _smooth_state(s):
    pts = s.dof_positions()
    return np.sin(TWO_PI * pts[:, 2]) * np.cos(TWO_PI * pts[:, 0]) / s.field_scale()


def test_richardson_local_error_is_third_order():
    g = torus(12)
    s = build_system(g, 0, DriftSpec(VectorFieldSample.constant(g, (0, 0, 0.5)), 1.0), variant="full")
    x = _smooth_state(s)
    diffs = []
    for dt in (0.02, 0.01, 0.005):
        one = MidpointStepper(s, dt).step(x)
        half = MidpointStepper(s, dt / 2)
        two = half.step(half.step(x))
        diffs.append(s.norm(one - two))
    orders = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
    assert orders.min() >= 2.8


# -- simulate ----------------------------------------------------------------


def test_zero_forcing_zero_trajectory():
    s = build_system(torus(4), 1, variant="full")
    traj = simulate(s, 0.1, 1.0, store_states=True)
    assert np.all(traj.states == 0) and np.all(traj.energy == 0)


def test_energy_conserved_over_many_steps(rng):
    g = torus(8)
    s = build_system(g, 1, DriftSpec(VectorFieldSample.constant(g, (0, 0, 0.7)), 1.0), variant="full")
    assert _weighted_norm(s.M1_tilde, s.mass) <= 1e-12
    traj = simulate(s, 0.02, 4.0, x0=rng.standard_normal(s.size))
    assert np.abs(traj.energy / traj.energy[0] - 1).max() <= 1e-9


def test_dissipation_energy_identity(rng):
    # midpoint form of dE/dt = -2 <sym M1 u, u>: E+ - E = -2 sigma dt |u_mid|^2
    sigma, dt = 0.4, 0.05
    s = build_system(torus(6), 0, None, 1.0, sigma, variant="full")
    traj = simulate(s, dt, 2.0, x0=rng.standard_normal(s.size), store_states=True)
    mids = 0.5 * (traj.states[1:] + traj.states[:-1])
    loss = np.array([2 * sigma * dt * s.norm(m) ** 2 for m in mids])
    np.testing.assert_allclose(np.diff(traj.energy), -loss, rtol=1e-9)
    assert np.all(np.diff(traj.energy) < 0)


def test_dissipation_rate_converges(rng):
    # exp(2 sigma t) E is constant for the continuous problem; the midpoint
    # defect comes from under-damped oscillating modes and shrinks as O(dt^2)
    sigma, T = 0.4, 1.0
    s = build_system(torus(6), 0, None, 1.0, sigma, variant="full")
    x0 = _smooth_state(s)
    defects = []
    for dt in (0.04, 0.02, 0.01):
        traj = simulate(s, dt, T, x0=x0)
        scaled = np.exp(2 * sigma * traj.times) * traj.energy
        defects.append(scaled[-1] / scaled[0] - 1)
    assert defects[0] > defects[1] > defects[2] > 0
    assert np.log2(defects[1] / defects[2]) >= 1.8


def test_rho_only_affects_diagnostics(rng):
    g = CylinderGrid(5, 5, 6, axial="periodic")
    s = build_system(g, 0, DriftSpec(axial_drift(g), 1.0), 1.0, 0.05)
    f = lambda t: np.sin(3 * t) * np.linspace(-1, 1, s.size)
    a = simulate(s, 0.05, 1.0, source=f, rho=s.rho0, store_states=True)
    b = simulate(s, 0.05, 1.0, source=f, rho=5 * s.rho0, store_states=True)
    assert a.states.tobytes() == b.states.tobytes()
    assert not np.array_equal(a.weighted_norm, b.weighted_norm)


def test_state_is_zero_before_source_switches_on(rng):
    g = CylinderGrid(5, 5, 8, axial="periodic")
    s = build_system(g, 1, DriftSpec(axial_drift(g), 1.0), 1.0, 0.1)
    t_on = 0.5
    profile = rng.standard_normal(s.size)
    src = lambda t: profile * (t > t_on)
    traj = simulate(s, 0.05, 1.0, source=src, store_states=True)
    before = traj.times <= t_on
    assert np.all(traj.states[before] == 0)
    assert np.abs(traj.states[~before]).max() > 0


def test_weighted_bound_random_forcings(rng):
    g = CylinderGrid(4, 4, 6, axial="periodic")
    s = build_system(g, 1, DriftSpec(axial_drift(g, 0.3), 1.0), 1.5, 0.05)
    dt, T = 0.05, 1.0
    nsteps = int(round(T / dt))
    for _ in range(5):
        F = rng.standard_normal((nsteps, s.size)) * rng.uniform(0.1, 2)
        traj = simulate(s, dt, T, source=F)
        assert traj.weighted_ratio <= 1.05 / s.c


def test_point_source_is_local():
    g = torus(8)
    s = build_system(g, 0, variant="full")
    x = point_source_state(s, (0.5, 0.5, 0.5))
    assert np.count_nonzero(x) == 1
    assert s.dof_positions()[np.flatnonzero(x)[0]] == pytest.approx([0.5, 0.5, 0.5])


def test_support_radius_recorded_at_start():
    g = torus(8)
    s = build_system(g, 0, variant="full")
    x0 = point_source_state(s, (0.5, 0.5, 0.5))
    traj = simulate(s, 0.01, 0.02, x0=x0, origin=(0.5, 0.5, 0.5))
    assert traj.support_radius[0] == 0.0
    assert np.all(traj.support_radius[1:] > 0)


def test_simulate_rejects_short_horizon():
    s = build_system(torus(3), 0, variant="full")
    with pytest.raises(ValueError):
        simulate(s, 0.5, 0.1)


# -- transformed material on the manifold -------------------------------------


@pytest.mark.parametrize("v0", [0.0, 0.3, 0.5, 0.9])
def test_manifold_transform_material_positive(v0):
    g = CylinderGrid(4, 4, 5, axial="periodic")
    M0 = bi_isotropic_manifold_M0(g, v0)
    m = product_mass(g, 0)
    MM = sp.diags(m) @ M0
    assert abs(MM - MM.T).max() <= 1e-12
    assert _min_mass_eig(M0, m) > 0
    if v0 == 0.0:
        assert abs(M0 - sp.identity(M0.shape[0])).max() == 0


def test_manifold_transform_singular_and_indefinite():
    g = CylinderGrid(4, 4, 4, axial="periodic", lateral="periodic")
    with pytest.raises(SingularTransformError):
        bi_isotropic_manifold_M0(g, 1.0)
    with pytest.warns(IndefiniteMaterialWarning):
        M0 = bi_isotropic_manifold_M0(g, 1.5, "full")
    assert _min_mass_eig(M0, product_mass(g, 0, "full")) < 0
