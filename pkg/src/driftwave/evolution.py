"""Evolutionary system ``(d/dt M0 + M1~ + A) U = F`` on k-forms x (k+1)-forms.

The drift term ``alpha diag(nabla_X, nabla_X) M0`` is rewritten through the
Lie derivative of the drift field: with ``B = diag(L_X, -L_X^#)`` (``#`` is
the mass-adjoint) one has exactly

    alpha N M0 = D + C + alpha (N - B) M0 + alpha [B, M0]

where ``C``/``D`` are the symmetric/skew parts of ``alpha M0 B``.  ``D`` is
joined with the exterior block ``[[0, -d*], [d, 0]]`` into the skew generator
``A``; everything else is bounded and collected in ``M1~``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exterior_calculus import (
    DIM,
    Cochain,
    CylinderGrid,
    VectorFieldSample,
    codifferential_matrix,
    covariant_derivative_matrix,
    lie_derivative_matrix,
    mass_adjoint,
)
from .cartesian import IndefiniteMaterialWarning, _check_invertible
from .operator_algebra import spectral_norm

log = logging.getLogger(__name__)

DIRECT_SOLVE_LIMIT = 200_000
SOLVER_RTOL = 1e-10
KRYLOV_RTOL = 1e-13


class CommutationError(ValueError):
    """The material block does not commute with the drift weight alpha."""


class SolverError(RuntimeError):
    """Linear solve of an implicit step did not reach its tolerance."""


def product_mass(grid: CylinderGrid, k: int, variant: str = "dirichlet") -> np.ndarray:
    """Diagonal inner product on ``Lambda^k x Lambda^(k+1)``."""
    return np.concatenate([grid.mass(k, variant), grid.mass(k + 1, variant)])


def _check_degree(k: int) -> None:
    if not 0 <= k <= DIM - 1:
        raise ValueError(f"degree k must lie in 0..{DIM - 1}, got {k}")


def assemble_exterior_block(grid: CylinderGrid, k: int, variant: str = "dirichlet") -> sp.csr_matrix:
    """``[[0, -d*], [d, 0]]``; antisymmetric under the product mass."""
    _check_degree(k)
    d = grid.d(k, variant)
    dstar = codifferential_matrix(grid, k, variant)
    return sp.bmat([[None, -dstar], [d, None]], format="csr")


def _weighted_norm(A, mass: np.ndarray) -> float:
    s = np.sqrt(mass)
    return spectral_norm(sp.diags(s) @ sp.csr_matrix(A) @ sp.diags(1.0 / s))


def mass_skewness(A, mass: np.ndarray) -> float:
    """``max |M A + A^T M|``; zero for operators skew under the mass."""
    MA = sp.diags(mass) @ sp.csr_matrix(A)
    R = MA + MA.T
    return float(abs(R).max()) if R.nnz else 0.0


# -- drift -------------------------------------------------------------------


@dataclass
class DriftSpec:
    """Drift field ``X0`` and bounded scalar weight ``alpha`` (per vertex)."""

    X0: VectorFieldSample
    alpha: np.ndarray
    commutation_check: float = 0.0

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        self.alpha = np.broadcast_to(alpha, self.X0.grid.vertex_shape).copy()
        if not np.all(np.isfinite(self.alpha)):
            raise ValueError("alpha must be bounded (finite)")

    @property
    def grid(self) -> CylinderGrid:
        return self.X0.grid

    def alpha_diagonal(self, k: int, variant: str) -> np.ndarray:
        """Multiplication by alpha on H, cell-averaged per degree."""
        g = self.grid
        parts = []
        for j in (k, k + 1):
            a = g.cochain_from_vertex_field(self.alpha, j)
            parts.append(a if variant == "full" else a[g.interior_mask(j)])
        return np.concatenate(parts)


def _as_operator(M, n: int) -> sp.csr_matrix:
    if sp.issparse(M):
        return sp.csr_matrix(M)
    M = np.asarray(M, dtype=float)
    if M.ndim <= 1:
        return sp.diags(np.broadcast_to(M, (n,)).astype(float)).tocsr()
    return sp.csr_matrix(M)


@dataclass
class DriftDecomposition:
    C_sym: sp.csr_matrix
    D_skew: sp.csr_matrix
    remainder: sp.csr_matrix
    lie_block: sp.csr_matrix
    covariant_block: sp.csr_matrix
    alpha: np.ndarray


def lie_block(grid: CylinderGrid, X: VectorFieldSample, k: int, variant: str = "dirichlet"):
    """``diag(L_X, -L_X^#)`` on ``Lambda^k x Lambda^(k+1)``."""
    L0 = grid.restrict(lie_derivative_matrix(X, k), k, k, variant)
    L1 = grid.restrict(lie_derivative_matrix(X, k + 1), k + 1, k + 1, variant)
    m1 = grid.mass(k + 1, variant)
    return sp.block_diag([L0, -mass_adjoint(L1, m1, m1)], format="csr")


def covariant_block(grid: CylinderGrid, X: VectorFieldSample, k: int, variant: str = "dirichlet"):
    """``diag(nabla_X, nabla_X)`` on ``Lambda^k x Lambda^(k+1)``."""
    N0 = grid.restrict(covariant_derivative_matrix(X, k), k, k, variant)
    N1 = grid.restrict(covariant_derivative_matrix(X, k + 1), k + 1, k + 1, variant)
    return sp.block_diag([N0, N1], format="csr")


def assemble_drift_decomposition(
    grid: CylinderGrid, k: int, drift: DriftSpec, M0, variant: str = "dirichlet"
) -> DriftDecomposition:
    """Split ``alpha M0 diag(L, -L^#)`` into symmetric ``C`` and skew ``D``.

    ``remainder = alpha (N - B) M0 + alpha [B, M0]`` collects the bounded
    lower-order terms of the rewritten drift.

    Raises
    ------
    CommutationError
        If ``M0 alpha != alpha M0`` (beyond 1e-12).
    """
    _check_degree(k)
    if drift.grid != grid:
        raise ValueError("drift field lives on a different grid")
    mass = product_mass(grid, k, variant)
    n = mass.size
    M0 = _as_operator(M0, n)
    alpha = drift.alpha_diagonal(k, variant)
    Aop = sp.diags(alpha)
    com = M0 @ Aop - Aop @ M0
    drift.commutation_check = float(abs(com).max()) if com.nnz else 0.0
    if drift.commutation_check > 1e-12:
        raise CommutationError(
            f"M0 and alpha do not commute (residual {drift.commutation_check:.3g})"
        )
    B = lie_block(grid, drift.X0, k, variant)
    N = covariant_block(grid, drift.X0, k, variant)
    P = sp.csr_matrix(Aop @ M0 @ B)
    Psharp = mass_adjoint(P, mass, mass)
    C = sp.csr_matrix(0.5 * (P + Psharp))
    D = sp.csr_matrix(0.5 * (P - Psharp))
    remainder = sp.csr_matrix(Aop @ (N - B) @ M0 + Aop @ (B @ M0 - M0 @ B))
    for mat in (C, D, remainder):
        mat.eliminate_zeros()
    return DriftDecomposition(C, D, remainder, B, N, alpha)


def assemble_M1_tilde(M1, decomposition: DriftDecomposition) -> sp.csr_matrix:
    """``M1 + alpha (N - B) M0 + alpha [B, M0] + C``."""
    n = decomposition.C_sym.shape[0]
    M1 = _as_operator(0.0 if M1 is None else M1, n)
    out = sp.csr_matrix(M1 + decomposition.remainder + decomposition.C_sym)
    out.eliminate_zeros()
    return out


def _min_mass_eig(M0: sp.csr_matrix, mass: np.ndarray) -> float:
    off = M0 - sp.diags(M0.diagonal())
    if off.nnz == 0 or abs(off).max() == 0:
        return float(M0.diagonal().min())
    s = np.sqrt(mass)
    S = sp.diags(s) @ M0 @ sp.diags(1.0 / s)
    S = 0.5 * (S + S.T)
    if S.shape[0] <= 2000:
        return float(np.linalg.eigvalsh(S.toarray()).min())
    return float(spla.eigsh(S, k=1, which="SA", return_eigenvectors=False)[0])


# -- the assembled system ----------------------------------------------------


@dataclass
class EvoSystem:
    """Blocks of ``(d/dt M0 + M1~ + A) U = F`` on the product space."""

    grid: CylinderGrid
    k: int
    variant: str
    mass: np.ndarray
    M0: sp.csr_matrix
    M1_tilde: sp.csr_matrix
    A_skew: sp.csr_matrix
    rho0: float
    c: float
    decomposition: DriftDecomposition | None = field(default=None, repr=False)
    exterior: sp.csr_matrix | None = field(default=None, repr=False)
    drift_speed: float = 0.0

    def causal_envelope(self, t):
        """Radius ``(1 + max|X0|) t + 3h`` a point disturbance may reach by time ``t``."""
        return (1.0 + self.drift_speed) * np.asarray(t) + 3.0 * max(self.grid.spacings)

    @property
    def n_u(self) -> int:
        return self.grid.n_dofs(self.k, self.variant)

    @property
    def size(self) -> int:
        return self.mass.size

    @property
    def generator(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.M1_tilde + self.A_skew)

    def energy(self, x: np.ndarray) -> float:
        """``<M0 U, U>`` in the product mass inner product."""
        return float(np.dot(x * self.mass, self.M0 @ x))

    def norm(self, x: np.ndarray) -> float:
        return float(np.sqrt(np.dot(x * self.mass, x)))

    def M1_sym_norm(self) -> float:
        MM = sp.diags(self.mass) @ self.M1_tilde
        sym = 0.5 * (MM + MM.T)
        return _weighted_norm(sp.diags(1.0 / self.mass) @ sym, self.mass)

    def coercivity(self, rho: float) -> float:
        """Lower bound ``rho min eig(M0) - ||sym M1~||`` of ``rho M0 + sym M1~``."""
        return rho * self.c - self.M1_sym_norm()

    def invariants(self) -> dict[str, float]:
        MM0 = sp.diags(self.mass) @ self.M0
        asym = MM0 - MM0.T
        return {
            "M0_symmetry": float(abs(asym).max()) if asym.nnz else 0.0,
            "M0_min_eig": _min_mass_eig(self.M0, self.mass),
            "A_skewness": mass_skewness(self.A_skew, self.mass),
            "rho0_margin": self.rho0 * self.c - _weighted_norm(self.M1_tilde, self.mass),
        }

    # -- state helpers -------------------------------------------------

    def split(self, x: np.ndarray) -> "StateVector":
        return StateVector.from_flat(self, x)

    def dof_positions(self) -> np.ndarray:
        g = self.grid
        pts = []
        for j in (self.k, self.k + 1):
            p = g.cell_centers(j)
            pts.append(p if self.variant == "full" else p[g.interior_mask(j)])
        return np.vstack(pts)

    def field_scale(self) -> np.ndarray:
        """Factor turning integrated cochain values into field values."""
        g = self.grid
        h = g.spacings
        out = []
        for j in (self.k, self.k + 1):
            s = np.concatenate(
                [np.full(idx.shape[1], 1.0 / np.prod([h[a] for a in S])) for S, idx in g.cell_positions(j)]
            )
            out.append(s if self.variant == "full" else s[g.interior_mask(j)])
        return np.concatenate(out)


@dataclass
class StateVector:
    u: Cochain
    w: Cochain
    time: float = 0.0

    @classmethod
    def from_flat(cls, system: EvoSystem, x: np.ndarray, time: float = 0.0) -> "StateVector":
        g, k = system.grid, system.k
        nu = system.n_u
        parts = []
        for j, vals in ((k, x[:nu]), (k + 1, x[nu:])):
            if system.variant == "full":
                parts.append(Cochain(j, g, vals))
            else:
                full = np.zeros(g.n_cells(j))
                full[g.interior_index(j)] = vals
                parts.append(Cochain(j, g, full))
        return cls(parts[0], parts[1], time)

    def to_flat(self, system: EvoSystem) -> np.ndarray:
        if self.u.grid != system.grid or self.w.grid != system.grid:
            raise ValueError("state lives on a different grid")
        g, k = system.grid, system.k
        if system.variant == "full":
            return np.concatenate([self.u.values, self.w.values])
        return np.concatenate(
            [self.u.values[g.interior_mask(k)], self.w.values[g.interior_mask(k + 1)]]
        )


def build_system(
    grid: CylinderGrid,
    k: int,
    drift: DriftSpec | None = None,
    M0=1.0,
    M1=0.0,
    variant: str = "dirichlet",
) -> EvoSystem:
    """Assemble ``M0``, ``M1~``, ``A`` and pick the weight threshold ``rho0``.

    ``rho0 = (||M1~|| + 1) / c`` with ``c`` the smallest eigenvalue of ``M0``,
    so that ``rho c - ||sym M1~|| >= 1`` for every ``rho >= rho0``.
    """
    _check_degree(k)
    mass = product_mass(grid, k, variant)
    n = mass.size
    M0 = _as_operator(M0, n)
    c = _min_mass_eig(M0, mass)
    if c <= 0:
        raise ValueError(f"M0 must be strictly positive definite (min eigenvalue {c:.3g})")
    E = assemble_exterior_block(grid, k, variant)
    if drift is None:
        drift = DriftSpec(VectorFieldSample.constant(grid, (0.0, 0.0, 0.0)), 0.0)
    dec = assemble_drift_decomposition(grid, k, drift, M0, variant)
    M1t = assemble_M1_tilde(M1, dec)
    A = sp.csr_matrix(dec.D_skew + E)
    rho0 = (_weighted_norm(M1t, mass) + 1.0) / c
    return EvoSystem(grid, k, variant, mass, M0, M1t, A, rho0, c, dec, E, drift.X0.max_speed())


# -- time stepping -----------------------------------------------------------


class MidpointStepper:
    """Implicit midpoint steps ``(M0/dt + K/2) U+ = (M0/dt - K/2) U + f_mid``.

    ``K = M1~ + A``.  The shifted system is solved with Jacobi-preconditioned
    GMRES; if that stalls and the system has fewer than 2e5 unknowns, a
    sparse LU factorization is computed once and reused.
    """

    def __init__(self, system: EvoSystem, dt: float, rtol: float = KRYLOV_RTOL):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.system = system
        self.dt = dt
        self.rtol = rtol
        K = system.generator
        self.lhs = sp.csr_matrix(system.M0 / dt + 0.5 * K)
        self.rhs = sp.csr_matrix(system.M0 / dt - 0.5 * K)
        diag = self.lhs.diagonal()
        self._pre = spla.LinearOperator(self.lhs.shape, matvec=lambda v: v / diag)
        self._lu = None

    def _solve(self, b: np.ndarray, guess: np.ndarray) -> np.ndarray:
        if self._lu is not None:
            return self._lu.solve(b)
        y, info = spla.gmres(self.lhs, b, x0=guess, rtol=self.rtol, M=self._pre, restart=60, maxiter=100)
        if info == 0:
            return y
        if self.system.size >= DIRECT_SOLVE_LIMIT:
            raise SolverError(f"GMRES did not converge (info={info})")
        log.info("GMRES stalled (info=%d); switching to sparse LU", info)
        self._lu = spla.splu(sp.csc_matrix(self.lhs))
        return self._lu.solve(b)

    def step(self, x: np.ndarray, f_mid: np.ndarray | None = None) -> np.ndarray:
        b = self.rhs @ x
        if f_mid is not None:
            b = b + f_mid
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros_like(b)
        y = self._solve(b, x)
        res = np.linalg.norm(self.lhs @ y - b) / bnorm
        if res > SOLVER_RTOL:
            raise SolverError(f"linear solve residual {res:.3g} above {SOLVER_RTOL:g}")
        return y


def step_implicit_midpoint(system: EvoSystem, state, f_mid=None, dt: float = 1e-2):
    """One implicit midpoint step; accepts a :class:`StateVector` or a flat array."""
    stepper = MidpointStepper(system, dt)
    if isinstance(state, StateVector):
        x = state.to_flat(system)
        y = stepper.step(x, f_mid)
        return StateVector.from_flat(system, y, state.time + dt)
    return stepper.step(np.asarray(state, dtype=float), f_mid)


@dataclass
class Trajectory:
    times: np.ndarray
    energy: np.ndarray
    weighted_norm: np.ndarray
    forcing_norm: np.ndarray
    support_radius: np.ndarray
    rho: float
    final: np.ndarray = field(repr=False)
    states: np.ndarray | None = field(default=None, repr=False)

    @property
    def weighted_ratio(self) -> float:
        """``||U||_rho / ||F||_rho`` over the whole horizon."""
        f = self.forcing_norm[-1]
        return float(self.weighted_norm[-1] / f) if f > 0 else 0.0


def _support_radius(x, scale, dist, threshold):
    amp = np.abs(x) * scale
    peak = amp.max()
    if peak == 0.0:
        return 0.0
    return float(dist[amp > threshold * peak].max())


def periodic_distance(grid: CylinderGrid, points: np.ndarray, origin) -> np.ndarray:
    """Euclidean distance with minimum-image convention on periodic axes."""
    delta = points - np.asarray(origin, dtype=float)
    for a in range(DIM):
        if grid.periodic[a]:
            L = grid.lengths[a]
            delta[:, a] -= L * np.round(delta[:, a] / L)
    return np.sqrt((delta**2).sum(axis=1))


def simulate(
    system: EvoSystem,
    dt: float,
    T: float,
    x0: np.ndarray | None = None,
    source: Callable[[float], np.ndarray] | np.ndarray | None = None,
    rho: float | None = None,
    origin=None,
    threshold: float = 1e-9,
    store_states: bool = False,
    callback: Callable[[int, float, np.ndarray], None] | None = None,
) -> Trajectory:
    """Integrate on ``[0, T]`` with implicit midpoint steps.

    ``source`` is either ``f(t)`` (evaluated at the step midpoints) or an
    array with one row per step.  ``rho`` (default ``2 rho0``) only enters
    the diagnostics: discretely weighted norms
    ``sum dt exp(-2 rho t_mid) ||.||^2`` of the midpoint states and forcing.
    ``origin`` enables the support-radius scan at amplitude ``threshold``
    relative to the current maximum.
    """
    if T < dt:
        raise ValueError("need T >= dt")
    nsteps = int(round(T / dt))
    rho = 2.0 * system.rho0 if rho is None else rho
    n = system.size
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    stepper = MidpointStepper(system, dt)
    scale = system.field_scale()
    dist = None if origin is None else periodic_distance(system.grid, system.dof_positions(), origin)

    times = dt * np.arange(nsteps + 1)
    energy = np.empty(nsteps + 1)
    wnorm = np.zeros(nsteps + 1)
    fnorm = np.zeros(nsteps + 1)
    radius = np.zeros(nsteps + 1)
    states = np.empty((nsteps + 1, n)) if store_states else None
    energy[0] = system.energy(x)
    if dist is not None:
        radius[0] = _support_radius(x, scale, dist, threshold)
    if states is not None:
        states[0] = x
    acc_u = acc_f = 0.0
    for i in range(nsteps):
        tmid = times[i] + 0.5 * dt
        if source is None:
            f = None
        elif callable(source):
            f = np.asarray(source(tmid), dtype=float)
        else:
            f = np.asarray(source[i], dtype=float)
        y = stepper.step(x, f)
        w = dt * np.exp(-2.0 * rho * tmid)
        acc_u += w * system.norm(0.5 * (x + y)) ** 2
        if f is not None:
            acc_f += w * system.norm(f) ** 2
        x = y
        energy[i + 1] = system.energy(x)
        wnorm[i + 1] = np.sqrt(acc_u)
        fnorm[i + 1] = np.sqrt(acc_f)
        if dist is not None:
            radius[i + 1] = _support_radius(x, scale, dist, threshold)
        if states is not None:
            states[i + 1] = x
        if callback is not None:
            callback(i + 1, times[i + 1], x)
    return Trajectory(times, energy, wnorm, fnorm, radius, rho, x, states)


def point_source_state(system: EvoSystem, origin) -> np.ndarray:
    """Unit impulse in the first component at the dof nearest to ``origin``."""
    pos = system.dof_positions()[: system.n_u]
    i = int(np.argmin(periodic_distance(system.grid, pos, origin)))
    x = np.zeros(system.size)
    x[i] = 1.0 / system.field_scale()[i]
    return x


def bi_isotropic_manifold_M0(grid: CylinderGrid, v0: float, variant: str = "dirichlet") -> sp.csr_matrix:
    """Transformed material block on ``Lambda^0 x Lambda^1`` for drift ``v0 e3``.

    Pointwise this is ``T^{-1}`` with ``T = [[1, v0 e3^T], [v0 e3, I]]``;
    the pressure (vertices) couples to the axial velocity (z-edges) through
    the edge-average map, which is a contraction, so the block stays
    positive definite for ``|v0| < 1``.

    Raises
    ------
    SingularTransformError
        If ``|v0| = 1``.
    """
    _check_invertible(v0)
    d = 1.0 - v0 * v0
    a, b = 1.0 / d, -v0 / d
    inc = abs(grid.incidence(0)).tocsr()
    z_rows = np.zeros(grid.n_cells(1), dtype=bool)
    off = 0
    for S in ((0,), (1,), (2,)):
        n = int(np.prod(grid.block_shape(S)))
        if S == (2,):
            z_rows[off : off + n] = True
        off += n
    E = sp.diags(np.where(z_rows, 0.5 * grid.hz, 0.0)) @ inc
    E = grid.restrict(E, 1, 0, variant)
    z = z_rows if variant == "full" else z_rows[grid.interior_mask(1)]
    m0, m1 = grid.mass(0, variant), grid.mass(1, variant)
    Esharp = mass_adjoint(E, m0, m1)
    lower = sp.diags(np.where(z, a, 1.0))
    M0 = sp.bmat([[a * sp.identity(m0.size), b * Esharp], [b * E, lower]], format="csr")
    if abs(v0) > 1.0:
        warnings.warn(f"M0 indefinite for |v0| = {abs(v0):g}", IndefiniteMaterialWarning, stacklevel=2)
    return M0
