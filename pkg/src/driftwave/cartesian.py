"""Acoustics with uniform drift ``v0 e3`` on the periodic unit cell.

Unknowns are ``(p, v1, v2, v3)`` sampled at grid vertices.  Space is treated
pseudo-spectrally, so every Fourier mode evolves under the real symmetric
symbol

    S(k) = [[v0 k3, k1, k2, k3],
            [k1, v0 k3, 0, 0],
            [k2, 0, v0 k3, 0],
            [k3, 0, 0, v0 k3]]

via ``d/dt u^ + i S(k) u^ = f^``.  Time stepping is implicit midpoint, which
per mode is a Cayley factor of modulus one, so the energy is conserved for
every drift speed, including supersonic ones.

The same physics can be written after the bi-isotropic change of unknowns
``(p~, v~) = T (p, v)``; that route needs ``|v0| < 1`` and is provided for
comparison.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .exterior_calculus import CylinderGrid

N_FIELDS = 4
SINGULAR_TOL = 1e-12


class SingularTransformError(ValueError):
    """The bi-isotropic transform is not invertible (``|v0| = 1``)."""


class IndefiniteMaterialWarning(UserWarning):
    """The transformed material block is indefinite (``|v0| > 1``)."""


class HistoryError(ValueError):
    """Too few stored time levels for a central difference in time."""


# -- bi-isotropic transform --------------------------------------------------


def transform_matrix(v0: float) -> np.ndarray:
    """``T = [[1, v0 e3^T], [v0 e3, I]]`` acting on ``(p, v1, v2, v3)``."""
    T = np.eye(N_FIELDS)
    T[0, 3] = T[3, 0] = v0
    return T


def _check_invertible(v0: float) -> None:
    if abs(1.0 - v0 * v0) <= SINGULAR_TOL:
        raise SingularTransformError(
            f"singular transform: |v0| = {abs(v0):g} makes 1 - v0^2 vanish"
        )


def bi_isotropic_transform(p: np.ndarray, v: np.ndarray, v0: float):
    """``(p~, v~) = (p + v0 v3, v + v0 p e3)``; ``v`` has a leading axis of 3."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    vt = v.copy()
    vt[2] = v[2] + v0 * p
    return p + v0 * v[2], vt


def inverse_transform(p_tilde: np.ndarray, v_tilde: np.ndarray, v0: float):
    """Inverse of :func:`bi_isotropic_transform`.

    Raises
    ------
    SingularTransformError
        If ``|v0| = 1``.
    """
    _check_invertible(v0)
    p_tilde = np.asarray(p_tilde, dtype=float)
    v_tilde = np.asarray(v_tilde, dtype=float)
    det = 1.0 - v0 * v0
    p = (p_tilde - v0 * v_tilde[2]) / det
    v = v_tilde.copy()
    v[2] = (v_tilde[2] - v0 * p_tilde) / det
    return p, v


@dataclass(frozen=True)
class MaterialCheck:
    """Definiteness of the transformed material block for a drift speed."""

    v0: float
    status: str  # "positive", "singular" or "indefinite"
    eigenvalues: np.ndarray | None

    @property
    def indefinite(self) -> bool:
        return self.status == "indefinite"

    @property
    def singular(self) -> bool:
        return self.status == "singular"


def check_bi_isotropic(v0: float) -> MaterialCheck:
    """Classify ``M0(v0) = T^{-1}`` by its eigenvalues."""
    if abs(1.0 - v0 * v0) <= SINGULAR_TOL:
        return MaterialCheck(v0, "singular", None)
    eig = np.linalg.eigvalsh(np.linalg.inv(transform_matrix(v0)))
    status = "positive" if eig.min() > 0 else "indefinite"
    return MaterialCheck(v0, status, eig)


def bi_isotropic_M0(v0: float) -> np.ndarray:
    """Material block of the transformed system, ``M0 = T^{-1}``.

    For ``|v0| < 1`` its eigenvalues are ``1/(1 -+ v0)`` and ``1`` (twice).
    Warns with :class:`IndefiniteMaterialWarning` when ``|v0| > 1``.
    """
    _check_invertible(v0)
    d = 1.0 - v0 * v0
    M0 = np.eye(N_FIELDS)
    M0[0, 0] = M0[3, 3] = 1.0 / d
    M0[0, 3] = M0[3, 0] = -v0 / d
    if abs(v0) > 1.0:
        eig = np.linalg.eigvalsh(M0)
        warnings.warn(
            f"M0 indefinite for |v0| = {abs(v0):g} (eigenvalues {np.round(eig, 6).tolist()})",
            IndefiniteMaterialWarning,
            stacklevel=2,
        )
    return M0


# -- scenario and symbols ----------------------------------------------------

Source = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class CartesianScenario:
    """Cartesian drift problem on a fully periodic grid.

    ``source`` is ``f(t, x, y, z)`` for the pressure equation (sampled at
    the step midpoints) or an array with one grid-shaped sample per step.
    ``initial`` holds ``(p, v1, v2, v3)`` as an array of shape ``(4, nx, ny, nz)``.
    """

    v0: float
    grid: CylinderGrid
    dt: float
    T: float
    source: Source | np.ndarray | None = None
    initial: np.ndarray | None = None
    modes: Sequence[tuple[int, int, int]] = ((0, 0, 1),)
    store_pressure: bool = False
    origin: tuple[float, float, float] | None = None
    threshold: float = 1e-9

    def __post_init__(self):
        if not self.grid.fully_periodic:
            raise ValueError("the Cartesian solver needs a grid periodic in all three axes")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.T < self.dt:
            raise ValueError(f"T ({self.T}) must be at least dt ({self.dt})")
        if self.initial is not None:
            self.initial = np.asarray(self.initial, dtype=float)
            if self.initial.shape != (N_FIELDS, *self.grid.counts):
                raise ValueError(f"initial data must have shape {(N_FIELDS, *self.grid.counts)}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


def wavenumbers(grid: CylinderGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Angular wavenumbers per axis in FFT order; Nyquist entries set to zero."""
    out = []
    for n, L in zip(grid.counts, grid.lengths):
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)
        if n % 2 == 0:
            k[n // 2] = 0.0
        out.append(k)
    return tuple(np.meshgrid(*out, indexing="ij"))


def symbol(k1, k2, k3, v0: float) -> np.ndarray:
    """Symmetric symbol ``S(k)`` stacked along the leading axes."""
    k1, k2, k3 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (k1, k2, k3)))
    S = np.zeros(k1.shape + (N_FIELDS, N_FIELDS))
    for i in range(N_FIELDS):
        S[..., i, i] = v0 * k3
    for j, kj in enumerate((k1, k2, k3), start=1):
        S[..., 0, j] = S[..., j, 0] = kj
    return S


def symbol_frequencies(k, v0: float) -> np.ndarray:
    """Analytic frequencies ``v0 k3 - |k|, v0 k3, v0 k3, v0 k3 + |k|``."""
    k = np.asarray(k, dtype=float)
    nk = np.linalg.norm(k)
    return np.array([v0 * k[2] - nk, v0 * k[2], v0 * k[2], v0 * k[2] + nk])


def mode_wavevector(grid: CylinderGrid, mode: tuple[int, int, int]) -> np.ndarray:
    return np.array([2.0 * np.pi * m / L for m, L in zip(mode, grid.lengths)])


def plane_wave_initial(
    grid: CylinderGrid, v0: float, modes: Iterable[tuple[int, int, int]], rng: np.random.Generator
) -> np.ndarray:
    """Real initial data exciting every eigendirection of each listed mode."""
    x, y, z = grid.vertex_coordinates()
    u = np.zeros((N_FIELDS, *grid.counts))
    for mode in modes:
        k = mode_wavevector(grid, mode)
        _, Q = np.linalg.eigh(symbol(*k, v0))
        coef = Q @ (rng.standard_normal(N_FIELDS) + 1j * rng.standard_normal(N_FIELDS))
        phase = np.exp(1j * (k[0] * x + k[1] * y + k[2] * z))
        u += np.real(coef[:, None, None, None] * phase[None])
    return u


# -- direct (first-order) solver ---------------------------------------------


@dataclass
class SpectralRow:
    k1: float
    k2: float
    k3: float
    freq_numeric: float
    freq_analytic: float
    rel_error: float


@dataclass
class CartesianTrajectory:
    times: np.ndarray
    energy: np.ndarray
    final: np.ndarray
    grid: CylinderGrid
    dt: float
    pressure: list[np.ndarray] | None = field(default=None, repr=False)
    mode_history: dict = field(default_factory=dict, repr=False)
    midpoint_energy: np.ndarray | None = field(default=None, repr=False)
    support_radius: np.ndarray | None = None

    def weighted_norm(self, rho: float) -> np.ndarray:
        """Running ``sqrt(sum dt exp(-2 rho t_mid) ||u_mid||^2)``."""
        if self.midpoint_energy is None:
            raise HistoryError("midpoint energies were not recorded")
        tmid = self.times[:-1] + 0.5 * self.dt
        acc = np.cumsum(self.dt * np.exp(-2.0 * rho * tmid) * self.midpoint_energy)
        return np.sqrt(np.concatenate([[0.0], acc]))

    @property
    def energy_ratio(self) -> float:
        """``max E / min E`` over the run (1 for exact conservation)."""
        lo = self.energy.min()
        return float(self.energy.max() / lo) if lo > 0 else 1.0


def _fft(u: np.ndarray) -> np.ndarray:
    return np.fft.fftn(u, axes=(-3, -2, -1))


def _ifft(u: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(u, axes=(-3, -2, -1)).real


def _source_samples(scenario, t: float, coords, step: int) -> np.ndarray | None:
    src = scenario.source
    if src is None:
        return None
    if callable(src):
        return np.broadcast_to(np.asarray(src(t, *coords), dtype=float), scenario.grid.counts)
    return np.asarray(src[step], dtype=float)


def _energy_hat(uh: np.ndarray, cell_volume: float, n_points: int) -> float:
    return float(cell_volume * np.sum(np.abs(uh) ** 2) / n_points)


def _mode_index(grid: CylinderGrid, mode) -> tuple[int, int, int]:
    return tuple(int(m) % n for m, n in zip(mode, grid.counts))


def friedrichs_cartesian_simulate(scenario: CartesianScenario):
    """Integrate the drift acoustics system in its first-order form.

    Returns
    -------
    trajectory : CartesianTrajectory
    report : list of SpectralRow
        One row per eigendirection of every mode in ``scenario.modes`` that
        carries amplitude; numerical frequency from the phase slope of the
        projected Fourier coefficient.
    """
    g, dt, v0 = scenario.grid, scenario.dt, scenario.v0
    K = wavenumbers(g)
    w, Q = np.linalg.eigh(symbol(*K, v0))
    theta = 0.5 * dt
    denom = 1.0 + 1j * theta * w
    cayley = (1.0 - 1j * theta * w) / denom
    gain = dt / denom

    coords = g.vertex_coordinates()
    u0 = np.zeros((N_FIELDS, *g.counts)) if scenario.initial is None else scenario.initial
    uh = _fft(u0)
    vol = float(np.prod(g.spacings))
    npts = int(np.prod(g.counts))
    nsteps = scenario.n_steps
    times = dt * np.arange(nsteps + 1)
    energy = np.empty(nsteps + 1)
    energy[0] = _energy_hat(uh, vol, npts)
    mid = np.empty(nsteps)
    radius = None
    if scenario.origin is not None:
        dist = _vertex_distance(g, scenario.origin)
        radius = np.empty(nsteps + 1)
        radius[0] = _radius(u0, dist, scenario.threshold)
    pressure = [u0[0].copy()] if scenario.store_pressure else None
    idx = [_mode_index(g, m) for m in scenario.modes]
    history = {m: np.empty((nsteps + 1, N_FIELDS), complex) for m in scenario.modes}
    for m, ix in zip(scenario.modes, idx):
        history[m][0] = uh[(slice(None), *ix)]

    for n in range(nsteps):
        # coefficients in the eigenbasis of S(k), last axis = field index
        c = np.einsum("...ji,j...->...i", Q, uh)
        c = cayley * c
        f = _source_samples(scenario, times[n] + theta, coords, n)
        if f is not None:
            fh = _fft(f)
            c = c + gain * Q[..., 0, :] * fh[..., None]
        new = np.einsum("...ij,...j->i...", Q, c)
        mid[n] = _energy_hat(0.5 * (uh + new), vol, npts)
        uh = new
        energy[n + 1] = _energy_hat(uh, vol, npts)
        if radius is not None:
            radius[n + 1] = _radius(_ifft(uh), dist, scenario.threshold)
        if pressure is not None:
            pressure.append(_ifft(uh[0]))
        for m, ix in zip(scenario.modes, idx):
            history[m][n + 1] = uh[(slice(None), *ix)]

    traj = CartesianTrajectory(times, energy, _ifft(uh), g, dt, pressure, history, mid, radius)
    return traj, spectral_report(traj, v0)


def _vertex_distance(grid: CylinderGrid, origin) -> np.ndarray:
    d2 = 0.0
    for c, o, L in zip(grid.vertex_coordinates(), origin, grid.lengths):
        delta = c - o
        delta -= L * np.round(delta / L)
        d2 = d2 + delta**2
    return np.sqrt(d2)


def _radius(u: np.ndarray, dist: np.ndarray, threshold: float) -> float:
    amp = np.abs(u).max(axis=0)
    peak = amp.max()
    return float(dist[amp > threshold * peak].max()) if peak > 0 else 0.0


def spectral_report(traj: CartesianTrajectory, v0: float, min_amplitude: float = 1e-8) -> list[SpectralRow]:
    """Fit a frequency per eigendirection of every recorded mode."""
    rows = []
    for mode, hist in traj.mode_history.items():
        k = mode_wavevector(traj.grid, mode)
        lam, Q = np.linalg.eigh(symbol(*k, v0))
        scale = max(np.abs(hist[0]).max(), 1e-300)
        for j in range(N_FIELDS):
            c = hist @ Q[:, j]
            if np.abs(c).min() < min_amplitude * scale:
                continue
            phase = np.unwrap(np.angle(c))
            slope = np.polyfit(traj.times, phase, 1)[0]
            num = -slope
            ref = max(abs(lam[j]), np.linalg.norm(k))
            rows.append(SpectralRow(k[0], k[1], k[2], float(num), float(lam[j]), float(abs(num - lam[j]) / ref)))
    return rows


# -- transformed formulation -------------------------------------------------


def transformed_simulate(scenario: CartesianScenario) -> CartesianTrajectory:
    """Same problem via ``(d/dt M0 + [[0, div], [grad, 0]]) (p~, v~) = (f, 0)``.

    Only equivalent to the direct form for irrotational velocities.  The
    returned fields are transformed back to ``(p, v)``.

    Raises
    ------
    SingularTransformError
        If ``|v0| = 1``.
    """
    g, dt, v0 = scenario.grid, scenario.dt, scenario.v0
    M0 = bi_isotropic_M0(v0)
    T = transform_matrix(v0)
    K = wavenumbers(g)
    B = symbol(*K, 0.0)
    theta = 0.5 * dt
    lhs = M0 + 1j * theta * B
    rhs = M0 - 1j * theta * B
    lhs_inv = np.linalg.inv(lhs)
    step = lhs_inv @ rhs
    gain = dt * lhs_inv[..., :, 0]

    coords = g.vertex_coordinates()
    u0 = np.zeros((N_FIELDS, *g.counts)) if scenario.initial is None else scenario.initial
    uh = np.einsum("ij,j...->i...", T, _fft(u0))
    vol = float(np.prod(g.spacings))
    npts = int(np.prod(g.counts))
    Tinv = np.linalg.inv(T)
    nsteps = scenario.n_steps
    times = dt * np.arange(nsteps + 1)
    energy = np.empty(nsteps + 1)

    def back(vh):
        return np.einsum("ij,j...->i...", Tinv, vh)

    energy[0] = _energy_hat(back(uh), vol, npts)
    pressure = [u0[0].copy()] if scenario.store_pressure else None
    for n in range(nsteps):
        uh = np.einsum("...ij,j...->i...", step, uh)
        f = _source_samples(scenario, times[n] + theta, coords, n)
        if f is not None:
            uh = uh + np.moveaxis(gain, -1, 0) * _fft(f)[None]
        phys = back(uh)
        energy[n + 1] = _energy_hat(phys, vol, npts)
        if pressure is not None:
            pressure.append(_ifft(phys[0]))
    return CartesianTrajectory(times, energy, _ifft(back(uh)), g, dt, pressure)


# -- second-order pressure residual ------------------------------------------


def _central_diff(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2.0 * h)


def _second_diff(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(f, -1, axis) - 2.0 * f + np.roll(f, 1, axis)) / (h * h)


def second_order_pressure_residual(
    trajectory: CartesianTrajectory, f: Source | None, v0: float
) -> np.ndarray:
    """Residual of the pressure wave equation with drift on the computed ``p``.

    Evaluates

        p_tt + 2 v0 p_tz - (p_xx + p_yy + (1 - v0^2) p_zz) - (f_t + v0 f_z)

    with second-order central differences in time and space at every
    interior time level, keeping only three pressure levels in memory.
    Returns the discrete L2 norm per interior level.

    Raises
    ------
    HistoryError
        If fewer than three pressure levels are stored.
    """
    P = trajectory.pressure
    if P is None or len(P) < 3:
        raise HistoryError("the pressure residual needs at least three stored time levels")
    g, dt = trajectory.grid, trajectory.dt
    hx, hy, hz = g.spacings
    vol = hx * hy * hz
    coords = g.vertex_coordinates()
    ring: deque[np.ndarray] = deque(maxlen=3)
    out = []
    for n, p in enumerate(P):
        ring.append(p)
        if len(ring) < 3:
            continue
        pm, p0, pp = ring
        t = trajectory.times[n - 1]
        r = (pp - 2.0 * p0 + pm) / dt**2
        r += 2.0 * v0 * _central_diff((pp - pm) / (2.0 * dt), 2, hz)
        r -= _second_diff(p0, 0, hx) + _second_diff(p0, 1, hy) + (1.0 - v0 * v0) * _second_diff(p0, 2, hz)
        if f is not None:
            f_t = (np.asarray(f(t + dt, *coords)) - np.asarray(f(t - dt, *coords))) / (2.0 * dt)
            r -= f_t + v0 * _central_diff(np.broadcast_to(f(t, *coords), g.counts), 2, hz)
        out.append(np.sqrt(vol * np.sum(r * r)))
    return np.asarray(out)
