"""Matrix-scale operator calculus: adjoints, commutators, resolvents.

Every "unbounded" identity is checked here as an algebraic identity between
finite matrices.  Operators are plain ``numpy`` arrays or ``scipy.sparse``
matrices; adjoints are taken with respect to the Euclidean inner product
unless diagonal mass weights are supplied.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

SINGULAR_COND = 1e12
DENSE_NORM_LIMIT = 64
POWER_TOL = 1e-10
POWER_MAXITER = 10_000


class SingularOperatorError(np.linalg.LinAlgError):
    """``1 + eta*C`` is numerically singular (condition number above 1e12)."""


class ShapeError(ValueError):
    pass


# -- basic algebra ----------------------------------------------------------


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def _check_finite(A) -> None:
    data = A.data if sp.issparse(A) else np.asarray(A)
    if not np.all(np.isfinite(data)):
        raise ValueError("operator entries must be finite")


def _check_square(C) -> int:
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ShapeError(f"expected a square operator, got shape {C.shape}")
    return C.shape[0]


def adjoint(A, mass_domain=None, mass_codomain=None):
    """Adjoint of ``A``; the transpose unless diagonal masses are given.

    With masses ``M_dom`` (domain) and ``M_cod`` (codomain) the adjoint is
    ``M_dom^{-1} A^T M_cod``.
    """
    _check_finite(A)
    if mass_domain is None and mass_codomain is None:
        return A.T.tocsr() if sp.issparse(A) else np.asarray(A).T
    m_dom = np.ones(A.shape[1]) if mass_domain is None else np.asarray(mass_domain)
    m_cod = np.ones(A.shape[0]) if mass_codomain is None else np.asarray(mass_codomain)
    if sp.issparse(A):
        return (sp.diags(1.0 / m_dom) @ A.T @ sp.diags(m_cod)).tocsr()
    return (np.asarray(A).T * m_cod[None, :]) / m_dom[:, None]


def sym_part(C, mass=None):
    """``(C + C*)/2`` for a square operator."""
    _check_square(C)
    return 0.5 * (C + adjoint(C, mass, mass))


def skew_part(C, mass=None):
    """``(C - C*)/2`` for a square operator."""
    _check_square(C)
    return 0.5 * (C - adjoint(C, mass, mass))


def transmutator(L, C, R):
    """``[L, C, R] = L C - C R``."""
    if L.shape[0] != L.shape[1] or R.shape[0] != R.shape[1]:
        raise ShapeError("L and R must be square")
    if L.shape[1] != C.shape[0] or C.shape[1] != R.shape[0]:
        raise ShapeError(f"incompatible shapes L{L.shape}, C{C.shape}, R{R.shape}")
    return L @ C - C @ R


def commutator(alpha, C):
    """``[alpha, C] = alpha C - C alpha``; note ``[C, alpha] = -[alpha, C]``."""
    return transmutator(alpha, C, alpha)


def spectral_norm(A) -> float:
    """Largest singular value.

    Dense SVD for matrices up to 64 x 64, power iteration on ``A^T A``
    otherwise (relative tolerance 1e-10, at most 10^4 iterations).
    """
    if max(A.shape) <= DENSE_NORM_LIMIT:
        M = _dense(A)
        if M.size == 0:
            return 0.0
        return float(np.linalg.norm(M, 2))
    return _power_norm(A)


def _power_norm(A) -> float:
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(A.shape[1])
    x /= np.linalg.norm(x)
    AT = A.T
    sigma = 0.0
    for _ in range(POWER_MAXITER):
        y = AT @ (A @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        new = np.sqrt(ny)
        x = y / ny
        if abs(new - sigma) <= POWER_TOL * new:
            return float(new)
        sigma = new
    return float(sigma)


# -- resolvents and accretivity ---------------------------------------------


def resolvent(C, eta: float) -> np.ndarray:
    """``(1 + eta C)^{-1}`` as a dense matrix.

    Raises
    ------
    SingularOperatorError
        If the condition number of ``1 + eta C`` exceeds 1e12.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    n = _check_square(C)
    I = np.eye(n)
    if eta == 0:
        return I
    T = I + eta * _dense(C)
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise SingularOperatorError(
            f"1 + eta*C is singular at eta={eta:g} (condition number {cond:.3g})"
        )
    return np.linalg.solve(T, I)


@dataclass
class AccretivityReport:
    min_sym_eigenvalue: float
    eta0: float
    resolvent_norm_sup: float
    verdict: str  # "accretive" | "quasi_m_accretive" | "neither"
    singular_etas: list[float] = field(default_factory=list)


def check_accretivity(C, eta0: float, n_samples: int = 64) -> AccretivityReport:
    """Classify ``C`` as accretive, quasi-m-accretive on ``[0, eta0]`` or neither.

    Singular points of ``1 + eta C`` are located exactly through the real
    negative eigenvalues of ``C`` (``eta = -1/lambda``); the resolvent norm is
    sampled on an even grid of ``n_samples`` points in ``(0, eta0]``.
    """
    if eta0 <= 0:
        raise ValueError("eta0 must be positive")
    _check_square(C)
    M = _dense(C)
    min_eig = float(np.linalg.eigvalsh(sym_part(M)).min())
    lam = np.linalg.eigvals(M)
    real_neg = lam[(np.abs(lam.imag) <= 1e-12 * max(1.0, np.abs(lam).max())) & (lam.real < 0)]
    singular = sorted(float(-1.0 / l.real) for l in real_neg if -1.0 / l.real <= eta0)

    sup = 1.0
    failed = bool(singular)
    if not failed:
        for eta in np.linspace(eta0 / n_samples, eta0, n_samples):
            try:
                sup = max(sup, float(np.linalg.norm(resolvent(M, eta), 2)))
            except SingularOperatorError:
                failed = True
                break
    if failed:
        return AccretivityReport(min_eig, eta0, float("inf"), "neither", singular)
    verdict = "accretive" if min_eig >= -1e-12 else "quasi_m_accretive"
    return AccretivityReport(min_eig, eta0, sup, verdict, singular)


def resolvent_convergence_gap(C, eta: float, x: np.ndarray) -> tuple[float, float]:
    """Return ``(||R x - x||, eta ||R|| ||C x||)`` for ``R = (1 + eta C)^{-1}``.

    The first never exceeds the second since ``R x - x = -eta R C x``.
    """
    R = resolvent(C, eta)
    Cx = _dense(C) @ x
    return float(np.linalg.norm(R @ x - x)), float(eta * np.linalg.norm(R, 2) * np.linalg.norm(Cx))


# -- identity checks ---------------------------------------------------------


@dataclass
class ResolventCommutatorReport:
    residual: float
    etas: list[float]
    commutator_norms: list[float]
    c_commutator_norms: list[float]

    @property
    def scaled_norms(self) -> list[float]:
        """``||[(1+eta C)^{-1}, alpha]|| / eta`` along the sweep."""
        return [n / e for n, e in zip(self.commutator_norms, self.etas)]


def verify_resolvent_commutator(
    C, alpha, eta: float, sweep: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4)
) -> ResolventCommutatorReport:
    """Check ``[(1+eta C)^{-1}, alpha] = eta (1+eta C)^{-1} [alpha, C] (1+eta C)^{-1}``.

    Along ``sweep`` the norms of ``[(1+eta C)^{-1}, alpha]`` and of
    ``C [(1+eta C)^{-1}, alpha]`` are recorded; both go to zero as ``eta -> 0``.
    """
    C = _dense(C)
    alpha = _dense(alpha)
    com = commutator(alpha, C)
    R = resolvent(C, eta)
    lhs = commutator(R, alpha)
    rhs = eta * R @ com @ R
    residual = float(np.linalg.norm(lhs - rhs, 2))
    norms, c_norms = [], []
    for e in sweep:
        Re = resolvent(C, e)
        ce = commutator(Re, alpha)
        norms.append(float(np.linalg.norm(ce, 2)))
        c_norms.append(float(np.linalg.norm(C @ ce, 2)))
    return ResolventCommutatorReport(residual, list(sweep), norms, c_norms)


def verify_weak_equals_strong(C, alpha) -> float:
    """Largest residual of the product/adjoint commutator identities.

    Checks ``alpha C = C alpha + [alpha, C]``, ``[alpha, C]* = [C*, alpha*]``
    and ``(alpha C)* = alpha* C* + [C*, alpha*]``.
    """
    C = _dense(C)
    alpha = _dense(alpha)
    if C.shape != alpha.shape:
        raise ShapeError(f"shape mismatch {C.shape} vs {alpha.shape}")
    _check_square(C)
    Cs, As = C.T, alpha.T
    com = commutator(alpha, C)
    r1 = alpha @ C - (C @ alpha + com)
    r2 = com.T - commutator(Cs, As)
    r3 = (alpha @ C).T - (As @ Cs + commutator(Cs, As))
    return float(max(np.abs(r).max() for r in (r1, r2, r3)))


@dataclass
class SkewDecompositionReport:
    antisymmetry: float
    formula_residual: float
    adjoint_residual: float

    @property
    def max_residual(self) -> float:
        return max(self.antisymmetry, self.formula_residual, self.adjoint_residual)


def verify_skew_decomposition(alpha, C, sym_C=None) -> SkewDecompositionReport:
    """Check the decomposition of ``skew(alpha C)`` for selfadjoint ``alpha``.

    Verifies that ``skew(alpha C)`` is antisymmetric, equals
    ``alpha C - alpha sym(C) - [C*, alpha]/2`` and that its adjoint is
    ``-(C - sym C) alpha - [alpha, C]/2``.
    """
    alpha = _dense(alpha)
    C = _dense(C)
    _check_square(C)
    if np.abs(alpha - alpha.T).max() > 1e-14 * max(1.0, np.abs(alpha).max()):
        raise ValueError("alpha must be symmetric")
    S = sym_part(C) if sym_C is None else _dense(sym_C)
    K = skew_part(alpha @ C)
    formula = alpha @ C - alpha @ S - 0.5 * commutator(C.T, alpha)
    adj = -((C - S) @ alpha) - 0.5 * commutator(alpha, C)
    return SkewDecompositionReport(
        antisymmetry=float(np.linalg.norm(K + K.T, 2)),
        formula_residual=float(np.linalg.norm(K - formula, 2)),
        adjoint_residual=float(np.linalg.norm(K.T - adj, 2)),
    )


@dataclass
class SumTheoremReport:
    adjoint_residuals: list[float]
    decay: list[float]
    eps: list[float]

    @property
    def max_adjoint_residual(self) -> float:
        return max(self.adjoint_residuals)

    @property
    def decays(self) -> bool:
        """The transmutator action shrinks along the schedule (factor-2 slack)."""
        d = self.decay
        return all(d[i + 1] <= 2.0 * d[i] for i in range(len(d) - 1)) and d[-1] <= d[0] + 1e-300


def verify_sum_theorem(
    C,
    D,
    L_family: Callable[[float], np.ndarray] | Sequence,
    R_family: Callable[[float], np.ndarray] | Sequence,
    eps: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4),
    samples: np.ndarray | None = None,
) -> SumTheoremReport:
    """Transmutator adjoint identity and decay for a family ``L_eps, R_eps``.

    For each ``eps`` checks ``[R*, (C+D)*, L*] = -[L, C+D, R]*`` and records
    ``max_x ||[L, C+D, R]* x||`` over the sample vectors ``x``.
    """
    T = _dense(C) + _dense(D)
    if samples is None:
        samples = np.random.default_rng(0).standard_normal((T.shape[0], 8))
    residuals, decay = [], []
    for i, e in enumerate(eps):
        L = _dense(L_family(e) if callable(L_family) else L_family[i])
        R = _dense(R_family(e) if callable(R_family) else R_family[i])
        tm = transmutator(L, T, R)
        lhs = transmutator(R.T, T.T, L.T)
        residuals.append(float(np.linalg.norm(lhs + tm.T, 2)))
        decay.append(float(np.linalg.norm(tm.T @ samples, axis=0).max()))
    return SumTheoremReport(residuals, decay, list(eps))


# -- random operators --------------------------------------------------------


def random_matrix(rng: np.random.Generator, n: int, m: int | None = None) -> np.ndarray:
    """Entries i.i.d. uniform on [-1, 1]."""
    return rng.uniform(-1.0, 1.0, (n, n if m is None else m))


def random_skew(rng: np.random.Generator, n: int) -> np.ndarray:
    G = random_matrix(rng, n)
    return 0.5 * (G - G.T)


def random_symmetric(rng: np.random.Generator, n: int) -> np.ndarray:
    G = random_matrix(rng, n)
    return 0.5 * (G + G.T)


def random_quasi_skew(rng: np.random.Generator, n: int, eps: float) -> np.ndarray:
    """``S + eps B`` with ``S`` skew and ``B`` symmetric, both uniform-entry."""
    return random_skew(rng, n) + eps * random_symmetric(rng, n)


QUASI_SKEW_EPS = (0.01, 0.1, 1.0)


@dataclass
class IdentityCheck:
    name: str
    anchor: str
    residual: float
    threshold: float
    cases: int

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.threshold)


def _transmutator_family(Lie: np.ndarray):
    """``L_eps``/``R_eps`` built from resolvents of ``+-Lie`` and ``+-Lie*``."""
    n = Lie.shape[0]
    I = np.eye(n)
    Z = np.zeros((n, n))

    def L(e):
        return np.block([[np.linalg.inv(I - e * Lie.T), Z], [Z, np.linalg.inv(I + e * Lie)]])

    def R(e):
        return np.block([[np.linalg.inv(I + e * Lie), Z], [Z, np.linalg.inv(I - e * Lie.T)]])

    return L, R


def run_identity_suite(n_cases: int = 1000, seed: int = 0, sizes: Sequence[int] = (3, 4, 5, 6, 8)) -> list[IdentityCheck]:
    """Randomized checks of the commutator/transmutator identities.

    Each check runs ``n_cases`` independently generated cases and reports the
    largest residual.  Generation is fully determined by ``seed``.
    """
    rng = np.random.default_rng(seed)
    worst = {
        "resolvent_commutator": 0.0,
        "weak_equals_strong": 0.0,
        "skew_decomposition": 0.0,
        "transmutator_adjoint": 0.0,
        "resolvent_convergence": 0.0,
    }
    for i in range(n_cases):
        n = sizes[i % len(sizes)]
        eps = QUASI_SKEW_EPS[i % len(QUASI_SKEW_EPS)]
        C = random_quasi_skew(rng, n, eps)
        alpha = random_symmetric(rng, n)
        bnorm = np.linalg.norm(sym_part(C), 2)
        eta = rng.uniform(0.0, 0.5 / max(bnorm, 1e-12))
        eta = min(eta, 1.0)
        if np.linalg.cond(np.eye(n) + eta * C) > 1e8:
            eta *= 0.5
        R = resolvent(C, eta)
        lhs = commutator(R, alpha)
        rhs = eta * R @ commutator(alpha, C) @ R
        worst["resolvent_commutator"] = max(worst["resolvent_commutator"], float(np.linalg.norm(lhs - rhs, 2)))

        worst["weak_equals_strong"] = max(
            worst["weak_equals_strong"], verify_weak_equals_strong(C, random_matrix(rng, n))
        )

        rep = verify_skew_decomposition(alpha, C)
        worst["skew_decomposition"] = max(worst["skew_decomposition"], rep.max_residual)

        D = random_skew(rng, 2 * n)
        Cb = random_quasi_skew(rng, 2 * n, eps)
        Lf, Rf = _transmutator_family(random_quasi_skew(rng, n, eps))
        e = float(rng.uniform(0.01, 0.2) / (1.0 + bnorm))
        srep = verify_sum_theorem(Cb, D, Lf, Rf, eps=(e,), samples=np.eye(2 * n)[:, :2])
        worst["transmutator_adjoint"] = max(worst["transmutator_adjoint"], srep.max_adjoint_residual)

        x = rng.uniform(-1.0, 1.0, n)
        gap, bound = resolvent_convergence_gap(C, eta, x)
        worst["resolvent_convergence"] = max(worst["resolvent_convergence"], gap - bound)

    anchors = {
        "resolvent_commutator": "[(1+hC)^-1, a] = h (1+hC)^-1 [a,C] (1+hC)^-1",
        "weak_equals_strong": "aC = Ca + [a,C]; [a,C]* = [C*,a*]; (aC)* = a*C* + [C*,a*]",
        "skew_decomposition": "skew(aC) = aC - a sym(C) - [C*,a]/2, antisymmetric",
        "transmutator_adjoint": "[R*,(C+D)*,L*] = -[L,C+D,R]*",
        "resolvent_convergence": "||(1+hC)^-1 x - x|| <= h ||(1+hC)^-1|| ||Cx||",
    }
    thresholds = {key: 1e-12 for key in worst}
    thresholds["resolvent_convergence"] = 1e-12
    return [
        IdentityCheck(name, anchors[name], worst[name], thresholds[name], n_cases)
        for name in worst
    ]
