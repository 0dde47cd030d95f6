"""Scenario configuration files and their execution.

A scenario is a plain-text file of ``key = value`` lines.  Keys before the
first ``[section]`` header belong to the top level; ``#`` starts a comment.
Example::

    mode = simulate_cartesian
    seed = 0

    [grid]
    nx = 16
    ny = 16
    nz = 16

    [drift]
    mach = 0.5

    [time]
    dt = 0.01
    t_end = 1

Field-valued entries (``alpha``, ``m0``, ``m1``, the drift components and the
source term) accept a small arithmetic language over ``x, y, z`` (and ``t``
for sources) with ``+ - * / **``, ``sin cos exp sqrt tanh abs`` and the
constants ``pi`` and ``e``.
"""

from __future__ import annotations

import ast
import configparser
import difflib
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .cartesian import (
    CartesianScenario,
    IndefiniteMaterialWarning,
    SingularTransformError,
    check_bi_isotropic,
    friedrichs_cartesian_simulate,
    plane_wave_initial,
)
from .cochain_io import format_float, write_cochain, write_table
from .evolution import (
    DriftSpec,
    SolverError,
    bi_isotropic_manifold_M0,
    build_system,
    point_source_state,
    simulate,
)
from .exterior_calculus import CylinderGrid, GridError, VectorFieldSample
from .operator_algebra import IdentityCheck, run_identity_suite
from .verification import run_calculus_suite, run_skew_suite

log = logging.getLogger(__name__)

MODES = ("verify_operators", "verify_calculus", "simulate_manifold", "simulate_cartesian")
TOP = "general"

# section -> key -> (type, default); REQUIRED marks keys without default
REQUIRED = object()
SCHEMA: dict[str, dict[str, tuple[str, Any]]] = {
    TOP: {
        "mode": ("str", REQUIRED),
        "seed": ("int", 0),
        "degree": ("int", 0),
        "out": ("str", ""),
        "cases": ("int", 1000),
    },
    "grid": {
        "nx": ("int", 8),
        "ny": ("int", 8),
        "nz": ("int", 8),
        "lx": ("float", 1.0),
        "ly": ("float", 1.0),
        "lz": ("float", 1.0),
        "axial": ("str", "periodic"),
        "lateral": ("str", None),
        "variant": ("str", None),
    },
    "drift": {
        "mach": ("float", 0.0),
        "x0": ("expr3", None),
        "alpha": ("expr", "1"),
        "formulation": ("str", "direct"),
    },
    "material": {
        "m0": ("expr", "1"),
        "m1": ("expr", "0"),
    },
    "time": {
        "dt": ("float", REQUIRED),
        "t_end": ("float", REQUIRED),
        "rho": ("float", None),
    },
    "source": {
        "kind": ("str", "none"),
        "amplitude": ("float", 1.0),
        "center": ("float3", None),
        "expression": ("expr", None),
        "threshold": ("float", 1e-9),
    },
}
TIME_MODES = ("simulate_manifold", "simulate_cartesian")
SOURCE_KINDS = ("none", "point", "random", "expression", "modes")


class ConfigError(ValueError):
    """Invalid scenario file; ``errors`` lists every violation found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.errors))


# -- expressions -------------------------------------------------------------

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "tanh": np.tanh, "abs": np.abs}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}
_UNOPS = {ast.UAdd: np.positive, ast.USub: np.negative}


class ExpressionError(ValueError):
    pass


@dataclass(frozen=True)
class Expression:
    """A parsed field expression; call with arrays for its variables."""

    text: str
    variables: tuple[str, ...] = ("x", "y", "z")
    tree: ast.AST = field(default=None, compare=False, repr=False)

    @classmethod
    def parse(cls, text: str, variables=("x", "y", "z")) -> "Expression":
        try:
            tree = ast.parse(text.strip(), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from None
        for node in ast.walk(tree):
            _check_node(node, variables)
        return cls(text.strip(), tuple(variables), tree)

    def __call__(self, *args):
        env = dict(zip(self.variables, args))
        return _eval(self.tree.body, env)

    def is_constant(self) -> bool:
        return not any(isinstance(n, ast.Name) and n.id in self.variables for n in ast.walk(self.tree))


def _check_node(node: ast.AST, variables) -> None:
    allowed = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name, ast.Call, ast.Load)
    allowed += tuple(_BINOPS) + tuple(_UNOPS)
    if not isinstance(node, allowed):
        raise ExpressionError(f"unsupported syntax: {type(node).__name__}")
    if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
        raise ExpressionError(f"unsupported literal {node.value!r}")
    if isinstance(node, ast.Name) and node.id not in variables and node.id not in _CONSTS and node.id not in _FUNCS:
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError("only sin, cos, exp, sqrt, tanh and abs may be called")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")


def _eval(node, env):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id] if node.id in env else _CONSTS[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNOPS[type(node.op)](_eval(node.operand, env))
    return _FUNCS[node.func.id](_eval(node.args[0], env))


def _split_top_level(text: str) -> list[str]:
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    parts.append(cur)
    return [p.strip() for p in parts]


# -- configuration -----------------------------------------------------------


@dataclass
class ScenarioConfig:
    mode: str
    seed: int = 0
    degree: int = 0
    out: str = ""
    cases: int = 1000
    grid: dict = field(default_factory=dict)
    variant: str = "dirichlet"
    mach: float = 0.0
    x0: tuple[Expression, Expression, Expression] | None = None
    alpha: Expression = field(default_factory=lambda: Expression.parse("1"))
    formulation: str = "direct"
    m0: Expression = field(default_factory=lambda: Expression.parse("1"))
    m1: Expression = field(default_factory=lambda: Expression.parse("0"))
    dt: float | None = None
    t_end: float | None = None
    rho: float | None = None
    source_kind: str = "none"
    amplitude: float = 1.0
    center: tuple[float, float, float] | None = None
    expression: Expression | None = None
    threshold: float = 1e-9

    def build_grid(self) -> CylinderGrid:
        return CylinderGrid(**self.grid)


def suggest_key(key: str, known) -> str | None:
    match = difflib.get_close_matches(key, sorted(known), n=1, cutoff=0.6)
    return match[0] if match else None


def _convert(kind: str, raw: str, variables=("x", "y", "z")):
    if kind == "int":
        return int(raw, 0)
    if kind == "float":
        return float(raw)
    if kind == "str":
        return raw.strip()
    if kind == "expr":
        return Expression.parse(raw, variables)
    if kind == "expr3":
        parts = _split_top_level(raw)
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated components, got {len(parts)}")
        return tuple(Expression.parse(p, variables) for p in parts)
    if kind == "float3":
        parts = [float(p) for p in raw.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated numbers, got {len(parts)}")
        return tuple(parts)
    raise AssertionError(kind)


_TYPE_NAMES = {
    "int": "an integer",
    "float": "a number",
    "str": "a string",
    "expr": "a field expression",
    "expr3": "three field expressions",
    "float3": "three numbers",
}


def parse_config_text(text: str) -> ScenarioConfig:
    """Parse and validate scenario text; see :func:`parse_config`."""
    cp = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), comment_prefixes=("#",), strict=True
    )
    try:
        cp.read_string(f"[{TOP}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax error: {exc.message if hasattr(exc, 'message') else exc}"]) from None
    errors: list[str] = []
    values: dict[str, dict[str, Any]] = {s: {} for s in SCHEMA}
    for section in cp.sections():
        if section not in SCHEMA:
            hint = suggest_key(section, SCHEMA)
            errors.append(f"unknown section [{section}]" + (f"; did you mean [{hint}]?" if hint else ""))
            continue
        spec = SCHEMA[section]
        for key, raw in cp.items(section):
            if key not in spec:
                hint = suggest_key(key, spec)
                where = "top level" if section == TOP else f"[{section}]"
                errors.append(f"unknown key '{key}' in {where}" + (f"; did you mean '{hint}'?" if hint else ""))
                continue
            kind = spec[key][0]
            variables = ("t", "x", "y", "z") if (section, key) == ("source", "expression") else ("x", "y", "z")
            try:
                values[section][key] = _convert(kind, raw, variables)
            except (ValueError, ExpressionError) as exc:
                errors.append(f"{_label(section, key)}: expected {_TYPE_NAMES[kind]}, got {raw!r} ({exc})")

    def get(section, key):
        if key in values[section]:
            return values[section][key]
        kind, default = SCHEMA[section][key]
        if default is REQUIRED:
            return None
        return Expression.parse(default) if kind == "expr" and isinstance(default, str) else default

    mode = get(TOP, "mode")
    if mode is None:
        errors.append("mode: required")
    elif mode not in MODES:
        errors.append(f"mode: must be one of {', '.join(MODES)}, got {mode!r}")
    if mode in TIME_MODES:
        for key in ("dt", "t_end"):
            if key not in values["time"]:
                errors.append(f"{_label('time', key)}: required for mode {mode}")
    dt, t_end = get("time", "dt"), get("time", "t_end")
    if dt is not None and dt <= 0:
        errors.append(f"time.dt: must be positive, got {dt}")
    if dt is not None and t_end is not None and dt > t_end:
        errors.append(f"time.dt ({dt}) must not exceed time.t_end ({t_end})")
    seed = get(TOP, "seed")
    if isinstance(seed, int) and not 0 <= seed < 2**64:
        errors.append(f"seed: must be a 64-bit unsigned integer, got {seed}")
    degree = get(TOP, "degree")
    if isinstance(degree, int) and not 0 <= degree <= 2:
        errors.append(f"degree: must lie in 0..2, got {degree}")
    if get(TOP, "cases") is not None and get(TOP, "cases") < 1:
        errors.append("cases: must be at least 1")

    formulation = get("drift", "formulation")
    if formulation not in ("direct", "transform"):
        errors.append(f"drift.formulation: must be 'direct' or 'transform', got {formulation!r}")
    if formulation == "transform" and mode == "simulate_manifold" and degree != 0:
        errors.append("drift.formulation = transform needs degree = 0 (pressure and velocity)")
    if formulation == "transform" and values["drift"].get("x0") is not None:
        errors.append("drift.formulation = transform needs a uniform axial drift (mach), not drift.x0")
    kind = get("source", "kind")
    if kind not in SOURCE_KINDS:
        errors.append(f"source.kind: must be one of {', '.join(SOURCE_KINDS)}, got {kind!r}")
    if kind == "expression" and get("source", "expression") is None:
        errors.append("source.expression: required when source.kind = expression")

    lateral = get("grid", "lateral")
    if lateral is None:
        lateral = "periodic" if mode == "simulate_cartesian" else "bounded"
    variant = get("grid", "variant")
    if variant is None:
        variant = "full" if lateral == "periodic" else "dirichlet"
    grid = {k: get("grid", k) for k in ("nx", "ny", "nz", "lx", "ly", "lz", "axial")}
    grid["lateral"] = lateral
    if mode == "simulate_cartesian" and (lateral != "periodic" or grid["axial"] != "periodic"):
        errors.append("grid: simulate_cartesian needs axial = periodic and lateral = periodic")
    if variant not in ("full", "dirichlet"):
        errors.append(f"grid.variant: must be 'full' or 'dirichlet', got {variant!r}")
    try:
        CylinderGrid(**grid)
    except (GridError, ValueError, TypeError) as exc:
        errors.append(f"grid: {exc}")

    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(
        mode=mode,
        seed=seed,
        degree=degree,
        out=get(TOP, "out"),
        cases=get(TOP, "cases"),
        grid=grid,
        variant=variant,
        mach=get("drift", "mach"),
        x0=get("drift", "x0"),
        alpha=get("drift", "alpha"),
        formulation=formulation,
        m0=get("material", "m0"),
        m1=get("material", "m1"),
        dt=dt,
        t_end=t_end,
        rho=get("time", "rho"),
        source_kind=kind,
        amplitude=get("source", "amplitude"),
        center=get("source", "center"),
        expression=get("source", "expression"),
        threshold=get("source", "threshold"),
    )


def _label(section: str, key: str) -> str:
    return key if section == TOP else f"{section}.{key}"


def parse_config(path) -> ScenarioConfig:
    """Read and validate a scenario file.

    Raises
    ------
    ConfigError
        Listing every problem found (unknown keys come with the nearest
        valid key as a suggestion).
    """
    p = Path(path)
    if not p.is_file():
        raise ConfigError([f"config file not found: {p}"])
    return parse_config_text(p.read_text())


# -- reports -----------------------------------------------------------------


@dataclass
class VerificationReport:
    title: str
    checks: list[IdentityCheck]
    diagnostics: list[tuple[str, float]] = field(default_factory=list)

    @property
    def n_passed(self) -> int:
        return sum(c.passed for c in self.checks)

    @property
    def passed(self) -> bool:
        return self.n_passed == len(self.checks)

    def to_text(self) -> str:
        lines = [f"{self.title} (driftwave {__version__})", ""]
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(
                f"{status}  {c.name:<24} residual={format_float(c.residual):<24} "
                f"threshold={format_float(c.threshold):<8} cases={c.cases}  [{c.anchor}]"
            )
        if self.diagnostics:
            lines.append("")
            lines.extend(f"diagnostic  {name} = {format_float(value)}" for name, value in self.diagnostics)
        lines.append("")
        lines.append(f"summary: {self.n_passed}/{len(self.checks)} checks passed")
        return "\n".join(lines) + "\n"

    def write(self, out: Path) -> list[Path]:
        out.mkdir(parents=True, exist_ok=True)
        txt, csvp = out / "report.txt", out / "report.csv"
        txt.write_text(self.to_text())
        write_table(
            csvp,
            ["name", "anchor", "residual", "threshold", "cases", "passed"],
            [[c.name, c.anchor, float(c.residual), float(c.threshold), c.cases, int(c.passed)] for c in self.checks],
        )
        return [txt, csvp]


@dataclass
class RunResult:
    exit_code: int
    artifacts: list[Path]
    report: VerificationReport | None = None
    message: str = ""


# -- running -----------------------------------------------------------------


def _vertex_field(expr: Expression, grid: CylinderGrid) -> np.ndarray:
    x, y, z = grid.vertex_coordinates()
    return np.broadcast_to(np.asarray(expr(x, y, z), dtype=float), x.shape).copy()


def _drift_field(cfg: ScenarioConfig, grid: CylinderGrid) -> VectorFieldSample:
    if cfg.x0 is None:
        return VectorFieldSample.constant(grid, (0.0, 0.0, cfg.mach))
    x, y, z = grid.vertex_coordinates()
    return VectorFieldSample(
        grid, np.stack([np.broadcast_to(np.asarray(e(x, y, z), float), x.shape) for e in cfg.x0])
    )


def _per_dof(values_by_degree, grid, k, variant) -> np.ndarray:
    parts = []
    for j in (k, k + 1):
        v = grid.cochain_from_vertex_field(values_by_degree, j)
        parts.append(v if variant == "full" else v[grid.interior_mask(j)])
    return np.concatenate(parts)


def _center(cfg: ScenarioConfig, grid: CylinderGrid):
    return cfg.center if cfg.center is not None else tuple(0.5 * L for L in grid.lengths)


def _run_verify(cfg: ScenarioConfig, out: Path) -> RunResult:
    if cfg.mode == "verify_operators":
        report = VerificationReport("operator identity suite", run_identity_suite(cfg.cases, cfg.seed))
    else:
        checks = run_calculus_suite(seed=cfg.seed) + run_skew_suite()
        report = VerificationReport("exterior calculus suite", checks)
    files = report.write(out)
    return RunResult(0 if report.passed else 1, files, report)


def _run_manifold(cfg: ScenarioConfig, out: Path) -> RunResult:
    grid = cfg.build_grid()
    k, variant = cfg.degree, cfg.variant
    m1 = _per_dof(_vertex_field(cfg.m1, grid), grid, k, variant)
    if cfg.formulation == "transform":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IndefiniteMaterialWarning)
            M0 = bi_isotropic_manifold_M0(grid, cfg.mach, variant)
        status = check_bi_isotropic(cfg.mach)
        if status.indefinite:
            raise SingularTransformError(f"M0 indefinite for |v0| = {abs(cfg.mach):g}; use the direct formulation")
        drift = None
    else:
        M0 = _per_dof(_vertex_field(cfg.m0, grid), grid, k, variant)
        drift = DriftSpec(_drift_field(cfg, grid), _vertex_field(cfg.alpha, grid))
    system = build_system(grid, k, drift, M0, m1, variant)
    rng = np.random.default_rng(cfg.seed)
    origin = _center(cfg, grid)
    x0, source = None, None
    if cfg.source_kind == "point":
        x0 = cfg.amplitude * point_source_state(system, origin)
    elif cfg.source_kind == "random":
        nsteps = int(round(cfg.t_end / cfg.dt))
        source = cfg.amplitude * rng.standard_normal((nsteps, system.size))
    elif cfg.source_kind == "modes":
        x0 = cfg.amplitude * rng.standard_normal(system.size)
    elif cfg.source_kind == "expression":
        pos = system.dof_positions()
        scale = 1.0 / system.field_scale()
        expr = cfg.expression
        nu = system.n_u

        def source(t):
            f = np.zeros(system.size)
            f[:nu] = expr(t, pos[:nu, 0], pos[:nu, 1], pos[:nu, 2]) * scale[:nu]
            return cfg.amplitude * f

    traj = simulate(system, cfg.dt, cfg.t_end, x0=x0, source=source, rho=cfg.rho, origin=origin, threshold=cfg.threshold)
    out.mkdir(parents=True, exist_ok=True)
    tpath = out / "trajectory.csv"
    write_table(
        tpath,
        ["step", "time", "energy", "weighted_norm", "support_radius"],
        [
            [i, float(traj.times[i]), float(traj.energy[i]), float(traj.weighted_norm[i]), float(traj.support_radius[i])]
            for i in range(traj.times.size)
        ],
    )
    inv = system.invariants()
    checks = [
        IdentityCheck("M0_symmetry", "M0 = M0^T under the mass", inv["M0_symmetry"], 1e-12, 1),
        IdentityCheck("A_skewness", "A = D + [[0,-d*],[d,0]] skew", inv["A_skewness"], 1e-10, 1),
        IdentityCheck("rho0_margin", "rho0 c - ||M1~|| >= 1", max(0.0, 1.0 - inv["rho0_margin"]), 1e-10, 1),
    ]
    if traj.forcing_norm[-1] > 0:
        checks.append(
            IdentityCheck(
                "weighted_bound",
                "||u||_rho <= ||F||_rho / c",
                traj.weighted_ratio * system.c,
                1.05,
                1,
            )
        )
    diagnostics = [
        ("rho0", system.rho0),
        ("rho", traj.rho),
        ("c", system.c),
        ("energy_initial", float(traj.energy[0])),
        ("energy_final", float(traj.energy[-1])),
    ]
    if cfg.source_kind == "point":
        excess = traj.support_radius - system.causal_envelope(traj.times)
        diagnostics += [
            ("max_support_radius", float(traj.support_radius.max())),
            ("causal_envelope_excess", float(excess.max())),
        ]
    report = VerificationReport(f"manifold simulation, degree {k}, {cfg.formulation} formulation", checks, diagnostics)
    files = [tpath] + report.write(out)
    state = system.split(traj.final)
    for name, c in (("u_final.bin", state.u), ("w_final.bin", state.w)):
        write_cochain(out / name, c)
        files.append(out / name)
    return RunResult(0 if report.passed else 1, files, report)


def _run_cartesian(cfg: ScenarioConfig, out: Path) -> RunResult:
    grid = cfg.build_grid()
    rng = np.random.default_rng(cfg.seed)
    modes = [(0, 0, 1), (1, 0, 1), (0, 1, 2)]
    initial = None
    source = None
    if cfg.source_kind in ("modes", "none"):
        initial = cfg.amplitude * plane_wave_initial(grid, cfg.mach, modes, rng)
    elif cfg.source_kind == "point":
        initial = np.zeros((4, *grid.counts))
        idx = tuple(int(round(c / h)) % n for c, h, n in zip(_center(cfg, grid), grid.spacings, grid.counts))
        initial[(0, *idx)] = cfg.amplitude
    elif cfg.source_kind == "random":
        nsteps = int(round(cfg.t_end / cfg.dt))
        source = cfg.amplitude * rng.standard_normal((nsteps, *grid.counts))
    elif cfg.source_kind == "expression":
        expr = cfg.expression

        def source(t, x, y, z):
            return cfg.amplitude * expr(t, x, y, z)

    if cfg.formulation == "transform":
        check = check_bi_isotropic(cfg.mach)
        if check.singular:
            raise SingularTransformError(f"singular transform: |v0| = {abs(cfg.mach):g}")
    sc = CartesianScenario(
        cfg.mach, grid, cfg.dt, cfg.t_end, source=source, initial=initial, modes=modes,
        origin=_center(cfg, grid), threshold=cfg.threshold,
    )
    traj, spectrum = friedrichs_cartesian_simulate(sc)
    rho = 2.0 if cfg.rho is None else cfg.rho
    out.mkdir(parents=True, exist_ok=True)
    tpath = out / "trajectory.csv"
    wn = traj.weighted_norm(rho)
    write_table(
        tpath,
        ["step", "time", "energy", "weighted_norm", "support_radius"],
        [
            [i, float(traj.times[i]), float(traj.energy[i]), float(wn[i]), float(traj.support_radius[i])]
            for i in range(traj.times.size)
        ],
    )
    spath = out / "spectral.csv"
    write_table(
        spath,
        ["k1", "k2", "k3", "freq_numeric", "freq_analytic", "rel_error"],
        [[r.k1, r.k2, r.k3, r.freq_numeric, r.freq_analytic, r.rel_error] for r in spectrum],
    )
    checks = []
    if source is None:
        checks.append(
            IdentityCheck("energy_conservation", "(d/dt) <u,u> = 0 for a skew symbol", traj.energy_ratio - 1.0, 1e-6, 1)
        )
    material = check_bi_isotropic(cfg.mach)
    diagnostics = [
        ("v0", cfg.mach),
        ("energy_initial", float(traj.energy[0])),
        ("energy_final", float(traj.energy[-1])),
        ("max_spectral_rel_error", max((r.rel_error for r in spectrum), default=0.0)),
        ("transform_M0_min_eig", float(material.eigenvalues.min()) if material.eigenvalues is not None else 0.0),
    ]
    report = VerificationReport(f"Cartesian simulation, v0 = {cfg.mach:g}", checks, diagnostics)
    return RunResult(0 if report.passed else 1, [tpath, spath] + report.write(out), report)


def run(cfg: ScenarioConfig, out: str | Path | None = None) -> RunResult:
    """Execute a scenario and write its artifacts.

    Exit codes: 0 success, 1 failed check, 3 numerical failure (singular
    transform, solver breakdown).
    """
    out = Path(out or cfg.out or "driftwave-out")
    try:
        if cfg.mode.startswith("verify"):
            return _run_verify(cfg, out)
        if cfg.mode == "simulate_manifold":
            return _run_manifold(cfg, out)
        return _run_cartesian(cfg, out)
    except (SingularTransformError, SolverError, np.linalg.LinAlgError) as exc:
        return RunResult(3, [], None, str(exc))
