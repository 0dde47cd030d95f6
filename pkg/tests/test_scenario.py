import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from driftwave import __version__
from driftwave.cli import main
from driftwave.scenario import (
    SCHEMA,
    ConfigError,
    Expression,
    ExpressionError,
    parse_config,
    parse_config_text,
    run,
    suggest_key,
)

DEMOS = Path(__file__).resolve().parent.parent / "demos" / "configs"

MINIMAL_CARTESIAN = """
mode = simulate_cartesian
[grid]
nx = 16
ny = 16
nz = 16
[drift]
mach = 0.5
[time]
dt = 0.01
t_end = 1
"""


def levenshtein(a, b):
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


# -- parsing -----------------------------------------------------------------


def test_minimal_cartesian_config():
    cfg = parse_config_text(MINIMAL_CARTESIAN)
    assert cfg.mode == "simulate_cartesian"
    assert cfg.mach == 0.5 and cfg.dt == 0.01 and cfg.t_end == 1.0
    assert cfg.seed == 0
    g = cfg.build_grid()
    assert g.counts == (16, 16, 16) and g.fully_periodic


def test_dt_larger_than_horizon():
    text = MINIMAL_CARTESIAN.replace("dt = 0.01", "dt = 2")
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    msg = str(info.value)
    assert "time.dt" in msg and "time.t_end" in msg


def test_unknown_key_suggestion():
    with pytest.raises(ConfigError) as info:
        parse_config_text(MINIMAL_CARTESIAN.replace("mach = 0.5", "machh = 0.5"))
    assert "unknown key 'machh' in [drift]; did you mean 'mach'?" in info.value.errors


@given(st.sampled_from(sorted((s, k) for s in SCHEMA for k in SCHEMA[s])), st.data())
def test_single_edit_typos_suggest_the_key(section_key, data):
    section, key = section_key
    known = list(SCHEMA[section])
    pos = data.draw(st.integers(0, len(key)))
    ch = data.draw(st.sampled_from("abcdefghijklmnopqrstuvwxyz_"))
    op = data.draw(st.sampled_from(["insert", "delete", "replace"]))
    if op == "insert":
        typo = key[:pos] + ch + key[pos:]
    elif op == "delete" and pos < len(key) and len(key) > 3:
        typo = key[:pos] + key[pos + 1 :]
    else:
        typo = key[: max(pos - 1, 0)] + ch + key[max(pos - 1, 0) + 1 :]
    dists = {k: levenshtein(typo, k) for k in known}
    best = min(dists.values())
    winners = [k for k, d in dists.items() if d == best]
    if typo in known or best != 1 or len(winners) != 1 or len(key) < 3:
        return
    assert suggest_key(typo, known) == winners[0]


def test_every_violation_is_listed():
    text = """
mode = simulate_manifold
degree = 7
[grid]
nx = 1
[time]
dt = -1
t_end = 1
[source]
kind = lightning
"""
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    errs = " | ".join(info.value.errors)
    for needle in ("degree", "nx", "time.dt", "source.kind"):
        assert needle in errs
    assert len(info.value.errors) >= 4


def test_missing_mode_and_file(tmp_path):
    with pytest.raises(ConfigError, match="mode"):
        parse_config_text("[time]\ndt = 0.1\nt_end = 1\n")
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "absent.ini")


def test_type_mismatch():
    with pytest.raises(ConfigError, match="grid.nx: expected an integer"):
        parse_config_text(MINIMAL_CARTESIAN.replace("nx = 16", "nx = sixteen"))


def test_cartesian_needs_torus():
    with pytest.raises(ConfigError, match="periodic"):
        parse_config_text(MINIMAL_CARTESIAN.replace("nz = 16", "nz = 16\naxial = truncated"))


def test_seed_defaults_to_zero_and_is_64_bit():
    assert parse_config_text("mode = verify_operators").seed == 0
    with pytest.raises(ConfigError, match="seed"):
        parse_config_text(f"mode = verify_operators\nseed = {2**64}")


# -- expressions -------------------------------------------------------------


def test_expression_evaluation():
    e = Expression.parse("1 + 0.5*sin(2*pi*z) - x**2")
    x, y, z = np.array([0.5]), np.array([0.0]), np.array([0.25])
    assert e(x, y, z)[0] == pytest.approx(1.5 - 0.25)
    assert Expression.parse("3").is_constant()
    assert not e.is_constant()


@pytest.mark.parametrize(
    "text", ["__import__('os')", "x.real", "[x]", "lambda: 1", "foo(x)", "sin(x, y)", "q + 1", "'a'"]
)
def test_expression_whitelist(text):
    with pytest.raises(ExpressionError):
        Expression.parse(text)


def test_bad_expression_reported_as_config_error():
    with pytest.raises(ConfigError, match="drift.alpha"):
        parse_config_text(MINIMAL_CARTESIAN.replace("mach = 0.5", "mach = 0.5\nalpha = open(x)"))


# -- running -----------------------------------------------------------------


def test_verify_operators_report(tmp_path):
    cfg = parse_config_text("mode = verify_operators\ncases = 50")
    res = run(cfg, tmp_path)
    assert res.exit_code == 0
    text = (tmp_path / "report.txt").read_text()
    for line in text.splitlines():
        if line.startswith(("PASS", "FAIL")):
            assert line.rstrip().endswith("]") and "[" in line  # anchor string present
    assert (tmp_path / "report.csv").read_text().startswith("name,anchor,residual")


def _files(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_verify_is_deterministic(tmp_path):
    cfg = parse_config_text("mode = verify_operators\ncases = 30\nseed = 5")
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_simulate_cartesian_supersonic(tmp_path):
    text = MINIMAL_CARTESIAN.replace("mach = 0.5", "mach = 1.5").replace("16", "8").replace("t_end = 1", "t_end = 0.5")
    res = run(parse_config_text(text), tmp_path)
    assert res.exit_code == 0
    rows = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    energy = rows[:, 2]
    assert energy.max() / energy.min() <= 1 + 1e-6
    assert (tmp_path / "spectral.csv").read_text().splitlines()[0] == "k1,k2,k3,freq_numeric,freq_analytic,rel_error"


def test_simulate_manifold_artifacts(tmp_path):
    text = """
mode = simulate_manifold
degree = 1
[grid]
nx = 4
ny = 4
nz = 6
[drift]
x0 = 0, 0, 1 + 0.3*sin(2*pi*z)
[material]
m1 = 0.05
[time]
dt = 0.05
t_end = 0.5
[source]
kind = random
"""
    res = run(parse_config_text(text), tmp_path)
    assert res.exit_code == 0, res.report.to_text()
    names = {p.name for p in res.artifacts}
    assert {"trajectory.csv", "report.txt", "report.csv", "u_final.bin", "w_final.bin"} <= names
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
    assert header == "step,time,energy,weighted_norm,support_radius"
    assert "weighted_bound" in (tmp_path / "report.txt").read_text()


def test_transform_at_mach_one_fails_numerically(tmp_path):
    res = run(parse_config(DEMOS / "manifold_transform_sonic.ini"), tmp_path)
    assert res.exit_code == 3
    assert "singular transform" in res.message


# -- command line ------------------------------------------------------------


def test_cli_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text(MINIMAL_CARTESIAN.replace("mach", "machh"))
    assert main(["simulate", "--config", str(bad)]) == 2
    assert "did you mean 'mach'" in capsys.readouterr().err
    ops = tmp_path / "ops.ini"
    ops.write_text("mode = verify_operators\ncases = 10\n")
    assert main(["simulate", "--config", str(ops)]) == 2
    assert main(["verify", "--config", str(ops), "--seed", "3", "--out", str(tmp_path / "o")]) == 0
    assert main(["simulate", "--config", str(DEMOS / "manifold_transform_sonic.ini"), "--out", str(tmp_path / "s")]) == 3
    assert "singular transform" in capsys.readouterr().err


def test_cli_check_failure_exit_code(tmp_path, monkeypatch):
    import driftwave.scenario as scenario
    from driftwave.operator_algebra import IdentityCheck

    monkeypatch.setattr(
        scenario, "run_identity_suite", lambda n, s: [IdentityCheck("broken", "a = b", 1.0, 1e-12, n)]
    )
    ops = tmp_path / "ops.ini"
    ops.write_text("mode = verify_operators\n")
    assert main(["verify", "--config", str(ops), "--out", str(tmp_path / "o")]) == 1


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "driftwave", "--version"], capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == f"driftwave {__version__}"
