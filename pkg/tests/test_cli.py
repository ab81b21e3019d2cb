import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

from kcocontact.cli import main
from kcocontact.config import parse_config
from kcocontact.errors import ConfigError
from kcocontact.lagrangian import LagrangianSystem

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(command, name, out, *extra):
    return main([command, str(CONFIGS / name), "--out", str(out), *extra])


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


MINIMAL = """
system:
  side: hamiltonian
  k: 1
  n: 1
  h: "0.5*p**2 + 0.5*q**2 + 0.2*z"
sample:
  seed: 1
  count: 3
solver:
  kind: k1
  x0: [0, 1, 0, 0]
  T: 1.0
  dt: 0.01
"""


def test_shipped_wave_config_matches_string_lagrangian():
    cfg = parse_config((CONFIGS / "wave.yaml").read_text())
    assert isinstance(cfg.system, LagrangianSystem)
    assert cfg.signature.k == 2 and cfg.signature.n == 1
    for x in cfg.samples[:10]:
        t, u = x.t[0], x.q[0]
        ut, ux = x.fiber[0]
        zt = x.z[0]
        expected = 0.5 * ut**2 - 0.5 * ux**2 - math.sin(t) * u - 0.1 * zt
        assert cfg.system.L(x) == pytest.approx(expected, abs=1e-14)
    assert len(cfg.samples) == 100


def test_config_validation_errors():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace("  seed: 1\n", ""))
    assert info.value.key == "sample.seed"
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "system:\n  k: 1\n")
    assert "duplicate" in str(info.value) and info.value.line is not None
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace("  count: 3", "  count: 3\n  colour: red"))
    assert info.value.key == "sample.colour"
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "tolerances:\n  kvector_residual: -1\n")
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "tolerances:\n  nonsense: 1\n")
    with pytest.raises(ConfigError) as info:
        parse_config("system: [1, 2\n")
    assert info.value.line is not None


def test_check_exit_codes(tmp_path):
    assert run("check", "canonical.yaml", tmp_path / "a") == 0
    assert run("check", "wave.yaml", tmp_path / "b") == 0
    assert run("check", "degenerate.yaml", tmp_path / "c") == 1
    report = json.loads((tmp_path / "c" / "axioms.json").read_text())
    assert not report["passed"]
    assert "3:deta_kernel_2k" in report["failed_conditions"]


def test_unwritable_output_is_operational(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run("check", "canonical.yaml", blocker / "sub") == 2
    assert main(["check", str(tmp_path / "missing.yaml")]) == 2


def test_missing_seed_and_duplicate_block_exit_two(tmp_path):
    assert main(["check", str(write(tmp_path, MINIMAL.replace("  seed: 1\n", ""))), "--out", str(tmp_path)]) == 2
    assert main(["check", str(write(tmp_path, MINIMAL + "system: {}\n", "dup.yaml")), "--out", str(tmp_path)]) == 2


def test_derive_hamiltonian_matches_hand_values(tmp_path):
    assert run("derive", "wave_hamiltonian.yaml", tmp_path) == 0
    rows = json.loads((tmp_path / "derive.json").read_text())["points"]
    for row in rows:
        p = row["point"]
        t, u, pt, px, zt = p["t1"], p["q1"], p["p1_1"], p["p1_2"], p["z1"]
        det = row["determined"]
        assert det["B"] == [[pt], [-px]]
        assert det["trace_C"][0] == pytest.approx(-math.sin(t) - 0.1 * pt, abs=1e-14)
        assert det["trace_D"] == pytest.approx(0.5 * pt**2 - 0.5 * px**2 - math.sin(t) * u - 0.1 * zt, abs=1e-14)


def test_derive_k1_has_no_gauge_and_seed_does_not_change_fixed_points(tmp_path):
    assert run("derive", "oscillator.yaml", tmp_path / "k1") == 0
    rows = json.loads((tmp_path / "k1" / "derive.json").read_text())["points"]
    assert all(r["gauge"] is None for r in rows)
    text = (CONFIGS / "wave_hamiltonian.yaml").read_text()
    for seed in ("1", "2"):
        cfg = write(tmp_path, text.replace("seed: 13", f"seed: {seed}"), f"s{seed}.yaml")
        assert main(["derive", str(cfg), "--out", str(tmp_path / seed)]) == 0
    assert (tmp_path / "1" / "derive.json").read_bytes() == (tmp_path / "2" / "derive.json").read_bytes()


def test_simulate_verify_traveling_wave(tmp_path):
    assert run("simulate", "traveling_wave.yaml", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["l2_error"] <= 5e-3
    header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,x,u,u_t,u_x,z_t,energy,dissipation"
    assert run("verify", "traveling_wave.yaml", tmp_path) == 0
    result = json.loads((tmp_path / "verify.json").read_text())
    assert result["passed"] and "hdw.q" in result["groups"]


def test_verify_without_trajectory_and_with_tight_tolerance(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    assert main(["verify", str(cfg), "--out", str(tmp_path / "empty")]) == 2
    tight = write(tmp_path, MINIMAL + "tolerances:\n  section_residual: 1.0e-14\n", "tight.yaml")
    out = tmp_path / "run"
    assert main(["simulate", str(tight), "--out", str(out)]) == 0
    assert main(["verify", str(tight), "--out", str(out)]) == 1


def test_converge_wave_reports_second_order(tmp_path):
    assert run("converge", "traveling_wave.yaml", tmp_path) == 0
    table = json.loads((tmp_path / "convergence.json").read_text())
    for name in ("el_residual", "l2_error"):
        assert all(abs(o - 2) <= 0.3 for o in table["orders"][name])
    lines = (tmp_path / "convergence.csv").read_text().splitlines()
    assert len(lines) == 5


def test_converge_needs_three_levels(tmp_path):
    cfg = write(tmp_path, MINIMAL + "  levels: [0.1, 0.05]\n")
    assert main(["converge", str(cfg), "--out", str(tmp_path)]) == 2


def test_outputs_are_bitwise_reproducible(tmp_path):
    for attempt in ("a", "b"):
        assert run("simulate", "traveling_wave.yaml", tmp_path / attempt) == 0
        assert run("derive", "wave.yaml", tmp_path / attempt) == 0
    for name in ("trajectory.csv", "summary.json", "derive.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_csv_precision_roundtrips(tmp_path):
    assert run("simulate", "oscillator.yaml", tmp_path) == 0
    data = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    assert data.shape[1] == 4 and os.path.getsize(tmp_path / "trajectory.csv") > 0
    assert data[-1, 0] == pytest.approx(20.0, abs=1e-12)
