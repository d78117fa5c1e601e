import os

import numpy as np
import pytest

from mhd2d.cli import main, parse_config
from mhd2d.errors import ConfigError

MINIMAL = """
[grid]
nx = 16
ny = 16

[time]
dt = 1e-3
T = 0.01
"""


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_parse_minimal_defaults(tmp_path):
    rc = parse_config(_write(tmp_path, MINIMAL))
    assert rc.solver.re == 1.0 and rc.solver.rm == 1.0 and rc.solver.s == 1.0
    assert rc.solver.n_modes is None
    assert rc.initial_u == "zero"


def test_parse_rejects_bad_dt(tmp_path):
    bad = MINIMAL.replace("dt = 1e-3", "dt = 0")
    with pytest.raises(ConfigError) as exc:
        parse_config(_write(tmp_path, bad))
    assert any("time.dt" in v for v in exc.value.violations)


def test_parse_collects_all_violations(tmp_path):
    text = """
[grid]
nx = 16
ny = 16
bogus = 1

[time]
dt = -1
T = 0.01

[nonsense]
foo = bar
"""
    with pytest.raises(ConfigError) as exc:
        parse_config(_write(tmp_path, text))
    joined = " | ".join(exc.value.violations)
    assert "grid.bogus" in joined
    assert "time.dt" in joined
    assert "[nonsense]" in joined


def test_parse_rejects_unknown_mode_and_experiment(tmp_path):
    text = MINIMAL + """
[boundary]
modes = vortex amp=1.0

[experiment]
id = not-a-thing
"""
    with pytest.raises(ConfigError) as exc:
        parse_config(_write(tmp_path, text))
    joined = " | ".join(exc.value.violations)
    assert "vortex" in joined and "not-a-thing" in joined


def test_config_round_trip(tmp_path):
    text = MINIMAL + """
[boundary]
modes = stream amp=0.15 kx=1 ky=2 env=cos p=2.0; constant amp=0.3 comp=2

[initial]
u = bump amp=0.5 kx=1 ky=1
b = matched

[galerkin]
n = 12
m = 4
"""
    rc1 = parse_config(_write(tmp_path, text))
    rc2 = parse_config(_write(tmp_path, rc1.to_text(), name="round.cfg"))
    assert rc1.solver == rc2.solver
    assert rc1.boundary_modes == rc2.boundary_modes
    assert rc1.initial_u == rc2.initial_u and rc1.initial_b == rc2.initial_b


def test_main_run_zero_scenario(tmp_path):
    cfg = _write(tmp_path, MINIMAL)
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--output-dir", str(out)]) == 0
    ledger = (out / "ledger.csv").read_text().splitlines()
    assert ledger[0].startswith("t,u_L2_sq")
    vals = np.array([float(v) for v in ledger[1].split(",")])
    assert np.all(vals[1:] == 0.0)
    assert (out / "final.mhdckpt").exists()


def test_main_config_error_exit_code(tmp_path):
    cfg = _write(tmp_path, MINIMAL.replace("dt = 1e-3", "dt = 0"))
    assert main(["run", "--config", cfg, "--output-dir", str(tmp_path / "o")]) == 2


def test_main_run_determinism(tmp_path):
    text = MINIMAL + """
[boundary]
modes = stream amp=0.1 kx=1 ky=1 env=cos p=2.0

[initial]
u = bump amp=0.4 kx=1 ky=1
b = matched
"""
    cfg = _write(tmp_path, text)
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert main(["run", "--config", cfg, "--output-dir", str(out)]) == 0
        outs.append((out / "ledger.csv").read_bytes() + (out / "final.mhdckpt").read_bytes())
    assert outs[0] == outs[1]


def test_main_experiment_and_summary(tmp_path):
    text = MINIMAL + """
[experiment]
id = identities
"""
    cfg = _write(tmp_path, text)
    out = tmp_path / "out"
    assert main(["experiment", "--config", cfg, "--output-dir", str(out)]) == 0
    assert (out / "report_identities.csv").exists()
    summary = (out / "summary.csv").read_text()
    assert summary.count("\nidentities,") == 3
    # a second invocation appends (reports are append-only)
    assert main(["experiment", "--config", cfg, "--output-dir", str(out)]) == 0
    assert (out / "summary.csv").read_text().count("\nidentities,") == 6


def test_main_experiment_gate_violation_exit_code(tmp_path):
    calib = tmp_path / "calib.txt"
    from mhd2d.estimates import CalibrationStore

    store = CalibrationStore()
    store.set("absorb_c1", 1e12, "synthetic")
    store.set("absorb_c0", 1.0, "synthetic")
    store.set("absorb_c_tilde", 1.25, "synthetic")
    store.set("absorb_c_omega", 1.0, "synthetic")
    store.write(calib)
    text = MINIMAL + f"""
[outputs]
calibration = {calib}

[experiment]
id = absorbing
variant = reference
"""
    cfg = _write(tmp_path, text)
    rcode = main(["experiment", "--config", cfg, "--output-dir", str(tmp_path / "o")])
    assert rcode == 4
    report = (tmp_path / "o" / "report_absorbing.csv").read_text()
    assert "smallness-gate" in report and ",0\n" in report


def test_main_experiment_requires_store(tmp_path):
    text = MINIMAL + """
[experiment]
id = absorbing
"""
    cfg = _write(tmp_path, text)
    assert main(["experiment", "--config", cfg, "--output-dir", str(tmp_path / "o")]) == 2


def test_main_basis_command(tmp_path):
    text = MINIMAL + """
[galerkin]
n = 3
m = 3
"""
    cfg = _write(tmp_path, text)
    out = tmp_path / "out"
    assert main(["basis", "--config", cfg, "--output-dir", str(out)]) == 0
    cache = out / "basis_cache"
    assert (cache / "basis_stokes_16x16_3.mhdbasis").exists()
    assert (cache / "basis_dirichlet_laplacian_16x16_3.mhdbasis").exists()


def test_main_restart_from_checkpoint(tmp_path):
    cfg = _write(tmp_path, MINIMAL + "\n[initial]\nu = bump amp=0.3 kx=1 ky=1\n")
    out1 = tmp_path / "o1"
    assert main(["run", "--config", cfg, "--output-dir", str(out1)]) == 0
    restart = MINIMAL + f"""
[initial]
checkpoint = {out1 / 'final.mhdckpt'}
"""
    # T in the restart config is the *absolute* final time
    restart = restart.replace("T = 0.01", "T = 0.02")
    cfg2 = _write(tmp_path, restart, name="restart.cfg")
    out2 = tmp_path / "o2"
    assert main(["run", "--config", cfg2, "--output-dir", str(out2)]) == 0


def test_main_run_with_galerkin_truncation(tmp_path):
    text = MINIMAL + """
[galerkin]
n = 8

[initial]
u = bump amp=0.3 kx=1 ky=1
"""
    cfg = _write(tmp_path, text, name="trunc.cfg")
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--output-dir", str(out)]) == 0
    assert (out / "basis_cache" / "basis_stokes_16x16_8.mhdbasis").exists()
