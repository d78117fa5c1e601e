import numpy as np
import pytest

from mhd2d.dynamics import run
from mhd2d.errors import ExperimentFailure
from mhd2d.estimates import CalibrationStore
from mhd2d.geometry import l2_norm_sq
from mhd2d.verify import (
    ExperimentReport,
    _fit_order,
    _mms_case,
    _mms_error,
    _mms_scenario,
    _sample_vec,
    absorbing_experiment,
    identity_suite,
    picard_contraction_study,
)


def test_report_plumbing(tmp_path):
    rep = ExperimentReport("demo", "abc123")
    rep.check("a", "tag", 1.0, 2.0, True)
    rep.check("b", "tag", 3.0, 2.0, False, note="boom")
    assert not rep.passed
    text = rep.to_csv_text()
    assert text.splitlines()[0] == "experiment,assertion,paper_ref,measured,tolerance,pass"
    assert "demo,b,tag,3.0,2.0,0" in text
    with pytest.raises(ExperimentFailure):
        rep.raise_if_failed()
    rep.write(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == text


def test_fit_order_recovers_slope():
    hs = [0.1, 0.05, 0.025]
    errs = [h**2 * 3.0 for h in hs]
    assert abs(_fit_order(hs, errs) - 2.0) < 1e-12


def test_identity_suite_is_deterministic():
    a = identity_suite()
    b = identity_suite()
    assert a.to_csv_text() == b.to_csv_text()
    assert a.passed


def test_mms_zero_solution_zero_forcing():
    # a trivially zero manufactured state must be reproduced exactly
    from mhd2d.dynamics import SolverConfig
    from mhd2d.geometry import VectorField
    from mhd2d.lifting import synthesize_trace
    from mhd2d.scenarios import trace_times

    cfg = SolverConfig(nx=8, ny=8, dt=1e-3, t_final=5e-3)
    g = cfg.grid()
    tz = synthesize_trace(g, trace_times(cfg), [])
    traj, _ = run(cfg, VectorField.zeros(g), VectorField.zeros(g), tz)
    assert l2_norm_sq(traj.final_state.u) == 0.0
    assert l2_norm_sq(traj.final_state.b) == 0.0


def test_mms_steady_state_held_stationary():
    case = _mms_case("steady")
    err = _mms_error(case, 16, 1e-3, 0.05)
    # O(dx^2 + dt): at nx=16 the spatial part dominates and is small
    assert err < 0.08


def test_mms_forcing_consistency():
    # the symbolic forcing really balances the manufactured state: the
    # residual error must shrink at second order
    case = _mms_case("steady")
    e16 = _mms_error(case, 16, 1e-3, 0.05)
    e32 = _mms_error(case, 32, 1e-3, 0.05)
    assert e16 / e32 > 3.0


def test_absorbing_gate_failure_reported():
    store = CalibrationStore()
    store.set("absorb_c1", 1e12, "synthetic")
    store.set("absorb_c0", 1.0, "synthetic")
    store.set("absorb_c_tilde", 1.25, "synthetic")
    store.set("absorb_c_omega", 1.0, "synthetic")
    rep = absorbing_experiment(store, nx=16, dt=4e-3, variant="reference")
    assert not rep.passed
    gate = [a for a in rep.assertions if a.assertion_id == "smallness-gate"]
    assert gate and not gate[0].passed


def test_picard_study_decoupled_ratio_is_zero():
    from mhd2d.dynamics import b_step
    from mhd2d.geometry import Grid, VectorField
    from mhd2d.lifting import synthesize_trace

    g = Grid(8, 8)
    tz = synthesize_trace(g, [0.0, 1e-3], [])
    from conftest import random_divfree

    b0 = random_divfree(g, np.random.default_rng(1))
    _, rep = b_step(VectorField.zeros(g), b0, tz, 1e-3)
    assert rep.contraction_ratio == 0.0 and rep.picard_iterations == 1


def test_zero_perturbation_gives_exactly_zero_difference():
    from mhd2d.scenarios import make_scenario
    from mhd2d.verify import _difference_measure

    scen = make_scenario("cd-base", nx=16, dt=2e-3, t_final=0.02, keep_states=True)
    t1, _ = run(scen.cfg, scen.u0, scen.b0, scen.trace)
    t2, _ = run(scen.cfg, scen.u0, scen.b0, scen.trace)
    d = _difference_measure(t1.states, t2.states, scen.trace, scen.trace, scen.cfg.dt)
    assert d == 0.0


def test_tail_full_rank_and_single_mode():
    from conftest import random_divfree
    from mhd2d.geometry import Grid, grad_norm_sq
    from mhd2d.spectral import build_stokes_basis, project

    g = Grid(8, 8)
    full = (g.nx - 1) * (g.ny - 1)
    basis = build_stokes_basis(g, full, with_pressure=False)
    f = random_divfree(g, np.random.default_rng(2))
    _, rec = project(basis, f, full)
    assert grad_norm_sq(f - rec) < 1e-9
    k = 5
    xi = basis.mode(k - 1)
    for n in (k, k + 3):
        _, u1 = project(basis, xi, n)
        assert grad_norm_sq(xi - u1) < 1e-9
    _, u1 = project(basis, xi, k - 1)
    assert abs(grad_norm_sq(xi - u1) - basis.eigenvalues[k - 1]) < 1e-6
