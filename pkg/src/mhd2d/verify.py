"""Theorem-level experiments at desk scale.

Each experiment returns an ExperimentReport whose assertions carry a
stable reference tag, the measured value, its pinned tolerance and the
verdict.  Manufactured solutions (with symbolically generated forcing)
are the only ground-truth oracle for the nonlinear solver; the
inequality experiments are necessary-condition checks with constants
frozen by the calibrate step.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Forcing, SolverConfig, run
from .errors import ExperimentFailure
from .estimates import (
    AbsorbingRadii,
    CalibrationStore,
    EnergyLedger,
    absorbing_radii,
    brezis_gallouet_ratio,
    calibrate_strong_energy,
    calibrate_weak_energy,
    gronwall_weak,
    normality_eta,
    smallness_gate,
    stokes_regularity_ratio,
    weak_energy_residual,
    window_sup,
)
from .geometry import (
    Grid,
    ScalarField,
    VectorBC,
    VectorField,
    grad_norm_sq,
    identity_residuals,
    l2_norm_sq,
)
from .lifting import (
    BoundaryTrace,
    FractionalNormSpec,
    TraceMode,
    harmonic_extend,
    hs_norm,
    hs_norm_dt,
    lifting_estimate_check,
    parabolic_lift,
    stream_mode_field,
    synthesize_trace,
)
from .operators import NeumannPoisson
from .scenarios import make_scenario, stream_bump, trace_times
from .spectral import build_laplacian_basis, build_stokes_basis, poincare_constants, project
from .spectral import basis_inequality_check

__all__ = [
    "Assertion",
    "ExperimentReport",
    "mms_convergence",
    "continuous_dependence",
    "absorbing_experiment",
    "tail_compactness",
    "picard_contraction_study",
    "identity_suite",
    "basis_stability",
    "brezis_gallouet_study",
    "gronwall_suite",
    "calibrate_constants",
    "EXPERIMENTS",
]


@dataclass
class Assertion:
    assertion_id: str
    ref_tag: str
    measured: float
    tolerance: float
    passed: bool
    note: str = ""


@dataclass
class ExperimentReport:
    experiment_id: str
    inputs_digest: str
    assertions: list = field(default_factory=list)
    runtime_s: float = 0.0
    extras: dict = field(default_factory=dict)

    def check(self, assertion_id, ref_tag, measured, tolerance, passed, note=""):
        self.assertions.append(
            Assertion(assertion_id, ref_tag, float(measured), float(tolerance), bool(passed), note)
        )
        return passed

    @property
    def passed(self):
        return all(a.passed for a in self.assertions)

    def to_csv_text(self):
        lines = ["experiment,assertion,paper_ref,measured,tolerance,pass"]
        for a in self.assertions:
            lines.append(
                f"{self.experiment_id},{a.assertion_id},{a.ref_tag},{a.measured!r},{a.tolerance!r},{int(a.passed)}"
            )
        return "\n".join(lines) + "\n"

    def write(self, path):
        from .ioutil import atomic_write_text

        atomic_write_text(path, self.to_csv_text())

    def raise_if_failed(self):
        if not self.passed:
            bad = [a.assertion_id for a in self.assertions if not a.passed]
            raise ExperimentFailure(f"{self.experiment_id}: failed assertions {bad}")


def _digest(params: dict) -> str:
    blob = repr(sorted(params.items())).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _report(experiment_id, params) -> ExperimentReport:
    return ExperimentReport(experiment_id, _digest(params))


# --- manufactured solutions ----------------------------------------------------

def _mms_case(kind: str, re=1.0, rm=1.0, s_coupling=1.0):
    """Symbolic manufactured state and the matching body forces."""
    import sympy as sp

    x, y, t = sp.symbols("x y t")
    if kind == "steady":
        psi_u = sp.Rational(2, 5) * sp.sin(sp.pi * x) ** 2 * sp.sin(sp.pi * y) ** 2
        u1 = sp.diff(psi_u, y)
        u2 = -sp.diff(psi_u, x)
        psi_b = sp.Rational(1, 4) * sp.sin(sp.pi * x) ** 2 * sp.sin(2 * sp.pi * y) ** 2
        b1 = sp.diff(psi_b, y) + sp.Rational(3, 10)
        b2 = -sp.diff(psi_b, x) + sp.Rational(1, 5)
        p = sp.Rational(3, 10) * sp.cos(sp.pi * x) * sp.cos(sp.pi * y)
    elif kind == "unsteady":
        env = sp.cos(4 * sp.pi * t)
        psi_u = sp.Rational(2, 5) * env * sp.sin(sp.pi * x) ** 2 * sp.sin(sp.pi * y) ** 2
        u1 = sp.diff(psi_u, y)
        u2 = -sp.diff(psi_u, x)
        b1 = sp.Integer(0)
        b2 = sp.Integer(0)
        p = sp.Rational(3, 10) * env * sp.cos(sp.pi * x) * sp.cos(sp.pi * y)
    else:
        raise ValueError(f"unknown manufactured case {kind!r}")

    def material(a1, a2, f):
        return a1 * sp.diff(f, x) + a2 * sp.diff(f, y)

    lap = lambda f: sp.diff(f, x, 2) + sp.diff(f, y, 2)
    fu1 = sp.diff(u1, t) - lap(u1) / re + material(u1, u2, u1) - s_coupling * material(b1, b2, b1) + sp.diff(p, x)
    fu2 = sp.diff(u2, t) - lap(u2) / re + material(u1, u2, u2) - s_coupling * material(b1, b2, b2) + sp.diff(p, y)
    fb1 = sp.diff(b1, t) - lap(b1) / rm + material(u1, u2, b1) - material(b1, b2, u1)
    fb2 = sp.diff(b2, t) - lap(b2) / rm + material(u1, u2, b2) - material(b1, b2, u2)
    mods = ["numpy"]
    fn = lambda e: sp.lambdify((x, y, t), e, mods)
    return {
        "u": (fn(u1), fn(u2)),
        "b": (fn(b1), fn(b2)),
        "fu": (fn(fu1), fn(fu2)),
        "fb": (fn(fb1), fn(fb2)),
        "kind": kind,
    }


def _sample_vec(grid, fpair, t):
    fx, fy = fpair
    xx, xy = np.meshgrid(grid.xf(), grid.yc(), indexing="ij")
    yx, yy = np.meshgrid(grid.xc(), grid.yf(), indexing="ij")
    ax = np.broadcast_to(np.asarray(fx(xx, xy, t), dtype=float), xx.shape).copy()
    ay = np.broadcast_to(np.asarray(fy(yx, yy, t), dtype=float), yx.shape).copy()
    return VectorField(grid, ax, ay)


def _mms_scenario(case, nx, dt, t_final):
    cfg = SolverConfig(nx=nx, ny=nx, dt=dt, t_final=t_final)
    grid = cfg.grid()
    tt = trace_times(cfg)
    if case["kind"] == "steady":
        modes = [
            TraceMode("constant", amplitude=0.3, component=1),
            TraceMode("constant", amplitude=0.2, component=2),
        ]
        xf, yf = grid.xf(), grid.yf()
        psi_b = 0.25 * np.sin(np.pi * xf)[:, None] ** 2 * np.sin(2 * np.pi * yf)[None, :] ** 2
        b0 = VectorField.from_stream(grid, psi_b)
        b0.x += 0.3
        b0.y += 0.2
        psi_u = 0.4 * np.sin(np.pi * xf)[:, None] ** 2 * np.sin(np.pi * yf)[None, :] ** 2
        u0 = VectorField.from_stream(grid, psi_u)
    else:
        modes = []
        b0 = VectorField.zeros(grid)
        xf, yf = grid.xf(), grid.yf()
        psi_u = 0.4 * np.sin(np.pi * xf)[:, None] ** 2 * np.sin(np.pi * yf)[None, :] ** 2
        u0 = VectorField.from_stream(grid, psi_u)
    trace = synthesize_trace(grid, tt, modes)
    forcing = Forcing(
        u=lambda t, g=grid: _sample_vec(g, case["fu"], t),
        b=lambda t, g=grid: _sample_vec(g, case["fb"], t),
    )
    return cfg, u0, b0, trace, forcing


def _mms_error(case, nx, dt, t_final):
    cfg, u0, b0, trace, forcing = _mms_scenario(case, nx, dt, t_final)
    traj, _ = run(cfg, u0, b0, trace, forcing=forcing)
    st = traj.final_state
    u_star = _sample_vec(cfg.grid(), case["u"], st.t)
    b_star = _sample_vec(cfg.grid(), case["b"], st.t)
    return math.sqrt(l2_norm_sq(st.u - u_star) + l2_norm_sq(st.b - b_star))


def _fit_order(hs, errs):
    return float(np.polyfit(np.log(np.asarray(hs, float)), np.log(np.asarray(errs, float)), 1)[0])


def _mms_final_state(case, nx, dt, t_final):
    cfg, u0, b0, trace, forcing = _mms_scenario(case, nx, dt, t_final)
    traj, _ = run(cfg, u0, b0, trace, forcing=forcing)
    return traj.final_state


def mms_convergence(
    nx_list=(16, 32, 64),
    dt_list=(4e-3, 2e-3, 1e-3),
    dt_spatial=2e-3,
    t_spatial=0.3,
    t_temporal=0.24,
    dt_reference=2.5e-4,
) -> ExperimentReport:
    """Manufactured-solution convergence orders.

    Spatial order against the manufactured state on a steady case; the
    temporal order is self-convergence against a fine-dt reference on the
    same grid, which cancels the spatial error exactly.
    """
    rep = _report("mms", dict(nx=nx_list, dt=dt_list, dts=dt_spatial))
    t0 = time.time()
    steady = _mms_case("steady")
    sp_errs = [_mms_error(steady, nx, dt_spatial, t_spatial) for nx in nx_list]
    order_space = _fit_order([1.0 / n for n in nx_list], sp_errs)
    rep.check("spatial-order", "mms-oracle", order_space, 1.9, order_space >= 1.9,
              note=f"errors {sp_errs}")
    unsteady = _mms_case("unsteady")
    ref = _mms_final_state(unsteady, 32, dt_reference, t_temporal)
    t_errs = []
    for dt in dt_list:
        st = _mms_final_state(unsteady, 32, dt, t_temporal)
        t_errs.append(math.sqrt(l2_norm_sq(st.u - ref.u) + l2_norm_sq(st.b - ref.b)))
    order_time = _fit_order(dt_list, t_errs)
    rep.check("temporal-order", "mms-oracle", order_time, 0.9, order_time >= 0.9,
              note=f"errors {t_errs}")
    rep.runtime_s = time.time() - t0
    rep.extras = {"spatial_errors": sp_errs, "temporal_errors": t_errs}
    return rep


# --- continuous dependence -------------------------------------------------------

def _difference_measure(states1, states2, trace1, trace2, dt):
    """sup_t of the L2 difference energy plus its time-integrated H1 dissipation."""
    sup_e = 0.0
    diss = []
    for s1, s2 in zip(states1, states2):
        du = s1.u - s2.u
        db = s1.b - s2.b
        sup_e = max(sup_e, l2_norm_sq(du) + l2_norm_sq(db))
        bc1 = trace1.vector_bc(s1.t)
        bc2 = trace2.vector_bc(s2.t)
        dbc = VectorBC(
            bc1.x_bottom - bc2.x_bottom,
            bc1.x_top - bc2.x_top,
            bc1.x_left - bc2.x_left,
            bc1.x_right - bc2.x_right,
            bc1.y_bottom - bc2.y_bottom,
            bc1.y_top - bc2.y_top,
            bc1.y_left - bc2.y_left,
            bc1.y_right - bc2.y_right,
        )
        diss.append(grad_norm_sq(du) + grad_norm_sq(db, dbc))
    diss = np.asarray(diss)
    return sup_e + float(np.trapezoid(diss, dx=dt))


def continuous_dependence(
    eps_list=(1e-2, 1e-3, 1e-4), nx=32, dt=2e-3, t_final=0.5
) -> ExperimentReport:
    """Quadratic-in-data scaling of trajectory differences."""
    rep = _report("continuous-dependence", dict(eps=eps_list, nx=nx, dt=dt, T=t_final))
    t_start = time.time()
    base = make_scenario("cd-base", nx=nx, dt=dt, t_final=t_final, keep_states=True)
    grid = base.cfg.grid()
    traj0, _ = run(base.cfg, base.u0, base.b0, base.trace)
    stokes = build_stokes_basis(grid, 2, with_pressure=False)
    xi1 = stokes.mode(0)
    # the magnetic perturbation must stay solenoidal with zero trace, so it
    # is taken along the next Stokes mode (its norm is exactly eps as well)
    eta1 = stokes.mode(1)

    d_init = []
    for eps in eps_list:
        u0 = base.u0 + eps * xi1
        b0 = base.b0 + eps * eta1
        traj, _ = run(base.cfg, u0, b0, base.trace)
        d_init.append(_difference_measure(traj.states, traj0.states, base.trace, base.trace, dt))
    d_bnd = []
    for eps in eps_list:
        extra = TraceMode("stream", amplitude=eps, kx=2, ky=2, envelope="sin", envelope_param=1.0)
        modes = list(base.boundary_modes) + [extra]
        trace2 = synthesize_trace(grid, trace_times(base.cfg), modes)
        traj, _ = run(base.cfg, base.u0, base.b0, trace2)
        d_bnd.append(_difference_measure(traj.states, traj0.states, trace2, base.trace, dt))

    for name, dvals in (("initial", d_init), ("boundary", d_bnd)):
        ratios = [d / e**2 for d, e in zip(dvals, eps_list)]
        spread = max(ratios) / min(ratios)
        rep.check(f"{name}-quadratic-window", "cd-quadratic", spread, 4.0, spread <= 4.0,
                  note=f"D/eps^2 {ratios}")
        mono = all(d1 > d2 for d1, d2 in zip(dvals, dvals[1:]))
        rep.check(f"{name}-monotone", "cd-quadratic", float(mono), 1.0, mono,
                  note=f"D {dvals}")
    rep.runtime_s = time.time() - t_start
    rep.extras = {"d_init": d_init, "d_bnd": d_bnd}
    return rep


# --- absorbing sets ---------------------------------------------------------------

def _trace_series(trace: BoundaryTrace):
    spec12 = FractionalNormSpec(0.5)
    times = trace.times
    h12_sq = np.array([hs_norm(trace, t, spec12) ** 2 for t in times])
    specm = FractionalNormSpec(-0.5)
    dth_sq = np.array([hs_norm_dt(trace, t, specm) ** 2 for t in times])
    he_l2 = np.array([l2_norm_sq(harmonic_extend(trace, t)) for t in times])
    return times, h12_sq, dth_sq, he_l2


def _absorbing_modes(variant="reference"):
    if variant == "reference":
        return [TraceMode("stream", amplitude=0.02, kx=1, ky=1, envelope="cos", envelope_param=1.0)]
    return [TraceMode("stream", amplitude=0.015, kx=1, ky=1, envelope="cos", envelope_param=1.5)]


def absorbing_experiment(
    store: CalibrationStore,
    nx=32,
    dt=2e-3,
    variant="acceptance",
    diam_factor=100.0,
    strong="off",
) -> ExperimentReport:
    """Entry into (and stay inside) the computed absorbing ball.

    With ``strong="measure"`` the run also records the H1 ball and H2
    window radii reached after absorption; with ``strong="check"`` those
    are asserted against the calibrated values.
    """
    rep = _report("absorbing", dict(nx=nx, dt=dt, variant=variant, diam=diam_factor,
                                    strong=strong))
    t_start = time.time()
    grid = Grid(nx, nx)
    modes = _absorbing_modes(variant)
    horizon = 6.0
    tt = np.arange(int(round(horizon / dt)) + 1) * dt
    trace = synthesize_trace(grid, tt, modes)
    times, h12_sq, dth_sq, he_l2 = _trace_series(trace)

    stokes = build_stokes_basis(grid, 1, with_pressure=False)
    lap = build_laplacian_basis(grid, 1)
    c_u, c_b, c_p = poincare_constants(stokes, lap)
    c1 = store.get("absorb_c1")
    ok_gate, gate_val = smallness_gate(c1, float(np.max(np.sqrt(h12_sq))), c_p)
    rep.check("smallness-gate", "normal-data-gate", gate_val, c_p, ok_gate)
    if not ok_gate:
        rep.runtime_s = time.time() - t_start
        return rep

    radii = absorbing_radii(
        times, h12_sq, dth_sq, he_l2,
        diam_b=1.0, c_p=c_p,
        c_tilde=store.get("absorb_c_tilde"),
        c0=store.get("absorb_c0"),
        c_omega=store.get("absorb_c_omega"),
    )
    diam_b = diam_factor * radii.rho0
    radii = absorbing_radii(
        times, h12_sq, dth_sq, he_l2,
        diam_b=diam_b, c_p=c_p,
        c_tilde=store.get("absorb_c_tilde"),
        c0=store.get("absorb_c0"),
        c_omega=store.get("absorb_c_omega"),
    )
    t_run = min(horizon, math.ceil((radii.t0 + 2.2) / dt) * dt)

    # initial data at energy diam_b, boundary-matched
    u_unit = stream_bump(grid, 0.4)
    b_match = VectorField.zeros(grid)
    for m in modes:
        b_match = b_match + stream_mode_field(grid, m, 0.0)
    z = stream_bump(grid, 0.3, 1, 2)
    alpha = math.sqrt(0.5 * diam_b / l2_norm_sq(u_unit))
    a2 = l2_norm_sq(z)
    from .geometry import inner as _inner

    cross = _inner(b_match, z)
    const = l2_norm_sq(b_match) - 0.5 * diam_b
    beta = (-cross + math.sqrt(max(cross**2 - a2 * const, 0.0))) / a2
    u0 = alpha * u_unit
    b0 = b_match + beta * z
    e0 = l2_norm_sq(u0) + l2_norm_sq(b0)

    cfg = SolverConfig(nx=nx, ny=nx, dt=dt, t_final=t_run, strong_mode=strong != "off")
    traj, ledger = run(cfg, u0, b0, trace)
    e_series = ledger.col("u_L2_sq") + ledger.col("b_L2_sq")
    t_series = ledger.times
    mask = t_series >= radii.t0 - 1e-12
    inside = e_series[mask]
    worst = float(np.max(inside)) if len(inside) else math.inf
    escaped = np.nonzero(inside > radii.rho0)[0]
    escape_note = f"t0={radii.t0:.3f} rho0={radii.rho0:.4g} E0={e0:.4g}"
    if escaped.size:
        escape_note += f" escape at t={t_series[mask][escaped[0]]:.4f}"
    rep.check("enter-and-stay", "absorbing-ball", worst, radii.rho0, worst <= radii.rho0,
              note=escape_note)

    # window integrals after absorption
    vdiss = ledger.col("grad_u_L2_sq") + ledger.col("b_H1_sq")
    if np.sum(mask) > 2 and t_series[-1] - radii.t0 >= 1.0:
        wmax = window_sup(t_series[mask], vdiss[mask], 1.0)
        rep.check("window-bound", "absorbing-window", wmax, radii.rho1, wmax <= radii.rho1)
    rep.extras = {
        "rho0": radii.rho0, "rho1": radii.rho1, "t0": radii.t0, "t2": radii.t2,
        "E0": e0, "energy": e_series.tolist(), "times": t_series.tolist(),
    }
    if strong != "off":
        mask2 = t_series >= radii.t2 - 1e-12
        e_h1 = (
            ledger.col("u_L2_sq") + ledger.col("grad_u_L2_sq") + ledger.col("b_H1_sq")
        )
        rho2_meas = float(np.max(e_h1[mask2])) if np.any(mask2) else math.inf
        h2_proxy = (
            ledger.col("u_L2_sq") + ledger.col("grad_u_L2_sq") + ledger.col("Su_L2_sq")
            + ledger.col("bhat_H1_sq") + ledger.col("lap_bhat_L2_sq")
        )
        if np.sum(mask2) > 2 and t_series[-1] - radii.t2 >= 1.0:
            rho3_meas = window_sup(t_series[mask2], h2_proxy[mask2], 1.0)
        else:
            rho3_meas = math.inf
        rep.extras["rho2_measured"] = rho2_meas
        rep.extras["rho3_measured"] = rho3_meas
        if strong == "check":
            rho2 = store.get("rho2_measured")
            rho3 = store.get("rho3_measured")
            rep.check("strong-ball", "absorbing-ball-strong", rho2_meas, rho2,
                      rho2_meas <= rho2)
            rep.check("strong-window", "absorbing-window-strong", rho3_meas, rho3,
                      rho3_meas <= rho3)
    rep.runtime_s = time.time() - t_start
    return rep


# --- tail compactness ---------------------------------------------------------------

def tail_compactness(n_list=(4, 8, 16, 32), nx=32, dt=2e-3, t_final=0.5) -> ExperimentReport:
    """Decay of the unresolved-mode H1 energy as the cut moves up the spectrum.

    Runs the forced smooth steady scenario (the manufactured state held
    stationary), whose spectrum is steep enough to exhibit the decay.
    """
    rep = _report("tail", dict(n=n_list, nx=nx, dt=dt, T=t_final))
    t_start = time.time()
    case = _mms_case("steady")
    cfg, u0, b0, trace, forcing = _mms_scenario(case, nx, dt, t_final)
    traj, _ = run(cfg, u0, b0, trace, forcing=forcing)
    grid = cfg.grid()
    st = traj.final_state
    n_max = max(n_list)
    stokes = build_stokes_basis(grid, n_max + 1, with_pressure=False)
    m_cap = 160
    lap = build_laplacian_basis(grid, m_cap)
    h_e = harmonic_extend(trace, st.t)
    btilde = st.b - h_e
    tails = []
    gammas = []
    for n in n_list:
        lam = stokes.eigenvalues[n]  # lambda_{n+1}
        m = int(np.searchsorted(lap.eigenvalues, lam))
        m = min(max(m, 1), lap.count - 1)
        mu = lap.eigenvalues[m]
        _, u1 = project(stokes, st.u, n)
        _, b1 = project(lap, btilde, m)
        tail = grad_norm_sq(st.u - u1) + grad_norm_sq(btilde - b1)
        tails.append(float(tail))
        gammas.append(float(min(lam, mu)))
    mono = all(a > b for a, b in zip(tails, tails[1:]))
    rep.check("tail-monotone", "tail-decay", float(mono), 1.0, mono, note=f"tails {tails}")
    red = tails[0] / tails[-1] if tails[-1] > 0 else math.inf
    rep.check("tail-reduction", "tail-decay", red, 10.0, red >= 10.0,
              note=f"n {list(n_list)} gammas {gammas}")
    rep.extras = {"tails": tails, "gammas": gammas}
    rep.runtime_s = time.time() - t_start
    return rep


# --- picard contraction ----------------------------------------------------------------

def picard_contraction_study(dt_list=(4e-3, 2e-3, 1e-3), nx=32, steps=10) -> ExperimentReport:
    """Measured magnetic-step contraction ratios across dt."""
    rep = _report("picard", dict(dt=dt_list, nx=nx, steps=steps))
    t_start = time.time()
    ratios = []
    for dt in dt_list:
        scen = make_scenario(
            "picard-ref", nx=nx, dt=dt, t_final=steps * dt,
            outer_mode="single_pass", picard_tol=1e-13,
        )
        traj, _ = run(scen.cfg, scen.u0, scen.b0, scen.trace)
        ratios.append(max(r.contraction_ratio for r in traj.reports))
    worst = max(ratios)
    rep.check("contraction", "picard-contraction", worst, 1.0, worst < 1.0,
              note=f"ratios {ratios}")
    mono = all(r2 <= r1 * 1.05 for r1, r2 in zip(ratios, ratios[1:]))
    rep.check("dt-monotone", "picard-contraction", float(mono), 1.0, mono,
              note=f"ratios {ratios}")
    # amplitude sensitivity: doubling the data must not shrink the ratio
    scen = make_scenario("picard-ref", nx=nx, dt=dt_list[0], t_final=steps * dt_list[0],
                         outer_mode="single_pass", picard_tol=1e-13)
    traj2, _ = run(scen.cfg, 2.0 * scen.u0, 2.0 * scen.b0, scen.trace)
    big = max(r.contraction_ratio for r in traj2.reports)
    rep.check("amplitude-coupling", "picard-contraction", big, ratios[0], big >= ratios[0])
    rep.extras = {"ratios": ratios, "ratio_doubled": big}
    rep.runtime_s = time.time() - t_start
    return rep


# --- stencil / basis / interpolation studies ----------------------------------------------

def _smooth_pair(grid):
    bx = lambda x, y: np.sin(np.pi * y) + 0.3 * np.cos(np.pi * x) * np.sin(2 * np.pi * y)
    by = lambda x, y: np.sin(np.pi * x) + 0.2 * np.sin(2 * np.pi * x) * np.cos(np.pi * y)
    ux = lambda x, y: np.cos(np.pi * x) * np.sin(np.pi * y)
    uy = lambda x, y: -np.sin(np.pi * x) * np.cos(np.pi * y)
    return (
        VectorField.from_functions(grid, bx, by),
        VectorBC.from_functions(grid, bx, by),
        VectorField.from_functions(grid, ux, uy),
        VectorBC.from_functions(grid, ux, uy),
    )


def identity_suite(nx_pair=(32, 64)) -> ExperimentReport:
    """Refinement of the three planar vector-identity residuals."""
    rep = _report("identities", dict(nx=nx_pair))
    t_start = time.time()
    res = {}
    for nx in nx_pair:
        g = Grid(nx, nx)
        res[nx] = identity_residuals(*_smooth_pair(g))
    for key in res[nx_pair[0]]:
        ratio = res[nx_pair[0]][key] / res[nx_pair[1]][key]
        rep.check(f"{key}-refinement", "vector-identities", ratio, 3.5, ratio >= 3.5,
                  note=f"residuals {res[nx_pair[0]][key]:.3e} -> {res[nx_pair[1]][key]:.3e}")
    rep.runtime_s = time.time() - t_start
    return rep


def basis_stability(nx_pair=(32, 64), n=10, seed=0) -> ExperimentReport:
    """Cross-resolution stability of the spectral inequality constants."""
    rep = _report("basis-stability", dict(nx=nx_pair, n=n, seed=seed))
    t_start = time.time()
    c0s, regs = [], []
    for nx in nx_pair:
        g = Grid(nx, nx)
        basis = build_stokes_basis(g, n + 1, with_pressure=False)
        chk = basis_inequality_check(basis, n, samples=20, seed=seed)
        c0s.append(1.0 + chk.c0)  # compare the full prefactor, bounded away from 0
        poisson = NeumannPoisson(g)
        regs.append(max(stokes_regularity_ratio(basis.mode(i), poisson) for i in range(n)))
        rep.check(f"grad-identity-{nx}", "spectral-identity", chk.gradient_identity_rel_err,
                  1e-8, chk.gradient_identity_rel_err < 1e-8)
    for name, vals in (("c0", c0s), ("stokes-regularity", regs)):
        ratio = max(vals) / min(vals)
        rep.check(f"{name}-stability", "spectral-stability", ratio, 2.0, ratio <= 2.0,
                  note=f"values {vals}")
    rep.runtime_s = time.time() - t_start
    rep.extras = {"c0": c0s, "regularity": regs}
    return rep


def _band_limited_fields(grid, count, kmax=6, seed=0):
    rng = np.random.default_rng(seed)
    xs, ys = np.meshgrid(grid.xc(), grid.yc(), indexing="ij")
    basis = []
    for k in range(1, kmax + 1):
        for l in range(1, kmax + 1):
            basis.append(np.sin(k * np.pi * xs) * np.sin(l * np.pi * ys))
    basis = np.array(basis)
    coeffs = rng.standard_normal((count, len(basis)))
    return [ScalarField(grid, np.tensordot(c, basis, axes=(0, 0))) for c in coeffs]


def brezis_gallouet_study(nx_pair=(32, 64), count=200, seed=0) -> ExperimentReport:
    """Max interpolation ratio over band-limited fields, two resolutions."""
    rep = _report("brezis-gallouet", dict(nx=nx_pair, count=count, seed=seed))
    t_start = time.time()
    maxima = []
    for nx in nx_pair:
        g = Grid(nx, nx)
        fields = _band_limited_fields(g, count, seed=seed)
        maxima.append(max(brezis_gallouet_ratio(f) for f in fields))
    drift = abs(maxima[0] / maxima[1] - 1.0)
    rep.check("cross-resolution-drift", "sup-interpolation", drift, 0.10, drift <= 0.10,
              note=f"max ratios {maxima}")
    rep.runtime_s = time.time() - t_start
    rep.extras = {"maxima": maxima}
    return rep


# --- Gronwall scenario suite -----------------------------------------------------------

GRONWALL_SCENARIOS = ["calib-osc", "ramp", "two-mode", "steady-h", "pulse"]


def gronwall_suite(store: CalibrationStore, nx=32, dt=2e-3, t_final=1.0) -> ExperimentReport:
    """Trajectory-vs-bound check of the integrated weak energy estimate."""
    rep = _report("gronwall", dict(nx=nx, dt=dt, T=t_final, scenarios=GRONWALL_SCENARIOS))
    t_start = time.time()
    c = store.get("weak_energy_c")
    for sid in GRONWALL_SCENARIOS:
        scen = make_scenario(sid, nx=nx, dt=dt, t_final=t_final)
        traj, ledger = run(scen.cfg, scen.u0, scen.b0, scen.trace)
        gb = gronwall_weak(ledger, c)
        slack = float(np.max(gb.trajectory / np.maximum(gb.bound, 1e-300)))
        rep.check(f"{sid}-bound", "gronwall-weak", slack, 1.01, slack <= 1.01,
                  note=f"max trajectory/bound")
        margins = weak_energy_residual(ledger, c)
        rep.check(f"{sid}-margins", "energy-inequality", float(np.max(margins[1:])), 0.0,
                  float(np.max(margins[1:])) <= max(1e-8, 0.05 * np.max(np.abs(margins))),
                  note="differential margins nonpositive up to dt consistency")
    rep.runtime_s = time.time() - t_start
    return rep


# --- calibration ------------------------------------------------------------------------

def calibrate_constants(nx=32, dt=2e-3, t_final=1.0, headroom=1.5) -> CalibrationStore:
    """Measure every unspecified constant on the reference scenarios."""
    store = CalibrationStore()
    scen = make_scenario("calib-osc", nx=nx, dt=dt, t_final=t_final)
    traj, ledger = run(scen.cfg, scen.u0, scen.b0, scen.trace)
    c_weak = calibrate_weak_energy(ledger) * headroom
    store.set("weak_energy_c", c_weak, "calib-osc")

    scen_s = make_scenario("calib-osc", nx=nx, dt=dt, t_final=t_final, strong_mode=True)
    _, ledger_s = run(scen_s.cfg, scen_s.u0, scen_s.b0, scen_s.trace)
    store.set("strong_energy_c", calibrate_strong_energy(ledger_s) * headroom, "calib-osc")

    lift = lifting_estimate_check(scen.trace, min(0.5, t_final))
    store.set("lifting_c_h1", lift.c_h1 * headroom, "calib-osc")
    store.set("lifting_c_dt", lift.c_dt * headroom, "calib-osc")

    # parabolic lifting constants: zero initial data and a ramped trace,
    # so any growth is charged to the boundary source terms
    scen_p = make_scenario("ramp", nx=nx, dt=dt, t_final=t_final)
    prun = parabolic_lift(
        VectorField.zeros(Grid(nx, nx)), scen_p.trace, dt, min(0.5, t_final)
    )
    cum_h12 = np.concatenate(
        [[0.0], np.cumsum(0.5 * (prun.h_h12_sq[1:] + prun.h_h12_sq[:-1]) * np.diff(prun.times))]
    )
    cum_grad = np.concatenate(
        [[0.0], np.cumsum(0.5 * (prun.grad_sq[1:] + prun.grad_sq[:-1]) * np.diff(prun.times))]
    )
    num = prun.l2_sq + cum_grad - prun.b0_l2_sq
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(cum_h12 > 1e-14, num / np.maximum(cum_h12, 1e-300), 0.0)
    store.set("parabolic_c_weak", max(0.0, float(np.max(ratio))) * headroom, "calib-osc")
    src = prun.dth_hm12_sq + prun.h_h32_sq
    cum_src = np.concatenate([[0.0], np.cumsum(0.5 * (src[1:] + src[:-1]) * np.diff(prun.times))])
    cum_h2 = np.concatenate(
        [[0.0], np.cumsum(0.5 * (prun.lap_sq[1:] + prun.lap_sq[:-1]) * np.diff(prun.times))]
    )
    num_s = prun.h1_sq + cum_h2 - prun.b0_h1_sq
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_s = np.where(cum_src > 1e-14, num_s / np.maximum(cum_src, 1e-300), 0.0)
    store.set("parabolic_c_strong", max(0.0, float(np.max(ratio_s))) * headroom, "calib-osc")

    # absorbing-ball constants, probed on the reference small-boundary scenario
    grid = Grid(nx, nx)
    modes = _absorbing_modes("reference")
    horizon = 6.0
    tt = np.arange(int(round(horizon / dt)) + 1) * dt
    trace = synthesize_trace(grid, tt, modes)
    times, h12_sq, dth_sq, he_l2 = _trace_series(trace)
    geom_unit = 1.0 / (1.0 - math.exp(-poincare_constants(
        build_stokes_basis(grid, 1, with_pressure=False), build_laplacian_basis(grid, 1)
    )[2]))
    w_total = (
        window_sup(times, h12_sq)
        + window_sup(times, dth_sq)
        + window_sup(times, h12_sq**2)
    )
    h_inf = float(np.max(he_l2))
    c0_absorb = headroom * (2.0 * c_weak + 2.0 * h_inf / max(geom_unit * w_total, 1e-300))
    store.set("absorb_c0", c0_absorb, "absorbing-reference")
    store.set("absorb_c1", max(c_weak, 1e-6), "calib-osc")
    store.set("absorb_c_omega", max(lift.c_h1 * headroom, 1.0), "calib-osc")

    c_tilde = 1.25
    probe = None
    for _ in range(4):
        store.set("absorb_c_tilde", c_tilde, "absorbing-reference")
        probe = absorbing_experiment(store, nx=nx, dt=dt, variant="reference", strong="measure")
        window_fail = [a for a in probe.assertions if a.assertion_id == "window-bound" and not a.passed]
        if window_fail:
            c_om = store.get("absorb_c_omega")
            store.set("absorb_c_omega", c_om * 2.0, "absorbing-reference")
            continue
        if probe.passed:
            break
        c_tilde *= 2.0
    if probe is not None and math.isfinite(probe.extras.get("rho2_measured", math.inf)):
        store.set("rho2_measured", probe.extras["rho2_measured"] * headroom, "absorbing-reference")
        store.set("rho3_measured", probe.extras["rho3_measured"] * headroom, "absorbing-reference")
    return store


EXPERIMENTS = {
    "identities": lambda store, **kw: identity_suite(**kw),
    "mms": lambda store, **kw: mms_convergence(**kw),
    "cd": lambda store, **kw: continuous_dependence(**kw),
    "picard": lambda store, **kw: picard_contraction_study(**kw),
    "absorbing": lambda store, **kw: absorbing_experiment(store, **kw),
    "tail": lambda store, **kw: tail_compactness(**kw),
    "basis-stability": lambda store, **kw: basis_stability(**kw),
    "brezis-gallouet": lambda store, **kw: brezis_gallouet_study(**kw),
    "gronwall": lambda store, **kw: gronwall_suite(store, **kw),
}
