"""Coupled time stepper: Picard-iterated magnetic step, implicit Stokes
velocity step, damped outer fixed point, and the driving `run` loop.

One step advances (u, b, p) by dt with implicit Euler diffusion.  The
magnetic solve treats transport by the frozen velocity implicitly and
lags the stretching term through a Picard iteration whose contraction
ratio is measured and reported.  The velocity solve is a monolithic
implicit Stokes system (or a Galerkin coefficient update when a velocity
eigenbasis truncation is configured); its nonlinear terms are lagged.
The outer loop alternates the two solves until successive velocity
iterates agree.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import CompatibilityError, ConfigError, StepFailure
from .estimates import EnergyLedger, record
from .geometry import (
    Grid,
    ScalarField,
    VectorBC,
    VectorField,
    convect,
    divergence,
    l2_norm_sq,
)
from .lifting import BoundaryTrace, boundary_l2_norm, harmonic_extend
from .operators import (
    NeumannPoisson,
    StokesSaddle,
    TransportOperator,
    project_divfree,
)
from .spectral import SpectralBasis, project

__all__ = [
    "SolverConfig",
    "SimState",
    "StepReport",
    "Forcing",
    "CompatReport",
    "compatibility_check",
    "Stepper",
    "Trajectory",
    "run",
    "write_checkpoint",
    "read_checkpoint",
    "CKPT_MAGIC",
]

CKPT_MAGIC = b"MHDCKPT1"


@dataclass
class SolverConfig:
    """Grid, stepping, physics and tolerance settings for one run."""

    nx: int = 32
    ny: int = 32
    dt: float = 1e-3
    t_final: float = 1.0
    re: float = 1.0
    rm: float = 1.0
    s: float = 1.0
    n_modes: int | None = None  # None = full velocity space
    m_diag: int = 0
    picard_tol: float = 1e-10
    picard_max_iter: int = 25
    outer_mode: str = "fixed_point"  # or "single_pass"
    outer_tol: float = 1e-9
    outer_max_iter: int = 12
    compat_tol_factor: float = 1e-8
    compat_action: str = "reject"  # or "project"
    div_clean_threshold: float = 1e-10
    strong_mode: bool = False
    keep_states: bool = False
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None
    seed: int = 0

    def validate(self):
        bad = []
        if self.nx < 4 or self.ny < 4:
            bad.append("grid.nx/grid.ny must be >= 4")
        if not self.dt > 0:
            bad.append("time.dt must be positive")
        if self.t_final < self.dt:
            bad.append("time.T must be >= dt")
        for name in ("picard_tol", "outer_tol", "compat_tol_factor"):
            if not getattr(self, name) > 0:
                bad.append(f"tolerances.{name} must be positive")
        if self.outer_mode not in ("fixed_point", "single_pass"):
            bad.append("outer mode must be fixed_point or single_pass")
        if self.compat_action not in ("reject", "project"):
            bad.append("compatibility action must be reject or project")
        if bad:
            raise ConfigError(bad)
        return self

    def grid(self):
        return Grid(self.nx, self.ny)


@dataclass
class SimState:
    t: float
    u: VectorField
    b: VectorField
    p: ScalarField

    def validate(self, trace: BoundaryTrace | None = None, div_tol=1e-9, trace_tol=1e-7):
        if np.max(np.abs(divergence(self.u).values)) >= div_tol:
            raise ValueError("velocity is not discretely divergence-free")
        if abs(float(self.p.values.mean())) >= 1e-12:
            raise ValueError("pressure is not mean-zero")
        if trace is not None:
            got = _normal_boundary_values(self.b)
            want = trace.normal_values(self.t)
            if boundary_l2_norm(got - want, self.u.grid.dx) >= trace_tol:
                raise ValueError("magnetic trace does not match the boundary data")
        return self


@dataclass
class StepReport:
    dt: float
    picard_iterations: int = 0
    picard_residual: float = 0.0
    contraction_ratio: float = 0.0
    outer_iterations: int = 0
    outer_residual: float = 0.0
    div_b_before_clean: float = 0.0
    cleaned: bool = False


@dataclass
class Forcing:
    """Optional body forces; callables t -> VectorField."""

    u: object | None = None
    b: object | None = None

    def u_at(self, grid, t):
        return self.u(t) if self.u is not None else None

    def b_at(self, grid, t):
        return self.b(t) if self.b is not None else None


def _normal_boundary_values(v: VectorField):
    # counterclockwise node order: top and left walls run backwards
    return np.concatenate([-v.y[:, 0], v.x[-1, :], v.y[::-1, -1], -v.x[0, ::-1]])


@dataclass
class CompatReport:
    div_u: float
    div_b: float
    u_trace: float
    b_trace: float
    net_flux: float
    passed: bool


def compatibility_check(
    u0: VectorField, b0: VectorField, trace: BoundaryTrace, tol_factor=1e-8, t=None
) -> CompatReport:
    """Initial/boundary compatibility: solenoidal data, matching traces."""
    g = u0.grid
    t = trace.times[0] if t is None else t
    div_u = float(np.max(np.abs(divergence(u0).values)))
    div_b = float(np.max(np.abs(divergence(b0).values)))
    u_trace = boundary_l2_norm(_normal_boundary_values(u0), g.dx)
    want = trace.normal_values(t)
    b_trace = boundary_l2_norm(_normal_boundary_values(b0) - want, g.dx)
    scale = boundary_l2_norm(want, g.dx)
    flux = trace.net_flux(t)
    ok = bool(
        div_u < 1e-9 * (1.0 + np.max(np.abs(u0.x)) + np.max(np.abs(u0.y)))
        and div_b < 1e-9 * (1.0 + np.max(np.abs(b0.x)) + np.max(np.abs(b0.y)))
        and u_trace < tol_factor * (1.0 + scale)
        and b_trace < tol_factor * (1.0 + scale)
        and abs(flux) < 1e-9 * (1.0 + scale)
    )
    return CompatReport(div_u, div_b, u_trace, b_trace, flux, ok)


def _project_compatible(u0, b0, trace, poisson, t):
    """Repair incompatible data: enforce traces, then remove gradient parts."""
    u0 = u0.copy()
    u0.x[0, :] = 0.0
    u0.x[-1, :] = 0.0
    u0.y[:, 0] = 0.0
    u0.y[:, -1] = 0.0
    u0, _ = project_divfree(u0, poisson)
    b0 = b0.copy()
    bc = trace.vector_bc(t)
    b0.x[0, :], b0.x[-1, :] = bc.x_left, bc.x_right
    b0.y[:, 0], b0.y[:, -1] = bc.y_bottom, bc.y_top
    b0, _ = project_divfree(b0, poisson)
    return u0, b0


class Stepper:
    """Operator-caching session for repeated coupled steps on one grid."""

    def __init__(
        self,
        cfg: SolverConfig,
        trace: BoundaryTrace,
        basis: SpectralBasis | None = None,
        forcing: Forcing | None = None,
    ):
        cfg.validate()
        self.cfg = cfg
        self.grid = cfg.grid()
        self.trace = trace
        self.forcing = forcing or Forcing()
        self.poisson = NeumannPoisson(self.grid)
        self.basis = basis
        if cfg.n_modes is not None:
            if basis is None or basis.kind != "stokes" or basis.count < cfg.n_modes:
                raise ConfigError(
                    ["galerkin truncation requires a stokes basis with >= n modes"]
                )
            self.saddle = None
        else:
            self.saddle = StokesSaddle(self.grid, 1.0 / cfg.dt, 1.0 / cfg.re)
        self._heat_ops = None  # lazily built u=0 magnetic operators
        self._zero_trace = bool(np.all(trace.samples == 0.0))

    # -- magnetic sub-step ---------------------------------------------------

    def _heat_operators(self):
        if self._heat_ops is None:
            kappa = 1.0 / self.cfg.rm
            self._heat_ops = (
                TransportOperator(self.grid, "x", None, 1.0 / self.cfg.dt, kappa),
                TransportOperator(self.grid, "y", None, 1.0 / self.cfg.dt, kappa),
            )
        return self._heat_ops

    def b_step(self, u_frozen: VectorField, b_prev: VectorField, t_prev: float):
        """One implicit magnetic step; transport implicit, stretching lagged."""
        cfg = self.cfg
        dt = cfg.dt
        t_next = t_prev + dt
        bc = self.trace.vector_bc(t_next)
        kappa = 1.0 / cfg.rm
        pure_heat = l2_norm_sq(u_frozen) == 0.0
        if pure_heat:
            opx, opy = self._heat_operators()
        else:
            opx = TransportOperator(self.grid, "x", u_frozen, 1.0 / dt, kappa)
            opy = TransportOperator(self.grid, "y", u_frozen, 1.0 / dt, kappa)
        rhs_x = b_prev.x / dt
        rhs_y = b_prev.y / dt
        fb = self.forcing.b_at(self.grid, t_next)
        if fb is not None:
            rhs_x = rhs_x + fb.x
            rhs_y = rhs_y + fb.y

        cur = b_prev
        residuals = []
        res = 0.0
        iters = 0
        for j in range(cfg.picard_max_iter):
            iters = j + 1
            if pure_heat:
                lag_x = 0.0
                lag_y = 0.0
            else:
                lag = convect(cur, u_frozen)  # stretching term with the lagged iterate
                lag_x, lag_y = lag.x, lag.y
            nxt = VectorField(self.grid, opx.solve(rhs_x + lag_x, bc), opy.solve(rhs_y + lag_y, bc))
            res = np.sqrt(l2_norm_sq(nxt - cur))
            residuals.append(res)
            cur = nxt
            if pure_heat or res <= cfg.picard_tol * (1.0 + np.sqrt(l2_norm_sq(cur))):
                break
        # contraction measured away from the round-off floor
        floor = max(1e-3 * cfg.picard_tol, 1e-13) * (1.0 + np.sqrt(l2_norm_sq(cur)))
        ratios = [
            b / a for a, b in zip(residuals, residuals[1:]) if a > floor and b > floor
        ]
        ratio = max(ratios) if ratios else 0.0
        if iters == cfg.picard_max_iter and res > cfg.picard_tol * (1.0 + np.sqrt(l2_norm_sq(cur))):
            if ratio >= 1.0:
                raise StepFailure(
                    f"magnetic Picard iteration is not contracting (ratio {ratio:.3f}); "
                    "reduce dt",
                    t=t_next,
                    detail={"residuals": residuals, "ratio": ratio},
                )
        report = StepReport(
            dt=dt, picard_iterations=iters, picard_residual=float(res), contraction_ratio=float(ratio)
        )
        return cur, report

    # -- velocity sub-step -----------------------------------------------------

    def u_step(self, b_frozen: VectorField, u_prev: VectorField, t_prev: float, u_advect=None):
        """Implicit Stokes (or Galerkin coefficient) velocity update."""
        cfg = self.cfg
        dt = cfg.dt
        t_next = t_prev + dt
        if u_advect is None:
            u_advect = u_prev
        adv = convect(u_advect, u_prev)
        bcb = self.trace.vector_bc(t_next)
        lor = convect(b_frozen, b_frozen, bcb)
        fx = u_prev.x / dt - adv.x + cfg.s * lor.x
        fy = u_prev.y / dt - adv.y + cfg.s * lor.y
        fu = self.forcing.u_at(self.grid, t_next)
        if fu is not None:
            fx = fx + fu.x
            fy = fy + fu.y
        if cfg.n_modes is None:
            u_new, p = self.saddle.solve(fx, fy)
        else:
            n = cfg.n_modes
            force = VectorField(self.grid, fx, fy)
            coeffs, _ = project(self.basis, force, n)
            lam = self.basis.eigenvalues[:n]
            g_new = dt * coeffs / (1.0 + dt * lam / cfg.re)
            ux = np.tensordot(g_new, self.basis.modes_x[:n], axes=(0, 0))
            uy = np.tensordot(g_new, self.basis.modes_y[:n], axes=(0, 0))
            u_new = VectorField(self.grid, ux, uy)
            p = ScalarField.zeros(self.grid)
        return u_new, p, StepReport(dt=dt, outer_iterations=1)

    # -- coupled step ------------------------------------------------------------

    def coupled_step(self, state: SimState):
        cfg = self.cfg
        ubar = state.u
        history = []
        b_new = state.b
        u_new = state.u
        p_new = state.p
        rep_b = StepReport(dt=cfg.dt)
        # a magnetically trivial run never needs the transport solve
        skip_b = (
            self._zero_trace and self.forcing.b is None and l2_norm_sq(state.b) == 0.0
        )

        def magnetic(ub):
            if skip_b:
                return state.b, StepReport(dt=cfg.dt)
            return self.b_step(ub, state.b, state.t)

        if cfg.outer_mode == "single_pass":
            b_new, rep_b = magnetic(ubar)
            u_new, p_new, _ = self.u_step(b_new, state.u, state.t, u_advect=ubar)
            outer_iters, outer_res = 1, 0.0
        else:
            res_prev = np.inf
            outer_res = np.inf
            outer_iters = 0
            for k in range(cfg.outer_max_iter):
                outer_iters = k + 1
                b_new, rep_b = magnetic(ubar)
                u_new, p_new, _ = self.u_step(b_new, state.u, state.t, u_advect=ubar)
                outer_res = np.sqrt(l2_norm_sq(u_new - ubar))
                history.append(float(outer_res))
                if outer_res <= cfg.outer_tol * (1.0 + np.sqrt(l2_norm_sq(u_new))):
                    break
                if outer_res > res_prev:
                    ubar = 0.5 * (ubar + u_new)  # damping on a non-monotone residual
                else:
                    ubar = u_new
                res_prev = outer_res
            else:
                raise StepFailure(
                    "outer coupling loop did not converge",
                    t=state.t + cfg.dt,
                    detail={"residual_history": history},
                )

        div_before = float(np.max(np.abs(divergence(b_new).values)))
        cleaned = False
        if div_before > cfg.div_clean_threshold:
            b_new, _ = project_divfree(b_new, self.poisson)
            cleaned = True
        report = StepReport(
            dt=cfg.dt,
            picard_iterations=rep_b.picard_iterations,
            picard_residual=rep_b.picard_residual,
            contraction_ratio=rep_b.contraction_ratio,
            outer_iterations=outer_iters,
            outer_residual=float(outer_res),
            div_b_before_clean=div_before,
            cleaned=cleaned,
        )
        return SimState(state.t + cfg.dt, u_new, b_new, p_new), report


# --- module-level single-shot wrappers ---------------------------------------

def b_step(u_frozen, b_prev, trace, dt, t_prev=None, **cfg_kw):
    """One magnetic step without a session (operators built on the fly)."""
    cfg_kw.setdefault("t_final", dt)
    cfg = SolverConfig(nx=b_prev.grid.nx, ny=b_prev.grid.ny, dt=dt, **cfg_kw)
    st = Stepper(cfg, trace)
    return st.b_step(u_frozen, b_prev, trace.times[0] if t_prev is None else t_prev)


def u_step(b_frozen, u_prev, trace, dt, basis=None, n_modes=None, t_prev=None, **cfg_kw):
    cfg_kw.setdefault("t_final", dt)
    cfg = SolverConfig(
        nx=u_prev.grid.nx, ny=u_prev.grid.ny, dt=dt, n_modes=n_modes, **cfg_kw
    )
    st = Stepper(cfg, trace, basis=basis)
    return st.u_step(b_frozen, u_prev, trace.times[0] if t_prev is None else t_prev)


# --- trajectories and the run loop --------------------------------------------

@dataclass
class Trajectory:
    times: list
    final_state: SimState
    reports: list
    states: list | None = None
    compat: CompatReport | None = None


def run(
    cfg: SolverConfig,
    u0: VectorField,
    b0: VectorField,
    trace: BoundaryTrace,
    forcing: Forcing | None = None,
    basis: SpectralBasis | None = None,
    t0: float = 0.0,
    p0: ScalarField | None = None,
):
    """March from t0 to t_final, recording the full energy ledger.

    In strong mode the parabolic lift is advanced alongside the state,
    re-initialized from b(t0) (each continuation window carries its own
    lift).  Returns (Trajectory, EnergyLedger).
    """
    cfg.validate()
    grid = cfg.grid()
    stepper = Stepper(cfg, trace, basis=basis, forcing=forcing)
    compat = compatibility_check(u0, b0, trace, cfg.compat_tol_factor, t=t0)
    if not compat.passed:
        if cfg.compat_action == "reject":
            raise CompatibilityError(
                f"initial data incompatible with the boundary data: {compat}"
            )
        u0, b0 = _project_compatible(u0, b0, trace, stepper.poisson, t0)
        compat = compatibility_check(u0, b0, trace, cfg.compat_tol_factor, t=t0)

    state = SimState(t0, u0.copy(), b0.copy(), p0.copy() if p0 else ScalarField.zeros(grid))
    ledger = EnergyLedger(strong=cfg.strong_mode)
    h_p = b0.copy() if cfg.strong_mode else None
    heat_ops = None
    if cfg.strong_mode:
        kappa = 1.0 / cfg.rm
        heat_ops = (
            TransportOperator(grid, "x", None, 1.0 / cfg.dt, kappa),
            TransportOperator(grid, "y", None, 1.0 / cfg.dt, kappa),
        )

    def _record(st):
        h_e = harmonic_extend(trace, st.t)
        record(ledger, st.t, st.u, st.b, trace, h_e, h_p, stepper.poisson)

    _record(state)
    times = [t0]
    reports = []
    states = [SimState(state.t, state.u.copy(), state.b.copy(), state.p.copy())] if cfg.keep_states else None
    nsteps = int(round((cfg.t_final - t0) / cfg.dt))
    for k in range(nsteps):
        state, rep = stepper.coupled_step(state)
        if cfg.strong_mode:
            bc = trace.vector_bc(state.t)
            h_p = VectorField(
                grid,
                heat_ops[0].solve(h_p.x / cfg.dt, bc),
                heat_ops[1].solve(h_p.y / cfg.dt, bc),
            )
        _record(state)
        times.append(state.t)
        reports.append(rep)
        if states is not None:
            states.append(SimState(state.t, state.u.copy(), state.b.copy(), state.p.copy()))
        if cfg.checkpoint_every and (k + 1) % cfg.checkpoint_every == 0 and cfg.checkpoint_dir:
            import os

            path = os.path.join(cfg.checkpoint_dir, f"ckpt_{k + 1:06d}.mhdckpt")
            write_checkpoint(path, state, cfg)
    return Trajectory(times, state, reports, states, compat), ledger


# --- checkpoints ----------------------------------------------------------------

def write_checkpoint(path, state: SimState, cfg: SolverConfig):
    from .ioutil import atomic_write_bytes

    g = state.u.grid
    n_trunc = -1 if cfg.n_modes is None else cfg.n_modes
    header = CKPT_MAGIC + struct.pack("<qqddq", g.nx, g.ny, state.t, cfg.dt, n_trunc)
    payload = [
        header,
        state.u.x.astype("<f8").tobytes(),
        state.u.y.astype("<f8").tobytes(),
        state.b.x.astype("<f8").tobytes(),
        state.b.y.astype("<f8").tobytes(),
        state.p.values.astype("<f8").tobytes(),
    ]
    atomic_write_bytes(path, b"".join(payload))


def read_checkpoint(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(CKPT_MAGIC)] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    off = len(CKPT_MAGIC)
    nx, ny, t, dt, n_trunc = struct.unpack_from("<qqddq", raw, off)
    off += struct.calcsize("<qqddq")
    grid = Grid(nx, ny)

    def take(shape):
        nonlocal off
        n = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(shape).copy()
        off += 8 * n
        return arr

    u = VectorField(grid, take(grid.shape_xface()), take(grid.shape_yface()))
    b = VectorField(grid, take(grid.shape_xface()), take(grid.shape_yface()))
    p = ScalarField(grid, take(grid.shape_center()))
    return {
        "grid": grid,
        "t": t,
        "dt": dt,
        "n_modes": None if n_trunc < 0 else n_trunc,
        "state": SimState(t, u, b, p),
    }


def check_restart_header(ck, cfg: SolverConfig):
    """Restart refuses mismatched discretizations."""
    want = (cfg.nx, cfg.ny, cfg.dt, cfg.n_modes)
    got = (ck["grid"].nx, ck["grid"].ny, ck["dt"], ck["n_modes"])
    if want != got:
        raise ConfigError(
            [f"checkpoint header {got} does not match configuration {want}"]
        )
