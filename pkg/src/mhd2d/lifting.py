"""Boundary traces, fractional trace norms and the two lifting problems.

A trace is a 2-component function on the square's boundary, sampled at
the 2(nx+ny) wall-face midpoints in arc length (counterclockwise from
the bottom-left corner, perimeter 4).  Fractional Sobolev norms are
Fourier multipliers in arc length; the harmonic lift solves Laplace's
equation componentwise, the parabolic lift runs the implicit heat flow
with the same boundary data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import CompatibilityError, ConfigError
from .geometry import (
    Grid,
    ScalarField,
    VectorBC,
    VectorField,
    grad_norm_sq,
    l2_norm_sq,
)
from .operators import TransportOperator, apply_lap_mirror

__all__ = [
    "BoundaryTrace",
    "FractionalNormSpec",
    "TraceMode",
    "synthesize_trace",
    "read_trace_csv",
    "hs_norm",
    "harmonic_extend",
    "lifting_estimate_check",
    "parabolic_lift",
    "parabolic_estimate_check",
    "boundary_l2_norm",
]

SUPPORTED_EXPONENTS = (-0.5, 0.0, 0.5, 1.5)


@dataclass(frozen=True)
class FractionalNormSpec:
    """Exponent and Fourier truncation for a trace-space norm."""

    s: float
    truncation: int | None = None

    def __post_init__(self):
        if self.s not in SUPPORTED_EXPONENTS:
            raise ValueError(f"unsupported exponent s={self.s}; supported: {SUPPORTED_EXPONENTS}")


class BoundaryTrace:
    """Time-sampled boundary data at uniform arc-length nodes.

    samples has shape (nt, N, 2) with N = 2(nx+ny); node k sits at
    arc length (k+1/2)*h.  Requires a square-cell grid so the nodes are
    uniform along the whole boundary.
    """

    def __init__(self, grid: Grid, times, samples):
        if grid.nx != grid.ny:
            raise ValueError("boundary traces need nx == ny (uniform arc-length nodes)")
        times = np.asarray(times, dtype=np.float64)
        samples = np.asarray(samples, dtype=np.float64)
        n = 2 * (grid.nx + grid.ny)
        if samples.shape != (len(times), n, 2):
            raise ValueError(f"trace samples shape {samples.shape} != {(len(times), n, 2)}")
        if len(times) > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("trace instants must be strictly increasing")
        if not np.all(np.isfinite(samples)):
            raise ValueError("trace samples contain non-finite values")
        self.grid = grid
        self.times = times
        self.samples = samples
        self.n_nodes = n
        self._h = grid.dx

    def index_of(self, t):
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a sampled trace instant")
        return i

    def values(self, t):
        return self.samples[self.index_of(t)]

    def dt_values(self, t):
        """Finite-difference time derivative at a sampled instant."""
        i = self.index_of(t)
        tt, ss = self.times, self.samples
        if len(tt) == 1:
            return np.zeros_like(ss[0])
        if i == 0:
            return (ss[1] - ss[0]) / (tt[1] - tt[0])
        if i == len(tt) - 1:
            return (ss[-1] - ss[-2]) / (tt[-1] - tt[-2])
        return (ss[i + 1] - ss[i - 1]) / (tt[i + 1] - tt[i - 1])

    # node arc-length positions
    def nodes(self):
        return (np.arange(self.n_nodes) + 0.5) * self._h

    def _interp(self, vals, s_query):
        """Periodic linear interpolation of node values (per component).

        Exact for traces that are linear in arc length along each wall,
        second-order for smooth traces; corner values average the two
        adjacent walls.
        """
        h = self._h
        s = np.mod(np.asarray(s_query, dtype=np.float64), 4.0)
        pos = s / h - 0.5
        k0 = np.floor(pos).astype(int)
        w = pos - k0
        k0 = np.mod(k0, self.n_nodes)
        k1 = np.mod(k0 + 1, self.n_nodes)
        return (1.0 - w) * vals[k0] + w * vals[k1]

    def vector_bc(self, t) -> VectorBC:
        """Boundary closure arrays for a MAC vector field carrying this trace."""
        g = self.grid
        vals = self.values(t)
        return self._bc_from_values(vals)

    def dt_vector_bc(self, t) -> VectorBC:
        return self._bc_from_values(self.dt_values(t))

    def _bc_from_values(self, vals):
        g = self.grid
        nx, ny = g.nx, g.ny
        h = self._h
        h1, h2 = vals[:, 0], vals[:, 1]
        xf, yf, xc, yc = g.xf(), g.yf(), g.xc(), g.yc()
        s_bottom_f = xf  # (0,0) corner has s=0
        s_right_c = 1.0 + yc
        s_right_f = 1.0 + yf
        s_top_f = 2.0 + (1.0 - xf)
        s_top_c = 2.0 + (1.0 - xc)
        s_left_c = 3.0 + (1.0 - yc)
        s_left_f = 3.0 + (1.0 - yf)
        return VectorBC(
            x_bottom=self._interp(h1, s_bottom_f),
            x_top=self._interp(h1, s_top_f),
            x_left=self._interp(h1, s_left_c),
            x_right=self._interp(h1, s_right_c),
            y_bottom=self._interp(h2, xc),
            y_top=self._interp(h2, s_top_c),
            y_left=self._interp(h2, s_left_f),
            y_right=self._interp(h2, s_right_f),
        )

    def normal_values(self, t):
        """Normal component at every node (one per wall face)."""
        g = self.grid
        vals = self.values(t)
        nx, ny = g.nx, g.ny
        out = np.empty(self.n_nodes)
        out[:nx] = -vals[:nx, 1]  # bottom, outward normal (0,-1)
        out[nx : nx + ny] = vals[nx : nx + ny, 0]  # right
        out[nx + ny : 2 * nx + ny] = vals[nx + ny : 2 * nx + ny, 1]  # top
        out[2 * nx + ny :] = -vals[2 * nx + ny :, 0]  # left
        return out

    def net_flux(self, t):
        return float(np.sum(self.normal_values(t)) * self._h)


def boundary_l2_norm(values, h):
    """L2(boundary) norm of per-node values with uniform node weight h."""
    return float(np.sqrt(h * np.sum(np.asarray(values) ** 2)))


# --- fractional norms ------------------------------------------------------

def _hs_norm_sq_samples(samples, s, truncation=None):
    n = samples.shape[0]
    if truncation is None:
        truncation = n // 2
    if truncation > n // 2:
        raise ValueError(f"truncation {truncation} exceeds Nyquist {n // 2}")
    total = 0.0
    kk = np.arange(n // 2 + 1)
    kappa = 2.0 * np.pi * kk / 4.0
    mult = (1.0 + kappa**2) ** s
    weights = np.full(n // 2 + 1, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    keep = kk <= truncation
    for comp in range(samples.shape[1]):
        c = np.fft.rfft(samples[:, comp]) / n
        total += 4.0 * np.sum(weights[keep] * mult[keep] * np.abs(c[keep]) ** 2)
    return float(total)


def hs_norm(trace: BoundaryTrace, t, spec: FractionalNormSpec) -> float:
    """Fractional Sobolev norm of the trace at a sampled instant."""
    return _hs_norm_sq_samples(trace.values(t), spec.s, spec.truncation) ** 0.5


def hs_norm_dt(trace: BoundaryTrace, t, spec: FractionalNormSpec) -> float:
    return _hs_norm_sq_samples(trace.dt_values(t), spec.s, spec.truncation) ** 0.5


# --- synthesis and ingestion ------------------------------------------------

@dataclass(frozen=True)
class TraceMode:
    """One synthesized boundary mode.

    kind "fourier": amplitude * cos(2*pi*wavenumber*s/4 + phase) on one
    component.  kind "stream": trace of curl(amp*cos(kx*pi*x)*cos(ky*pi*y)),
    with the normal component taken from the same corner differences a MAC
    stream field uses, so matched initial data is exactly compatible.
    kind "constant": uniform vector (amp on the given component).
    Envelopes: constant | sin f | cos f | ramp r  (ramp = 1 - exp(-r t)).
    """

    kind: str
    amplitude: float = 1.0
    component: int = 1
    wavenumber: int = 1
    kx: int = 1
    ky: int = 1
    envelope: str = "constant"
    envelope_param: float = 1.0

    def envelope_at(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.envelope == "constant":
            return np.ones_like(t)
        if self.envelope == "sin":
            return np.sin(2.0 * np.pi * self.envelope_param * t)
        if self.envelope == "cos":
            return np.cos(2.0 * np.pi * self.envelope_param * t)
        if self.envelope == "ramp":
            return 1.0 - np.exp(-self.envelope_param * t)
        raise ValueError(f"unknown envelope {self.envelope!r}")


def _boundary_xy(grid):
    """Node coordinates (x, y) along the boundary, counterclockwise."""
    nx, ny = grid.nx, grid.ny
    xc, yc = grid.xc(), grid.yc()
    x = np.concatenate([xc, np.ones(ny), xc[::-1], np.zeros(ny)])
    y = np.concatenate([np.zeros(nx), yc, np.ones(nx), yc[::-1]])
    return x, y


def _stream_profile(grid, mode: TraceMode):
    """Spatial profile (N, 2) of a stream mode with discrete normal components."""
    a, kx, ky = mode.amplitude, mode.kx, mode.ky
    phi = lambda x, y: a * np.cos(kx * np.pi * x) * np.cos(ky * np.pi * y)
    phix = lambda x, y: -a * kx * np.pi * np.sin(kx * np.pi * x) * np.cos(ky * np.pi * y)
    phiy = lambda x, y: -a * ky * np.pi * np.cos(kx * np.pi * x) * np.sin(ky * np.pi * y)
    nx, ny = grid.nx, grid.ny
    h = grid.dx
    bx, by = _boundary_xy(grid)
    prof = np.empty((2 * (nx + ny), 2))
    prof[:, 0] = phiy(bx, by)  # h1 = d(phi)/dy
    prof[:, 1] = -phix(bx, by)  # h2 = -d(phi)/dx
    # overwrite normal components with the corner differences of phi
    xc, yc, xf, yf = grid.xc(), grid.yc(), grid.xf(), grid.yf()
    prof[:nx, 1] = -(phi(xf[1:], 0.0) - phi(xf[:-1], 0.0)) / h
    s = slice(nx, nx + ny)
    prof[s, 0] = (phi(1.0, yf[1:]) - phi(1.0, yf[:-1])) / h
    s = slice(nx + ny, 2 * nx + ny)
    prof[s, 1] = -(phi(xf[1:], 1.0) - phi(xf[:-1], 1.0))[::-1] / h
    s = slice(2 * nx + ny, None)
    prof[s, 0] = ((phi(0.0, yf[1:]) - phi(0.0, yf[:-1])) / h)[::-1]
    return prof


def _mode_profile(grid, mode: TraceMode):
    n = 2 * (grid.nx + grid.ny)
    if mode.kind == "stream":
        return _stream_profile(grid, mode)
    prof = np.zeros((n, 2))
    if mode.kind == "constant":
        prof[:, mode.component - 1] = mode.amplitude
        return prof
    if mode.kind == "fourier":
        s = (np.arange(n) + 0.5) * grid.dx
        prof[:, mode.component - 1] = mode.amplitude * np.cos(
            2.0 * np.pi * mode.wavenumber * s / 4.0
        )
        return prof
    raise ValueError(f"unknown trace mode kind {mode.kind!r}")


def synthesize_trace(grid: Grid, times, modes) -> BoundaryTrace:
    times = np.asarray(times, dtype=np.float64)
    n = 2 * (grid.nx + grid.ny)
    samples = np.zeros((len(times), n, 2))
    for mode in modes:
        prof = _mode_profile(grid, mode)
        env = mode.envelope_at(times)
        samples += env[:, None, None] * prof[None, :, :]
    return BoundaryTrace(grid, times, samples)


def stream_mode_field(grid: Grid, mode: TraceMode, t=0.0) -> VectorField:
    """The interior MAC field whose trace a stream mode describes."""
    if mode.kind == "constant":
        f = VectorField.zeros(grid)
        comp = f.x if mode.component == 1 else f.y
        comp += mode.amplitude * float(mode.envelope_at(t))
        return f
    if mode.kind != "stream":
        raise ValueError("only stream/constant modes correspond to interior fields")
    a = mode.amplitude * float(mode.envelope_at(t))
    xf, yf = grid.xf(), grid.yf()
    psi = a * np.cos(mode.kx * np.pi * xf)[:, None] * np.cos(mode.ky * np.pi * yf)[None, :]
    return VectorField.from_stream(grid, psi)


def read_trace_csv(grid: Grid, path) -> BoundaryTrace:
    """Ingest (time, arclength, h1, h2) rows, strictly sorted."""
    n = 2 * (grid.nx + grid.ny)
    h = grid.dx
    times = []
    blocks = []
    current_t = None
    block = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:4]] != ["time", "arclength", "h1", "h2"]:
            raise ConfigError(f"{path}: expected header time,arclength,h1,h2")
        for ln, row in enumerate(reader, start=2):
            t, s, h1, h2 = (float(v) for v in row[:4])
            if current_t is None or t != current_t:
                if current_t is not None and t <= current_t:
                    raise ConfigError(f"{path}: row {ln}: times not strictly increasing")
                if block:
                    blocks.append(block)
                block = []
                current_t = t
                times.append(t)
            k = len(block)
            expect = (k + 0.5) * h
            if abs(s - expect) > 1e-9:
                raise ConfigError(
                    f"{path}: row {ln}: arclength {s} (expected node {expect:.12g})"
                )
            block.append((h1, h2))
        if block:
            blocks.append(block)
    samples = np.array(blocks)
    if samples.ndim != 3 or samples.shape[1] != n:
        raise ConfigError(f"{path}: expected {n} nodes per instant")
    return BoundaryTrace(grid, np.array(times), samples)


# --- harmonic lift -----------------------------------------------------------

_harmonic_ops = {}


def _harmonic_operators(grid):
    key = (grid.nx, grid.ny)
    if key not in _harmonic_ops:
        _harmonic_ops[key] = (
            TransportOperator(grid, "x", None, 0.0, 1.0),
            TransportOperator(grid, "y", None, 0.0, 1.0),
        )
    return _harmonic_ops[key]


def harmonic_extend(trace: BoundaryTrace, t) -> VectorField:
    """Componentwise discrete harmonic extension of the trace at time t."""
    return harmonic_extend_bc(trace.grid, trace.vector_bc(t))


def harmonic_extend_bc(grid: Grid, bc: VectorBC) -> VectorField:
    opx, opy = _harmonic_operators(grid)
    hx = opx.solve(np.zeros(grid.shape_xface()), bc)
    hy = opy.solve(np.zeros(grid.shape_yface()), bc)
    return VectorField(grid, hx, hy)


@dataclass
class LiftingReport:
    """Measured constants of the elliptic lifting estimates."""

    c_h1: float
    c_dt: float
    h1_numerator: float
    h1_denominator: float
    dt_numerator: float
    dt_denominator: float


def _ratio(num, den):
    if den == 0.0:
        if num > 1e-14:
            raise ValueError("inconsistent ratio: zero denominator, nonzero numerator")
        return 0.0
    return num / den


def lifting_estimate_check(trace: BoundaryTrace, t_end=None) -> LiftingReport:
    """Quadrature ratios for the harmonic-lift regularity estimates (k=0)."""
    times = trace.times if t_end is None else trace.times[trace.times <= t_end + 1e-12]
    if len(times) < 1:
        raise ValueError("no sampled instants in the requested horizon")
    spec_h = FractionalNormSpec(0.5)
    spec_dt = FractionalNormSpec(-0.5)
    lifts = [harmonic_extend(trace, t) for t in times]
    h1 = np.array(
        [l2_norm_sq(he) + grad_norm_sq(he, trace.vector_bc(t)) for he, t in zip(lifts, times)]
    )
    hh = np.array([hs_norm(trace, t, spec_h) ** 2 for t in times])
    if len(times) == 1:
        return LiftingReport(_ratio(h1[0], hh[0]), 0.0, h1[0], hh[0], 0.0, 0.0)
    num_h1 = float(np.trapezoid(h1, times))
    den_h1 = float(np.trapezoid(hh, times))
    # time-derivative branch
    dt_he = []
    for i in range(len(times)):
        if i == 0:
            d = (lifts[1] - lifts[0]) * (1.0 / (times[1] - times[0]))
        elif i == len(times) - 1:
            d = (lifts[-1] - lifts[-2]) * (1.0 / (times[-1] - times[-2]))
        else:
            d = (lifts[i + 1] - lifts[i - 1]) * (1.0 / (times[i + 1] - times[i - 1]))
        dt_he.append(l2_norm_sq(d))
    num_dt = float(np.trapezoid(np.array(dt_he), times))
    den_dt = float(np.trapezoid(np.array([hs_norm_dt(trace, t, spec_dt) ** 2 for t in times]), times))
    return LiftingReport(
        _ratio(num_h1, den_h1), _ratio(num_dt, den_dt), num_h1, den_h1, num_dt, den_dt
    )


# --- parabolic lift ----------------------------------------------------------

@dataclass
class ParabolicRun:
    """States and norms of a completed parabolic lift."""

    times: np.ndarray
    fields: list
    l2_sq: np.ndarray
    grad_sq: np.ndarray
    h1_sq: np.ndarray
    lap_sq: np.ndarray
    h_h12_sq: np.ndarray
    h_h32_sq: np.ndarray
    dth_hm12_sq: np.ndarray
    b0_l2_sq: float
    b0_h1_sq: float


def check_compatibility_trace(b0: VectorField, trace: BoundaryTrace, tol_factor=1e-8):
    """Compatibility of initial data with the trace at t=0 (normal components)."""
    g = b0.grid
    t0 = trace.times[0]
    nx, ny = g.nx, g.ny
    # counterclockwise node order: top and left walls run backwards
    got = np.concatenate([-b0.y[:, 0], b0.x[-1, :], b0.y[::-1, -1], -b0.x[0, ::-1]])
    want = trace.normal_values(t0)
    res = boundary_l2_norm(got - want, g.dx)
    scale = boundary_l2_norm(want, g.dx)
    return res, res <= tol_factor * (1.0 + scale)


def parabolic_lift(
    b0: VectorField,
    trace: BoundaryTrace,
    dt: float,
    horizon: float,
    kappa: float = 1.0,
    on_incompatible: str = "reject",
) -> ParabolicRun:
    """Implicit-Euler heat flow with the trace as Dirichlet data."""
    g = b0.grid
    res, ok = check_compatibility_trace(b0, trace)
    if not ok:
        if on_incompatible == "reject":
            raise CompatibilityError(
                f"initial data does not match trace at t=0 (residual {res:.3e})"
            )
        # warn-and-project: overwrite the wall-normal faces with the trace
        b0 = b0.copy()
        bc0 = trace.vector_bc(trace.times[0])
        b0.x[0, :], b0.x[-1, :] = bc0.x_left, bc0.x_right
        b0.y[:, 0], b0.y[:, -1] = bc0.y_bottom, bc0.y_top
    opx = TransportOperator(g, "x", None, 1.0 / dt, kappa)
    opy = TransportOperator(g, "y", None, 1.0 / dt, kappa)
    nsteps = int(round(horizon / dt))
    times = [trace.times[0]]
    fields = [b0.copy()]
    cur = b0.copy()
    for k in range(nsteps):
        t_next = trace.times[0] + (k + 1) * dt
        bc = trace.vector_bc(t_next)
        nx_arr = opx.solve(cur.x / dt, bc)
        ny_arr = opy.solve(cur.y / dt, bc)
        cur = VectorField(g, nx_arr, ny_arr)
        times.append(t_next)
        fields.append(cur.copy())
    times = np.array(times)
    spec12 = FractionalNormSpec(0.5)
    spec32 = FractionalNormSpec(1.5)
    specm12 = FractionalNormSpec(-0.5)
    l2s, grads, h1s, laps, h12, h32, dhm = [], [], [], [], [], [], []
    for t, fld in zip(times, fields):
        bc = trace.vector_bc(t)
        a = l2_norm_sq(fld)
        b = grad_norm_sq(fld, bc)
        l2s.append(a)
        grads.append(b)
        h1s.append(a + b)
        laps.append(l2_norm_sq(apply_lap_mirror(fld, bc)))
        h12.append(hs_norm(trace, t, spec12) ** 2)
        h32.append(hs_norm(trace, t, spec32) ** 2)
        dhm.append(hs_norm_dt(trace, t, specm12) ** 2)
    return ParabolicRun(
        times,
        fields,
        np.array(l2s),
        np.array(grads),
        np.array(h1s),
        np.array(laps),
        np.array(h12),
        np.array(h32),
        np.array(dhm),
        l2_norm_sq(b0),
        l2_norm_sq(b0) + grad_norm_sq(b0, trace.vector_bc(trace.times[0])),
    )


@dataclass
class ParabolicReport:
    weak_margin: float  # max over t of LHS - RHS for the L2 estimate
    strong_margin: float  # same for the H1/H2 estimate
    c_weak: float
    c_strong: float


def parabolic_estimate_check(run: ParabolicRun, c_weak: float, c_strong: float) -> ParabolicReport:
    """Margins of the two parabolic lifting estimates with calibrated constants."""
    t = run.times
    cum_grad = np.concatenate([[0.0], np.cumsum(0.5 * (run.grad_sq[1:] + run.grad_sq[:-1]) * np.diff(t))])
    cum_h12 = np.concatenate([[0.0], np.cumsum(0.5 * (run.h_h12_sq[1:] + run.h_h12_sq[:-1]) * np.diff(t))])
    weak = np.max(run.l2_sq + cum_grad - (run.b0_l2_sq + c_weak * cum_h12))
    cum_h2 = np.concatenate([[0.0], np.cumsum(0.5 * (run.lap_sq[1:] + run.lap_sq[:-1]) * np.diff(t))])
    src = run.dth_hm12_sq + run.h_h32_sq
    cum_src = np.concatenate([[0.0], np.cumsum(0.5 * (src[1:] + src[:-1]) * np.diff(t))])
    strong = np.max(run.h1_sq + cum_h2 - (run.b0_h1_sq + c_strong * cum_src))
    return ParabolicReport(float(weak), float(strong), c_weak, c_strong)
