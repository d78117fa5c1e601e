"""Command-line driver: config ingestion, runs, experiments, calibration, bases.

Configuration is a plain INI-style text file with fixed sections; unknown
sections or keys are rejected and every violation is reported at once.
Environment variables with the ``MHD_`` prefix provide defaults with the
lowest precedence (config file and flags override them).

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 failed experiment assertion.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .dynamics import (
    SolverConfig,
    check_restart_header,
    read_checkpoint,
    run,
    write_checkpoint,
)
from .errors import CompatibilityError, ConfigError, ExperimentFailure, SolverFailure
from .estimates import CalibrationStore
from .geometry import VectorField
from .ioutil import atomic_write_text
from .lifting import TraceMode, read_trace_csv, stream_mode_field, synthesize_trace
from .scenarios import stream_bump, trace_times
from .spectral import cached_basis
from .verify import EXPERIMENTS, calibrate_constants

log = logging.getLogger("mhd2d")

_SCHEMA = {
    "grid": {"nx", "ny"},
    "time": {"dt", "T"},
    "physics": {"Re", "Rm", "S"},
    "galerkin": {"n", "m"},
    "boundary": {"modes", "csv"},
    "initial": {"u", "b", "checkpoint"},
    "tolerances": {"picard", "outer", "compatibility", "div_clean"},
    "outputs": {"ledger", "checkpoint_every", "calibration", "basis_cache"},
    "experiment": {"id", "variant", "nx_list", "dt_list", "n_list", "diam_factor", "seed", "strong"},
}
_REQUIRED = {("grid", "nx"), ("grid", "ny"), ("time", "dt"), ("time", "T")}


@dataclass
class RunConfig:
    """Parsed, validated configuration for one CLI invocation."""

    solver: SolverConfig
    boundary_modes: list = field(default_factory=list)
    boundary_csv: str | None = None
    initial_u: str = "zero"
    initial_b: str = "zero"
    checkpoint_in: str | None = None
    ledger_path: str = "ledger.csv"
    calibration_path: str = "calibration.txt"
    basis_cache: str | None = None
    experiment_ids: list = field(default_factory=list)
    experiment_params: dict = field(default_factory=dict)

    def to_text(self) -> str:
        """Serialize so that re-parsing reproduces this config exactly."""
        cp = configparser.ConfigParser()
        s = self.solver
        cp["grid"] = {"nx": str(s.nx), "ny": str(s.ny)}
        cp["time"] = {"dt": repr(s.dt), "T": repr(s.t_final)}
        cp["physics"] = {"Re": repr(s.re), "Rm": repr(s.rm), "S": repr(s.s)}
        cp["galerkin"] = {
            "n": "full" if s.n_modes is None else str(s.n_modes),
            "m": str(s.m_diag),
        }
        cp["boundary"] = {}
        if self.boundary_csv:
            cp["boundary"]["csv"] = self.boundary_csv
        elif self.boundary_modes:
            cp["boundary"]["modes"] = "; ".join(_mode_to_text(m) for m in self.boundary_modes)
        cp["initial"] = {"u": self.initial_u, "b": self.initial_b}
        if self.checkpoint_in:
            cp["initial"]["checkpoint"] = self.checkpoint_in
        cp["tolerances"] = {
            "picard": repr(s.picard_tol),
            "outer": repr(s.outer_tol),
            "compatibility": repr(s.compat_tol_factor),
            "div_clean": repr(s.div_clean_threshold),
        }
        cp["outputs"] = {
            "ledger": self.ledger_path,
            "checkpoint_every": str(s.checkpoint_every),
            "calibration": self.calibration_path,
        }
        if self.basis_cache:
            cp["outputs"]["basis_cache"] = self.basis_cache
        if self.experiment_ids:
            cp["experiment"] = {"id": ",".join(self.experiment_ids)}
            for k, v in self.experiment_params.items():
                cp["experiment"][k] = v
        import io

        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _mode_to_text(m: TraceMode) -> str:
    parts = [m.kind, f"amp={m.amplitude!r}"]
    if m.kind == "fourier":
        parts += [f"comp={m.component}", f"k={m.wavenumber}"]
    elif m.kind == "constant":
        parts += [f"comp={m.component}"]
    else:
        parts += [f"kx={m.kx}", f"ky={m.ky}"]
    if m.envelope != "constant":
        parts += [f"env={m.envelope}", f"p={m.envelope_param!r}"]
    return " ".join(parts)


def _parse_mode(text: str, errors) -> TraceMode | None:
    toks = text.split()
    if not toks:
        return None
    kind = toks[0]
    if kind not in ("stream", "fourier", "constant"):
        errors.append(f"boundary.modes: unknown mode kind {kind!r}")
        return None
    kw = {}
    for tok in toks[1:]:
        if "=" not in tok:
            errors.append(f"boundary.modes: malformed token {tok!r}")
            return None
        k, v = tok.split("=", 1)
        kw[k] = v
    try:
        mode = TraceMode(
            kind=kind,
            amplitude=float(kw.pop("amp", 1.0)),
            component=int(kw.pop("comp", 1)),
            wavenumber=int(kw.pop("k", 1)),
            kx=int(kw.pop("kx", 1)),
            ky=int(kw.pop("ky", 1)),
            envelope=kw.pop("env", "constant"),
            envelope_param=float(kw.pop("p", 1.0)),
        )
    except ValueError as exc:
        errors.append(f"boundary.modes: {exc}")
        return None
    if kw:
        errors.append(f"boundary.modes: unknown keys {sorted(kw)}")
        return None
    return mode


def parse_config(path) -> RunConfig:
    """Read and validate a config file, reporting every violation at once."""
    if not os.path.exists(path):
        raise ConfigError([f"config file {path!r} does not exist"])
    cp = configparser.ConfigParser()
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError([f"config parse error: {exc}"])
    errors = []
    for sec in cp.sections():
        if sec not in _SCHEMA:
            errors.append(f"unknown section [{sec}]")
            continue
        for key in cp[sec]:
            if key not in {k.lower() for k in _SCHEMA[sec]}:
                errors.append(f"unknown key {sec}.{key}")
    for sec, key in _REQUIRED:
        if not cp.has_option(sec, key):
            errors.append(f"missing required key {sec}.{key}")

    def get(sec, key, conv, default, positive=False):
        if not cp.has_option(sec, key):
            return default
        raw = cp.get(sec, key)
        try:
            v = conv(raw)
        except ValueError:
            errors.append(f"{sec}.{key}: cannot parse {raw!r}")
            return default
        if positive and not v > 0:
            errors.append(f"{sec}.{key} must be positive")
        return v

    nx = get("grid", "nx", int, 32, positive=True)
    ny = get("grid", "ny", int, 32, positive=True)
    dt = get("time", "dt", float, 1e-3, positive=True)
    t_final = get("time", "T", float, 1.0, positive=True)
    re = get("physics", "Re", float, 1.0, positive=True)
    rm = get("physics", "Rm", float, 1.0, positive=True)
    s_c = get("physics", "S", float, 1.0, positive=True)
    n_raw = cp.get("galerkin", "n", fallback="full").strip()
    n_modes = None
    if n_raw != "full":
        try:
            n_modes = int(n_raw)
        except ValueError:
            errors.append(f"galerkin.n: expected integer or 'full', got {n_raw!r}")
    m_diag = get("galerkin", "m", int, 0)

    modes = []
    if cp.has_option("boundary", "modes"):
        for part in cp.get("boundary", "modes").split(";"):
            part = part.strip()
            if part:
                m = _parse_mode(part, errors)
                if m is not None:
                    modes.append(m)
    csv_path = cp.get("boundary", "csv", fallback=None)
    if csv_path and modes:
        errors.append("boundary: give either modes or csv, not both")

    solver = SolverConfig(
        nx=nx,
        ny=ny,
        dt=dt,
        t_final=t_final,
        re=re,
        rm=rm,
        s=s_c,
        n_modes=n_modes,
        m_diag=m_diag,
        picard_tol=get("tolerances", "picard", float, 1e-10, positive=True),
        outer_tol=get("tolerances", "outer", float, 1e-9, positive=True),
        compat_tol_factor=get("tolerances", "compatibility", float, 1e-8, positive=True),
        div_clean_threshold=get("tolerances", "div_clean", float, 1e-10, positive=True),
        checkpoint_every=get("outputs", "checkpoint_every", int, 0),
    )
    exp_ids = []
    exp_params = {}
    if cp.has_section("experiment"):
        exp_ids = [e.strip() for e in cp.get("experiment", "id", fallback="").split(",") if e.strip()]
        for e in exp_ids:
            if e not in EXPERIMENTS:
                errors.append(f"experiment.id: unknown experiment {e!r} (known: {sorted(EXPERIMENTS)})")
        for key in ("variant", "nx_list", "dt_list", "n_list", "diam_factor", "seed", "strong"):
            if cp.has_option("experiment", key):
                exp_params[key] = cp.get("experiment", key)

    rc = RunConfig(
        solver=solver,
        boundary_modes=modes,
        boundary_csv=csv_path,
        initial_u=cp.get("initial", "u", fallback="zero"),
        initial_b=cp.get("initial", "b", fallback="zero"),
        checkpoint_in=cp.get("initial", "checkpoint", fallback=None),
        ledger_path=cp.get("outputs", "ledger", fallback="ledger.csv"),
        calibration_path=cp.get("outputs", "calibration", fallback="calibration.txt"),
        basis_cache=cp.get("outputs", "basis_cache", fallback=None),
        experiment_ids=exp_ids,
        experiment_params=exp_params,
    )
    try:
        solver.validate()
    except ConfigError as exc:
        errors.extend(exc.violations)
    if errors:
        raise ConfigError(errors)
    return rc


def _build_initial(spec: str, grid, modes, errors):
    f = VectorField.zeros(grid)
    for term in spec.split(";"):
        term = term.strip()
        if not term or term == "zero":
            continue
        toks = term.split()
        kw = dict(tok.split("=", 1) for tok in toks[1:] if "=" in tok)
        if toks[0] == "bump":
            f = f + stream_bump(
                grid, float(kw.get("amp", 1.0)), int(kw.get("kx", 1)), int(kw.get("ky", 1))
            )
        elif toks[0] == "matched":
            for m in modes:
                if m.kind in ("stream", "constant"):
                    f = f + stream_mode_field(grid, m, 0.0)
        else:
            errors.append(f"initial: unknown term {toks[0]!r}")
    return f


def _cmd_run(rc: RunConfig, outdir):
    grid = rc.solver.grid()
    rc.solver.checkpoint_dir = outdir
    if rc.boundary_csv:
        trace = read_trace_csv(grid, rc.boundary_csv)
    else:
        trace = synthesize_trace(grid, trace_times(rc.solver), rc.boundary_modes)
    basis = None
    if rc.solver.n_modes is not None:
        cache = rc.basis_cache or os.path.join(outdir, "basis_cache")
        basis = cached_basis("stokes", grid, rc.solver.n_modes, cache)
    errors = []
    if rc.checkpoint_in:
        ck = read_checkpoint(rc.checkpoint_in)
        check_restart_header(ck, rc.solver)
        u0, b0, p0 = ck["state"].u, ck["state"].b, ck["state"].p
        t0 = ck["t"]
        traj, ledger = run(rc.solver, u0, b0, trace, basis=basis, t0=t0, p0=p0)
    else:
        u0 = _build_initial(rc.initial_u, grid, rc.boundary_modes, errors)
        b0 = _build_initial(rc.initial_b, grid, rc.boundary_modes, errors)
        if errors:
            raise ConfigError(errors)
        traj, ledger = run(rc.solver, u0, b0, trace, basis=basis)
    ledger.write_csv(os.path.join(outdir, rc.ledger_path))
    write_checkpoint(os.path.join(outdir, "final.mhdckpt"), traj.final_state, rc.solver)
    log.info("run finished at t=%.6g; ledger rows: %d", traj.final_state.t, len(ledger))
    return 0


_NEEDS_STORE = {"absorbing", "gronwall"}


def _experiment_kwargs(rc: RunConfig, name):
    kw = {}
    p = rc.experiment_params
    if name in ("mms",) and "nx_list" in p:
        kw["nx_list"] = tuple(int(v) for v in p["nx_list"].split(","))
    if name in ("mms", "picard") and "dt_list" in p:
        kw["dt_list"] = tuple(float(v) for v in p["dt_list"].split(","))
    if name == "tail" and "n_list" in p:
        kw["n_list"] = tuple(int(v) for v in p["n_list"].split(","))
    if name == "absorbing":
        if "variant" in p:
            kw["variant"] = p["variant"]
        if "diam_factor" in p:
            kw["diam_factor"] = float(p["diam_factor"])
        if "strong" in p:
            kw["strong"] = p["strong"]
    if name in ("basis-stability", "brezis-gallouet") and "seed" in p:
        kw["seed"] = int(p["seed"])
    return kw


def _cmd_experiment(rc: RunConfig, outdir, threads):
    if not rc.experiment_ids:
        raise ConfigError(["experiment.id is required for the experiment command"])
    store = None
    if any(e in _NEEDS_STORE for e in rc.experiment_ids):
        path = rc.calibration_path
        if not os.path.isabs(path):
            path = os.path.join(outdir, path)
        if not os.path.exists(path):
            raise ConfigError(
                [f"calibration store {path!r} missing; run the calibrate command first"]
            )
        store = CalibrationStore.read(path)

    def one(name):
        return name, EXPERIMENTS[name](store, **_experiment_kwargs(rc, name))

    if threads > 1 and len(rc.experiment_ids) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, rc.experiment_ids))
    else:
        results = [one(n) for n in rc.experiment_ids]

    summary_path = os.path.join(outdir, "summary.csv")
    existing = ""
    if os.path.exists(summary_path):
        with open(summary_path) as fh:
            existing = fh.read()
    if not existing:
        existing = "experiment,assertion,paper_ref,measured,tolerance,pass\n"
    all_ok = True
    for name, rep in results:
        rep.write(os.path.join(outdir, f"report_{name}.csv"))
        body = rep.to_csv_text().split("\n", 1)[1]
        existing += body
        all_ok &= rep.passed
        log.info("experiment %s: %s (%.1f s)", name, "pass" if rep.passed else "FAIL", rep.runtime_s)
        for a in rep.assertions:
            log.info("  %-28s measured=%.6g tol=%.6g %s", a.assertion_id, a.measured,
                     a.tolerance, "ok" if a.passed else "FAIL")
    atomic_write_text(summary_path, existing)
    if not all_ok:
        failed = [n for n, r in results if not r.passed]
        raise ExperimentFailure(f"experiments failed: {failed}")
    return 0


def _cmd_calibrate(rc: RunConfig, outdir):
    store = calibrate_constants(nx=rc.solver.nx, dt=rc.solver.dt)
    path = rc.calibration_path
    if not os.path.isabs(path):
        path = os.path.join(outdir, path)
    store.write(path)
    log.info("calibration written to %s (%d constants)", path, len(store.values))
    return 0


def _cmd_basis(rc: RunConfig, outdir):
    cache = rc.basis_cache or os.path.join(outdir, "basis_cache")
    grid = rc.solver.grid()
    n = rc.solver.n_modes or 16
    m = rc.solver.m_diag or 16
    cached_basis("stokes", grid, n, cache)
    cached_basis("dirichlet_laplacian", grid, m, cache)
    log.info("cached stokes(%d) and laplacian(%d) bases in %s", n, m, cache)
    return 0


def main(argv=None) -> int:
    env_out = os.environ.get("MHD_OUTPUT_DIR", ".")
    env_threads = int(os.environ.get("MHD_THREADS", "1"))
    env_verbose = os.environ.get("MHD_VERBOSE", "") not in ("", "0", "false")
    parser = argparse.ArgumentParser(prog="mhd2d", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "experiment", "calibrate", "basis"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="path to the INI config file")
        sp.add_argument("--output-dir", default=env_out)
        sp.add_argument("--threads", type=int, default=env_threads)
        sp.add_argument("--verbose", action="store_true", default=env_verbose)
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        rc = parse_config(args.config)
        os.makedirs(args.output_dir, exist_ok=True)
        if args.command == "run":
            return _cmd_run(rc, args.output_dir)
        if args.command == "experiment":
            return _cmd_experiment(rc, args.output_dir, args.threads)
        if args.command == "calibrate":
            return _cmd_calibrate(rc, args.output_dir)
        return _cmd_basis(rc, args.output_dir)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    except (SolverFailure, CompatibilityError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except ExperimentFailure as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
