"""Command line entry point: ``frdvasc steady|simulate|check --config <path> [--out <dir>]``.

Configuration files are plain ``key = value`` lines with ``#`` comments and
dotted keys, for example::

    params.beta = 0.5
    bc.phi = dirichlet
    grid.n = 128
    perturb.rho = 1 1 5e-4; 2 1 3e-4

Mode lists are ``k l amplitude`` triples separated by semicolons. Unknown keys
are rejected before anything is computed.

Exit codes: 0 success, 1 a check failed, 2 configuration error or the steady
state could not be built (resonance, degenerate mass denominator), 3 the
density is not positive, 4 blow-up during a simulation (partial output is
kept).
"""

import argparse
import logging
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, checks, steady
from .diagnostics import CSV_COLUMNS, FitDomainError, fit_decay, record_row, vorticity_check
from .dynamics import StepConfig, VacuumWarning, run
from .experiments import Perturbation, PositivityError, make_initial
from .fields import Grid, LinearSolveConfig
from .model import BoundaryConfig, ModelParams, PhiBC

log = logging.getLogger("frdvasc")

EXIT_OK, EXIT_CHECK, EXIT_STEADY, EXIT_POSITIVITY, EXIT_BLOWUP = 0, 1, 2, 3, 4
DIAGNOSTICS_VERSION = 1


class ConfigError(ValueError):
    pass


def _modes(text):
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) != 3:
            raise ValueError(f"expected 'k l amplitude', got {chunk!r}")
        out.append((int(parts[0]), int(parts[1]), float(parts[2])))
    return tuple(out)


KEYS = {
    **{f"params.{k}": float for k in ("A0", "gamma", "alpha", "beta", "tau", "d", "a", "b")},
    "bc.phi": str,
    "grid.n": int,
    "mass": float,
    "t_end": float,
    "sample_every": float,
    "snapshot_every": float,
    "step.cfl": float,
    "step.rho_floor": float,
    "step.dt_max": float,
    "step.dt_min": float,
    "solver.tol": float,
    "solver.max_iter": int,
    "solver.preconditioner": str,
    "series.m_max": int,
    "series.tail_tol": float,
    "perturb.rho": _modes,
    "perturb.u_potential": _modes,
    "perturb.u_stream": _modes,
    "perturb.phi": _modes,
    "perturb.phi_offset": float,
    "perturb.random_modes": int,
    "perturb.random_amp": float,
    "seed": int,
    "out": str,
    "fit.start": float,
    "fit.end": float,
    "check.n": int,
    "check.steps": int,
}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into a dict of converted values."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return values


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams = field(default_factory=ModelParams)
    bc: BoundaryConfig = field(default_factory=BoundaryConfig)
    step: StepConfig = field(default_factory=StepConfig)
    series: steady.SeriesSpec = field(default_factory=steady.SeriesSpec)
    grid: Grid = Grid(64)
    mass: float = 1.0
    t_end: float = 10.0
    sample_every: float = 0.1
    snapshot_every: float = 0.0
    perturbation: Perturbation = field(default_factory=Perturbation)
    out: str = "."
    fit_window: tuple = None
    check_n: int = 16
    check_steps: int = 1000

    @classmethod
    def from_mapping(cls, v: dict) -> "RunConfig":
        unknown = set(v) - set(KEYS)
        if unknown:
            raise ConfigError(f"unknown keys: {sorted(unknown)}")
        try:
            defaults = ModelParams()
            params = ModelParams(**{k: v.get(f"params.{k}", getattr(defaults, k))
                                    for k in ("A0", "gamma", "alpha", "beta", "tau", "d", "a", "b")})
            bc = BoundaryConfig(PhiBC(v.get("bc.phi", "neumann").lower()))
            solver = LinearSolveConfig(v.get("solver.tol", 1e-10), v.get("solver.max_iter", 5000),
                                       v.get("solver.preconditioner", "spectral"))
            stepcfg = StepConfig(cfl=v.get("step.cfl", 0.4),
                                 rho_floor=v.get("step.rho_floor", 1e-12),
                                 dt_max=v.get("step.dt_max", math.inf),
                                 dt_min=v.get("step.dt_min", 1e-9), solver=solver)
            series = steady.SeriesSpec(v.get("series.m_max", 201), v.get("series.tail_tol", 1e-8))
            grid = Grid(v.get("grid.n", 64))
            pert = Perturbation(
                rho=v.get("perturb.rho", ()), u_potential=v.get("perturb.u_potential", ()),
                u_stream=v.get("perturb.u_stream", ()), phi=v.get("perturb.phi", ()),
                phi_offset=v.get("perturb.phi_offset", 0.0),
                random_modes=v.get("perturb.random_modes", 0),
                random_amp=v.get("perturb.random_amp", 0.0), seed=v.get("seed", 0))
            if bc.dirichlet and pert.phi_offset:
                raise ValueError("perturb.phi_offset needs bc.phi = neumann")
            mass = v.get("mass", 1.0)
            t_end = v.get("t_end", 10.0)
            sample_every = v.get("sample_every", 0.1)
            snapshot_every = v.get("snapshot_every", 0.0)
            if not mass > 0.0:
                raise ValueError("mass must be positive")
            if not (t_end > 0.0 and sample_every > 0.0 and snapshot_every >= 0.0):
                raise ValueError("t_end and sample_every must be positive, snapshot_every >= 0")
            window = None
            if "fit.start" in v or "fit.end" in v:
                window = (v.get("fit.start", 0.2 * t_end), v.get("fit.end", t_end))
                if not window[0] < window[1]:
                    raise ValueError("fit.start must be below fit.end")
            check_n = v.get("check.n", v.get("grid.n", 16))
            Grid(check_n)
            check_steps = v.get("check.steps", 1000)
            if check_steps < 1:
                raise ValueError("check.steps must be >= 1")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None
        return cls(params, bc, stepcfg, series, grid, mass, t_end, sample_every, snapshot_every,
                   pert, v.get("out", "."), window, check_n, check_steps)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        return cls.from_mapping(parse_config_text(text))


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_field_csv(path: Path, f: np.ndarray, grid: Grid) -> None:
    """Header of x centres, then one row per y centre (ascending)."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(_fmt(x) for x in grid.centers) + "\n")
        for row in f:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def read_field_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def _kv_lines(pairs) -> str:
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def cmd_steady(cfg: RunConfig, out: Path) -> int:
    if not cfg.bc.dirichlet:
        log.error("the steady subcommand builds the Dirichlet series state; set bc.phi = dirichlet")
        return EXIT_STEADY
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", steady.PositivityWarning)
            st = steady.build_steady(cfg.params, cfg.mass, cfg.grid, cfg.series)
    except (steady.ResonanceError, steady.DegenerateDenominatorError) as exc:
        log.error("%s", exc)
        return EXIT_STEADY
    out.mkdir(parents=True, exist_ok=True)
    write_field_csv(out / "phi_hat.csv", st.phi, cfg.grid)
    write_field_csv(out / "rho_hat.csv", st.rho, cfg.grid)
    res = steady.steady_residual(st)
    k_quad, _, k_rel, _ = checks.k_oracle(cfg.params, cfg.series, n_quad=1024)
    min_rho = float(st.rho.min())
    (out / "steady_report.txt").write_text(_kv_lines([
        ("C_hat", _fmt(st.C_hat)),
        ("Lambda", _fmt(st.Lambda)),
        ("D_hat", _fmt(st.D_hat)),
        ("K", _fmt(st.mass_coefficient)),
        ("K_quadrature_1024", _fmt(k_quad)),
        ("K_relative_error", _fmt(k_rel)),
        ("series_sum_S", _fmt(steady.mass_series_sum(st.Lambda, st.spec))),
        ("m_max", st.spec.m_max),
        ("tail_estimate", _fmt(st.tail_estimate)),
        ("resonance_margin", _fmt(st.resonance_margin)),
        ("residual_chem_l2", _fmt(res.chem)),
        ("residual_momentum_l2", _fmt(res.momentum)),
        ("min_rho_hat", _fmt(min_rho)),
        ("grid_n", cfg.grid.n),
    ]))
    if min_rho <= 0.0:
        log.error("steady density is not positive (min %.3e)", min_rho)
        return EXIT_POSITIVITY
    return EXIT_OK


def _fit_lines(prefix, t, values, window):
    try:
        fit = fit_decay(t, values, window)
    except FitDomainError as exc:
        return [(f"{prefix}_fit", f"unavailable ({exc})")]
    return [
        (f"{prefix}_eta_amp", _fmt(fit.eta_amp)),
        (f"{prefix}_eta_rate", _fmt(fit.eta_rate)),
        (f"{prefix}_r_squared", _fmt(fit.r_squared)),
        (f"{prefix}_window", f"{_fmt(fit.window[0])} {_fmt(fit.window[1])}"),
        (f"{prefix}_samples", fit.n_samples),
    ]


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", steady.PositivityWarning)
            setup = make_initial(cfg.grid, cfg.params, cfg.bc, cfg.mass, cfg.perturbation,
                                 cfg.series, cfg.step.solver)
    except (steady.ResonanceError, steady.DegenerateDenominatorError) as exc:
        log.error("%s", exc)
        return EXIT_STEADY
    except PositivityError as exc:
        log.error("%s", exc)
        return EXIT_POSITIVITY
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "diagnostics.csv", "w", newline="") as fh:
        fh.write(f"# frdvasc diagnostics v{DIAGNOSTICS_VERSION} (frdvasc {__version__})\n")
        fh.write(",".join(CSV_COLUMNS) + "\n")

        def emit(rec):
            fh.write(",".join(record_row(rec)) + "\n")
            fh.flush()

        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", VacuumWarning)
            traj = run(setup.state, cfg.params, cfg.bc, cfg.step, cfg.t_end, cfg.sample_every,
                       setup.reference, snapshot_every=cfg.snapshot_every or None, callback=emit)
        if traj.error:
            fh.write(f"# blow-up at t = {_fmt(traj.error_time)}: {traj.error}\n")
    for w in caught:
        log.warning("%s", w.message)
    for k, s in traj.snapshots:
        write_field_csv(out / f"rho_t{k}.csv", s.rho, cfg.grid)
        write_field_csv(out / f"phi_t{k}.csv", s.phi, cfg.grid)

    recs = traj.records
    t = np.array([r.t for r in recs])
    lines = [("status", "blow-up" if traj.error else "ok"), ("steps", traj.steps),
             ("final_time", _fmt(traj.final.t)), ("floored", str(traj.floored).lower())]
    if traj.error:
        lines.append(("blowup_time", _fmt(traj.error_time)))
    lines.append(("energy", "squared H1 norms of rho - rho_ref, u, phi - phi_ref"))
    window = cfg.fit_window or (0.2 * cfg.t_end, cfg.t_end)
    lines += _fit_lines("energy", t, [r.energy for r in recs], window)
    vort = vorticity_check(recs, window)
    lines += _fit_lines("vorticity", vort.t, vort.omega_l2, window)
    (out / "decay_fit.txt").write_text(_kv_lines(lines))
    if traj.error:
        log.error("%s", traj.error)
        return EXIT_BLOWUP
    return EXIT_OK


def cmd_check(cfg: RunConfig) -> int:
    results = checks.suite(cfg.check_n, cfg.check_steps)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="frdvasc", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"frdvasc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, needs in (("steady", True), ("simulate", True), ("check", False)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs, help="key = value configuration file")
        p.add_argument("--out", help="output directory (overrides the 'out' key)")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    except ConfigError as exc:
        print(f"frdvasc: config error: {exc}", file=sys.stderr)
        return EXIT_STEADY
    out = Path(args.out or cfg.out)
    if args.command == "steady":
        return cmd_steady(cfg, out)
    if args.command == "simulate":
        return cmd_simulate(cfg, out)
    return cmd_check(cfg)


if __name__ == "__main__":
    sys.exit(main())
