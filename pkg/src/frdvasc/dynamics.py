"""Time integration of the coupled fluid / chemical system.

The fluid part (rho, rho u) is advanced with a dimension-by-dimension
finite-volume scheme: minmod-limited MUSCL reconstruction of (rho, u, v),
Rusanov fluxes and SSP-RK2 in time. Damping and chemotaxis are handled in a
separate source step that is Strang-split around the fluid step; the chemical
is re-solved (tau = 0) or advanced by backward Euler (tau > 0) after the fluid
step.

Walls carry ghost cells: tangential velocity mirrored, normal velocity
mirrored with a sign flip, density linearly extrapolated so that the wall
pressure is second order even when the equilibrium has a normal density
gradient. Both sides of a wall face carry the same density and opposite
normal velocities, so the mass flux through every wall is zero and total mass
telescopes exactly.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import fields
from .fields import Grid, LinearSolveConfig
from .model import BoundaryConfig, ModelParams, pressure, sound_speed

log = logging.getLogger(__name__)


class BlowUpError(RuntimeError):
    def __init__(self, message, t):
        super().__init__(f"{message} at t = {t:.17g}")
        self.t = t


class VacuumWarning(UserWarning):
    """The density was floored at some cell."""


@dataclass(frozen=True)
class StepConfig:
    cfl: float = 0.4
    rho_floor: float = 1e-12
    dt_max: float = math.inf
    # a CFL step below this is treated as blow-up
    dt_min: float = 1e-9
    limiter: str = "minmod"
    time_scheme: str = "ssp-rk2"
    solver: LinearSolveConfig = field(default_factory=LinearSolveConfig)

    def __post_init__(self):
        if not 0.0 < self.cfl <= 0.9:
            raise ValueError(f"cfl must lie in (0, 0.9], got {self.cfl}")
        if not self.rho_floor > 0.0:
            raise ValueError("rho_floor must be positive")
        if not self.dt_max > 0.0:
            raise ValueError("dt_max must be positive")
        if self.limiter != "minmod":
            raise ValueError("only the minmod limiter is implemented")
        if self.time_scheme != "ssp-rk2":
            raise ValueError("only SSP-RK2 is implemented")


@dataclass(frozen=True)
class State:
    """Snapshot (rho, m = rho u, phi) at time ``t``; ``mom`` has shape (2, n, n)."""

    grid: Grid
    t: float
    rho: np.ndarray = field(repr=False)
    mom: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    floored: bool = False

    def velocity(self, rho_floor: float = 1e-12) -> np.ndarray:
        return self.mom / np.maximum(self.rho, rho_floor)


def initial_state(grid: Grid, params: ModelParams, bc: BoundaryConfig, rho, velocity=None,
                  phi=None, solver: LinearSolveConfig = LinearSolveConfig(), t=0.0) -> State:
    """Assemble a State from density, velocity and (for tau > 0) the chemical.

    With tau = 0 the chemical is a constraint and ``phi`` is ignored; it is
    solved from ``rho``.
    """
    rho = np.array(rho, dtype=float)
    if rho.shape != (grid.n, grid.n):
        rho = np.full((grid.n, grid.n), float(rho))
    vel = np.zeros((2, grid.n, grid.n)) if velocity is None else np.asarray(velocity, float)
    if params.tau == 0.0:
        phi = fields.helmholtz_solve(params.b * rho, grid, params.d, params.a, 0.0, bc, solver)
    elif phi is None:
        raise ValueError("tau > 0 requires an initial chemical field")
    else:
        phi = np.array(phi, dtype=float)
        if phi.shape != (grid.n, grid.n):
            phi = np.full((grid.n, grid.n), float(phi))
    return State(grid, float(t), rho, rho * vel, phi)


def _minmod(a, b):
    return np.where(a * b > 0.0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _density_ghosts(q):
    """Two ghost layers per wall by linear extrapolation of the density.

    The wall increment is capped at the wall-cell value, which keeps the
    reconstructed wall density >= half of it. Both sides of a wall face then
    see the same density, so the mass flux there vanishes identically.
    """
    dl = np.minimum(q[:, 1:2] - q[:, 0:1], q[:, 0:1])
    dr = np.minimum(q[:, -2:-1] - q[:, -1:], q[:, -1:])
    left = np.concatenate((q[:, 0:1] - 2.0 * dl, q[:, 0:1] - dl), axis=1)
    right = np.concatenate((q[:, -1:] - dr, q[:, -1:] - 2.0 * dr), axis=1)
    return left, right


def _reconstruct(q, kind):
    """MUSCL face states along axis 1 with two ghost layers per wall.

    ``kind`` is "even" (mirror), "odd" (mirror with sign flip) or "density"
    (see :func:`_density_ghosts`). Returns ``(qL, qR)`` of shape
    ``(ny, n + 1)``; face k sits between cells k - 1 and k, so faces 0 and n
    are the walls.
    """
    if kind == "density":
        left, right = _density_ghosts(q)
    else:
        left, right = q[:, 1::-1], q[:, :-3:-1]
        if kind == "odd":
            left, right = -left, -right
    g = np.concatenate((left, q, right), axis=1)
    dq = np.diff(g, axis=1)
    slope = _minmod(dq[:, :-1], dq[:, 1:])
    qc = g[:, 1:-1]
    return qc[:, :-1] + 0.5 * slope[:, :-1], qc[:, 1:] - 0.5 * slope[:, 1:]


def _sweep(rho, un, ut, params: ModelParams, h):
    """Flux differences -(F_{k+1} - F_k)/h along axis 1 for (rho, m_n, m_t)."""
    rL, rR = _reconstruct(rho, "density")
    nL, nR = _reconstruct(un, "odd")
    tL, tR = _reconstruct(ut, "even")
    pL, pR = pressure(rL, params), pressure(rR, params)
    s = np.maximum(np.abs(nL) + sound_speed(rL, params), np.abs(nR) + sound_speed(rR, params))
    mL, mR = rL * nL, rR * nR
    f_rho = 0.5 * (mL + mR) - 0.5 * s * (rR - rL)
    f_n = 0.5 * (mL * nL + pL + mR * nR + pR) - 0.5 * s * (mR - mL)
    f_t = 0.5 * (mL * tL + mR * tR) - 0.5 * s * (rR * tR - rL * tL)
    # no mass crosses the walls (already true by reflection; pinned exactly)
    f_rho[:, 0] = 0.0
    f_rho[:, -1] = 0.0
    inv_h = 1.0 / h
    return (
        -(f_rho[:, 1:] - f_rho[:, :-1]) * inv_h,
        -(f_n[:, 1:] - f_n[:, :-1]) * inv_h,
        -(f_t[:, 1:] - f_t[:, :-1]) * inv_h,
    )


def hyperbolic_rhs(state: State, params: ModelParams, rho_floor: float = 1e-12):
    """Tendencies (d rho/dt, d mom/dt) of the inviscid part; sources excluded."""
    rho = state.rho
    h = state.grid.h
    u, v = state.velocity(rho_floor)
    drx, dmx_x, dmy_x = _sweep(rho, u, v, params, h)
    t = np.ascontiguousarray
    dry, dmy_y, dmx_y = _sweep(t(rho.T), t(v.T), t(u.T), params, h)
    drho = drx + dry.T
    dmom = np.stack([dmx_x + dmx_y.T, dmy_x + dmy_y.T])
    return drho, dmom


def source_update(state: State, dt: float, params: ModelParams, bc: BoundaryConfig,
                  rho_floor: float = 1e-12) -> State:
    """Integrate u' = -alpha u + beta grad phi exactly over ``dt`` with phi frozen.

    Density is untouched; the momentum is recomposed from the new velocity.
    """
    g = params.beta * fields.gradient(state.phi, state.grid, bc)
    decay = math.exp(-params.alpha * dt)
    gain = -math.expm1(-params.alpha * dt) / params.alpha
    u = state.velocity(rho_floor) * decay + g * gain
    return replace(state, mom=state.rho * u)


def chem_update(state: State, dt: float, params: ModelParams, bc: BoundaryConfig,
                cfg: LinearSolveConfig = LinearSolveConfig()) -> np.ndarray:
    """New chemical from the current density (elliptic solve or backward Euler)."""
    grid = state.grid
    if params.tau == 0.0:
        return fields.helmholtz_solve(params.b * state.rho, grid, params.d, params.a, 0.0, bc,
                                      cfg, x0=state.phi)
    if not dt > 0.0:
        raise ValueError("dt must be positive when tau > 0")
    shift = params.tau / dt
    rhs = params.b * state.rho + shift * state.phi
    return fields.helmholtz_solve(rhs, grid, params.d, params.a, shift, bc, cfg, x0=state.phi)


def compute_dt(state: State, params: ModelParams, cfg: StepConfig = StepConfig()) -> float:
    c = sound_speed(np.maximum(state.rho, cfg.rho_floor), params)
    u, v = state.velocity(cfg.rho_floor)
    speed = max(float(np.max(np.abs(u) + c)), float(np.max(np.abs(v) + c)))
    dt = cfg.cfl * state.grid.h / speed if speed > 0.0 else cfg.dt_max
    return min(dt, cfg.dt_max)


def _floor(rho, floor):
    low = rho < floor
    if np.any(low):
        rho = np.where(low, floor, rho)
        return rho, True
    return rho, False


def _check_finite(state: State, t):
    if not (np.all(np.isfinite(state.rho)) and np.all(np.isfinite(state.mom))
            and np.all(np.isfinite(state.phi))):
        raise BlowUpError("non-finite values in the state", t)


def step(state: State, params: ModelParams, bc: BoundaryConfig,
         cfg: StepConfig = StepConfig(), dt: Optional[float] = None) -> State:
    """Advance one time step; returns a fresh State.

    Sequence: half source step, SSP-RK2 fluid step, chemical update, half
    source step. ``dt`` defaults to the CFL step (capped by ``cfg.dt_max``).
    """
    _check_finite(state, state.t)
    if dt is None:
        dt = compute_dt(state, params, cfg)
    if not np.isfinite(dt) or dt < cfg.dt_min:
        raise BlowUpError(f"time step collapsed (dt = {dt:.3e})", state.t)
    floor = cfg.rho_floor
    s = source_update(state, 0.5 * dt, params, bc, floor)

    k_rho, k_mom = hyperbolic_rhs(s, params, floor)
    rho1, f1 = _floor(s.rho + dt * k_rho, floor)
    s1 = replace(s, rho=rho1, mom=s.mom + dt * k_mom)
    _check_finite(s1, state.t)
    k_rho, k_mom = hyperbolic_rhs(s1, params, floor)
    rho2, f2 = _floor(0.5 * s.rho + 0.5 * (s1.rho + dt * k_rho), floor)
    mom2 = 0.5 * s.mom + 0.5 * (s1.mom + dt * k_mom)
    s2 = replace(s, rho=rho2, mom=mom2)
    _check_finite(s2, state.t)

    phi = chem_update(s2, dt, params, bc, cfg.solver)
    out = source_update(replace(s2, phi=phi), 0.5 * dt, params, bc, floor)
    out = replace(out, t=state.t + dt, floored=f1 or f2)
    _check_finite(out, out.t)
    return out


@dataclass
class Trajectory:
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    final: Optional[State] = None
    steps: int = 0
    floored: bool = False
    error: Optional[str] = None
    error_time: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run(initial: State, params: ModelParams, bc: BoundaryConfig, cfg: StepConfig,
        t_end: float, sample_every: float, reference=None,
        snapshot_every: Optional[float] = None,
        callback: Optional[Callable] = None) -> Trajectory:
    """Iterate :func:`step` up to ``t_end`` and record diagnostics.

    Time steps are shortened so that every sample time ``k * sample_every``
    is hit exactly. Each sample appends a
    :class:`~frdvasc.diagnostics.EnergyRecord` when a ``reference`` is given
    (otherwise the State itself). Snapshots are ``(k, State)`` pairs. A blow-up
    stops the run and is reported through ``Trajectory.error``; everything
    recorded up to that point is kept.
    """
    from . import diagnostics

    if not t_end > 0.0:
        raise ValueError("t_end must be positive")
    if not sample_every > 0.0:
        raise ValueError("sample_every must be positive")
    traj = Trajectory()
    eps = 1e-12 * max(1.0, t_end)

    def sample(state, prev):
        rec = state if reference is None else diagnostics.measure(state, reference, params, prev)
        traj.records.append(rec)
        if callback is not None:
            callback(rec)

    state = initial
    sample(state, None)
    prev_sample = state
    k_sample = 1
    k_snap = 0
    if snapshot_every:
        traj.snapshots.append((0, state))
        k_snap = 1
    while state.t < t_end - eps:
        t_next = min(k_sample * sample_every, t_end)
        if snapshot_every:
            t_next = min(t_next, k_snap * snapshot_every)
        try:
            dt = compute_dt(state, params, cfg)
            dt = min(dt, t_next - state.t)
            state = step(state, params, bc, cfg, dt)
        except BlowUpError as exc:
            traj.error = str(exc)
            traj.error_time = exc.t
            log.error("%s", exc)
            break
        traj.steps += 1
        if state.floored and not traj.floored:
            traj.floored = True
            warnings.warn(f"density floored at t = {state.t:.6g}", VacuumWarning, stacklevel=2)
        if abs(state.t - t_next) <= eps:
            state = replace(state, t=t_next)
            if snapshot_every and abs(t_next - k_snap * snapshot_every) <= eps:
                traj.snapshots.append((k_snap, state))
                k_snap += 1
            if abs(t_next - min(k_sample * sample_every, t_end)) <= eps:
                sample(state, prev_sample)
                prev_sample = state
                k_sample += 1
    traj.final = state
    return traj
