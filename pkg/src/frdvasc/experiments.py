"""Initial data for stability experiments: equilibrium plus boundary-compatible modes.

Density modes are cos(k pi x) cos(l pi y) (mean-free for k + l > 0, so mass is
unchanged). Velocity modes come in two families, both tangent to the walls:
potential flows grad(cos cos) and stream-function flows rot(sin sin). Every
mode is scaled so that its sup norm is at most its amplitude.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .diagnostics import Reference
from .dynamics import State, initial_state
from .fields import Grid, LinearSolveConfig
from .model import BoundaryConfig, ModelParams
from .steady import SeriesSpec, SteadySolution, build_steady


class PositivityError(ValueError):
    """The initial density (equilibrium plus perturbation) is not strictly positive."""


class Mode(NamedTuple):
    k: int
    l: int
    amp: float


@dataclass(frozen=True)
class Perturbation:
    rho: tuple = ()
    u_potential: tuple = ()
    u_stream: tuple = ()
    phi: tuple = ()
    phi_offset: float = 0.0
    random_modes: int = 0
    random_amp: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("rho", "u_potential", "u_stream", "phi"):
            modes = tuple(Mode(int(k), int(l), float(a)) for k, l, a in getattr(self, name))
            for m in modes:
                if m.k < 0 or m.l < 0 or m.k + m.l == 0:
                    raise ValueError(f"{name}: mode indices must be >= 0 and not both 0: {m}")
                if name in ("u_stream",) and (m.k == 0 or m.l == 0):
                    raise ValueError(f"{name}: stream modes need k, l >= 1: {m}")
            object.__setattr__(self, name, modes)
        if self.random_modes < 0:
            raise ValueError("random_modes must be >= 0")


def rho_mode(grid: Grid, k, l):
    X, Y = grid.mesh()
    return np.cos(k * np.pi * X) * np.cos(l * np.pi * Y)


def potential_velocity(grid: Grid, k, l):
    X, Y = grid.mesh()
    s = 1.0 / np.hypot(k, l)
    return np.stack([
        -k * s * np.sin(k * np.pi * X) * np.cos(l * np.pi * Y),
        -l * s * np.cos(k * np.pi * X) * np.sin(l * np.pi * Y),
    ])


def stream_velocity(grid: Grid, k, l):
    """Divergence-free field (dpsi/dy, -dpsi/dx) with psi = sin(k pi x) sin(l pi y)."""
    X, Y = grid.mesh()
    s = 1.0 / np.hypot(k, l)
    return np.stack([
        l * s * np.sin(k * np.pi * X) * np.cos(l * np.pi * Y),
        -k * s * np.cos(k * np.pi * X) * np.sin(l * np.pi * Y),
    ])


def phi_mode(grid: Grid, k, l, bc: BoundaryConfig):
    X, Y = grid.mesh()
    if bc.dirichlet:
        return np.sin(k * np.pi * X) * np.sin(l * np.pi * Y)
    return np.cos(k * np.pi * X) * np.cos(l * np.pi * Y)


def _random_modes(p: Perturbation):
    rng = np.random.default_rng(p.seed)
    rho, pot, stream = [], [], []
    for _ in range(p.random_modes):
        k, l = (int(v) for v in rng.integers(1, 4, size=2))
        a_rho, a_pot, a_str = rng.uniform(-1.0, 1.0, size=3) * p.random_amp
        rho.append(Mode(k, l, a_rho))
        pot.append(Mode(k, l, a_pot))
        stream.append(Mode(k, l, a_str))
    return rho, pot, stream


def perturbation_fields(grid: Grid, bc: BoundaryConfig, p: Perturbation):
    """Return ``(drho, velocity, dphi)`` arrays for ``p``."""
    rnd_rho, rnd_pot, rnd_str = _random_modes(p)
    drho = grid.zeros()
    vel = np.zeros((2, grid.n, grid.n))
    dphi = grid.zeros()
    for m in (*p.rho, *rnd_rho):
        drho += m.amp * rho_mode(grid, m.k, m.l)
    for m in (*p.u_potential, *rnd_pot):
        vel += m.amp * potential_velocity(grid, m.k, m.l)
    for m in (*p.u_stream, *rnd_str):
        vel += m.amp * stream_velocity(grid, m.k, m.l)
    for m in p.phi:
        if bc.dirichlet and (m.k == 0 or m.l == 0):
            raise ValueError("Dirichlet chemical modes need k, l >= 1")
        dphi += m.amp * phi_mode(grid, m.k, m.l, bc)
    return drho, vel, dphi


class Setup(NamedTuple):
    state: State
    reference: Reference
    steady: Optional[SteadySolution]


def make_initial(grid: Grid, params: ModelParams, bc: BoundaryConfig, total_mass: float,
                 perturbation: Perturbation = Perturbation(),
                 spec: SeriesSpec = SeriesSpec(),
                 solver: LinearSolveConfig = LinearSolveConfig()) -> Setup:
    """Equilibrium for ``bc`` plus ``perturbation``, with its reference.

    Dirichlet: the series steady state; Neumann: the constant state with the
    chemical mean shifted by ``phi_offset``.
    """
    drho, vel, dphi = perturbation_fields(grid, bc, perturbation)
    steady = None
    if bc.dirichlet:
        if perturbation.phi_offset:
            raise ValueError("phi_offset is incompatible with a Dirichlet chemical")
        steady = build_steady(params, total_mass, grid, spec, bc)
        rho = steady.rho + drho
        phi = steady.phi + dphi
    else:
        rho = total_mass + drho
        phi = params.b / params.a * total_mass + perturbation.phi_offset + dphi
    if rho.min() <= 0.0:
        raise PositivityError(f"initial density is not positive (min {rho.min():.3e})")
    state = initial_state(grid, params, bc, rho, vel, phi, solver)
    if bc.dirichlet:
        ref = Reference.series(steady, grid)
    else:
        ref = Reference.constant(params, grid, float(np.mean(state.rho)), float(np.mean(state.phi)))
    return Setup(state, ref, steady)
