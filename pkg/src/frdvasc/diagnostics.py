"""Perturbation norms, mass, vorticity and exponential decay fits.

The energies controlled by the stability theory involve H^3 norms of the fluid
perturbation and up to H^5 norms of the chemical with time derivatives. On a
grid we measure the computable part of that tower: L2, H1 and sup norms of the
perturbations plus first time differences of (rho - rho_ref, u). The scalar
:attr:`EnergyRecord.energy` is the sum of squared H1 norms of the three
perturbations.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import fields
from .fields import Grid, Norms
from .model import BoundaryConfig, ModelParams, PhiBC, mean_phi_exact, sigma_transform


class FitDomainError(ValueError):
    pass


@dataclass(frozen=True)
class Reference:
    """What perturbations are measured against.

    ``kind == "series"``: the Dirichlet series equilibrium, fixed in time.
    ``kind == "constant"``: the constant Neumann state, with the chemical
    reference following the exact mean curve from ``phi0_mean``.
    """

    kind: str
    params: ModelParams
    grid: Grid
    rho: np.ndarray
    phi: np.ndarray
    rho0_mean: float = float("nan")
    phi0_mean: float = float("nan")

    @classmethod
    def series(cls, steady, grid: Grid = None):
        grid = steady.grid if grid is None else grid
        phi, rho = steady.sample(grid)
        return cls("series", steady.params, grid, rho, phi)

    @classmethod
    def constant(cls, params: ModelParams, grid: Grid, rho0_mean: float, phi0_mean: float):
        rho = np.full((grid.n, grid.n), float(rho0_mean))
        phi = np.full((grid.n, grid.n), params.b / params.a * rho0_mean)
        return cls("constant", params, grid, rho, phi, float(rho0_mean), float(phi0_mean))

    @property
    def bc(self) -> BoundaryConfig:
        return BoundaryConfig(PhiBC.DIRICHLET if self.kind == "series" else PhiBC.NEUMANN)

    def phi_at(self, t: float):
        if self.kind == "series":
            return self.phi
        return mean_phi_exact(t, self.params, self.rho0_mean, self.phi0_mean)


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    mass: float
    rho_pert: Norms
    u: Norms
    phi_pert: Norms
    sigma_pert_l2: Optional[float]
    vorticity_l2: float
    drho_dt_l2: Optional[float]
    du_dt_l2: Optional[float]
    phi_mean: float

    @property
    def energy(self) -> float:
        """Reduced energy: squared H1 norms of rho - rho_ref, u and phi - phi_ref."""
        return self.rho_pert.h1**2 + self.u.h1**2 + self.phi_pert.h1**2


CSV_COLUMNS = (
    "t", "mass",
    "rho_l2", "rho_h1", "rho_linf",
    "u_l2", "u_h1", "u_linf",
    "phi_l2", "phi_h1", "phi_linf",
    "sigma_l2", "vorticity_l2", "drho_dt_l2", "du_dt_l2",
    "phi_mean", "energy",
)


def _fmt(x):
    return "" if x is None else format(float(x), ".17g")


def record_row(rec: EnergyRecord) -> list:
    """Values of ``rec`` in :data:`CSV_COLUMNS` order, as 17-digit strings."""
    vals = [rec.t, rec.mass, *rec.rho_pert, *rec.u, *rec.phi_pert, rec.sigma_pert_l2,
            rec.vorticity_l2, rec.drho_dt_l2, rec.du_dt_l2, rec.phi_mean, rec.energy]
    return [_fmt(v) for v in vals]


def mass(state) -> float:
    """Total mass h^2 sum(rho) (the square has unit area)."""
    return float(state.grid.h**2 * np.sum(state.rho))


def measure(state, reference: Reference, params: ModelParams, prev=None,
            rho_floor: float = 1e-12) -> EnergyRecord:
    """Norms of the perturbation of ``state`` from ``reference``.

    ``prev`` is the previously sampled state; when given, first time
    differences of the density perturbation and velocity are included.
    """
    grid = state.grid
    bc = reference.bc
    u = state.velocity(rho_floor)
    drho = state.rho - reference.rho
    dphi = state.phi - reference.phi_at(state.t)
    sigma = None
    if params.gamma > 1.0:
        rho_pos = np.maximum(state.rho, 0.0)
        sigma = fields.norms(sigma_transform(rho_pos, params)
                             - sigma_transform(reference.rho, params), grid).l2
    ddt_rho = ddt_u = None
    if prev is not None and state.t > prev.t:
        dt = state.t - prev.t
        ddt_rho = fields.norms((state.rho - prev.rho) / dt, grid).l2
        ddt_u = fields.norms((u - prev.velocity(rho_floor)) / dt, grid).l2
    return EnergyRecord(
        t=float(state.t),
        mass=mass(state),
        rho_pert=fields.norms(drho, grid),
        u=fields.norms(u, grid),
        phi_pert=fields.norms(dphi, grid, bc),
        sigma_pert_l2=sigma,
        vorticity_l2=fields.norms(fields.curl2d(u, grid), grid).l2,
        drho_dt_l2=ddt_rho,
        du_dt_l2=ddt_u,
        phi_mean=float(np.mean(state.phi)),
    )


class DecayFit(NamedTuple):
    eta_amp: float
    eta_rate: float
    window: tuple
    r_squared: float
    n_samples: int


def fit_decay(t, E, window=None, min_samples: int = 10) -> DecayFit:
    """Least-squares fit of ln E = ln(eta_amp) - eta_rate * t over ``window``.

    The default window is [0.2 t_max, t_max].
    """
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    if window is None:
        window = (0.2 * t.max(), t.max())
    lo, hi = window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    ts, es = t[sel], E[sel]
    if ts.size < min_samples:
        raise FitDomainError(f"need at least {min_samples} samples in {window}, got {ts.size}")
    if np.any(~np.isfinite(es)) or np.any(es <= 0.0):
        raise FitDomainError("samples in the fit window must be positive and finite")
    y = np.log(es)
    slope, intercept = np.polyfit(ts, y, 1)
    resid = y - (slope * ts + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-28 * max(1.0, float(np.sum(y**2))) else 1.0 - ss_res / ss_tot
    return DecayFit(float(np.exp(intercept)), float(-slope), (float(lo), float(hi)), r2,
                    int(ts.size))


class VorticityReport(NamedTuple):
    t: np.ndarray
    omega_l2: np.ndarray
    fit: Optional[DecayFit]


def vorticity_check(records, window=None) -> VorticityReport:
    """L2 norm of the vorticity per sample and its fitted decay rate.

    The fit is ``None`` when the vorticity is not strictly positive in the
    window (e.g. irrotational or resting flow).
    """
    t = np.array([r.t for r in records])
    w = np.array([r.vorticity_l2 for r in records])
    try:
        fit = fit_decay(t, w, window)
    except FitDomainError:
        fit = None
    return VorticityReport(t, w, fit)
