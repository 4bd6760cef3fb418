"""Explicit steady states.

Dirichlet chemical condition: zero velocity, a double-sine series for the
chemical and the density tied to it by 2 A0 rho = beta phi + C_hat.
Neumann chemical condition: the constant state (mass, 0, (b/a) mass).
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import fields
from .fields import Grid
from .model import BoundaryConfig, ModelParams, PhiBC

log = logging.getLogger(__name__)

# Termwise integration of the rho series: each odd sine integrates to 2/(m pi),
# so the mass coefficient is 16 b beta / (d A0^2 pi^4). Pinned by the quadrature
# oracle in tests/test_steady.py and `frdvasc check`.
MASS_PREFACTOR = 16.0

RESONANCE_EPS = 1e-8  # relative to pi^2
DENOM_EPS = 1e-12  # relative to 1/(2 A0)


class ResonanceError(ValueError):
    def __init__(self, m, n, distance):
        super().__init__(
            f"Lambda is resonant with odd mode (m, n) = ({m}, {n}): "
            f"|Lambda + (m^2+n^2) pi^2| = {distance:.3e}"
        )
        self.m = m
        self.n = n
        self.distance = distance


class DegenerateDenominatorError(ValueError):
    """The mass equation for C_hat has a (numerically) zero coefficient."""


class PositivityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SeriesSpec:
    m_max: int = 201
    tail_tol: float = 1e-8

    def __post_init__(self):
        if int(self.m_max) != self.m_max or self.m_max < 1 or self.m_max % 2 == 0:
            raise ValueError(f"m_max must be a positive odd integer, got {self.m_max}")
        if not self.tail_tol > 0.0:
            raise ValueError("tail_tol must be positive")
        object.__setattr__(self, "m_max", int(self.m_max))

    @property
    def modes(self) -> np.ndarray:
        """Odd mode numbers, largest first (smallest terms are summed first)."""
        return np.arange(self.m_max, 0, -2)


def compute_lambda(params: ModelParams) -> float:
    return (2.0 * params.a * params.A0 - params.b * params.beta) / (2.0 * params.d * params.A0)


def check_resonance(lam: float, spec: SeriesSpec, eps: float = RESONANCE_EPS) -> float:
    """Raise :class:`ResonanceError` if Lambda hits -(m^2+n^2) pi^2 for odd m, n.

    Returns the smallest distance |Lambda + (m^2+n^2) pi^2| over the included
    pairs (the resonance margin).
    """
    m = spec.modes
    dist = np.abs(lam + (m[:, None] ** 2 + m[None, :] ** 2) * np.pi**2)
    k = np.unravel_index(np.argmin(dist), dist.shape)
    margin = float(dist[k])
    if margin <= eps * np.pi**2:
        raise ResonanceError(int(m[k[0]]), int(m[k[1]]), margin)
    return margin


def _phi_coefficients(C_hat, lam, params: ModelParams, spec: SeriesSpec) -> np.ndarray:
    m = spec.modes.astype(float)
    mm, nn = m[:, None], m[None, :]
    pref = 8.0 * params.b * C_hat / (params.d * params.A0 * np.pi**2)
    return pref / (mm * nn * ((mm**2 + nn**2) * np.pi**2 + lam))


def _on_boundary(x, y):
    return (x == 0.0) | (x == 1.0) | (y == 0.0) | (y == 1.0)


def eval_phi_hat(x, y, C_hat, lam, params: ModelParams, spec: SeriesSpec, chunk=65536):
    """Truncated double-sine series for the steady chemical at points (x, y)."""
    check_resonance(lam, spec)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.any((x < 0) | (x > 1) | (y < 0) | (y > 1)):
        raise ValueError("points must lie in the closed unit square")
    coef = _phi_coefficients(C_hat, lam, params, spec)
    m = spec.modes[:, None] * np.pi
    xf, yf = x.ravel(), y.ravel()
    out = np.empty(xf.shape)
    for s in range(0, xf.size, chunk):
        sx = np.sin(m * xf[None, s:s + chunk])
        sy = np.sin(m * yf[None, s:s + chunk])
        out[s:s + chunk] = np.sum(sx * (coef.T @ sy), axis=0)
    out[_on_boundary(xf, yf)] = 0.0
    return out.reshape(x.shape) if x.ndim else float(out[0])


def sample_phi_hat(grid: Grid, C_hat, lam, params: ModelParams, spec: SeriesSpec) -> np.ndarray:
    """Series sampled at the cell centres, as an ``(n, n)`` array ``[j, i]``."""
    check_resonance(lam, spec)
    coef = _phi_coefficients(C_hat, lam, params, spec)
    s = np.sin(np.pi * spec.modes[:, None] * grid.centers[None, :])
    # phi[j, i] = sum_{m,n} coef[m, n] sin(m pi x_i) sin(n pi y_j)
    return s.T @ coef.T @ s


def rho_from_phi(phi, C_hat, params: ModelParams):
    """Density tied to the chemical by 2 A0 rho = beta phi + C_hat."""
    return params.beta / (2.0 * params.A0) * phi + C_hat / (2.0 * params.A0)


def mass_coefficient(params: ModelParams) -> float:
    """K in  mass = C_hat * (K * S + 1/(2 A0))."""
    return MASS_PREFACTOR * params.b * params.beta / (params.d * params.A0**2 * np.pi**4)


def mass_series_sum(lam: float, spec: SeriesSpec) -> float:
    """S = sum over odd m, n <= m_max of 1 / (m^2 n^2 [(m^2+n^2) pi^2 + Lambda])."""
    m = spec.modes.astype(float)
    mm, nn = m[:, None], m[None, :]
    terms = 1.0 / (mm**2 * nn**2 * ((mm**2 + nn**2) * np.pi**2 + lam))
    return math.fsum(terms.ravel())


def solve_C_hat(total_mass: float, params: ModelParams, spec: SeriesSpec = SeriesSpec(),
                denom_eps: float = DENOM_EPS) -> float:
    lam = compute_lambda(params)
    check_resonance(lam, spec)
    base = 1.0 / (2.0 * params.A0)
    denom = mass_coefficient(params) * mass_series_sum(lam, spec) + base
    if abs(denom) < denom_eps * base:
        raise DegenerateDenominatorError(
            f"mass equation coefficient K*S + 1/(2 A0) = {denom:.3e} is degenerate"
        )
    return total_mass / denom


class SteadyResidual(NamedTuple):
    chem: float
    momentum: float


@dataclass(frozen=True)
class SteadySolution:
    """Truncated-series equilibrium of the Dirichlet problem, sampled on a grid."""

    params: ModelParams
    C_hat: float
    Lambda: float
    total_mass: float
    spec: SeriesSpec
    grid: Grid
    phi: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    resonance_margin: float = float("nan")

    @property
    def D_hat(self) -> float:
        return self.params.b * self.C_hat / (2.0 * self.params.d * self.params.A0)

    @property
    def mass_coefficient(self) -> float:
        return mass_coefficient(self.params)

    @property
    def tail_estimate(self) -> float:
        """Largest coefficient magnitude on the outermost band max(m, n) = m_max.

        A heuristic size of the neglected terms, not a certified bound.
        """
        coef = _phi_coefficients(self.C_hat, self.Lambda, self.params, self.spec)
        return float(max(np.abs(coef[0, :]).max(), np.abs(coef[:, 0]).max()))

    def phi_hat(self, x, y):
        return eval_phi_hat(x, y, self.C_hat, self.Lambda, self.params, self.spec)

    def rho_hat(self, x, y):
        return eval_rho_hat(x, y, self)

    def sample(self, grid: Grid):
        """Return ``(phi, rho)`` sampled at the centres of ``grid``."""
        if grid == self.grid:
            return self.phi, self.rho
        phi = sample_phi_hat(grid, self.C_hat, self.Lambda, self.params, self.spec)
        return phi, rho_from_phi(phi, self.C_hat, self.params)


def eval_rho_hat(x, y, steady: SteadySolution):
    return rho_from_phi(steady.phi_hat(x, y), steady.C_hat, steady.params)


def build_steady(params: ModelParams, total_mass: float, grid: Grid,
                 spec: SeriesSpec = SeriesSpec(),
                 bc: BoundaryConfig = BoundaryConfig(PhiBC.DIRICHLET)) -> SteadySolution:
    """Assemble the Dirichlet series equilibrium and sample it on ``grid``.

    Emits :class:`PositivityWarning` when the sampled density is not
    strictly positive.
    """
    if not bc.dirichlet:
        raise ValueError("the series steady state requires a Dirichlet chemical condition")
    lam = compute_lambda(params)
    margin = check_resonance(lam, spec)
    C_hat = solve_C_hat(total_mass, params, spec)
    phi = sample_phi_hat(grid, C_hat, lam, params, spec)
    rho = rho_from_phi(phi, C_hat, params)
    steady = SteadySolution(params, C_hat, lam, total_mass, spec, grid, phi, rho, margin)
    if steady.tail_estimate > spec.tail_tol:
        log.info("series tail estimate %.3e exceeds tail_tol %.1e", steady.tail_estimate,
                 spec.tail_tol)
    if rho.min() <= 0.0:
        warnings.warn(f"steady density is not positive (min {rho.min():.3e})", PositivityWarning,
                      stacklevel=2)
    return steady


def constant_steady(params: ModelParams, total_mass: float):
    """Constant equilibrium (rho, u, phi) of the Neumann problem; area is 1 so mass = mean."""
    return float(total_mass), (0.0, 0.0), params.b / params.a * total_mass


def steady_residual(steady: SteadySolution, grid: Grid = None) -> SteadyResidual:
    """Discrete L2 residuals of the steady equations on ``grid``.

    ``chem`` is d lap_h phi - a phi + b rho over cells whose stencil stays
    inside the domain; ``momentum`` is 2 A0 rho grad_h rho - beta rho grad_h phi
    over all cells with the same gradient stencil applied to both fields.
    """
    grid = steady.grid if grid is None else grid
    phi, rho = steady.sample(grid)
    p = steady.params
    r = p.d * fields.laplacian(phi, grid, PhiBC.DIRICHLET) - p.a * phi + p.b * rho
    chem = grid.h * np.sqrt(np.sum(r[1:-1, 1:-1] ** 2))
    mom = 2.0 * p.A0 * rho * fields.gradient(rho, grid) - p.beta * rho * fields.gradient(phi, grid)
    momentum = grid.h * np.sqrt(np.sum(mom**2))
    return SteadyResidual(float(chem), float(momentum))
