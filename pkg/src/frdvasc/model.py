"""Physical parameters, the gamma-law pressure and the sound-speed transforms.

All functions here accept scalars or numpy arrays for the density argument.
"""

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class DomainError(ValueError):
    """A density (or transformed density) argument was negative."""


class UnsupportedTransformError(ValueError):
    """The sound-speed transform was requested for gamma = 1."""


class PhiBC(enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class BoundaryConfig:
    """Boundary configuration on the unit square.

    The velocity always satisfies u.n = 0; only the chemical condition varies.
    Dirichlet goes with the series steady state, Neumann with the constant one.
    """

    phi_bc: PhiBC = PhiBC.NEUMANN
    velocity_bc: str = "no-normal-flow"

    def __post_init__(self):
        if not isinstance(self.phi_bc, PhiBC):
            object.__setattr__(self, "phi_bc", PhiBC(str(self.phi_bc).lower()))
        if self.velocity_bc != "no-normal-flow":
            raise ValueError("velocity boundary condition is fixed to 'no-normal-flow'")

    @property
    def dirichlet(self) -> bool:
        return self.phi_bc is PhiBC.DIRICHLET


@dataclass(frozen=True)
class ModelParams:
    """Constants of the FRD system with pressure P(rho) = A0 rho^gamma.

    Parameters
    ----------
    A0 : float
        Pressure amplitude, > 0.
    gamma : float
        Adiabatic exponent, >= 1.
    alpha : float
        Damping rate, > 0.
    beta : float
        Chemotactic sensitivity (positive attracts, negative repels).
    tau : float
        Relaxation time of the chemical, >= 0 (0 is the elliptic limit).
    d, a, b : float
        Chemical diffusion, degradation and secretion, all > 0.
    """

    A0: float = 1.0
    gamma: float = 2.0
    alpha: float = 1.0
    beta: float = 0.5
    tau: float = 1.0
    d: float = 10.0
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        for name in ("A0", "gamma", "alpha", "beta", "tau", "d", "a", "b"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        for name in ("A0", "alpha", "d", "a", "b"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.gamma < 1.0:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.tau < 0.0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")


def _check_density(rho, what="rho"):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0.0):
        raise DomainError(f"{what} must be nonnegative")
    return rho


def _maybe_scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def pressure(rho, params: ModelParams):
    """Return A0 * rho**gamma."""
    rho = _check_density(rho)
    return _maybe_scalar(params.A0 * rho**params.gamma)


def sound_speed(rho, params: ModelParams):
    """Characteristic speed sqrt(P'(rho)) = sqrt(gamma A0 rho^(gamma-1))."""
    rho = _check_density(rho)
    if params.gamma == 1.0:
        return _maybe_scalar(np.full_like(rho, math.sqrt(params.A0)))
    return _maybe_scalar(np.sqrt(params.gamma * params.A0 * rho ** (params.gamma - 1.0)))


def _transform_constants(params: ModelParams):
    if params.gamma == 1.0:
        raise UnsupportedTransformError("no sound-speed transform exists for gamma = 1")
    kappa = 0.5 * (params.gamma - 1.0)
    amp = 2.0 * math.sqrt(params.gamma * params.A0) / (params.gamma - 1.0)
    return amp, kappa


def sigma_transform(rho, params: ModelParams):
    """Sound-speed variable sigma = amp * rho**kappa, kappa = (gamma-1)/2.

    For gamma = 2 this is evaluated as 2 sqrt(2 A0 rho).
    """
    rho = _check_density(rho)
    if params.gamma == 2.0:
        return _maybe_scalar(2.0 * np.sqrt(2.0 * params.A0 * rho))
    amp, kappa = _transform_constants(params)
    return _maybe_scalar(amp * rho**kappa)


def sigma_inverse(sigma, params: ModelParams):
    """Density corresponding to a transformed value ``sigma``."""
    sigma = _check_density(sigma, "sigma")
    amp, kappa = _transform_constants(params)
    return _maybe_scalar((sigma / amp) ** (1.0 / kappa))


class PressureCondition(NamedTuple):
    margin: float
    holds: bool


def pressure_condition(params: ModelParams, rho_bar: float) -> PressureCondition:
    """Margin b P'(rho_bar) - a alpha rho_bar and whether it is positive."""
    if rho_bar <= 0.0:
        raise DomainError("rho_bar must be positive")
    margin = (
        params.b * params.gamma * params.A0 * rho_bar ** (params.gamma - 1.0)
        - params.a * params.alpha * rho_bar
    )
    return PressureCondition(margin, margin > 0.0)


def mean_phi_exact(t, params: ModelParams, rho0_mean: float, phi0_mean: float):
    """Exact spatial mean of phi under Neumann conditions.

    Integrating the chemical equation over the square kills the Laplacian,
    leaving tau phi' = -a phi + b rho0_mean. For tau = 0 the mean is pinned at
    (b/a) rho0_mean at every time.
    """
    eq = params.b / params.a * rho0_mean
    t = np.asarray(t, dtype=float)
    if params.tau == 0.0:
        return _maybe_scalar(np.full_like(t, eq))
    if np.any(t < 0.0):
        raise ValueError("t must be nonnegative")
    return _maybe_scalar(eq + (phi0_mean - eq) * np.exp(-params.a / params.tau * t))
