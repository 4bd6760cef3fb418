"""Oracle and invariant suite behind ``frdvasc check``.

Every check returns a :class:`CheckResult`; none of them raises on a failed
comparison. The expected values are computed independently of the code under
test wherever possible (quadrature instead of closed-form sums, analytic
derivatives for manufactured solutions, the scalar recurrence for the chemical
mean).
"""

import math
from typing import Callable, NamedTuple

import numpy as np

from . import fields, steady
from .dynamics import State, StepConfig, initial_state, step
from .fields import Grid, LinearSolveConfig
from .model import BoundaryConfig, ModelParams, PhiBC

BENCHMARK = ModelParams(A0=1.0, gamma=2.0, alpha=1.0, beta=0.5, tau=0.0, d=10.0, a=1.0, b=1.0)


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def midpoint_series_integral(params: ModelParams, spec: steady.SeriesSpec, n_quad: int) -> float:
    """Midpoint-rule integral of (beta / 2 A0) phi_hat with C_hat = 1."""
    lam = steady.compute_lambda(params)
    phi = steady.sample_phi_hat(Grid(n_quad), 1.0, lam, params, spec)
    return params.beta / (2.0 * params.A0) * float(np.mean(phi))


def k_oracle(params: ModelParams = BENCHMARK, spec: steady.SeriesSpec = steady.SeriesSpec(),
             n_quad: int = 2048):
    """Compare the coded K with K recovered by quadrature of the truncated series.

    Returns ``(K_quadrature, K_coded, relative_error, ratio_to_factor_4)``, where
    the last entry is K_quadrature divided by the coefficient obtained with a
    prefactor of 4.
    """
    lam = steady.compute_lambda(params)
    S = steady.mass_series_sum(lam, spec)
    k_quad = midpoint_series_integral(params, spec, n_quad) / S
    k_code = steady.mass_coefficient(params)
    k_four = 4.0 * params.b * params.beta / (params.d * params.A0**2 * np.pi**4)
    if k_quad == 0.0:
        # beta = 0: no chemotactic mass contribution, nothing to compare
        return k_quad, k_code, abs(k_code), math.nan
    return k_quad, k_code, abs(k_code - k_quad) / abs(k_quad), k_quad / k_four


def check_k_coefficient(n_quad: int = 2048) -> CheckResult:
    _, _, rel, ratio = k_oracle(n_quad=n_quad)
    ok = rel <= 1e-6 and abs(ratio - 4.0) <= 0.01
    return CheckResult("K coefficient (quadrature oracle)", ok,
                       f"rel. error {rel:.2e}, ratio to factor-4 variant {ratio:.4f}")


def check_mass_constraint(n_quad: int = 1024) -> CheckResult:
    st = steady.build_steady(BENCHMARK, 1.0, Grid(16))
    _, rho = st.sample(Grid(n_quad))
    m = float(np.mean(rho))
    return CheckResult("steady mass by midpoint quadrature", abs(m - 1.0) <= 1e-8,
                       f"integral {m:.12f}")


def check_momentum_identity(n: int) -> CheckResult:
    st = steady.build_steady(BENCHMARK, 1.0, Grid(n))
    res = steady.steady_residual(st)
    return CheckResult("steady momentum balance", res.momentum <= 1e-10,
                       f"L2 residual {res.momentum:.2e} on {n}^2")


def check_resonance_detection() -> CheckResult:
    """d is tuned so that Lambda = -2 pi^2 exactly; the (1, 1) pair must be named.

    Also compares the reported margin with a brute-force loop over the modes.
    """
    # Lambda = (a - b beta / (2 A0)) / d is negative only for large beta
    p = ModelParams(A0=1.0, gamma=2.0, alpha=1.0, beta=100.0, tau=0.0, d=1.0, a=1.0, b=1.0)
    d = (p.b * p.beta / (2.0 * p.A0) - p.a) / (2.0 * np.pi**2)
    tuned = ModelParams(p.A0, p.gamma, p.alpha, p.beta, p.tau, d, p.a, p.b)
    named = None
    try:
        steady.check_resonance(steady.compute_lambda(tuned), steady.SeriesSpec())
    except steady.ResonanceError as exc:
        named = (exc.m, exc.n)
    # brute-force margin for the untuned parameters
    spec = steady.SeriesSpec(m_max=21)
    lam = steady.compute_lambda(p)
    brute = min(abs(lam + (m * m + k * k) * math.pi**2)
                for m in range(1, 22, 2) for k in range(1, 22, 2))
    margin = steady.check_resonance(lam, spec)
    ok = named == (1, 1) and abs(margin - brute) <= 1e-12 * brute
    return CheckResult("resonance detection", ok, f"named {named}, margin {margin:.6g}")


def _order(e_coarse, e_fine):
    return math.log2(e_coarse / e_fine)


def manufactured_orders():
    """Measured L2 orders between 64^2 and 128^2 for the stencils and the solver."""
    out = {}
    errs = {}
    d, a = 2.0, 1.5
    for n in (64, 128):
        g = Grid(n)
        X, Y = g.mesh()
        pi = np.pi
        cx, cy = np.cos(pi * X), np.cos(2 * pi * Y)
        sx, sy = np.sin(pi * X), np.sin(2 * pi * Y)
        e = errs.setdefault(n, {})
        # Neumann-compatible f = cos(pi x) cos(2 pi y); Dirichlet g = sin(pi x) sin(2 pi y)
        f, fd = cx * cy, sx * sy
        lap_f = -5 * pi**2 * f
        lap_fd = -5 * pi**2 * fd
        grad_f = np.stack([-pi * sx * cy, -2 * pi * cx * sy])
        grad_fd = np.stack([pi * cx * sy, 2 * pi * sx * np.cos(2 * pi * Y)])
        l2 = lambda r: fields.norms(r, g).l2  # noqa: E731
        e["laplacian neumann"] = l2(fields.laplacian(f, g, PhiBC.NEUMANN) - lap_f)
        e["laplacian dirichlet"] = l2(fields.laplacian(fd, g, PhiBC.DIRICHLET) - lap_fd)
        e["gradient generic"] = l2(fields.gradient(f, g) - grad_f)
        e["gradient neumann"] = l2(fields.gradient(f, g, PhiBC.NEUMANN) - grad_f)
        e["gradient dirichlet"] = l2(fields.gradient(fd, g, PhiBC.DIRICHLET) - grad_fd)
        e["divergence"] = l2(fields.divergence(grad_f, g) - lap_f)
        w = np.stack([X**2 * Y, np.sin(pi * X) * Y**3])
        curl = pi * np.cos(pi * X) * Y**3 - X**2
        e["curl"] = l2(fields.curl2d(w, g) - curl)
        cfg = LinearSolveConfig(tol=1e-12)
        e["helmholtz neumann"] = l2(
            fields.helmholtz_solve((a + 5 * d * pi**2) * f, g, d, a, 0.0, PhiBC.NEUMANN, cfg) - f)
        e["helmholtz dirichlet"] = l2(
            fields.helmholtz_solve((a + 5 * d * pi**2) * fd, g, d, a, 0.0, PhiBC.DIRICHLET, cfg)
            - fd)
    for key in errs[64]:
        out[key] = _order(errs[64][key], errs[128][key])
    return out


def check_manufactured() -> CheckResult:
    orders = manufactured_orders()
    worst = min(orders, key=orders.get)
    return CheckResult("manufactured-solution orders (64 -> 128)", orders[worst] >= 1.9,
                       f"lowest {worst} = {orders[worst]:.3f}")


def _random_state(grid: Grid, params: ModelParams, bc: BoundaryConfig, seed: int) -> State:
    rng = np.random.default_rng(seed)
    n = grid.n
    rho = 1.0 + 0.2 * rng.random((n, n))
    vel = 0.05 * rng.standard_normal((2, n, n))
    phi = 1.0 + 0.1 * rng.random((n, n))
    return initial_state(grid, params, bc, rho, vel, phi)


def mass_drift(grid: Grid, params: ModelParams, bc: BoundaryConfig, steps: int = 1000,
               seed: int = 0) -> float:
    s = _random_state(grid, params, bc, seed)
    m0 = math.fsum(s.rho.ravel())
    cfg = StepConfig()
    for _ in range(steps):
        s = step(s, params, bc, cfg)
    return abs(math.fsum(s.rho.ravel()) - m0) / abs(m0)


def check_conservation(n: int, steps: int = 1000) -> CheckResult:
    worst = 0.0
    for phi_bc in (PhiBC.NEUMANN, PhiBC.DIRICHLET):
        for tau in (0.0, 1.0):
            p = ModelParams(A0=1.0, gamma=2.0, alpha=1.0, beta=0.5, tau=tau, d=10.0, a=1.0, b=1.0)
            worst = max(worst, mass_drift(Grid(n), p, BoundaryConfig(phi_bc), steps))
    return CheckResult(f"mass conservation ({steps} steps, {n}^2)", worst <= 1e-12,
                       f"max relative drift {worst:.2e}")


def fixed_point_change(grid: Grid, params: ModelParams, mass: float = 1.0) -> float:
    """Largest relative change of (rho, rho u, phi) over one step of the constant state."""
    bc = BoundaryConfig(PhiBC.NEUMANN)
    rho0, _, phi0 = steady.constant_steady(params, mass)
    s = initial_state(grid, params, bc, np.full((grid.n, grid.n), rho0), None,
                      np.full((grid.n, grid.n), phi0))
    out = step(s, params, bc, StepConfig())
    return max(
        float(np.max(np.abs(out.rho - s.rho))) / rho0,
        float(np.max(np.abs(out.mom))) / rho0,
        float(np.max(np.abs(out.phi - s.phi))) / abs(phi0),
    )


def check_fixed_point(n: int) -> CheckResult:
    worst = 0.0
    for tau in (0.0, 1.0):
        p = ModelParams(A0=1.0, gamma=2.0, alpha=1.0, beta=0.5, tau=tau, d=10.0, a=1.0, b=1.0)
        worst = max(worst, fixed_point_change(Grid(n), p, 1.3))
    return CheckResult("constant state is a fixed point", worst <= 1e-13,
                       f"max relative change {worst:.2e}")


def check_mean_phi_recurrence(n: int) -> CheckResult:
    """Uniform data: the chemical follows the backward-Euler recurrence of its ODE."""
    p = ModelParams(A0=1.0, gamma=2.0, alpha=1.0, beta=0.5, tau=1.0, d=10.0, a=1.0, b=1.0)
    bc = BoundaryConfig(PhiBC.NEUMANN)
    grid = Grid(n)
    rho0, phi0, dt = 1.0, 0.75, 1e-2
    s = initial_state(grid, p, bc, rho0, None, phi0)
    expect = phi0
    worst = 0.0
    for _ in range(50):
        s = step(s, p, bc, StepConfig(), dt)
        expect = (p.b * rho0 + p.tau / dt * expect) / (p.a + p.tau / dt)
        worst = max(worst, float(np.max(np.abs(s.phi - expect))))
    return CheckResult("uniform chemical follows its ODE recurrence", worst <= 1e-12,
                       f"max deviation {worst:.2e}")


def suite(n: int = 16, conservation_steps: int = 1000) -> list:
    """The checks run by ``frdvasc check``; ``n`` is the grid for the cheap dynamic ones."""
    items: list[Callable[[], CheckResult]] = [
        check_k_coefficient,
        check_mass_constraint,
        lambda: check_momentum_identity(max(n, 4)),
        check_resonance_detection,
        check_manufactured,
        lambda: check_conservation(n, conservation_steps),
        lambda: check_fixed_point(n),
        lambda: check_mean_phi_recurrence(n),
    ]
    results = []
    for item in items:
        try:
            results.append(item())
        except Exception as exc:  # a crash is a failed check, not an abort of the suite
            results.append(CheckResult(getattr(item, "__name__", "check"), False,
                                       f"{type(exc).__name__}: {exc}"))
    return results
