"""Cell-centred grid on the unit square, stencil operators and the Helmholtz solver.

Conventions
-----------
Scalar fields are ``(n, n)`` arrays indexed ``f[j, i]`` with ``j`` along y and
``i`` along x, so axis 1 is x and axis 0 is y. Vector fields are ``(2, n, n)``
arrays whose first index selects the x (0) or y (1) component.

Boundary conditions for scalar fields are realised by ghost-cell reflection:
even for Neumann (ghost = mirror value) and odd for Dirichlet (ghost = minus
mirror value, so the wall value is zero).
"""

import logging
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.fft

from .model import BoundaryConfig, PhiBC

log = logging.getLogger(__name__)


def _fft_workers():
    try:
        return max(1, int(os.environ.get("FRDVASC_THREADS", "1")))
    except ValueError:
        return 1


class ConvergenceError(RuntimeError):
    """Conjugate gradients hit the iteration cap before reaching tolerance."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class Grid:
    """Uniform ``n x n`` cell-centred grid; centres at ((i+1/2)h, (j+1/2)h)."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise ValueError(f"grid needs at least 4 cells per side, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) / self.n

    def mesh(self):
        """Return ``(X, Y)`` arrays of cell-centre coordinates."""
        return np.meshgrid(self.centers, self.centers, indexing="xy")

    def zeros(self) -> np.ndarray:
        return np.zeros((self.n, self.n))


@dataclass(frozen=True)
class LinearSolveConfig:
    tol: float = 1e-10
    max_iter: int = 5000
    # "spectral": exact fast-transform inverse as preconditioner; "none": plain CG
    preconditioner: str = "spectral"

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.preconditioner not in ("spectral", "none"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


class Norms(NamedTuple):
    l2: float
    h1: float
    linf: float


def _bc_kind(bc):
    if bc is None:
        return None
    if isinstance(bc, BoundaryConfig):
        return bc.phi_bc
    if isinstance(bc, PhiBC):
        return bc
    return PhiBC(str(bc).lower())


def pad(f, bc, width=1):
    """Pad a scalar field with ``width`` ghost layers reflected per ``bc``."""
    kind = _bc_kind(bc)
    g = np.pad(f, width, mode="symmetric")
    if kind is PhiBC.DIRICHLET:
        g[:width, :] *= -1.0
        g[-width:, :] *= -1.0
        g[:, :width] *= -1.0
        g[:, -width:] *= -1.0
    return g


def _diff(f, h, axis, kind=None):
    """First derivative along ``axis``: central inside, second order at the walls.

    ``kind`` picks the closure in boundary-adjacent cells: ``None`` uses the
    one-sided three-point formula, Neumann the even reflection (exact for a
    zero wall slope), Dirichlet a quadratic through the zero wall value.
    """
    f = np.moveaxis(f, axis, -1)
    out = np.empty_like(f)
    out[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * h)
    if kind is PhiBC.NEUMANN:
        out[..., 0] = (f[..., 1] - f[..., 0]) / (2.0 * h)
        out[..., -1] = (f[..., -1] - f[..., -2]) / (2.0 * h)
    elif kind is PhiBC.DIRICHLET:
        out[..., 0] = (3.0 * f[..., 0] + f[..., 1]) / (3.0 * h)
        out[..., -1] = -(3.0 * f[..., -1] + f[..., -2]) / (3.0 * h)
    else:
        out[..., 0] = (-3.0 * f[..., 0] + 4.0 * f[..., 1] - f[..., 2]) / (2.0 * h)
        out[..., -1] = (3.0 * f[..., -1] - 4.0 * f[..., -2] + f[..., -3]) / (2.0 * h)
    return np.moveaxis(out, -1, axis)


def gradient(f, grid: Grid, bc=None) -> np.ndarray:
    kind = _bc_kind(bc)
    return np.stack([_diff(f, grid.h, 1, kind), _diff(f, grid.h, 0, kind)])


def divergence(w, grid: Grid) -> np.ndarray:
    return _diff(w[0], grid.h, 1) + _diff(w[1], grid.h, 0)


def curl2d(w, grid: Grid) -> np.ndarray:
    """Scalar vorticity dv/dx - du/dy.

    Uses the same one-dimensional difference operators as :func:`gradient`
    with ``bc=None``, so ``curl2d(gradient(psi))`` vanishes to round-off.
    """
    return _diff(w[1], grid.h, 1) - _diff(w[0], grid.h, 0)


def laplacian(f, grid: Grid, bc) -> np.ndarray:
    """Five-point Laplacian with ghost reflection per ``bc``."""
    g = pad(f, bc)
    inv_h2 = 1.0 / grid.h**2
    return (g[1:-1, 2:] + g[1:-1, :-2] + g[2:, 1:-1] + g[:-2, 1:-1] - 4.0 * f) * inv_h2


def norms(f, grid: Grid, bc=None) -> Norms:
    """Discrete L2, H1 and sup norms of a scalar or vector field."""
    f = np.asarray(f)
    comps = f if f.ndim == 3 else f[None]
    sq = 0.0
    grad_sq = 0.0
    for c in comps:
        sq += np.sum(c * c)
        gc = gradient(c, grid, bc)
        grad_sq += np.sum(gc * gc)
    l2 = grid.h * np.sqrt(sq)
    h1 = np.sqrt(l2**2 + grid.h**2 * grad_sq)
    linf = float(np.max(np.abs(comps))) if comps.size else 0.0
    return Norms(float(l2), float(h1), linf)


def helmholtz_apply(phi, grid: Grid, d, a, shift, bc) -> np.ndarray:
    """Apply (shift + a) phi - d lap_h phi."""
    return (shift + a) * phi - d * laplacian(phi, grid, bc)


def _laplacian_symbol(grid: Grid, kind):
    k = np.arange(grid.n)
    if kind is PhiBC.DIRICHLET:
        k = k + 1
    mu = 4.0 / grid.h**2 * np.sin(k * np.pi / (2 * grid.n)) ** 2
    return mu[None, :] + mu[:, None]


def _spectral_inverse(r, grid, d, a, shift, kind):
    denom = shift + a + d * _laplacian_symbol(grid, kind)
    workers = _fft_workers()
    if kind is PhiBC.DIRICHLET:
        return scipy.fft.idstn(scipy.fft.dstn(r, type=2, norm="ortho", workers=workers) / denom,
                               type=2, norm="ortho", workers=workers)
    return scipy.fft.idctn(scipy.fft.dctn(r, type=2, norm="ortho", workers=workers) / denom,
                           type=2, norm="ortho", workers=workers)


def _dot(x, y):
    return float(np.sum(x * y))


def conjugate_gradient(apply_a, rhs, x0=None, tol=1e-10, max_iter=5000, precond=None):
    """Preconditioned CG for an SPD operator given as a callable.

    Returns ``(x, relative_residual, iterations)``. The reported residual is
    recomputed from ``apply_a`` rather than taken from the recurrence.
    """
    bnorm = np.sqrt(_dot(rhs, rhs))
    if bnorm == 0.0:
        return np.zeros_like(rhs), 0.0, 0
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float, copy=True)
    target = tol * bnorm
    r = rhs - apply_a(x)
    rnorm = np.sqrt(_dot(r, r))
    if rnorm <= target:
        return x, rnorm / bnorm, 0
    z = precond(r) if precond else r
    p = z.copy()
    rz = _dot(r, z)
    for it in range(1, max_iter + 1):
        ap = apply_a(p)
        step = rz / _dot(p, ap)
        x += step * p
        r -= step * ap
        rnorm = np.sqrt(_dot(r, r))
        if rnorm <= target:
            # guard against drift of the recursive residual
            r = rhs - apply_a(x)
            rnorm = np.sqrt(_dot(r, r))
            if rnorm <= target:
                return x, rnorm / bnorm, it
        z = precond(r) if precond else r
        rz_new = _dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not converge in {max_iter} iterations (relative residual {rnorm / bnorm:.3e})",
        rnorm / bnorm,
    )


def helmholtz_solve(rhs, grid: Grid, d, a, shift=0.0, bc=PhiBC.NEUMANN,
                    cfg: LinearSolveConfig = LinearSolveConfig(), x0=None) -> np.ndarray:
    """Solve (shift + a) phi - d lap_h phi = rhs on the grid.

    The operator is applied matrix-free; with ``cfg.preconditioner ==
    "spectral"`` the exact DCT/DST inverse of the same five-point operator is
    used as preconditioner, which makes CG converge in one or two sweeps.
    """
    if d <= 0.0 or a + shift <= 0.0:
        raise ValueError("need d > 0 and a + shift > 0")
    kind = _bc_kind(bc)
    rhs = np.asarray(rhs, dtype=float)
    precond = None
    if cfg.preconditioner == "spectral":
        precond = lambda r: _spectral_inverse(r, grid, d, a, shift, kind)  # noqa: E731
    apply_a = lambda p: helmholtz_apply(p, grid, d, a, shift, kind)  # noqa: E731
    if x0 is None:
        phi, res, iters = conjugate_gradient(apply_a, rhs, tol=cfg.tol, max_iter=cfg.max_iter,
                                             precond=precond)
        log.debug("helmholtz_solve: %d iterations, relative residual %.3e", iters, res)
        return phi
    # Warm start: solve for the correction so that its own relative accuracy
    # is tol, bounded below by round-off of the full right-hand side.
    x0 = np.asarray(x0, dtype=float)
    r0 = rhs - apply_a(x0)
    n_rhs = np.sqrt(_dot(rhs, rhs))
    n_r0 = np.sqrt(_dot(r0, r0))
    if n_rhs == 0.0:
        return np.zeros_like(rhs)
    target = min(cfg.tol * n_rhs, max(cfg.tol * n_r0, 10.0 * np.finfo(float).eps * n_rhs))
    if n_r0 <= target:
        return x0.copy()
    delta, res, iters = conjugate_gradient(apply_a, r0, tol=target / n_r0,
                                           max_iter=cfg.max_iter, precond=precond)
    log.debug("helmholtz_solve (warm): %d iterations, correction residual %.3e", iters, res)
    return x0 + delta
