"""The PDE core: flux linearization matrix, energy, variations, residual.

Discretization
--------------
The energy integrand is sampled at the 2^n corners of every grid cell with
the cell-local compact gradient (each component is the finite difference
along the cell edge touching that corner), weighted by vol(cell)/2^n.  Node
quantities (the potential term, masks) then carry exactly the tensor
trapezoid weights.  The first and second variations below are the exact
first and second derivatives of this discrete energy, and the pointwise
residual is its gradient divided by the node weight, i.e. a flux difference
across the staggered cell edges.  This is what makes the stability module's
quadratic form exactly the Hessian of the energy it reports.

Degeneracy is handled with |grad u|_eps = sqrt(|grad u|^2 + eps^2); with
p(x) >= 2 all powers stay bounded and the bias is O(eps).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterator

import numpy as np

from .grid import Grid, Region, ScalarField, full_region, trapezoid_weights
from .model import Coefficients, ModelBundle

Array = np.ndarray


def default_eps(grid: Grid, values: Array) -> float:
    """Default gradient regularization: 1e-8 times the gradient scale."""
    scale = max(float(np.max(np.abs(d))) for d in edge_differences(grid, values))
    return 1e-8 * (1.0 + scale)


def safe_ratio(num: Array, den: Array) -> Array:
    """num / den with 0 where den vanishes (degenerate points, eps = 0)."""
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0.0)
    return out


def edge_differences(grid: Grid, values: Array) -> list[Array]:
    """Per-axis edge differences (u[j+1]-u[j])/h_k; axis k shortens by one."""
    return [np.diff(values, axis=k) / grid.spacing[k] for k in range(grid.n)]


def _transverse_slices(q: tuple[int, ...], axis: int, n: int) -> tuple[slice, ...]:
    # Slice selecting, for each axis other than `axis`, the cell-start (:-1)
    # or cell-end (1:) plane according to the corner offset q.
    return tuple(
        slice(None) if k == axis else (slice(None, -1) if q[k] == 0 else slice(1, None))
        for k in range(n)
    )


def corners(n: int) -> Iterator[tuple[int, ...]]:
    return product((0, 1), repeat=n)


def corner_gradient(grid: Grid, diffs: list[Array], q: tuple[int, ...]) -> list[Array]:
    """Cell-corner gradient samples for corner q; each entry has cell shape."""
    return [diffs[k][_transverse_slices(q, k, grid.n)] for k in range(grid.n)]


def node_slice(q: tuple[int, ...], n: int) -> tuple[slice, ...]:
    """Slice mapping a node array onto the corner-q node of every cell."""
    return tuple(slice(None, -1) if q[k] == 0 else slice(1, None) for k in range(n))


def cell_volume(grid: Grid) -> float:
    return float(np.prod(grid.spacing))


def assemble_B(x_point, eta, coefficients: Coefficients) -> Array:
    """Flux linearization alpha |eta|^(p-2) (I + (p-2) eta eta^T / |eta|^2).

    At eta = 0 the continuity extension applies: alpha I for p = 2, the zero
    matrix for p > 2.  The output is symmetric positive semidefinite.
    """
    x_point = np.atleast_1d(np.asarray(x_point, dtype=float))
    eta = np.asarray(eta, dtype=float)
    n = eta.shape[0]
    a = float(np.asarray(coefficients.alpha(*x_point)))
    p = float(np.asarray(coefficients.p_exp(*x_point)))
    norm = float(np.linalg.norm(eta))
    if norm == 0.0:
        return a * np.eye(n) if p == 2.0 else np.zeros((n, n))
    return a * norm ** (p - 2.0) * (np.eye(n) + (p - 2.0) * np.outer(eta, eta) / norm**2)


@dataclass(frozen=True)
class EnergyReport:
    dirichlet_part: float
    potential_part: float
    total: float
    region: str


def _check_boundary_vanishes(fld: ScalarField, what: str) -> None:
    vals = fld.values
    bmask = fld.grid.boundary_mask()
    if np.any(vals[bmask] != 0.0):
        raise ValueError(f"{what} must vanish identically on the grid boundary")


def energy(
    u: ScalarField,
    model: ModelBundle,
    region: Region | None = None,
    eps_reg: float | None = None,
) -> EnergyReport:
    """Discrete energy: integral of alpha |grad u|^p / p - F(x, u)."""
    grid = u.grid
    if region is None:
        region = full_region(grid)
    if region.grid != grid:
        raise ValueError("region grid mismatch")
    if eps_reg is None:
        eps_reg = default_eps(grid, u.values)

    alpha = model.alpha_values()
    p = model.p_values()
    mask = region.mask
    w_corner = cell_volume(grid) / 2**grid.n
    diffs = edge_differences(grid, u.values)

    dirichlet = 0.0
    for q in corners(grid.n):
        g = corner_gradient(grid, diffs, q)
        s2 = sum(gk * gk for gk in g) + eps_reg**2
        sl = node_slice(q, grid.n)
        a_q, p_q, m_q = alpha[sl], p[sl], mask[sl]
        density = a_q * np.power(s2, 0.5 * p_q) / p_q
        dirichlet += w_corner * float(np.sum(density[m_q]))

    w = trapezoid_weights(grid)
    Fv = model.F_values(u.values)
    potential = -float(np.sum((w * Fv)[mask])) if mask.any() else 0.0
    if not mask.any():
        dirichlet = 0.0
    return EnergyReport(
        dirichlet_part=dirichlet,
        potential_part=potential,
        total=dirichlet + potential,
        region=region.kind,
    )


def weak_pairing(u: ScalarField, xi: ScalarField, model: ModelBundle, eps_reg: float | None = None) -> float:
    """Defect of the weak form against a boundary-vanishing test function.

    Returns the discrete value of
    int alpha |grad u|^(p-2) grad u . grad xi  -  int f(x, u) xi.
    """
    grid = u.grid
    _check_boundary_vanishes(xi, "test function")
    if eps_reg is None:
        eps_reg = default_eps(grid, u.values)

    alpha = model.alpha_values()
    p = model.p_values()
    w_corner = cell_volume(grid) / 2**grid.n
    du = edge_differences(grid, u.values)
    dxi = edge_differences(grid, xi.values)

    flux_term = 0.0
    for q in corners(grid.n):
        gu = corner_gradient(grid, du, q)
        gx = corner_gradient(grid, dxi, q)
        s2 = sum(gk * gk for gk in gu) + eps_reg**2
        sl = node_slice(q, grid.n)
        coef = alpha[sl] * np.power(s2, 0.5 * (p[sl] - 2.0))
        dot = sum(a * b for a, b in zip(gu, gx))
        flux_term += w_corner * float(np.sum(coef * dot))

    w = trapezoid_weights(grid)
    source = float(np.sum(w * model.f_values(u.values) * xi.values))
    return flux_term - source


def first_variation(u: ScalarField, phi: ScalarField, model: ModelBundle, eps_reg: float | None = None) -> float:
    """d/dt E(u + t phi) at t = 0; identical code path to weak_pairing."""
    return weak_pairing(u, phi, model, eps_reg=eps_reg)


def second_variation(u: ScalarField, phi: ScalarField, model: ModelBundle, eps_reg: float | None = None) -> float:
    """d^2/dt^2 E(u + t phi) at t = 0, i.e. the stability quadratic form

    int <B(x, grad u) grad phi, grad phi> - f_u(x, u) phi^2

    with B evaluated per quadrature sample from the eps-regularized gradient.
    """
    grid = u.grid
    _check_boundary_vanishes(phi, "test function")
    if eps_reg is None:
        eps_reg = default_eps(grid, u.values)

    alpha = model.alpha_values()
    p = model.p_values()
    w_corner = cell_volume(grid) / 2**grid.n
    du = edge_differences(grid, u.values)
    dphi = edge_differences(grid, phi.values)

    form = 0.0
    for q in corners(grid.n):
        gu = corner_gradient(grid, du, q)
        gp = corner_gradient(grid, dphi, q)
        s2 = sum(gk * gk for gk in gu) + eps_reg**2
        sl = node_slice(q, grid.n)
        p_q = p[sl]
        coef = alpha[sl] * np.power(s2, 0.5 * (p_q - 2.0))
        norm_phi = sum(a * a for a in gp)
        cross = sum(a * b for a, b in zip(gu, gp))
        form += w_corner * float(np.sum(coef * (norm_phi + (p_q - 2.0) * safe_ratio(cross * cross, s2))))

    w = trapezoid_weights(grid)
    fu = model.f_u_values(u.values)
    return form - float(np.sum(w * fu * phi.values * phi.values))


def energy_gradient(u_values: Array, model: ModelBundle, eps_reg: float) -> Array:
    """Exact gradient of the discrete energy with respect to node values.

    Divided by the node quadrature weight this is the pointwise residual
    -div(alpha |grad u|^(p-2) grad u) - f(x, u); the flux part scatters the
    per-edge staggered fluxes into the two end nodes of each edge.
    """
    grid = model.grid
    alpha = model.alpha_values()
    p = model.p_values()
    w_corner = cell_volume(grid) / 2**grid.n
    diffs = edge_differences(grid, u_values)

    out = np.zeros(grid.shape)
    for q in corners(grid.n):
        g = corner_gradient(grid, diffs, q)
        s2 = sum(gk * gk for gk in g) + eps_reg**2
        sl = node_slice(q, grid.n)
        coef = w_corner * alpha[sl] * np.power(s2, 0.5 * (p[sl] - 2.0))
        for k in range(grid.n):
            flux = coef * g[k] / grid.spacing[k]
            tsl = _transverse_slices(q, k, grid.n)
            plus = tuple(slice(1, None) if j == k else tsl[j] for j in range(grid.n))
            minus = tuple(slice(None, -1) if j == k else tsl[j] for j in range(grid.n))
            out[plus] += flux
            out[minus] -= flux

    w = trapezoid_weights(grid)
    out -= w * model.f_values(u_values)
    return out


def residual(u: ScalarField, model: ModelBundle, eps_reg: float | None = None) -> ScalarField:
    """Pointwise interior residual of the PDE; boundary entries are 0."""
    grid = u.grid
    if eps_reg is None:
        eps_reg = default_eps(grid, u.values)
    grad_e = energy_gradient(u.values, model, eps_reg)
    w = trapezoid_weights(grid)
    r = grad_e / w
    r[grid.boundary_mask()] = 0.0
    return ScalarField(grid, r)


def residual_norm(u: ScalarField, model: ModelBundle, eps_reg: float | None = None) -> float:
    return float(np.max(np.abs(residual(u, model, eps_reg).values)))
