"""Both sides of the weighted Poincare inequality, the logarithmic cutoff
and annulus machinery of the capacity argument, and energy-growth fits.

The left side integrates the curvature-weighted geometric terms over the
region R; the right side is the B-weighted gradient integral over the whole
box, exactly as the inequality is stated (the fiber-gradient factor decays
off R anyway).  Checks are inequalities at stated tolerances, not machine
identities: nodal gradients and trapezoid quadrature throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    Grid,
    Region,
    ScalarField,
    annulus_region,
    ball_region,
    gradient_array,
    integrate_values,
    trapezoid_weights,
)
from .geometry import GeometryFields, compute_geometry
from .model import ModelBundle
from .operator import safe_ratio
from .stability import StabilityReport, min_rayleigh

Array = np.ndarray


@dataclass(frozen=True)
class PoincareReport:
    lhs: float
    rhs: float
    slack: float
    phi_descriptor: str
    term_S: float
    term_K: float
    term_L: float
    term_T: float
    hypothesis_ok: bool


@dataclass(frozen=True)
class GrowthReport:
    radii: tuple[float, ...]
    energies: tuple[float, ...]
    fitted_slope: float
    bound_kind: str
    bound_exponent: float
    satisfied: bool
    slope_defined: bool


def _nodal_eps(grid: Grid, values: Array) -> float:
    grads = gradient_array(grid, values)
    return 1e-8 * (1.0 + float(np.max(np.abs(grads))))


def _check_boundary_zero(phi: ScalarField) -> None:
    if np.any(phi.values[phi.grid.boundary_mask()] != 0.0):
        raise ValueError("phi must vanish identically on the grid boundary")


def poincare_lhs(
    u: ScalarField,
    model: ModelBundle,
    geo: GeometryFields,
    phi: ScalarField,
    eps_reg: float | None = None,
) -> tuple[float, dict[str, float]]:
    """Region integral of the curvature-weighted terms against phi^2.

    Breakdown keys: S, K (curvature), L (tangential gradient), T (the
    degenerate-direction term scaled by (p-2)/|grad u|^2).
    """
    grid = u.grid
    if geo.grid != grid or phi.grid != grid:
        raise ValueError("field/geometry grid mismatch")
    _check_boundary_zero(phi)
    if eps_reg is None:
        eps_reg = _nodal_eps(grid, u.values)

    grads = gradient_array(grid, u.values)
    s2 = sum(g * g for g in grads) + eps_reg**2
    alpha = model.alpha_values()
    p = model.p_values()
    pref = alpha * np.power(s2, 0.5 * (p - 2.0)) * phi.values**2
    mask = geo.region.mask

    term_S = integrate_values(grid, pref * geo.S, mask)
    term_K = integrate_values(grid, pref * geo.Ksq * geo.grad_y_norm**2, mask)
    term_L = integrate_values(grid, pref * geo.tangential_grad_sq, mask)
    term_T = integrate_values(grid, pref * (p - 2.0) * safe_ratio(geo.T, s2), mask)
    breakdown = {"S": term_S, "K": term_K, "L": term_L, "T": term_T}
    return term_S + term_K + term_L + term_T, breakdown


def poincare_rhs(
    u: ScalarField,
    model: ModelBundle,
    phi: ScalarField,
    eps_reg: float | None = None,
) -> float:
    """Full-box integral of |grad_y u|^2 <B(x, grad u) grad phi, grad phi>."""
    grid = u.grid
    if phi.grid != grid:
        raise ValueError("phi grid mismatch")
    _check_boundary_zero(phi)
    if eps_reg is None:
        eps_reg = _nodal_eps(grid, u.values)

    grads = gradient_array(grid, u.values)
    dphi = gradient_array(grid, phi.values)
    s2 = sum(g * g for g in grads) + eps_reg**2
    alpha = model.alpha_values()
    p = model.p_values()
    gy2 = sum(grads[grid.m + j] ** 2 for j in range(grid.n_minus_m))
    norm_dphi = sum(d * d for d in dphi)
    cross = sum(g * d for g, d in zip(grads, dphi))
    bform = alpha * np.power(s2, 0.5 * (p - 2.0)) * (norm_dphi + (p - 2.0) * safe_ratio(cross * cross, s2))
    return integrate_values(grid, gy2 * bform)


def verify_poincare(
    u: ScalarField,
    model: ModelBundle,
    phi_suite: list[tuple[str, ScalarField]],
    geo: GeometryFields | None = None,
    stability: StabilityReport | None = None,
    tol_stability: float = 1e-8,
    eps_reg: float | None = None,
) -> list[PoincareReport]:
    """One report per test function; the stability hypothesis gates them.

    Reports with ``hypothesis_ok=False`` are informational only and excluded
    from acceptance statistics.
    """
    if geo is None:
        geo = compute_geometry(u)
    if stability is None:
        stability = min_rayleigh(u, model)
    hypothesis = stability.min_rayleigh >= -tol_stability * (1.0 + abs(stability.min_rayleigh))

    reports = []
    for name, phi in phi_suite:
        lhs, bk = poincare_lhs(u, model, geo, phi, eps_reg=eps_reg)
        rhs = poincare_rhs(u, model, phi, eps_reg=eps_reg)
        reports.append(
            PoincareReport(
                lhs=lhs,
                rhs=rhs,
                slack=rhs - lhs,
                phi_descriptor=name,
                term_S=bk["S"],
                term_K=bk["K"],
                term_L=bk["L"],
                term_T=bk["T"],
                hypothesis_ok=bool(hypothesis),
            )
        )
    return reports


def bubble(grid: Grid) -> Array:
    """Polynomial bubble: positive inside, exactly zero on the boundary."""
    out = np.ones(grid.shape)
    coords = grid.coordinate_fields()
    for k in range(grid.n):
        lo, hi = grid.extents[k]
        t = 2.0 * (coords[k] - lo) / (hi - lo) - 1.0
        out = out * (1.0 - t * t)
    out[grid.boundary_mask()] = 0.0
    return out


def random_phi_suite(grid: Grid, count: int, seed: int) -> list[tuple[str, ScalarField]]:
    """Seeded smooth boundary-vanishing test functions (bump sums x bubble)."""
    rng = np.random.default_rng(seed)
    coords = grid.coordinate_fields()
    taper = bubble(grid)
    suite = []
    for i in range(count):
        acc = np.zeros(grid.shape)
        for _ in range(3):
            amp = rng.uniform(0.3, 1.0) * rng.choice([-1.0, 1.0])
            vals = np.zeros(grid.shape)
            for k in range(grid.n):
                lo, hi = grid.extents[k]
                c = rng.uniform(lo + 0.2 * (hi - lo), hi - 0.2 * (hi - lo))
                width = rng.uniform(0.1, 0.3) * (hi - lo)
                vals = vals + ((coords[k] - c) / width) ** 2
            acc = acc + amp * np.exp(-vals)
        phi = taper * acc
        mx = float(np.max(np.abs(phi)))
        if mx > 0:
            phi = phi / mx
        phi[grid.boundary_mask()] = 0.0
        suite.append((f"bump[seed={seed}#{i}]", ScalarField(grid, phi)))
    return suite


def _require_ball_in_box(grid: Grid, r: float) -> None:
    for lo, hi in grid.extents:
        if lo > -r or hi < r:
            raise ValueError(f"ball of radius {r} does not fit in the grid box")


def cutoff_phi(grid: Grid, R: float) -> tuple[ScalarField, float]:
    """Logarithmic capacity cutoff: log R inside B_sqrt(R), 2 log(R/|X|) on
    the annulus, 0 outside B_R.  Also returns the observed sup of
    |grad phi_R| |X| over the annulus (the constant bounding the gradient).
    """
    if R <= 1.0:
        raise ValueError("cutoff needs R > 1")
    _require_ball_in_box(grid, R)
    rho = grid.radius_field()
    sqrtR = np.sqrt(R)
    with np.errstate(divide="ignore", invalid="ignore"):
        mid = 2.0 * np.log(R / np.maximum(rho, 1e-300))
    vals = np.where(rho <= sqrtR, np.log(R), np.where(rho < R, mid, 0.0))
    fld = ScalarField(grid, vals)

    grads = gradient_array(grid, vals)
    gnorm = np.sqrt(sum(g * g for g in grads))
    ann = annulus_region(grid, sqrtR, R).mask
    c2 = float(np.max((gnorm * rho)[ann])) if ann.any() else 0.0
    return fld, c2


def annulus_bound_check(
    h_field: ScalarField, R: float, tol: float = 1e-9
) -> tuple[float, float, bool]:
    """Unconditional annulus bound for nonnegative h:

    int_{sqrt(R) <= |X| <= R} h/|X|^2  <=  int_sqrt(R)^R t^-3 eta(t) dt + eta(R)/R^2

    with eta(rho) = 2 int_{B_rho} h.  Both sides by quadrature; eta comes
    from the cumulative radius profile of the same trapezoid weights, the
    t-integral from a trapezoid rule at 4x the axis resolution.
    """
    grid = h_field.grid
    h = h_field.values
    if np.any(h < 0):
        raise ValueError("annulus bound needs a nonnegative field")
    if R <= 1.0:
        raise ValueError("needs R > 1 so that sqrt(R) < R")
    _require_ball_in_box(grid, R)

    rho = grid.radius_field()
    sqrtR = np.sqrt(R)
    ann = annulus_region(grid, sqrtR, R).mask
    with np.errstate(divide="ignore"):
        integrand = np.where(rho > 0, h / np.maximum(rho, 1e-300) ** 2, 0.0)
    lhs = integrate_values(grid, integrand, ann)

    w = trapezoid_weights(grid)
    order = np.argsort(rho, axis=None, kind="stable")
    rho_sorted = rho.ravel()[order]
    mass_sorted = np.cumsum((w * h).ravel()[order])

    def eta(t: Array) -> Array:
        pos = np.searchsorted(rho_sorted, t, side="right")
        return 2.0 * np.where(pos > 0, mass_sorted[np.maximum(pos - 1, 0)], 0.0)

    nt = 4 * max(grid.sizes)
    ts = np.linspace(sqrtR, R, nt)
    rhs = float(np.trapezoid(eta(ts) / ts**3, ts)) + float(eta(np.array([R]))[0]) / R**2
    ok = lhs <= rhs * (1.0 + tol)
    return lhs, rhs, ok


_BOUND_EXPONENTS = {"R2": lambda n, s: 2.0, "Rn-1": lambda n, s: n - 1.0, "Rn-sigma": lambda n, s: n - s}


def energy_growth(
    u: ScalarField,
    model: ModelBundle,
    radii,
    bound_kind: str = "R2",
    sigma: float = 1.0,
    margin: float = 0.1,
) -> GrowthReport:
    """Tabulate int_{B_R} alpha |grad u|^p and fit the log-log slope.

    The requested bound is satisfied when the fitted slope stays below the
    bound exponent plus the margin; a field with zero energy on some ball is
    flagged slope-undefined.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 3:
        raise ValueError("need at least 3 radii for a robust slope")
    if any(b >= a for a, b in zip(radii[1:], radii[:-1])):
        raise ValueError("radii must be strictly increasing")
    if bound_kind not in _BOUND_EXPONENTS:
        raise ValueError(f"unknown bound kind {bound_kind!r}")
    grid = u.grid
    _require_ball_in_box(grid, max(radii))

    grads = gradient_array(grid, u.values)
    norm = np.sqrt(sum(g * g for g in grads))
    alpha = model.alpha_values()
    p = model.p_values()
    density = alpha * np.power(norm, p)

    energies = [integrate_values(grid, density, ball_region(grid, r).mask) for r in radii]
    defined = all(e > 0.0 for e in energies)
    if defined:
        slope = float(np.polyfit(np.log(radii), np.log(energies), 1)[0])
    else:
        slope = float("nan")
    exponent = float(_BOUND_EXPONENTS[bound_kind](grid.n, sigma))
    satisfied = bool(defined and slope <= exponent + margin)
    return GrowthReport(
        radii=tuple(radii),
        energies=tuple(energies),
        fitted_slope=slope,
        bound_kind=bound_kind,
        bound_exponent=exponent,
        satisfied=satisfied,
        slope_defined=defined,
    )
