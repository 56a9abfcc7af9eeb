"""Damped Newton / gradient-descent hybrid for the discrete Dirichlet problem.

The solver minimizes the discrete energy: Newton directions come from the
energy Hessian (the flux linearization assembled from the same matrix that
drives the stability module) with a Levenberg shift that falls back to
scaled gradient descent whenever the Hessian is indefinite, a monotone
Armijo line search on the energy, and geometric continuation in the gradient
regularization for degenerate exponents.  Convergence is declared on the
max-norm of the pointwise residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .grid import Grid, ScalarField, trapezoid_weights
from .model import Coefficients, ModelBundle, Nonlinearity, antiderivative
from .operator import energy, energy_gradient
from . import forms

Array = np.ndarray


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for the nonlinear solve.

    eps_reg is relative: the absolute regularization is eps_reg times the
    gradient scale of the initial iterate (continuation starts 1e3 higher).
    """

    eps_reg: float = 1e-8
    tol_residual: float = 1e-8
    max_iters: int = 80
    damping: float = 1.0
    continuation_steps: int = 4
    max_backtracks: int = 40
    cg_rtol: float = 1e-2

    def __post_init__(self):
        if self.eps_reg <= 0 or self.tol_residual < 1e-14 or self.max_iters <= 0:
            raise ValueError("eps_reg > 0, tol_residual >= 1e-14 and max_iters > 0 required")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.continuation_steps < 1:
            raise ValueError("continuation_steps must be >= 1")


@dataclass
class SolveReport:
    iterations: int = 0
    final_residual_norm: float = float("inf")
    energy_trace: list[float] = field(default_factory=list)
    converged: bool = False
    eps_used: float = 0.0
    message: str = ""


def _check_finite_energy(value: float, u: Array) -> None:
    if not np.isfinite(value):
        bad = np.unravel_index(int(np.argmax(~np.isfinite(u))), u.shape) if not np.isfinite(u).all() else None
        raise ValueError(f"non-finite energy encountered (first bad point {bad})")


def _jacobi(diag: Array) -> sp.linalg.LinearOperator:
    d = np.abs(diag)
    floor = 1e-14 * (1.0 + float(d.max(initial=0.0)))
    inv = 1.0 / np.maximum(d, floor)
    return sp.linalg.LinearOperator(
        shape=(diag.size, diag.size), matvec=lambda v: inv * v, dtype=float
    )


def _interior_residual_norm(grid: Grid, grad_e: Array) -> float:
    w = trapezoid_weights(grid)
    r = grad_e / w
    return float(np.max(np.abs(r[grid.interior_mask()])))


def _newton_minimize(
    u0: Array,
    model: ModelBundle,
    eps_abs: float,
    tol: float,
    options: SolverOptions,
    report: SolveReport,
    max_iters: int,
) -> tuple[Array, bool]:
    grid = model.grid
    idx = forms.interior_indices(grid)
    mass = forms.mass_diagonal_interior(grid)
    p_is_two = model.coefficients.is_p_constant_two(grid)

    u = u0.copy()
    fld = ScalarField(grid, u)
    e_val = energy(fld, model, eps_reg=eps_abs).total
    _check_finite_energy(e_val, u)
    if not report.energy_trace:
        report.energy_trace.append(e_val)

    flux_int = None
    prev_step = None
    lam = 0.0
    for _ in range(max_iters):
        grad_full = energy_gradient(u, model, eps_abs)
        rnorm = _interior_residual_norm(grid, grad_full)
        report.final_residual_norm = rnorm
        if rnorm <= tol:
            return u, True

        if flux_int is None or not p_is_two:
            flux_int = forms.restrict_to_interior(grid, forms.flux_hessian_matrix(grid, model, u, eps_abs))
        fu_int = model.f_u_values(u).ravel()[idx]
        A = (flux_int - sp.diags(mass * fu_int)).tocsr()
        g_int = grad_full.ravel()[idx]

        step = None
        for _attempt in range(12):
            A_shift = A + sp.diags(lam * mass) if lam > 0 else A
            sol, info = cg(
                A_shift, -g_int, x0=prev_step, rtol=options.cg_rtol, atol=0.0, maxiter=4000, M=_jacobi(A_shift.diagonal())
            )
            descent = float(np.dot(sol, g_int))
            if info == 0 and np.isfinite(sol).all() and descent < 0:
                step = sol
                break
            lam = max(10.0 * lam, 1e-4 * (1.0 + abs(e_val)))
        if step is None:
            report.message = "linear solver failed to produce a descent direction"
            report.iterations += 1
            return u, False

        # Monotone Armijo backtracking on the energy.
        t = options.damping
        accepted = False
        for _bt in range(options.max_backtracks):
            trial = u.copy()
            trial.ravel()[idx] += t * step
            e_trial = energy(ScalarField(grid, trial), model, eps_reg=eps_abs).total
            _check_finite_energy(e_trial, trial)
            if e_trial <= e_val + 1e-4 * t * descent:
                accepted = True
                break
            t *= 0.5
        report.iterations += 1
        if not accepted:
            report.message = "line search failed (energy could not be decreased)"
            return u, False

        u = trial
        e_val = e_trial
        report.energy_trace.append(e_val)
        prev_step = step if accepted else None
        lam = lam / 10.0 if lam > 1e-10 else 0.0

    report.message = "max iterations reached"
    return u, False


def _p2_bundle(grid: Grid) -> ModelBundle:
    one = lambda *xs: np.ones_like(xs[0])
    two = lambda *xs: 2.0 * np.ones_like(xs[0])
    zero2 = lambda *args: np.zeros(np.broadcast(*args).shape)
    coeff = Coefficients(alpha=one, p_exp=two)
    nl = Nonlinearity(f=zero2, f_u=zero2, F=zero2, t0=0.0)
    return ModelBundle(coeff, nl, grid)


def harmonic_solve(grid: Grid, boundary_data: ScalarField) -> ScalarField:
    """Discrete harmonic extension of the boundary data (p = 2, f = 0)."""
    model = _p2_bundle(grid)
    u = boundary_data.values.copy()
    u[grid.interior_mask()] = float(np.mean(boundary_data.values))
    report = SolveReport()
    sol, _ = _newton_minimize(
        u, model, eps_abs=0.0, tol=1e-12 * (1.0 + float(np.max(np.abs(u)))), options=SolverOptions(), report=report, max_iters=8
    )
    return ScalarField(grid, sol)


def solve(
    model: ModelBundle,
    boundary_data: ScalarField,
    initial_guess: ScalarField | None = None,
    options: SolverOptions = SolverOptions(),
) -> tuple[ScalarField, SolveReport]:
    """Solve the Dirichlet problem; the returned field matches the boundary
    data exactly on the boundary.

    Non-convergence is reported, never raised; a non-finite energy along the
    way is an error carrying the offending point.
    """
    grid = model.grid
    if boundary_data.grid != grid:
        raise ValueError("boundary data grid mismatch")
    if initial_guess is None:
        initial_guess = harmonic_solve(grid, boundary_data)
    u = initial_guess.values.copy()
    u[grid.boundary_mask()] = boundary_data.values[grid.boundary_mask()]

    scale = max(float(np.max(np.abs(d))) for d in (np.diff(u, axis=k) / grid.spacing[k] for k in range(grid.n)))
    eps_final = options.eps_reg * (1.0 + scale)

    report = SolveReport(eps_used=eps_final)
    if model.coefficients.is_p_constant_two(grid):
        eps_schedule = [eps_final]
    else:
        eps_schedule = list(np.geomspace(eps_final * 1e3, eps_final, options.continuation_steps))

    ok = False
    for i, eps in enumerate(eps_schedule):
        last = i == len(eps_schedule) - 1
        tol = options.tol_residual if last else max(options.tol_residual, eps)
        u, ok = _newton_minimize(u, model, eps, tol, options, report, options.max_iters)
        if not ok and last:
            break
    report.converged = ok
    if ok:
        report.message = "converged"
    return ScalarField(grid, u), report


def profile_grid(interval: tuple[float, float], npts: int) -> Grid:
    """Pseudo-grid carrying a 1-D fiber profile (3 dummy x-points)."""
    return Grid(m=1, n_minus_m=1, extents=((0.0, 1.0), interval), sizes=(3, npts))


def fiber_profile(fld: ScalarField) -> tuple[Array, Array]:
    """Coordinates and values of a profile stored on a pseudo-grid."""
    return fld.grid.axis_coords(1), fld.values[0].copy()


def solve_1d_profile(
    model: ModelBundle,
    axis: int = 0,
    interval: tuple[float, float] | None = None,
    npts: int | None = None,
    bc: tuple[float, float] = (-1.0, 1.0),
    x_ref: float | None = None,
    options: SolverOptions = SolverOptions(),
) -> tuple[ScalarField, SolveReport]:
    """Solve the one-dimensional fiber problem along one y-axis.

    The model is restricted to x = x_ref (default: midpoint of the first
    x-extent); the profile seeds layer initial guesses via omega . y.
    """
    grid = model.grid
    if not 0 <= axis < grid.n_minus_m:
        raise ValueError(f"axis must index a y-axis (0..{grid.n_minus_m - 1})")
    gaxis = grid.m + axis
    if interval is None:
        interval = grid.extents[gaxis]
    if npts is None:
        npts = grid.sizes[gaxis]
    if x_ref is None:
        x_ref = 0.5 * (grid.extents[0][0] + grid.extents[0][1])

    xr = tuple(np.asarray(x_ref if i == 0 else 0.0) for i in range(grid.m))
    a = float(np.asarray(model.coefficients.alpha(*xr)))
    p = float(np.asarray(model.coefficients.p_exp(*xr)))
    f1 = lambda r: np.asarray(model.nonlinearity.f(*(np.full_like(np.asarray(r, dtype=float), x) for x in map(float, xr)), np.asarray(r, dtype=float)))
    fu1 = lambda r: np.asarray(model.nonlinearity.f_u(*(np.full_like(np.asarray(r, dtype=float), x) for x in map(float, xr)), np.asarray(r, dtype=float)))

    lo, hi = interval
    h = (hi - lo) / (npts - 1)
    u = np.linspace(bc[0], bc[1], npts)

    eps_final = options.eps_reg * (1.0 + float(np.max(np.abs(np.diff(u)))) / h)
    schedule = [eps_final] if p == 2.0 else list(np.geomspace(eps_final * 1e3, eps_final, options.continuation_steps))

    def grad_energy(v: Array, eps: float) -> Array:
        dv = np.diff(v) / h
        s2 = dv * dv + eps * eps
        flux = a * np.power(s2, 0.5 * (p - 2.0)) * dv
        g = np.zeros_like(v)
        g[1:] += flux
        g[:-1] -= flux
        w = np.full(npts, h)
        w[0] = w[-1] = 0.5 * h
        return g - w * f1(v)

    def energy_1d(v: Array, eps: float) -> float:
        dv = np.diff(v) / h
        s2 = dv * dv + eps * eps
        F = antiderivative(lambda *args: f1(args[-1]), model.nonlinearity.t0)
        w = np.full(npts, h)
        w[0] = w[-1] = 0.5 * h
        return float(h * np.sum(a * np.power(s2, 0.5 * p) / p) - np.sum(w * F(v)))

    report = SolveReport(eps_used=eps_final)
    converged = False
    for i, eps in enumerate(schedule):
        tol = options.tol_residual if i == len(schedule) - 1 else max(options.tol_residual, eps)
        e_val = energy_1d(u, eps)
        report.energy_trace.append(e_val)
        lam = 0.0
        for _ in range(options.max_iters):
            g = grad_energy(u, eps)
            rnorm = float(np.max(np.abs(g[1:-1] / h)))
            report.final_residual_norm = rnorm
            if rnorm <= tol:
                converged = True
                break
            converged = False
            dv = np.diff(u) / h
            s2 = dv * dv + eps * eps
            cface = a * np.power(s2, 0.5 * (p - 2.0)) * (1.0 + (p - 2.0) * dv * dv / s2) / h
            w = np.full(npts, h)
            w[0] = w[-1] = 0.5 * h
            main = np.zeros(npts)
            main[1:] += cface
            main[:-1] += cface
            main -= w * fu1(u)
            step = None
            for _attempt in range(12):
                diag = main + lam * w
                lower = -cface
                ab = np.zeros((3, npts - 2))
                ab[0, 1:] = lower[1:-1]
                ab[1, :] = diag[1:-1]
                ab[2, :-1] = lower[1:-1]
                from scipy.linalg import solve_banded

                try:
                    sol = solve_banded((1, 1), ab, -g[1:-1])
                except np.linalg.LinAlgError:
                    sol = None
                if sol is not None and np.isfinite(sol).all() and float(np.dot(sol, g[1:-1])) < 0:
                    step = sol
                    break
                lam = max(10.0 * lam, 1e-4)
            if step is None:
                report.message = "profile solve: no descent direction"
                break
            t = options.damping
            descent = float(np.dot(step, g[1:-1]))
            accepted = False
            for _bt in range(options.max_backtracks):
                trial = u.copy()
                trial[1:-1] += t * step
                e_trial = energy_1d(trial, eps)
                if np.isfinite(e_trial) and e_trial <= e_val + 1e-4 * t * descent:
                    accepted = True
                    break
                t *= 0.5
            report.iterations += 1
            if not accepted:
                report.message = "profile solve: line search failed"
                break
            u = trial
            e_val = e_trial
            report.energy_trace.append(e_val)
            lam = lam / 10.0 if lam > 1e-10 else 0.0
        if not converged:
            break
    report.converged = converged
    if converged:
        report.message = "converged"

    pgrid = profile_grid((float(lo), float(hi)), npts)
    return ScalarField(pgrid, np.tile(u, (3, 1))), report
