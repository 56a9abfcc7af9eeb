"""Stability form, minimal Rayleigh quotient, monotonicity-implies-stability.

The quadratic form is the sparse symmetric matrix A with

    xi . A xi == second_variation(u, xi)    for boundary-vanishing xi,

diagonalized against the trapezoid mass matrix.  The smallest generalized
eigenvalue is found by safeguarded shift-and-invert iteration with
Jacobi-preconditioned CG inner solves and a deterministic start vector;
grids small enough for a dense eigensolver can cross-check via
:func:`dense_min_rayleigh`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from . import forms
from .grid import ScalarField, gradient_array, trapezoid_weights
from .model import ModelBundle
from .operator import default_eps, second_variation

Array = np.ndarray


@dataclass(frozen=True)
class StabilityForm:
    """Interior-restricted stability operator and quadrature mass."""

    matrix: sp.csr_matrix
    mass: Array
    eps_reg: float

    def apply(self, xi_interior: Array) -> Array:
        return self.matrix @ xi_interior


@dataclass
class StabilityReport:
    min_rayleigh: float
    eigen_iterations: int
    residual_of_eigenpair: float
    converged: bool
    monotone_direction_found: int | None = None


def quadratic_form(u: ScalarField, model: ModelBundle, eps_reg: float | None = None) -> StabilityForm:
    """Assemble the stability operator; asserted against second_variation."""
    grid = u.grid
    if eps_reg is None:
        eps_reg = default_eps(grid, u.values)
    A_full = forms.hessian_matrix(grid, model, u.values, eps_reg)
    A = forms.restrict_to_interior(grid, A_full)
    A = 0.5 * (A + A.T)
    A = A.tocsr()
    mass = forms.mass_diagonal_interior(grid)

    rng = np.random.default_rng(2357)
    idx = forms.interior_indices(grid)
    for _ in range(3):
        xi = np.zeros(grid.shape)
        xi.ravel()[idx] = rng.standard_normal(idx.size)
        direct = second_variation(u, ScalarField(grid, xi), model, eps_reg=eps_reg)
        via_matrix = float(xi.ravel()[idx] @ (A @ xi.ravel()[idx]))
        scale = 1.0 + abs(direct) + abs(via_matrix)
        assert abs(direct - via_matrix) <= 1e-10 * scale, "quadratic form disagrees with second_variation"
    return StabilityForm(matrix=A, mass=mass, eps_reg=eps_reg)


def _start_vector(u: ScalarField) -> Array:
    """Normalized constant-plus-checkerboard over interior points."""
    grid = u.grid
    parity = np.zeros(grid.shape)
    for k in range(grid.n):
        shape = [1] * grid.n
        shape[k] = grid.sizes[k]
        parity = parity + np.arange(grid.sizes[k]).reshape(shape)
    v = 1.0 + 0.5 * np.where(parity % 2 == 0, 1.0, -1.0)
    v_int = v.ravel()[forms.interior_indices(grid)]
    return v_int / np.linalg.norm(v_int)


def smallest_eigenpair(form: StabilityForm, v0: Array, eig_tol: float = 1e-10, max_iters: int = 200):
    """Smallest eigenvalue of A x = lambda M x by shift-and-invert + CG.

    Returns (lam, eigvec, iterations, eigenpair_residual, converged); the
    residual is ||A xi - lam M xi|| / ||xi|| in the original metric.
    """
    inv_sqrt_m = 1.0 / np.sqrt(form.mass)
    S = sp.diags(inv_sqrt_m)
    At = (S @ form.matrix @ S).tocsr()

    diag = At.diagonal()
    row_abs = np.abs(At).sum(axis=1).A1 if hasattr(np.abs(At).sum(axis=1), "A1") else np.asarray(np.abs(At).sum(axis=1)).ravel()
    radii = row_abs - np.abs(diag)
    g_lo = float(np.min(diag - radii))
    g_hi = float(np.max(diag + radii))
    span = max(g_hi - g_lo, 1e-30)

    sigma_floor = g_lo - 0.01 * span
    sigma = sigma_floor
    x = v0 / np.linalg.norm(v0)
    theta = float(x @ (At @ x))
    iterations = 0
    converged = False
    for _ in range(max_iters):
        Ax = At @ x
        theta = float(x @ Ax)
        r = Ax - theta * x
        rn = float(np.linalg.norm(r))
        if rn <= eig_tol * max(1.0, abs(theta)):
            converged = True
            break
        cand = theta - max(2.0 * rn, 1e-13 * span)
        sigma = max(sigma, min(cand, theta - 1e-15 * span))
        shifted = (At - sp.eye(At.shape[0], format="csr") * sigma).tocsr()
        d = shifted.diagonal()
        prec_inv = 1.0 / np.maximum(np.abs(d), 1e-14 * span)
        M_op = sp.linalg.LinearOperator(shifted.shape, matvec=lambda v: prec_inv * v)
        y, info = cg(shifted, x, rtol=1e-3, atol=0.0, maxiter=5000, M=M_op)
        iterations += 1
        if info != 0 or not np.isfinite(y).all() or np.linalg.norm(y) == 0.0:
            sigma = 0.5 * (sigma + sigma_floor)
            continue
        x = y / np.linalg.norm(y)

    xi = inv_sqrt_m * x
    res = float(
        np.linalg.norm(form.matrix @ xi - theta * form.mass * xi) / np.linalg.norm(xi)
    )
    return theta, xi, iterations, res, converged


def _monotone_axis(u: ScalarField) -> int | None:
    grid = u.grid
    grads = gradient_array(grid, u.values)
    interior = grid.interior_mask()
    for j in range(grid.n_minus_m):
        if float(np.min(grads[grid.m + j][interior])) > 0.0:
            return j
    return None


def min_rayleigh(
    u: ScalarField,
    model: ModelBundle,
    eig_tol: float = 1e-10,
    eps_reg: float | None = None,
    max_iters: int = 200,
) -> StabilityReport:
    """Smallest value of the stability quotient over boundary-vanishing xi."""
    form = quadratic_form(u, model, eps_reg=eps_reg)
    lam, _, iters, res, ok = smallest_eigenpair(form, _start_vector(u), eig_tol=eig_tol, max_iters=max_iters)
    return StabilityReport(
        min_rayleigh=lam,
        eigen_iterations=iters,
        residual_of_eigenpair=res,
        converged=ok,
        monotone_direction_found=_monotone_axis(u),
    )


def dense_min_rayleigh(u: ScalarField, model: ModelBundle, eps_reg: float | None = None) -> float:
    """Dense generalized eigensolver oracle (grids with few interior points)."""
    from scipy.linalg import eigh

    form = quadratic_form(u, model, eps_reg=eps_reg)
    if form.matrix.shape[0] > 4000:
        raise ValueError("dense oracle is restricted to small grids")
    vals = eigh(
        form.matrix.toarray(),
        np.diag(form.mass),
        eigvals_only=True,
        subset_by_index=[0, 0],
    )
    return float(vals[0])


@dataclass
class Lemma79Result:
    applicable: bool
    stable: bool | None
    chain_ok: bool | None
    min_rayleigh: float | None
    witness: StabilityReport | None


def verify_monotone_stability(
    u: ScalarField,
    model: ModelBundle,
    axis: int = 0,
    tol_stability: float = 1e-8,
    eps_reg: float | None = None,
    seed: int = 0,
) -> Lemma79Result:
    """Monotonicity in one fiber direction implies stability.

    Not-applicable (never an error) when the directional derivative is not
    strictly positive.  Also spot-checks the underlying inequality
    int f_u xi^2 <= int <B grad xi, grad xi> on random test functions.
    """
    grid = u.grid
    grads = gradient_array(grid, u.values)
    interior = grid.interior_mask()
    if float(np.min(grads[grid.m + axis][interior])) <= 0.0:
        return Lemma79Result(applicable=False, stable=None, chain_ok=None, min_rayleigh=None, witness=None)

    if eps_reg is None:
        eps_reg = default_eps(grid, u.values)
    report = min_rayleigh(u, model, eps_reg=eps_reg)
    scale_tol = tol_stability * (1.0 + abs(report.min_rayleigh))
    stable = report.min_rayleigh >= -max(tol_stability, scale_tol)

    rng = np.random.default_rng(seed)
    w = trapezoid_weights(grid)
    fu = model.f_u_values(u.values)
    chain_ok = True
    idx = forms.interior_indices(grid)
    for _ in range(10):
        xi = np.zeros(grid.shape)
        xi.ravel()[idx] = rng.standard_normal(idx.size)
        fld = ScalarField(grid, xi)
        b_part = second_variation(u, fld, model, eps_reg=eps_reg) + float(np.sum(w * fu * xi * xi))
        lhs = float(np.sum(w * fu * xi * xi))
        if lhs > b_part + 1e-9 * (1.0 + abs(lhs) + abs(b_part)):
            chain_ok = False
    return Lemma79Result(
        applicable=True,
        stable=bool(stable),
        chain_ok=chain_ok,
        min_rayleigh=report.min_rayleigh,
        witness=report,
    )
