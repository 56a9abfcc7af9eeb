"""Sparse assembly of the energy Hessian (the stability quadratic form).

The matrices here reproduce, entry for entry, the corner-sampled bilinear
form of :mod:`plap.operator`: for boundary-vanishing xi,

    xi . A xi  ==  second_variation(u, xi)

to machine precision.  Assembly goes through per-corner edge-difference
matrices D[q,k] (cells x nodes, two entries per row), so

    A = sum_q sum_kl D[q,k]^T diag(w B_kl) D[q,l] - diag(w f_u).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import Grid, trapezoid_weights
from .model import ModelBundle
from .operator import cell_volume, corner_gradient, corners, edge_differences, node_slice, safe_ratio

Array = np.ndarray


@lru_cache(maxsize=4)
def _diff_matrices(grid: Grid) -> dict:
    """Edge-difference matrices D[q,k]; D[q,k] u == corner_gradient(...)[k].ravel()."""
    n = grid.n
    cell_shape = tuple(s - 1 for s in grid.sizes)
    ncells = int(np.prod(cell_shape))
    nnodes = grid.num_points
    cell_idx = np.indices(cell_shape)
    rows = np.arange(ncells)
    out = {}
    for q in corners(n):
        for k in range(n):
            minus = [cell_idx[j] + (q[j] if j != k else 0) for j in range(n)]
            plus = [cell_idx[j] + (q[j] if j != k else 1) for j in range(n)]
            col_m = np.ravel_multi_index(minus, grid.sizes).ravel()
            col_p = np.ravel_multi_index(plus, grid.sizes).ravel()
            inv_h = 1.0 / grid.spacing[k]
            mat = sp.coo_matrix(
                (
                    np.concatenate([np.full(ncells, inv_h), np.full(ncells, -inv_h)]),
                    (np.concatenate([rows, rows]), np.concatenate([col_p, col_m])),
                ),
                shape=(ncells, nnodes),
            )
            out[(q, k)] = mat.tocsr()
    return out


def interior_indices(grid: Grid) -> Array:
    return np.flatnonzero(grid.interior_mask().ravel())


def flux_hessian_matrix(grid: Grid, model: ModelBundle, u_values: Array, eps_reg: float) -> sp.csr_matrix:
    """Gradient part of the energy Hessian over all nodes (no f_u term)."""
    alpha = model.alpha_values()
    p = model.p_values()
    p_is_two = bool(np.all(p == 2.0))
    w_corner = cell_volume(grid) / 2**grid.n
    diffs = edge_differences(grid, u_values)
    mats = _diff_matrices(grid)

    nnodes = grid.num_points
    acc = sp.csr_matrix((nnodes, nnodes))
    for q in corners(grid.n):
        g = corner_gradient(grid, diffs, q)
        s2 = sum(gk * gk for gk in g) + eps_reg**2
        sl = node_slice(q, grid.n)
        p_q = p[sl]
        coef = w_corner * alpha[sl] * np.power(s2, 0.5 * (p_q - 2.0))
        for k in range(grid.n):
            Dk = mats[(q, k)]
            acc = acc + Dk.T @ sp.diags(coef.ravel()) @ Dk
            if p_is_two:
                continue
            for l in range(grid.n):
                off = coef * (p_q - 2.0) * safe_ratio(g[k] * g[l], s2)
                acc = acc + Dk.T @ sp.diags(off.ravel()) @ mats[(q, l)]
    return acc.tocsr()


def hessian_matrix(
    grid: Grid, model: ModelBundle, u_values: Array, eps_reg: float, flux_part: sp.csr_matrix | None = None
) -> sp.csr_matrix:
    """Full energy Hessian A (all nodes): flux part minus the f_u mass term."""
    if flux_part is None:
        flux_part = flux_hessian_matrix(grid, model, u_values, eps_reg)
    w = trapezoid_weights(grid).ravel()
    fu = model.f_u_values(u_values).ravel()
    return (flux_part - sp.diags(w * fu)).tocsr()


def restrict_to_interior(grid: Grid, mat: sp.csr_matrix) -> sp.csr_matrix:
    idx = interior_indices(grid)
    return mat[idx][:, idx].tocsr()


def mass_diagonal_interior(grid: Grid) -> Array:
    return trapezoid_weights(grid).ravel()[interior_indices(grid)]
