"""Level-set geometry on the fibers: region R, S, T, U, curvature, omega fit.

Everything is computed pointwise from nodal finite-difference derivatives on
the region R = {|grad_y u| > theta}.  The fiber-gradient magnitude is
smoothed as sqrt(|grad_y u|^2 + eps^2) before differentiation; the induced
bias is O(eps / |grad_y u|) and eps is recorded on the result.  Masked-out
points carry a 0.0 sentinel and never enter integrals.  Points within one
cell of the mask boundary are tracked separately (``core`` mask) since the
one-sided view of the level set there is not trustworthy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_erosion

from .grid import Grid, Region, ScalarField, gradient_array, hessian_array

Array = np.ndarray


@dataclass(frozen=True)
class GeometryFields:
    """Per-point level-set quantities of a field, defined on ``region``."""

    grid: Grid
    region: Region
    core: Region
    S: Array
    T: Array
    U: Array
    Ksq: Array
    tangential_grad_sq: Array
    normal: Array
    grad_y_norm: Array
    theta_grad: float
    eps_smooth: float


def region(u: ScalarField, theta_grad: float | None = None) -> Region:
    """Interior points where the fiber gradient exceeds the threshold."""
    grid = u.grid
    grads = gradient_array(grid, u.values)
    gy_norm = np.sqrt(sum(grads[grid.m + j] ** 2 for j in range(grid.n_minus_m)))
    if theta_grad is None:
        theta_grad = 1e-4 * float(np.max(gy_norm))
    if theta_grad <= 0.0:
        theta_grad = np.finfo(float).tiny
    mask = grid.interior_mask() & (gy_norm > theta_grad)
    return Region(grid, mask, kind=f"fiber-gradient>{theta_grad:g}")


def compute_geometry(
    u: ScalarField,
    theta_grad: float | None = None,
    eps_smooth: float | None = None,
) -> GeometryFields:
    """All level-set fields of u in one pass."""
    grid = u.grid
    m, nm = grid.m, grid.n_minus_m
    grads = gradient_array(grid, u.values)
    gy = grads[m:]
    gy_norm = np.sqrt(sum(g * g for g in gy))
    scale = float(np.max(gy_norm))
    if theta_grad is None:
        theta_grad = 1e-4 * scale
    if theta_grad <= 0.0:
        theta_grad = np.finfo(float).tiny
    if eps_smooth is None:
        eps_smooth = 1e-8 * scale if scale > 0 else 1e-300

    mask = grid.interior_mask() & (gy_norm > theta_grad)
    core = binary_erosion(mask, structure=np.ones((3,) * grid.n, dtype=bool), border_value=0)

    G = np.sqrt(gy_norm * gy_norm + eps_smooth * eps_smooth)
    dG = gradient_array(grid, G)
    H = hessian_array(grid, u.values)

    S_val = -sum(dG[i] * dG[i] for i in range(m)) + sum(
        H[i, m + j] ** 2 for i in range(m) for j in range(nm)
    )

    zeta = [sum(grads[l] * H[l, m + j] for l in range(grid.n)) for j in range(nm)]
    grad_dot_dG = sum(grads[l] * dG[l] for l in range(grid.n))
    T_val = -grad_dot_dG * grad_dot_dG + sum(z * z for z in zeta)

    U_val = sum(dG[l] * dG[l] for l in range(grid.n)) - sum(
        H[l, m + j] ** 2 for l in range(grid.n) for j in range(nm)
    )

    nu = np.stack([g / G for g in gy])

    # Tangential gradient of G on the fiber: project out the normal.
    dG_y = dG[m:]
    dot = sum(dG_y[j] * nu[j] for j in range(nm))
    tang = [dG_y[j] - dot * nu[j] for j in range(nm)]
    tgs = sum(t * t for t in tang)

    if nm == 1:
        Ksq = np.zeros(grid.shape)
    else:
        Hy = H[m:, m:]
        Hynu = np.stack([sum(Hy[j, k] * nu[k] for k in range(nm)) for j in range(nm)])
        nuHynu = sum(nu[j] * Hynu[j] for j in range(nm))
        Ksq = np.zeros(grid.shape)
        for j in range(nm):
            for k in range(nm):
                Mjk = Hy[j, k] - nu[j] * Hynu[k] - Hynu[j] * nu[k] + nu[j] * nu[k] * nuHynu
                Ksq += Mjk * Mjk
        Ksq /= G * G

    off = ~mask
    for arr in (S_val, T_val, U_val, Ksq, tgs):
        arr[off] = 0.0
    nu[:, off] = 0.0

    return GeometryFields(
        grid=grid,
        region=Region(grid, mask, kind=f"fiber-gradient>{theta_grad:g}"),
        core=Region(grid, core, kind="core"),
        S=S_val,
        T=T_val,
        U=U_val,
        Ksq=Ksq,
        tangential_grad_sq=tgs,
        normal=nu,
        grad_y_norm=np.where(mask, gy_norm, 0.0),
        theta_grad=float(theta_grad),
        eps_smooth=float(eps_smooth),
    )


def tangential_gradient(u: ScalarField, G_field: ScalarField, theta_grad: float | None = None) -> Array:
    """Projection of grad_y G onto the level-set tangent space of u.

    Returns the (n - m) fiber components with 0.0 at masked-out points.
    """
    grid = u.grid
    if G_field.grid != grid:
        raise ValueError("fields live on different grids")
    m, nm = grid.m, grid.n_minus_m
    grads = gradient_array(grid, u.values)
    gy = grads[m:]
    gy_norm = np.sqrt(sum(g * g for g in gy))
    if theta_grad is None:
        theta_grad = 1e-4 * float(np.max(gy_norm))
    mask = grid.interior_mask() & (gy_norm > max(theta_grad, np.finfo(float).tiny))
    safe = np.where(mask, gy_norm, 1.0)
    nu = np.stack([g / safe for g in gy])
    dG_y = gradient_array(grid, G_field.values)[m:]
    dot = sum(dG_y[j] * nu[j] for j in range(nm))
    out = np.stack([dG_y[j] - dot * nu[j] for j in range(nm)])
    out[:, ~mask] = 0.0
    return out


def curvatures(u: ScalarField, theta_grad: float | None = None, with_kappas: bool = False):
    """Total curvature squared (and optionally the per-point kappa spectrum).

    kappa_j are the tangent-space eigenvalues of P Hess_y(u) P / |grad_y u|;
    with a one-dimensional fiber there are no tangent directions and K^2 = 0.
    """
    geo = compute_geometry(u, theta_grad=theta_grad)
    if not with_kappas:
        return geo.Ksq, None
    grid = u.grid
    m, nm = grid.m, grid.n_minus_m
    if nm == 1:
        return geo.Ksq, np.zeros((0,) + grid.shape)
    H = hessian_array(grid, u.values)
    Hy = H[m:, m:]
    nu = geo.normal
    G = np.where(geo.region.mask, geo.grad_y_norm, 1.0)
    M = np.empty((nm, nm) + grid.shape)
    Hynu = np.stack([sum(Hy[j, k] * nu[k] for k in range(nm)) for j in range(nm)])
    nuHynu = sum(nu[j] * Hynu[j] for j in range(nm))
    for j in range(nm):
        for k in range(nm):
            M[j, k] = (Hy[j, k] - nu[j] * Hynu[k] - Hynu[j] * nu[k] + nu[j] * nu[k] * nuHynu) / G
    Mflat = np.moveaxis(M.reshape(nm, nm, -1), -1, 0)
    eig = np.linalg.eigvalsh(Mflat)
    # Drop the eigenvalue of the (exact) normal null direction: the one of
    # smallest magnitude cannot be distinguished from a flat principal
    # direction, so keep the nm-1 largest-magnitude values.
    order = np.argsort(np.abs(eig), axis=1)
    kappas = np.take_along_axis(eig, order[:, 1:], axis=1)
    kappas = np.moveaxis(kappas, 0, -1).reshape((nm - 1,) + grid.shape)
    kappas[:, ~geo.region.mask] = 0.0
    return geo.Ksq, kappas


def compute_S(u: ScalarField, theta_grad: float | None = None) -> Array:
    return compute_geometry(u, theta_grad=theta_grad).S


def compute_T(u: ScalarField, theta_grad: float | None = None) -> Array:
    return compute_geometry(u, theta_grad=theta_grad).T


def compute_U(u: ScalarField, theta_grad: float | None = None) -> Array:
    return compute_geometry(u, theta_grad=theta_grad).U


def verify_curvature_identity(
    u: ScalarField,
    theta_grad: float | None = None,
    geo: GeometryFields | None = None,
    use_core: bool = True,
) -> float:
    """Max relative defect of U + S = -(K^2 |grad_y u|^2 + |grad_L |grad_y u||^2).

    The defect is measured against the local magnitude of the four terms;
    by default only core points (one cell inside the mask) are scored.
    """
    if geo is None:
        geo = compute_geometry(u, theta_grad=theta_grad)
    mask = geo.core.mask if use_core else geo.region.mask
    if not mask.any():
        return 0.0
    curv = geo.Ksq * geo.grad_y_norm**2
    lhs = geo.U + geo.S
    rhs = -(curv + geo.tangential_grad_sq)
    local = np.abs(geo.U) + np.abs(geo.S) + curv + geo.tangential_grad_sq
    floor = 1e-12 * (1.0 + float(np.max(local[mask])))
    rel = np.abs(lhs - rhs) / (local + floor)
    return float(np.max(rel[mask]))


@dataclass(frozen=True)
class ParallelismResult:
    pointwise: Array
    verdict: bool
    s_consistent: bool
    max_deviation: float


def check_parallelism(
    u: ScalarField,
    theta_grad: float | None = None,
    tol_par: float = 0.05,
    use_core: bool = True,
) -> ParallelismResult:
    """Is grad_y(u_{x_i}) parallel to grad_y u at every region point?

    A point passes when the component of grad_y(u_{x_i}) orthogonal to the
    fiber normal is below tol_par times its magnitude (with an absolute
    floor at tol_par times the field scale, so vanishing rows pass).  Also
    cross-checks that S is small where parallelism holds (the equality case
    of the Cauchy-Schwarz bound).
    """
    grid = u.grid
    m, nm = grid.m, grid.n_minus_m
    geo = compute_geometry(u, theta_grad=theta_grad)
    mask = geo.core.mask if use_core else geo.region.mask
    H = hessian_array(grid, u.values)
    nu = geo.normal

    ok = np.ones(grid.shape, dtype=bool)
    max_dev = 0.0
    scale_rows = 0.0
    rows = []
    for i in range(m):
        row = np.stack([H[i, m + j] for j in range(nm)])
        rows.append(row)
        scale_rows = max(scale_rows, float(np.max(np.sqrt(sum(r * r for r in row))[mask])) if mask.any() else 0.0)
    floor = tol_par * scale_rows
    for row in rows:
        dot = sum(row[j] * nu[j] for j in range(nm))
        perp = row - dot * nu
        perp_norm = np.sqrt(sum(p * p for p in perp))
        row_norm = np.sqrt(sum(r * r for r in row))
        dev = perp_norm - (tol_par * row_norm + floor)
        ok &= dev <= 0.0
        if mask.any():
            max_dev = max(max_dev, float(np.max((perp_norm / (row_norm + floor + 1e-300))[mask])))
    verdict = bool(np.all(ok[mask])) if mask.any() else True

    s_consistent = True
    if mask.any():
        parallel_pts = ok & mask
        if parallel_pts.any():
            s_scale = float(np.max(np.abs(geo.S[mask]))) + scale_rows**2
            s_consistent = bool(np.max(geo.S[parallel_pts]) <= 10 * tol_par * (s_scale + 1e-300))
    pointwise = np.where(mask, ok, False)
    return ParallelismResult(pointwise=pointwise, verdict=verdict, s_consistent=s_consistent, max_deviation=max_dev)


@dataclass(frozen=True)
class OmegaFit:
    """Per-slice dominant fiber direction and the 1-D profile reconstruction."""

    omegas: Array
    slice_indices: list[tuple[int, ...]]
    skipped: list[tuple[int, ...]]
    constancy_score: float
    symmetry_defect: float
    profile_s: Array
    profile_values: Array


def _fix_sign(w: Array) -> Array:
    for c in w:
        if abs(c) > 1e-12:
            return w if c > 0 else -w
    return w


def fit_omega(u: ScalarField, theta_grad: float | None = None, nbins: int | None = None) -> OmegaFit:
    """Fit the layer direction on every x-slice and score one-dimensionality.

    The direction is the principal axis of the second-moment matrix of the
    normalized fiber gradients (sign fixed by the first nonzero component);
    the profile table comes from binning u against omega . y, and the
    symmetry defect is max |u - profile(omega . y)| over scored slices.
    """
    grid = u.grid
    m, nm = grid.m, grid.n_minus_m
    grads = gradient_array(grid, u.values)
    gy = np.stack(grads[m:])
    gy_norm = np.sqrt(np.sum(gy * gy, axis=0))
    scale = float(np.max(gy_norm))
    if theta_grad is None:
        theta_grad = 1e-4 * scale
    mask = grid.interior_mask() & (gy_norm > max(theta_grad, np.finfo(float).tiny))

    ys = np.stack([np.meshgrid(*[grid.axis_coords(m + j) for j in range(nm)], indexing="ij")[j] for j in range(nm)])
    x_shape = grid.shape[: m]

    omegas: list[Array] = []
    used: list[tuple[int, ...]] = []
    skipped: list[tuple[int, ...]] = []
    defect = 0.0
    best = (-1, None, None)
    for ix in np.ndindex(*x_shape):
        msk = mask[ix]
        count = int(msk.sum())
        if count == 0:
            skipped.append(ix)
            continue
        g = gy[(slice(None),) + ix][:, msk]
        ghat = g / np.linalg.norm(g, axis=0)
        moment = ghat @ ghat.T / ghat.shape[1]
        vals, vecs = np.linalg.eigh(moment)
        w = _fix_sign(vecs[:, -1])
        omegas.append(w)
        used.append(ix)

        s = np.tensordot(w, ys, axes=(0, 0)).ravel()
        uvals = u.values[ix].ravel()
        if nbins is None:
            nb = max(16, 4 * int(round(np.sqrt(s.size))))
        else:
            nb = nbins
        edges = np.linspace(s.min(), s.max() + 1e-12 * (1 + abs(s.max())), nb + 1)
        which = np.clip(np.digitize(s, edges) - 1, 0, nb - 1)
        sums = np.bincount(which, weights=uvals, minlength=nb)
        s_sums = np.bincount(which, weights=s, minlength=nb)
        counts = np.bincount(which, minlength=nb)
        nonempty = counts > 0
        centers = s_sums[nonempty] / counts[nonempty]
        means = sums[nonempty] / counts[nonempty]
        rec = np.interp(s, centers, means)
        slice_defect = float(np.max(np.abs(uvals - rec)))
        defect = max(defect, slice_defect)
        if count > best[0]:
            best = (count, centers, means)

    if not omegas:
        return OmegaFit(
            omegas=np.zeros((0, nm)),
            slice_indices=[],
            skipped=skipped,
            constancy_score=0.0,
            symmetry_defect=0.0,
            profile_s=np.zeros(0),
            profile_values=np.zeros(0),
        )

    W = np.stack(omegas)
    gram = np.clip(W @ W.T, -1.0, 1.0)
    constancy = float(np.max(np.arccos(gram)))
    return OmegaFit(
        omegas=W,
        slice_indices=used,
        skipped=skipped,
        constancy_score=constancy,
        symmetry_defect=defect,
        profile_s=best[1],
        profile_values=best[2],
    )
