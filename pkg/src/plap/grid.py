"""Structured tensor-product grids over a box in R^m x R^(n-m).

The first ``m`` axes are the x-coordinates, the remaining ``n - m`` axes the
y-coordinates.  Field values are stored C-ordered with axes
``(x_1, ..., x_m, y_1, ..., y_{n-m})``, so the y-axes vary fastest in memory.
All finite-difference calculus used by the other modules (gradient, Hessian,
masked trapezoid quadrature) lives here.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class EmptyRegionWarning(UserWarning):
    """Raised (as a warning) when an integral is requested over an empty mask."""


@dataclass(frozen=True)
class Grid:
    """Uniform tensor-product lattice on a box.

    Parameters
    ----------
    m : number of x-axes (>= 1)
    n_minus_m : number of y-axes (>= 1)
    extents : per-axis closed intervals ``(lo, hi)``
    sizes : per-axis point counts, each >= 3
    """

    m: int
    n_minus_m: int
    extents: tuple[tuple[float, float], ...]
    sizes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple((float(a), float(b)) for a, b in self.extents))
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if self.m < 1 or self.n_minus_m < 1:
            raise ValueError(f"need m >= 1 and n-m >= 1, got m={self.m}, n-m={self.n_minus_m}")
        n = self.m + self.n_minus_m
        if len(self.extents) != n or len(self.sizes) != n:
            raise ValueError(f"expected {n} extents/sizes, got {len(self.extents)}/{len(self.sizes)}")
        for k, ((lo, hi), s) in enumerate(zip(self.extents, self.sizes)):
            if s < 3:
                raise ValueError(f"axis {k}: need at least 3 points, got {s}")
            if not hi > lo:
                raise ValueError(f"axis {k}: empty extent [{lo}, {hi}]")

    @property
    def n(self) -> int:
        return self.m + self.n_minus_m

    @property
    def shape(self) -> tuple[int, ...]:
        return self.sizes

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (s - 1) for (lo, hi), s in zip(self.extents, self.sizes))

    @property
    def num_points(self) -> int:
        return int(np.prod(self.sizes))

    def axis_coords(self, k: int) -> np.ndarray:
        lo, hi = self.extents[k]
        return np.linspace(lo, hi, self.sizes[k])

    def coordinate_fields(self) -> list[np.ndarray]:
        """Full coordinate arrays, each of shape ``self.shape``."""
        return list(np.meshgrid(*[self.axis_coords(k) for k in range(self.n)], indexing="ij"))

    def x_coordinate_fields(self) -> list[np.ndarray]:
        return self.coordinate_fields()[: self.m]

    def y_coordinate_fields(self) -> list[np.ndarray]:
        return self.coordinate_fields()[self.m :]

    def radius_field(self) -> np.ndarray:
        """|X| at every grid point."""
        coords = self.coordinate_fields()
        return np.sqrt(sum(c * c for c in coords))

    def interior_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[tuple(slice(1, -1) for _ in range(self.n))] = True
        return mask

    def boundary_mask(self) -> np.ndarray:
        return ~self.interior_mask()

    def refined(self, factor: int = 2) -> "Grid":
        """Grid with each spacing divided by ``factor`` (same box)."""
        sizes = tuple((s - 1) * factor + 1 for s in self.sizes)
        return Grid(self.m, self.n_minus_m, self.extents, sizes)

    def sample(self, fn: Callable[..., np.ndarray]) -> "ScalarField":
        """Sample ``fn(*coords)`` on the lattice into a ScalarField."""
        values = np.asarray(fn(*self.coordinate_fields()), dtype=float)
        values = np.broadcast_to(values, self.shape).copy()
        return ScalarField(self, values)


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.isfinite(values).all():
        raise ValueError(f"{what} contains non-finite values")


@dataclass(frozen=True)
class ScalarField:
    """One real value per grid point, C-ordered with shape ``grid.shape``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {self.grid.shape}")
        _check_finite(values, "ScalarField")
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class VectorField:
    """n ScalarField components on a shared grid (gradient-like objects)."""

    grid: Grid
    components: tuple[ScalarField, ...]

    def __post_init__(self):
        if len(self.components) != self.grid.n:
            raise ValueError(f"expected {self.grid.n} components, got {len(self.components)}")
        for c in self.components:
            if c.grid is not self.grid and c.grid != self.grid:
                raise ValueError("component grid mismatch")

    def as_array(self) -> np.ndarray:
        """Stacked view of shape ``(n, *grid.shape)``."""
        return np.stack([c.values for c in self.components])

    def y_part(self) -> np.ndarray:
        """The fiber components, shape ``(n - m, *grid.shape)``."""
        return np.stack([c.values for c in self.components[self.grid.m :]])


@dataclass(frozen=True)
class Region:
    """Boolean point mask tagged with how it was built."""

    grid: Grid
    mask: np.ndarray = field(repr=False)
    kind: str = "custom"

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != self.grid.shape:
            raise ValueError("mask shape mismatch")
        object.__setattr__(self, "mask", mask)

    @property
    def num_points(self) -> int:
        return int(self.mask.sum())

    def is_empty(self) -> bool:
        return not self.mask.any()


def interior_region(grid: Grid) -> Region:
    return Region(grid, grid.interior_mask(), kind="interior")


def full_region(grid: Grid) -> Region:
    return Region(grid, np.ones(grid.shape, dtype=bool), kind="full")


def ball_region(grid: Grid, r: float) -> Region:
    return Region(grid, grid.radius_field() <= r, kind=f"ball({r})")


def annulus_region(grid: Grid, rho1: float, rho2: float) -> Region:
    """Points with |X| in [rho1, rho2]."""
    if rho1 > rho2:
        raise ValueError(f"annulus needs rho1 <= rho2, got {rho1} > {rho2}")
    rad = grid.radius_field()
    return Region(grid, (rad >= rho1) & (rad <= rho2), kind=f"annulus({rho1},{rho2})")


def gradient_array(grid: Grid, values: np.ndarray) -> np.ndarray:
    """All n partial derivatives of a value array; shape ``(n, *grid.shape)``.

    Central second-order differences at interior points, one-sided
    second-order (3-point) at the boundary, so affine functions are
    differentiated exactly everywhere and quadratics at interior points.
    """
    h = grid.spacing
    return np.stack([np.gradient(values, h[k], axis=k, edge_order=2) for k in range(grid.n)])


def gradient(fld: ScalarField) -> VectorField:
    """Finite-difference gradient of a scalar field."""
    grads = gradient_array(fld.grid, fld.values)
    return VectorField(fld.grid, tuple(ScalarField(fld.grid, g) for g in grads))


def hessian_array(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Symmetrized nested-difference Hessian; shape ``(n, n, *grid.shape)``.

    Nesting two second-order first-derivative stencils is exact on
    quadratics (including boundary points, since the one-sided stencils are
    exact on quadratics and their gradients are affine).
    """
    n = grid.n
    first = gradient_array(grid, values)
    hess = np.empty((n, n) + grid.shape)
    for i in range(n):
        hess[i] = gradient_array(grid, first[i])
    sym = 0.5 * (hess + np.swapaxes(hess, 0, 1))
    assert np.array_equal(sym, np.swapaxes(sym, 0, 1))
    return sym


def hessian(fld: ScalarField) -> np.ndarray:
    return hessian_array(fld.grid, fld.values)


def trapezoid_weights(grid: Grid) -> np.ndarray:
    """Tensor-product trapezoid quadrature weights, shape ``grid.shape``.

    The weights are those of the full box; masked integrals restrict the
    sum to masked points without re-weighting, which keeps integrals over a
    disjoint mask partition exactly additive.
    """
    w = np.ones(grid.shape)
    for k in range(grid.n):
        wk = np.full(grid.sizes[k], grid.spacing[k])
        wk[0] *= 0.5
        wk[-1] *= 0.5
        shape = [1] * grid.n
        shape[k] = grid.sizes[k]
        w = w * wk.reshape(shape)
    return w


def integrate(fld: ScalarField, region: Region | None = None) -> float:
    """Trapezoid quadrature of a field over the whole box or a masked region.

    Second-order accurate for smooth integrands on box regions; O(h) on
    curved masks (staircase boundary).  An empty mask integrates to 0 and
    emits :class:`EmptyRegionWarning`.
    """
    w = trapezoid_weights(fld.grid)
    if region is None:
        return float(np.sum(w * fld.values))
    if region.grid != fld.grid:
        raise ValueError("region and field live on different grids")
    if region.is_empty():
        warnings.warn("integrating over an empty region", EmptyRegionWarning, stacklevel=2)
        return 0.0
    mask = region.mask
    return float(np.sum(w[mask] * fld.values[mask]))


def integrate_values(grid: Grid, values: np.ndarray, mask: np.ndarray | None = None) -> float:
    """`integrate` for raw arrays (no field wrapping, no warnings)."""
    w = trapezoid_weights(grid)
    if mask is None:
        return float(np.sum(w * values))
    if not mask.any():
        return 0.0
    return float(np.sum(w[mask] * values[mask]))


def observed_orders(errors: Sequence[float]) -> list[float]:
    """log2 ratios of successive errors from a dyadic refinement study."""
    return [float(np.log2(errors[i] / errors[i + 1])) for i in range(len(errors) - 1)]
