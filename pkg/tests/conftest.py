import numpy as np
import pytest

from plap.functions import parse_fn1d
from plap.grid import Grid, ScalarField
from plap.model import ExampleSpec, coefficients_from_specs, exact_example


@pytest.fixture(scope="session")
def tanh_layer_spec():
    coeff = coefficients_from_specs("constant:1", "constant:2")
    return ExampleSpec(
        beta=parse_fn1d("constant:1"),
        gamma=parse_fn1d("tanh"),
        omega=np.array([1.0]),
        coefficients=coeff,
    )


@pytest.fixture(scope="session")
def tanh_layer_65(tanh_layer_spec):
    grid = Grid(1, 1, ((-8.0, 8.0), (-8.0, 8.0)), (65, 65))
    return exact_example(tanh_layer_spec, grid)


@pytest.fixture(scope="session")
def tanh_layer_129(tanh_layer_spec):
    grid = Grid(1, 1, ((-8.0, 8.0), (-8.0, 8.0)), (129, 129))
    return exact_example(tanh_layer_spec, grid)


def bubble_field(grid: Grid, shape_fn=None) -> ScalarField:
    """Boundary-vanishing field: polynomial bubble times an optional shape."""
    out = np.ones(grid.shape)
    coords = grid.coordinate_fields()
    for k in range(grid.n):
        lo, hi = grid.extents[k]
        t = 2.0 * (coords[k] - lo) / (hi - lo) - 1.0
        out = out * (1.0 - t * t)
    if shape_fn is not None:
        out = out * shape_fn(*coords)
    out[grid.boundary_mask()] = 0.0
    return ScalarField(grid, out)
