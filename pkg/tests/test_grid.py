import numpy as np
import pytest

from plap.grid import (
    EmptyRegionWarning,
    Grid,
    Region,
    ScalarField,
    annulus_region,
    ball_region,
    full_region,
    gradient,
    hessian,
    integrate,
    interior_region,
    observed_orders,
    trapezoid_weights,
)


def unit_square(n=21):
    return Grid(1, 1, ((0.0, 1.0), (0.0, 1.0)), (n, n))


def test_grid_invariants():
    g = unit_square()
    assert g.n == 2
    assert g.spacing == (0.05, 0.05)
    with pytest.raises(ValueError):
        Grid(0, 2, ((0, 1), (0, 1)), (5, 5))
    with pytest.raises(ValueError):
        Grid(1, 1, ((0, 1), (0, 1)), (2, 5))
    with pytest.raises(ValueError):
        Grid(1, 1, ((1, 1), (0, 1)), (5, 5))


def test_scalar_field_rejects_nonfinite():
    g = unit_square(5)
    vals = np.zeros(g.shape)
    vals[2, 2] = np.nan
    with pytest.raises(ValueError):
        ScalarField(g, vals)


def test_gradient_constant_and_affine():
    g = Grid(2, 1, ((0, 1), (0, 2), (-1, 1)), (7, 9, 11))
    c = ScalarField(g, np.full(g.shape, 7.0))
    for comp in gradient(c).components:
        assert np.max(np.abs(comp.values)) == 0.0
    a = np.array([2.0, -3.0, 0.5])
    coords = g.coordinate_fields()
    aff = ScalarField(g, sum(ai * ci for ai, ci in zip(a, coords)))
    for ai, comp in zip(a, gradient(aff).components):
        assert np.max(np.abs(comp.values - ai)) < 1e-12


def test_gradient_exact_on_quadratic_interior():
    # |X|^2/2 has gradient X; central differences are exact on quadratics.
    g = Grid(1, 1, ((0, 1), (0, 1)), (3, 3))
    coords = g.coordinate_fields()
    f = ScalarField(g, 0.5 * sum(c * c for c in coords))
    gr = gradient(f)
    interior = g.interior_mask()
    for comp, c in zip(gr.components, coords):
        assert np.max(np.abs((comp.values - c)[interior])) < 1e-13


def test_hessian_examples():
    g = unit_square(9)
    x, y = g.coordinate_fields()
    aff = ScalarField(g, 2 * x - y)
    assert np.max(np.abs(hessian(aff))) < 1e-12

    f = ScalarField(g, x * y)
    H = hessian(f)
    interior = g.interior_mask()
    assert np.max(np.abs(H[0, 1][interior] - 1.0)) < 1e-12
    assert np.max(np.abs(H[0, 0][interior])) < 1e-12

    q = ScalarField(g, 0.5 * (x * x + y * y))
    Hq = hessian(q)
    for i in range(2):
        for j in range(2):
            expected = 1.0 if i == j else 0.0
            assert np.max(np.abs(Hq[i, j][interior] - expected)) < 1e-11


def test_hessian_symmetric_everywhere():
    g = unit_square(13)
    x, y = g.coordinate_fields()
    H = hessian(ScalarField(g, np.sin(3 * x) * np.cos(2 * y) + x**3 * y))
    assert np.array_equal(H[0, 1], H[1, 0])


def test_operators_linear():
    rng = np.random.default_rng(0)
    g = unit_square(9)
    f1 = ScalarField(g, rng.standard_normal(g.shape))
    f2 = ScalarField(g, rng.standard_normal(g.shape))
    a, b = 2.5, -1.25
    combo = ScalarField(g, a * f1.values + b * f2.values)
    lhs = gradient(combo).as_array()
    rhs = a * gradient(f1).as_array() + b * gradient(f2).as_array()
    assert np.max(np.abs(lhs - rhs)) < 1e-12
    lhs_h = hessian(combo)
    rhs_h = a * hessian(f1) + b * hessian(f2)
    assert np.max(np.abs(lhs_h - rhs_h)) < 1e-9


def test_integrate_constant_and_affine():
    g = unit_square(17)
    one = ScalarField(g, np.ones(g.shape))
    assert integrate(one) == pytest.approx(1.0, abs=1e-12)
    x = g.coordinate_fields()[0]
    assert integrate(ScalarField(g, x)) == pytest.approx(0.5, abs=1e-12)


def test_integrate_annulus_area():
    errs = []
    for n in (101, 201, 401):
        g = Grid(1, 1, ((-1, 1), (-1, 1)), (n, n))
        ann = annulus_region(g, 0.5, 1.0)
        errs.append(abs(integrate(ScalarField(g, np.ones(g.shape)), ann) - np.pi * 0.75))
    # staircase mask: O(h)
    assert errs[-1] < 0.02
    assert errs[-1] < errs[0]


def test_integrate_partition_additivity():
    g = unit_square(15)
    rng = np.random.default_rng(3)
    f = ScalarField(g, rng.standard_normal(g.shape))
    interior = g.interior_mask()
    split = rng.random(g.shape) < 0.4
    r1 = Region(g, interior & split)
    r2 = Region(g, interior & ~split)
    total = integrate(f, interior_region(g))
    assert integrate(f, r1) + integrate(f, r2) == pytest.approx(total, abs=1e-13)


def test_integrate_empty_mask_warns():
    g = unit_square(7)
    f = ScalarField(g, np.ones(g.shape))
    empty = Region(g, np.zeros(g.shape, dtype=bool))
    with pytest.warns(EmptyRegionWarning):
        assert integrate(f, empty) == 0.0


def test_annulus_requires_ordered_radii():
    g = unit_square(7)
    with pytest.raises(ValueError):
        annulus_region(g, 1.0, 0.5)


def test_gradient_convergence_order():
    errs = []
    for n in (17, 33, 65):
        g = Grid(1, 1, ((0.0, 2.0), (0.0, 2.0)), (n, n))
        x, y = g.coordinate_fields()
        f = ScalarField(g, np.sin(x) * np.sin(y))
        gr = gradient(f)
        err = max(
            np.max(np.abs(gr.components[0].values - np.cos(x) * np.sin(y))),
            np.max(np.abs(gr.components[1].values - np.sin(x) * np.cos(y))),
        )
        errs.append(err)
    assert min(observed_orders(errs)) >= 1.9


def test_trapezoid_weights_sum_to_volume():
    g = Grid(1, 2, ((0, 2), (0, 3), (0, 5)), (5, 7, 9))
    assert np.sum(trapezoid_weights(g)) == pytest.approx(30.0, rel=1e-13)


def test_ball_and_full_regions():
    g = Grid(1, 1, ((-1, 1), (-1, 1)), (21, 21))
    ball = ball_region(g, 0.5)
    assert ball.num_points > 0
    assert full_region(g).num_points == g.num_points
