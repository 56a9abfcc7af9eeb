import numpy as np
import pytest

from plap.grid import Grid, Region, ScalarField, observed_orders, trapezoid_weights
from plap.model import ModelBundle, coefficients_from_specs, nonlinearity_from_spec
from plap.operator import (
    assemble_B,
    energy,
    first_variation,
    residual,
    second_variation,
    weak_pairing,
)

from conftest import bubble_field


def unit_square_model(p="constant:2", alpha="constant:1", f="zero", n=17):
    g = Grid(1, 1, ((0.0, 1.0), (0.0, 1.0)), (n, n))
    bundle = ModelBundle(coefficients_from_specs(alpha, p), nonlinearity_from_spec(f), g)
    return g, bundle


class TestAssembleB:
    def test_p2_identity(self):
        coeff = coefficients_from_specs("constant:1", "constant:2")
        for eta in (np.array([0.3, -2.0]), np.array([5.0, 0.0]), np.array([1e-9, 1e-9])):
            assert np.allclose(assemble_B((0.0,), eta, coeff), np.eye(2))

    def test_continuity_extension_at_zero(self):
        coeff3 = coefficients_from_specs("constant:2", "constant:3")
        assert np.array_equal(assemble_B((0.0,), np.zeros(2), coeff3), np.zeros((2, 2)))
        coeff2 = coefficients_from_specs("constant:2", "constant:2")
        assert np.array_equal(assemble_B((0.0,), np.zeros(2), coeff2), 2.0 * np.eye(2))

    def test_p4_hand_value(self):
        coeff = coefficients_from_specs("constant:1", "constant:4")
        B = assemble_B((0.0,), np.array([1.0, 0.0]), coeff)
        assert np.allclose(B, np.diag([3.0, 1.0]))

    def test_symmetric_psd_random(self):
        rng = np.random.default_rng(5)
        coeff = coefficients_from_specs("constant:0.7", "constant:3.5")
        for _ in range(50):
            eta = rng.standard_normal(3) * rng.uniform(0.1, 10)
            B = assemble_B((0.0,), eta, coeff)
            assert np.allclose(B, B.T)
            w = rng.standard_normal(3)
            assert w @ B @ w >= -1e-14

    def test_operator_norm_bound(self):
        # <Bw, w> <= alpha (p-1) |eta|^(p-2) |w|^2, equality for w parallel eta.
        rng = np.random.default_rng(7)
        coeff = coefficients_from_specs("constant:1.3", "constant:3.0")
        for _ in range(200):
            eta = rng.standard_normal(2) * rng.uniform(0.1, 5)
            w = rng.standard_normal(2)
            B = assemble_B((0.0,), eta, coeff)
            bound = 1.3 * 2.0 * np.linalg.norm(eta) ** 1.0 * (w @ w)
            assert w @ B @ w <= bound * (1 + 1e-12)

    def test_polarization_bound(self):
        rng = np.random.default_rng(9)
        coeff = coefficients_from_specs("constant:1", "constant:4")
        for _ in range(100):
            eta = rng.standard_normal(2)
            v, w = rng.standard_normal(2), rng.standard_normal(2)
            B = assemble_B((0.0,), eta, coeff)
            assert 2 * (v @ B @ w) <= v @ B @ v + w @ B @ w + 1e-12


class TestResidual:
    def test_constant_field_zero(self):
        g, bundle = unit_square_model(p="constant:3")
        r = residual(ScalarField(g, np.full(g.shape, 4.0)), bundle)
        assert np.max(np.abs(r.values)) < 1e-14

    def test_affine_harmonic(self):
        g, bundle = unit_square_model()
        x, _ = g.coordinate_fields()
        r = residual(ScalarField(g, x), bundle)
        assert np.max(np.abs(r.values)) < 1e-10

    def test_boundary_rows_zero(self):
        g, bundle = unit_square_model(f="poly:1")
        rng = np.random.default_rng(1)
        r = residual(ScalarField(g, rng.standard_normal(g.shape)), bundle)
        assert np.all(r.values[g.boundary_mask()] == 0.0)


class TestWeakPairing:
    def test_zero_test_function(self, tanh_layer_65):
        u, bundle = tanh_layer_65
        xi = ScalarField(u.grid, np.zeros(u.grid.shape))
        assert weak_pairing(u, xi, bundle) == 0.0

    def test_affine_defect_tiny(self):
        g, bundle = unit_square_model()
        x, y = g.coordinate_fields()
        u = ScalarField(g, 2.0 * x - 0.7 * y)
        xi = bubble_field(g, lambda x, y: np.sin(5 * x * y) + 0.3)
        assert abs(weak_pairing(u, xi, bundle)) < 1e-10

    def test_manufactured_defect_order_h2(self, tanh_layer_spec):
        from plap.model import exact_example

        defects = []
        for s in (33, 65, 129):
            g = Grid(1, 1, ((-8, 8), (-8, 8)), (s, s))
            u, bundle = exact_example(tanh_layer_spec, g)
            # off-center hump so the signed truncation error cannot cancel
            xi = bubble_field(g, lambda x, y: np.exp(-((x - 1.5) ** 2 + (y - 2.0) ** 2) / 6))
            defects.append(abs(weak_pairing(u, xi, bundle)))
        assert min(observed_orders(defects)) > 1.5

    def test_rejects_nonvanishing_boundary(self):
        g, bundle = unit_square_model()
        u = ScalarField(g, np.zeros(g.shape))
        with pytest.raises(ValueError):
            weak_pairing(u, ScalarField(g, np.ones(g.shape)), bundle)


class TestEnergy:
    def test_constant_at_base_point(self):
        g, bundle = unit_square_model(f="poly:0,2,0,-2")
        rep = energy(ScalarField(g, np.zeros(g.shape)), bundle, eps_reg=0.0)
        assert rep.total == 0.0

    def test_affine_dirichlet_half(self):
        g, bundle = unit_square_model()
        x, _ = g.coordinate_fields()
        rep = energy(ScalarField(g, x), bundle, eps_reg=0.0)
        assert rep.total == pytest.approx(0.5, abs=1e-10)
        assert rep.total == rep.dirichlet_part + rep.potential_part

    def test_negative_potential_gives_region_volume(self):
        # F(x, 0) = -1 via f = 0 shifted base point is awkward; use F = t - 1 shape:
        # simplest: f(x,u) = 1 with t0 = 1 gives F(x, 0) = -1.
        g = Grid(1, 1, ((0.0, 1.0), (0.0, 1.0)), (17, 17))
        bundle = ModelBundle(
            coefficients_from_specs("constant:1", "constant:2"),
            nonlinearity_from_spec("constant:1", t0=1.0),
            g,
        )
        rep = energy(ScalarField(g, np.zeros(g.shape)), bundle, eps_reg=0.0)
        assert rep.total == pytest.approx(1.0, abs=1e-12)

    def test_empty_region_warns_zero(self):
        g, bundle = unit_square_model()
        empty = Region(g, np.zeros(g.shape, dtype=bool))
        rep = energy(ScalarField(g, np.ones(g.shape)), bundle, region=empty)
        assert rep.total == 0.0


class TestVariations:
    @pytest.mark.parametrize("p", ["constant:2", "constant:3", "constant:4"])
    def test_first_variation_matches_energy_difference(self, p):
        g, bundle = unit_square_model(p=p, alpha="constant:1.5", f="poly:0,2,0,-2")
        x, y = g.coordinate_fields()
        u = ScalarField(g, x + 0.5 * y + 0.2 * np.sin(3 * x) * np.cos(2 * y))
        phi = bubble_field(g, lambda x, y: 0.3 + 0.2 * np.sin(4 * x + 1) * np.sin(5 * y))
        eps = 1e-8
        h = 1e-4
        e_plus = energy(ScalarField(g, u.values + h * phi.values), bundle, eps_reg=eps).total
        e_minus = energy(ScalarField(g, u.values - h * phi.values), bundle, eps_reg=eps).total
        fd = (e_plus - e_minus) / (2 * h)
        fv = first_variation(u, phi, bundle, eps_reg=eps)
        assert fv == pytest.approx(fd, rel=1e-6)

    def test_first_variation_equals_weak_pairing(self, tanh_layer_65):
        u, bundle = tanh_layer_65
        phi = bubble_field(u.grid)
        assert first_variation(u, phi, bundle, eps_reg=1e-8) == weak_pairing(u, phi, bundle, eps_reg=1e-8)

    def test_first_variation_small_at_exact_solution(self, tanh_layer_spec):
        from plap.model import exact_example

        vals = []
        for s in (33, 65):
            g = Grid(1, 1, ((-8, 8), (-8, 8)), (s, s))
            u, bundle = exact_example(tanh_layer_spec, g)
            phi = bubble_field(g, lambda x, y: np.exp(-((x - 1.5) ** 2 + (y - 2.0) ** 2) / 6))
            vals.append(abs(first_variation(u, phi, bundle)))
        assert vals[1] < vals[0] / 2.5
        assert vals[1] < 0.5 * (16 / 64) ** 2

    @pytest.mark.parametrize("p", ["constant:2", "constant:3", "constant:4"])
    def test_second_variation_matches_second_difference(self, p):
        rng = np.random.default_rng(17)
        g, bundle = unit_square_model(p=p, f="poly:0,2,0,-2")
        x, y = g.coordinate_fields()
        u = ScalarField(g, x - 0.3 * y + 0.15 * np.cos(2 * x) * np.sin(3 * y))
        phi = bubble_field(g, lambda x, y: 0.5 + 0.3 * np.sin(2 * x + 0.5) * np.cos(4 * y))
        eps = 1e-8
        h = 1e-3
        e0 = energy(u, bundle, eps_reg=eps).total
        ep = energy(ScalarField(g, u.values + h * phi.values), bundle, eps_reg=eps).total
        em = energy(ScalarField(g, u.values - h * phi.values), bundle, eps_reg=eps).total
        fd = (ep - 2 * e0 + em) / h**2
        sv = second_variation(u, phi, bundle, eps_reg=eps)
        assert sv == pytest.approx(fd, rel=1e-4)

    def test_second_variation_is_quadratic_form(self, tanh_layer_65):
        u, bundle = tanh_layer_65
        phi = bubble_field(u.grid)
        v1 = second_variation(u, phi, bundle, eps_reg=1e-8)
        v2 = second_variation(u, ScalarField(u.grid, 3.0 * phi.values), bundle, eps_reg=1e-8)
        assert v2 == pytest.approx(9.0 * v1, rel=1e-13)

    def test_p2_reduces_to_dirichlet_form(self):
        g, bundle = unit_square_model()
        u = ScalarField(g, np.zeros(g.shape))
        phi = bubble_field(g)
        sv = second_variation(u, phi, bundle, eps_reg=0.0)
        w = trapezoid_weights(g)
        from plap.operator import corner_gradient, corners, edge_differences, node_slice, cell_volume

        diffs = edge_differences(g, phi.values)
        total = 0.0
        for q in corners(2):
            gq = corner_gradient(g, diffs, q)
            total += cell_volume(g) / 4 * float(np.sum(gq[0] ** 2 + gq[1] ** 2))
        assert sv == pytest.approx(total, rel=1e-13)
        assert sv >= 0.0
