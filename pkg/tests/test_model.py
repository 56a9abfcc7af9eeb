import numpy as np
import pytest

from plap.functions import parse_fn1d
from plap.grid import Grid, ScalarField, gradient_array, observed_orders
from plap.model import (
    ExampleSpec,
    ModelBundle,
    Nonlinearity,
    antiderivative,
    coefficients_from_specs,
    counterexample_appendix,
    counterexample_omega,
    counterexample_tau,
    exact_example,
    nonlinearity_from_spec,
)
from plap.operator import residual


def test_builtin_grammar_roundtrip():
    for spec in ("constant:2", "linear:1,0", "poly:0,2,0,-2", "tanh:1", "atan:2", "gauss:1,0.5"):
        fn = parse_fn1d(spec)
        assert fn.spec == spec
        t = np.linspace(-2, 2, 11)
        h = 1e-6
        fd = (fn(t + h) - fn(t - h)) / (2 * h)
        assert np.max(np.abs(fd - fn.d1(t))) < 1e-5 * (1 + np.max(np.abs(fd)))


def test_unknown_builtin_rejected():
    with pytest.raises(ValueError):
        parse_fn1d("sinh:1")


def test_coefficients_invariants():
    g = Grid(1, 1, ((0, 1), (0, 1)), (5, 5))
    good = coefficients_from_specs("constant:1", "constant:2")
    good.check_on_grid(g)
    with pytest.raises(ValueError):
        coefficients_from_specs("constant:0", "constant:2").check_on_grid(g)
    with pytest.raises(ValueError):
        coefficients_from_specs("constant:1", "constant:1.5").check_on_grid(g)


def test_nonlinearity_self_check_catches_wrong_derivative():
    g = Grid(1, 1, ((0, 1), (0, 1)), (5, 5))
    coeff = coefficients_from_specs("constant:1", "constant:2")
    f = lambda *a: a[-1] ** 2 * np.ones_like(a[0])
    wrong = Nonlinearity(f=f, f_u=lambda *a: np.ones_like(a[0]), F=antiderivative(f, 0.0))
    with pytest.raises(ValueError):
        ModelBundle(coeff, wrong, g)


def test_antiderivative_vanishes_at_base():
    nl = nonlinearity_from_spec("poly:0,2,0,-2", t0=0.5)
    x = np.zeros(3)
    assert np.max(np.abs(nl.F(x, np.full(3, 0.5)))) < 1e-14
    # F' == f
    t = np.linspace(-1, 1, 7)
    h = 1e-6
    fd = (nl.F(np.zeros_like(t), t + h) - nl.F(np.zeros_like(t), t - h)) / (2 * h)
    assert np.max(np.abs(fd - nl.f(np.zeros_like(t), t))) < 1e-8


def test_example_spec_invariants():
    coeff = coefficients_from_specs("constant:1", "constant:2")
    with pytest.raises(ValueError):
        ExampleSpec(beta=parse_fn1d("constant:0"), gamma=parse_fn1d("tanh"), omega=np.array([1.0]), coefficients=coeff)
    with pytest.raises(ValueError):
        ExampleSpec(beta=parse_fn1d("constant:1"), gamma=parse_fn1d("gauss:1,1"), omega=np.array([1.0]), coefficients=coeff)
    spec = ExampleSpec(beta=parse_fn1d("constant:1"), gamma=parse_fn1d("tanh"), omega=np.array([3.0, 4.0]), coefficients=coeff)
    assert np.linalg.norm(spec.omega) == pytest.approx(1.0, abs=1e-12)
    assert spec.omega == pytest.approx([0.6, 0.8])


def test_flagship_forcing_is_double_well(tanh_layer_65):
    _, bundle = tanh_layer_65
    rs = np.linspace(-0.95, 0.95, 21)
    xs = np.zeros_like(rs)
    fv = bundle.nonlinearity.f(xs, rs)
    assert np.max(np.abs(fv - 2 * (rs - rs**3))) < 1e-10
    # roots of r - r^3
    assert abs(bundle.nonlinearity.f(np.zeros(1), np.zeros(1))[0]) < 1e-12
    for r in (-1.0, 1.0):
        assert abs(bundle.nonlinearity.f(np.zeros(1), np.array([r]))[0]) < 1e-7


def test_linear_gamma_gives_zero_forcing():
    coeff = coefficients_from_specs("constant:1", "constant:2")
    spec = ExampleSpec(beta=parse_fn1d("constant:1"), gamma=parse_fn1d("linear:0.25"), omega=np.array([1.0]), coefficients=coeff)
    g = Grid(1, 1, ((-2, 2), (-2, 2)), (17, 17))
    u, bundle = exact_example(spec, g)
    rs = np.linspace(-0.4, 0.4, 9)
    assert np.max(np.abs(bundle.nonlinearity.f(np.zeros_like(rs), rs))) < 1e-12


def test_boundedness_of_layer(tanh_layer_65):
    u, _ = tanh_layer_65
    assert u.max_abs() <= 1.0 + 1e-12


def test_residual_convergence_p2(tanh_layer_spec):
    errs = []
    for s in (33, 65, 129):
        g = Grid(1, 1, ((-8, 8), (-8, 8)), (s, s))
        u, bundle = exact_example(tanh_layer_spec, g)
        errs.append(float(np.max(np.abs(residual(u, bundle).values))))
    assert min(observed_orders(errs)) >= 1.5


def test_residual_convergence_p4():
    coeff = coefficients_from_specs("constant:1", "constant:4")
    spec = ExampleSpec(beta=parse_fn1d("constant:1"), gamma=parse_fn1d("tanh"), omega=np.array([1.0]), coefficients=coeff)
    errs = []
    for s in (33, 65, 129):
        g = Grid(1, 1, ((-4, 4), (-4, 4)), (s, s))
        u, bundle = exact_example(spec, g)
        errs.append(float(np.max(np.abs(residual(u, bundle).values))))
    assert min(observed_orders(errs)) >= 1.5


def test_tabulated_forcing_nonconstant_beta():
    # beta varying in x exercises the fine-grid tabulation route.
    coeff = coefficients_from_specs("constant:1", "constant:2")
    spec = ExampleSpec(
        beta=parse_fn1d("poly:1.5,0,0.125"),
        gamma=parse_fn1d("tanh"),
        omega=np.array([1.0]),
        coefficients=coeff,
    )
    errs = []
    for s in (33, 65):
        g = Grid(1, 1, ((-2, 2), (-2, 2)), (s, s))
        u, bundle = exact_example(spec, g)
        errs.append(float(np.max(np.abs(residual(u, bundle).values))))
    assert errs[1] < errs[0]
    assert observed_orders(errs)[0] >= 1.3


def test_rotated_omega_layer_residual():
    coeff = coefficients_from_specs("constant:1", "constant:2")
    spec = ExampleSpec(
        beta=parse_fn1d("constant:1"),
        gamma=parse_fn1d("tanh"),
        omega=np.array([1.0, 1.0]),
        coefficients=coeff,
    )
    g = Grid(1, 2, ((-1, 1), (-4, 4), (-4, 4)), (5, 49, 49))
    u, bundle = exact_example(spec, g)
    assert float(np.max(np.abs(residual(u, bundle).values))) < 0.05


def test_counterexample_structure():
    g = Grid(1, 2, ((-3, 3), (-3, 3), (-3, 3)), (49, 33, 33))
    u, omega_fn = counterexample_appendix(g)
    x = g.axis_coords(0)
    # dead zone: u(x, .) = 0 for x in [-1, 1]
    inside = np.abs(x) <= 1.0
    assert np.max(np.abs(u.values[inside])) == 0.0
    assert counterexample_tau(np.array([0.0]))[0] == 0.0
    assert counterexample_tau(np.array([2.0]))[0] > 0.0
    # direction endpoints
    assert omega_fn(np.array([-1.0]))[:, 0] == pytest.approx([1.0, 0.0], abs=1e-14)
    assert omega_fn(np.array([1.0]))[:, 0] == pytest.approx([0.0, 1.0], abs=1e-14)


def test_counterexample_fiber_gradient_formula():
    g = Grid(1, 2, ((-3, 3), (-3, 3), (-3, 3)), (49, 49, 49))
    u, _ = counterexample_appendix(g)
    grads = gradient_array(g, u.values)
    x, y1, y2 = g.coordinate_fields()
    om = counterexample_omega(x)
    s = om[0] * y1 + om[1] * y2
    tau = counterexample_tau(x)
    expected1 = tau / np.cosh(s) ** 2 * om[0]
    expected2 = tau / np.cosh(s) ** 2 * om[1]
    interior = g.interior_mask()
    scale = np.max(np.abs(expected1)) + np.max(np.abs(expected2))
    assert np.max(np.abs(grads[1] - expected1)[interior]) < 5e-3 * scale
    assert np.max(np.abs(grads[2] - expected2)[interior]) < 5e-3 * scale


def test_counterexample_requires_m1_fiber2():
    g = Grid(1, 1, ((-3, 3), (-3, 3)), (9, 9))
    with pytest.raises(ValueError):
        counterexample_appendix(g)
