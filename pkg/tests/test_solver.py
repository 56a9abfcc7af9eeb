import numpy as np
import pytest

from plap.grid import Grid, ScalarField, observed_orders
from plap.model import ModelBundle, coefficients_from_specs, exact_example, nonlinearity_from_spec
from plap.solver import (
    SolverOptions,
    fiber_profile,
    harmonic_solve,
    solve,
    solve_1d_profile,
)


def p2_model(grid, f="zero", alpha="constant:1"):
    return ModelBundle(coefficients_from_specs(alpha, "constant:2"), nonlinearity_from_spec(f), grid)


def trace_is_monotone(trace):
    slack = 1e-12 * (1.0 + abs(trace[0]) if trace else 1.0)
    return all(b <= a + slack for a, b in zip(trace, trace[1:]))


def test_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(eps_reg=0.0)
    with pytest.raises(ValueError):
        SolverOptions(damping=1.5)
    with pytest.raises(ValueError):
        SolverOptions(tol_residual=1e-16)


def test_affine_solution_exact():
    g = Grid(1, 1, ((0, 1), (0, 1)), (33, 33))
    x, _ = g.coordinate_fields()
    u, rep = solve(p2_model(g), ScalarField(g, x))
    assert rep.converged
    assert np.max(np.abs(u.values - x)) < 1e-8
    assert trace_is_monotone(rep.energy_trace)


def test_boundary_values_exact():
    g = Grid(1, 1, ((0, 1), (0, 1)), (17, 17))
    x, y = g.coordinate_fields()
    bdata = ScalarField(g, np.sin(3 * x) + y)
    u, rep = solve(p2_model(g), bdata)
    bmask = g.boundary_mask()
    assert np.array_equal(u.values[bmask], bdata.values[bmask])


def test_discrete_maximum_principle():
    g = Grid(1, 1, ((0, 1), (0, 1)), (25, 25))
    x, y = g.coordinate_fields()
    bdata = ScalarField(g, np.cos(4 * x) * y + 0.3 * x)
    u, rep = solve(p2_model(g), bdata)
    assert rep.converged
    bvals = bdata.values[g.boundary_mask()]
    assert u.values.min() >= bvals.min() - 1e-10
    assert u.values.max() <= bvals.max() + 1e-10


def test_manufactured_convergence_small(tanh_layer_spec):
    errs = []
    for s in (33, 65, 129):
        g = Grid(1, 1, ((-8, 8), (-8, 8)), (s, s))
        uex, bundle = exact_example(tanh_layer_spec, g)
        u, rep = solve(bundle, uex)
        assert rep.converged
        assert trace_is_monotone(rep.energy_trace)
        errs.append(float(np.max(np.abs(u.values - uex.values))))
    assert min(observed_orders(errs)) >= 1.8


def test_solution_monotone_for_monotone_data(tanh_layer_spec):
    g = Grid(1, 1, ((-8, 8), (-8, 8)), (65, 65))
    uex, bundle = exact_example(tanh_layer_spec, g)
    u, rep = solve(bundle, uex)
    dy = np.diff(u.values, axis=1)
    assert rep.converged
    assert dy.min() > 0.0


def test_harmonic_solve_affine():
    g = Grid(1, 1, ((0, 2), (0, 2)), (17, 17))
    x, y = g.coordinate_fields()
    u = harmonic_solve(g, ScalarField(g, 1 + x - 0.5 * y))
    assert np.max(np.abs(u.values - (1 + x - 0.5 * y))) < 1e-9


def test_nonconvergence_reported_not_raised():
    g = Grid(1, 1, ((0, 1), (0, 1)), (17, 17))
    bundle = p2_model(g, f="poly:0,2,0,-2")
    x, _ = g.coordinate_fields()
    u, rep = solve(bundle, ScalarField(g, x), options=SolverOptions(max_iters=1, tol_residual=1e-12))
    assert not rep.converged
    assert rep.message


def test_eps_continuation_invariance():
    # halving the final regularization barely moves the p > 2 solution
    g = Grid(1, 1, ((-2, 2), (-2, 2)), (33, 33))
    bundle = ModelBundle(
        coefficients_from_specs("constant:1", "constant:3"),
        nonlinearity_from_spec("zero"),
        g,
    )
    x, y = g.coordinate_fields()
    bdata = ScalarField(g, x + 0.2 * np.sin(y))
    sols = []
    eps_abs = []
    for eps in (1e-6, 5e-7):
        u, rep = solve(bundle, bdata, options=SolverOptions(eps_reg=eps, tol_residual=1e-10))
        assert rep.converged
        sols.append(u.values)
        eps_abs.append(rep.eps_used)
    assert np.max(np.abs(sols[0] - sols[1])) <= 10 * max(eps_abs)


def test_profile_allen_cahn_matches_tanh():
    g = Grid(1, 1, ((-1, 1), (-8, 8)), (5, 1025))
    bundle = p2_model(g, f="poly:0,2,0,-2")
    prof, rep = solve_1d_profile(bundle, axis=0, bc=(np.tanh(-8), np.tanh(8)))
    assert rep.converged
    coords, vals = fiber_profile(prof)
    assert np.max(np.abs(vals - np.tanh(coords))) < 1e-3


def test_profile_laplace_affine():
    g = Grid(1, 1, ((-1, 1), (-2, 2)), (5, 129))
    bundle = p2_model(g)
    prof, rep = solve_1d_profile(bundle, axis=0, bc=(-1.0, 1.0))
    assert rep.converged
    coords, vals = fiber_profile(prof)
    assert np.max(np.abs(vals - coords / 2.0)) < 1e-10


def test_profile_p4_monotone():
    g = Grid(1, 1, ((-1, 1), (-8, 8)), (5, 257))
    bundle = ModelBundle(
        coefficients_from_specs("constant:1", "constant:4"),
        nonlinearity_from_spec("poly:0,2,0,-2"),
        g,
    )
    prof, rep = solve_1d_profile(bundle, axis=0, bc=(-1.0, 1.0))
    assert rep.converged
    assert rep.final_residual_norm <= SolverOptions().tol_residual
    _, vals = fiber_profile(prof)
    assert np.min(np.diff(vals)) > -1e-9
