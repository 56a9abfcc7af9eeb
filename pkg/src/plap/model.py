"""Problem data: weight alpha(x), exponent p(x), fibered nonlinearity f(x,u).

x-functions are callables of the m x-coordinate arrays; the nonlinearity and
its antiderivative take the x arrays plus the state array.  The module also
provides two factories: layer-type exact solutions u = beta(x) gamma(w.y)
with a forcing built so the pair solves the PDE, and the rotating-direction
field that keeps fiber gradients parallel while its direction w(x) turns by
a right angle across a dead zone.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .functions import Fn1D, as_x_function, parse_fn1d
from .grid import Grid, ScalarField, gradient_array

Array = np.ndarray

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def antiderivative(f: Callable[..., Array], t0: float) -> Callable[..., Array]:
    """Gauss-Legendre antiderivative of f(x, .) from t0 (48 nodes, one panel)."""

    def F(*args: Array) -> Array:
        xs, t = args[:-1], np.asarray(args[-1], dtype=float)
        half = 0.5 * (t - t0)
        mid = 0.5 * (t + t0)
        total = np.zeros(np.broadcast(*xs, t).shape if xs else t.shape)
        for node, weight in zip(_GL_NODES, _GL_WEIGHTS):
            total = total + weight * f(*xs, mid + half * node)
        return half * total

    return F


def derivative_in_u(f: Callable[..., Array], step: float = 1e-5) -> Callable[..., Array]:
    """Centered finite difference of f in its last (state) argument."""

    def f_u(*args: Array) -> Array:
        xs, u = args[:-1], np.asarray(args[-1], dtype=float)
        h = step * (1.0 + np.abs(u))
        return (f(*xs, u + h) - f(*xs, u - h)) / (2.0 * h)

    return f_u


@dataclass(frozen=True)
class Coefficients:
    """Weight alpha(x) > 0 and exponent p(x) >= 2."""

    alpha: Callable[..., Array]
    p_exp: Callable[..., Array]

    def check_on_grid(self, grid: Grid) -> None:
        xs = grid.x_coordinate_fields()
        a = np.asarray(self.alpha(*xs), dtype=float)
        p = np.asarray(self.p_exp(*xs), dtype=float)
        if not np.isfinite(a).all() or float(np.min(a)) <= 0.0:
            raise ValueError(f"alpha must satisfy inf alpha > 0 (min sampled {np.min(a)})")
        if not np.isfinite(p).all() or float(np.min(p)) < 2.0:
            raise ValueError(f"exponent must satisfy p(x) >= 2 (min sampled {np.min(p)})")

    def is_p_constant_two(self, grid: Grid) -> bool:
        p = np.asarray(self.p_exp(*grid.x_coordinate_fields()), dtype=float)
        return bool(np.all(p == 2.0))


def coefficients_from_specs(alpha_spec: str, p_spec: str) -> Coefficients:
    return Coefficients(
        alpha=as_x_function(parse_fn1d(alpha_spec)),
        p_exp=as_x_function(parse_fn1d(p_spec)),
    )


@dataclass(frozen=True)
class Nonlinearity:
    """f(x,u), its u-derivative, and the antiderivative F(x,t) with F(x,t0)=0."""

    f: Callable[..., Array]
    f_u: Callable[..., Array]
    F: Callable[..., Array]
    t0: float = 0.0
    u_range: tuple[float, float] = (-2.0, 2.0)
    bounded: bool | None = None

    def self_check(self, xs: tuple[Array, ...]) -> None:
        """Verify f_u against a centered difference and F(x, t0) = 0."""
        lo, hi = self.u_range
        us = np.linspace(lo, hi, 13)
        x_flat = tuple(np.ravel(x)[:: max(1, np.size(x) // 50)].reshape(-1, 1) for x in xs)
        uu = us.reshape(1, -1)
        du = 1e-6 * (1.0 + np.abs(uu))
        fd = (self.f(*x_flat, uu + du) - self.f(*x_flat, uu - du)) / (2.0 * du)
        given = self.f_u(*x_flat, uu * np.ones_like(x_flat[0]))
        scale = 1.0 + float(np.max(np.abs(fd)))
        err = float(np.max(np.abs(given - fd)))
        if err > 1e-6 * scale:
            raise ValueError(f"f_u disagrees with centered difference of f: max err {err:.3e}")
        base = self.F(*x_flat, np.full_like(uu * np.ones_like(x_flat[0]), self.t0))
        if float(np.max(np.abs(base))) > 1e-10 * scale:
            raise ValueError("F(x, t0) != 0")


def nonlinearity_from_spec(f_spec: str, t0: float = 0.0) -> Nonlinearity:
    """Nonlinearity from a 1-D builtin acting on u (no x-dependence)."""
    fn = parse_fn1d(f_spec)

    def f(*args):
        return fn(np.asarray(args[-1], dtype=float)) * np.ones_like(args[0])

    def f_u(*args):
        return fn.d1(np.asarray(args[-1], dtype=float)) * np.ones_like(args[0])

    return Nonlinearity(f=f, f_u=f_u, F=antiderivative(f, t0), t0=t0, bounded=fn.bounded)


@dataclass(frozen=True)
class ModelBundle:
    """Coefficients + nonlinearity bound to the grid they were validated on."""

    coefficients: Coefficients
    nonlinearity: Nonlinearity
    grid: Grid

    def __post_init__(self):
        self.coefficients.check_on_grid(self.grid)
        xs = tuple(np.asarray(x) for x in self.grid.x_coordinate_fields())
        self.nonlinearity.self_check(xs)

    def alpha_values(self) -> Array:
        return np.asarray(self.coefficients.alpha(*self.grid.x_coordinate_fields()), dtype=float) * np.ones(self.grid.shape)

    def p_values(self) -> Array:
        return np.asarray(self.coefficients.p_exp(*self.grid.x_coordinate_fields()), dtype=float) * np.ones(self.grid.shape)

    def f_values(self, u: Array) -> Array:
        return np.asarray(self.nonlinearity.f(*self.grid.coordinate_fields()[: self.grid.m], u), dtype=float) * np.ones(self.grid.shape)

    def f_u_values(self, u: Array) -> Array:
        return np.asarray(self.nonlinearity.f_u(*self.grid.coordinate_fields()[: self.grid.m], u), dtype=float) * np.ones(self.grid.shape)

    def F_values(self, u: Array) -> Array:
        return np.asarray(self.nonlinearity.F(*self.grid.coordinate_fields()[: self.grid.m], u), dtype=float) * np.ones(self.grid.shape)


@dataclass(frozen=True)
class ExampleSpec:
    """Data for the layer construction u(x,y) = beta(x) gamma(omega . y)."""

    beta: Fn1D
    gamma: Fn1D
    omega: np.ndarray
    coefficients: Coefficients
    t0: float = 0.0

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        norm = float(np.linalg.norm(omega))
        if norm == 0.0:
            raise ValueError("omega must be a nonzero direction")
        omega = omega / norm
        assert abs(np.linalg.norm(omega) - 1.0) <= 1e-12
        object.__setattr__(self, "omega", omega)

        ts = np.linspace(-6.0, 6.0, 241)
        if float(np.min(self.beta(ts))) <= 0.0:
            raise ValueError("beta must satisfy inf beta > 0")
        dgamma = self.gamma.d1(ts)
        if not self.gamma.increasing or float(np.min(dgamma)) <= 0.0:
            raise ValueError(
                "gamma must be strictly increasing on the sampled range "
                f"(min gamma' = {float(np.min(dgamma)):.3e})"
            )
        if self.gamma.inverse is None:
            raise ValueError("gamma needs a closed-form inverse")
        back = self.gamma.inverse(self.gamma(ts))
        if float(np.max(np.abs(back - ts))) > 1e-10:
            raise ValueError("gamma inverse fails the round-trip check")


def omega_dot_y(grid: Grid, omega: np.ndarray) -> Array:
    ys = grid.y_coordinate_fields()
    return sum(float(w) * y for w, y in zip(omega, ys))


def _forcing_closed_form(spec: ExampleSpec) -> Callable[..., Array]:
    """g(x, s) = -div flux for constant beta, via the layer profile's one
    dimensional structure (the flux has no x-components)."""
    beta_c = spec.beta.constant_value
    alpha, p_exp = spec.coefficients.alpha, spec.coefficients.p_exp

    def g(xs: tuple[Array, ...], s: Array) -> Array:
        a = np.asarray(alpha(*xs), dtype=float)
        p = np.asarray(p_exp(*xs), dtype=float)
        slope = beta_c * spec.gamma.d1(s)
        curic = beta_c * spec.gamma.d2(s)
        return -a * (p - 1.0) * np.power(slope, p - 2.0) * curic

    return g


def _forcing_tabulated(spec: ExampleSpec, grid: Grid) -> Callable[..., Array]:
    """g(x, s) tabulated by finite differences on a 4x finer (x, s) grid."""
    s_field = omega_dot_y(grid, spec.omega)
    s_lo, s_hi = float(np.min(s_field)), float(np.max(s_field))
    pad = 0.05 * (s_hi - s_lo) + 1e-6
    aux_extents = tuple(grid.extents[: grid.m]) + ((s_lo - pad, s_hi + pad),)
    aux_sizes = tuple(4 * (sz - 1) + 1 for sz in grid.sizes[: grid.m]) + (4 * max(grid.sizes) + 1,)
    aux = Grid(m=grid.m, n_minus_m=1, extents=aux_extents, sizes=aux_sizes)

    coords = aux.coordinate_fields()
    xs, s = tuple(coords[:-1]), coords[-1]
    u_aux = np.asarray(spec.beta(xs[0]), dtype=float) * spec.gamma(s)
    grad = gradient_array(aux, u_aux)
    norm = np.sqrt(np.sum(grad * grad, axis=0))
    a = np.asarray(spec.coefficients.alpha(*xs), dtype=float) * np.ones(aux.shape)
    p = np.asarray(spec.coefficients.p_exp(*xs), dtype=float) * np.ones(aux.shape)
    coef = a * np.power(norm, p - 2.0)
    g_tab = np.zeros(aux.shape)
    for i in range(aux.n):
        g_tab -= gradient_array(aux, coef * grad[i])[i]

    axes = [aux.axis_coords(k) for k in range(aux.n)]
    interp = RegularGridInterpolator(axes, g_tab, bounds_error=False, fill_value=None)

    def g(xs_eval: tuple[Array, ...], s_eval: Array) -> Array:
        pts = np.broadcast_arrays(*xs_eval, s_eval)
        stacked = np.stack([np.asarray(q, dtype=float).ravel() for q in pts], axis=-1)
        return interp(stacked).reshape(np.asarray(pts[0]).shape)

    return g


def exact_example(spec: ExampleSpec, grid: Grid) -> tuple[ScalarField, ModelBundle]:
    """Sample the layer solution and build the matching forcing.

    Returns u(x,y) = beta(x) gamma(omega . y) together with a model whose
    nonlinearity satisfies f(x, u(x,y)) = -div(alpha |grad u|^(p-2) grad u),
    so the residual of the pair vanishes under refinement.
    """
    if len(spec.omega) != grid.n_minus_m:
        raise ValueError(f"omega has {len(spec.omega)} components, grid fiber is {grid.n_minus_m}-dimensional")

    xs_grid = grid.x_coordinate_fields()
    beta_vals = np.asarray(spec.beta(xs_grid[0]), dtype=float) * np.ones(grid.shape)
    s_field = omega_dot_y(grid, spec.omega)
    u = ScalarField(grid, beta_vals * spec.gamma(s_field))

    if spec.beta.is_constant:
        g = _forcing_closed_form(spec)
        beta_at = lambda xs: spec.beta.constant_value * np.ones(np.broadcast(*xs).shape if xs else ())
    else:
        g = _forcing_tabulated(spec, grid)
        beta_at = lambda xs: np.asarray(spec.beta(xs[0]), dtype=float)

    gamma_inv = spec.gamma.inverse

    def f(*args: Array) -> Array:
        xs, r = args[:-1], np.asarray(args[-1], dtype=float)
        b = beta_at(xs)
        return g(xs, gamma_inv(r / b))

    # Keep derivative/self-check samples inside the invertible part of the
    # profile range; outside it the forcing is clamped.
    ts = np.linspace(-6.0, 6.0, 241)
    gmin, gmax = float(np.min(spec.gamma(ts))), float(np.max(spec.gamma(ts)))
    bmin = float(np.min(spec.beta(ts)))
    safe = 0.9 * bmin * min(abs(gmin), abs(gmax)) if gmin < 0 < gmax else None
    u_range = (-safe, safe) if safe else (float(np.min(u.values)), float(np.max(u.values)))

    nonlin = Nonlinearity(
        f=f,
        f_u=derivative_in_u(f),
        F=antiderivative(f, spec.t0),
        t0=spec.t0,
        u_range=u_range,
        bounded=spec.gamma.bounded and spec.beta.bounded,
    )
    bundle = ModelBundle(coefficients=spec.coefficients, nonlinearity=nonlin, grid=grid)
    return u, bundle


def _bump_step(t: Array) -> Array:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


def counterexample_tau(x: Array) -> Array:
    """Smooth profile vanishing exactly on [-1, 1], positive outside."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.where(np.abs(x) > 1.0, np.exp(-1.0 / np.maximum(x * x - 1.0, 1e-300)), 0.0)
    return out


def counterexample_omega(x: Array) -> Array:
    """Unit direction turning from (1,0) at x <= -1/2 to (0,1) at x >= 1/2."""
    theta = 0.5 * np.pi * _bump_step(np.asarray(x, dtype=float) + 0.5)
    return np.stack([np.cos(theta), np.sin(theta)])


def counterexample_appendix(grid: Grid) -> tuple[ScalarField, Callable[[Array], Array]]:
    """Field u = tau(x) gamma(omega(x) . y) whose fiber gradients stay parallel
    even though the direction omega(x) rotates by a right angle.

    Requires m = 1 and a two-dimensional fiber.
    """
    if grid.m != 1 or grid.n_minus_m != 2:
        raise ValueError("the rotating-direction example needs m = 1 and n - m = 2")
    x, y1, y2 = grid.coordinate_fields()
    om = counterexample_omega(x)
    u = counterexample_tau(x) * np.tanh(om[0] * y1 + om[1] * y2)
    return ScalarField(grid, u), counterexample_omega
