"""Named built-in 1-D functions and the tiny grammar used by config files.

A function spec is ``name`` or ``name:params`` with comma-separated numeric
parameters.  The table deliberately stays small (no expression parser); it
covers constants, affine ramps, polynomials, tanh/atan profiles and gaussian
bumps, each with closed-form first and second derivatives and, where it
exists, a closed-form inverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class Fn1D:
    """A scalar function with derivatives, parsed from a grammar string."""

    spec: str
    fn: Callable[[Array], Array]
    d1: Callable[[Array], Array]
    d2: Callable[[Array], Array]
    inverse: Callable[[Array], Array] | None = None
    bounded: bool = False
    increasing: bool = False
    is_constant: bool = False
    constant_value: float = 0.0

    def __call__(self, t):
        return self.fn(np.asarray(t, dtype=float))


def _const(c: float) -> Fn1D:
    return Fn1D(
        spec=f"constant:{c:g}",
        fn=lambda t: np.full_like(t, c),
        d1=lambda t: np.zeros_like(t),
        d2=lambda t: np.zeros_like(t),
        bounded=True,
        is_constant=True,
        constant_value=c,
    )


def _linear(a: float, b: float) -> Fn1D:
    inv = (lambda r: (np.asarray(r, dtype=float) - b) / a) if a != 0 else None
    return Fn1D(
        spec=f"linear:{a:g},{b:g}",
        fn=lambda t: a * t + b,
        d1=lambda t: np.full_like(t, a),
        d2=lambda t: np.zeros_like(t),
        inverse=inv,
        increasing=a > 0,
    )


def _poly(coeffs: tuple[float, ...]) -> Fn1D:
    c = np.asarray(coeffs, dtype=float)
    dc = np.polynomial.polynomial.polyder(c) if len(c) > 1 else np.zeros(1)
    ddc = np.polynomial.polynomial.polyder(dc) if len(dc) > 1 else np.zeros(1)
    pv = np.polynomial.polynomial.polyval
    return Fn1D(
        spec="poly:" + ",".join(f"{v:g}" for v in coeffs),
        fn=lambda t: pv(t, c),
        d1=lambda t: pv(t, dc) * np.ones_like(t),
        d2=lambda t: pv(t, ddc) * np.ones_like(t),
    )


def _tanh(a: float) -> Fn1D:
    def d1(t):
        return a / np.cosh(a * t) ** 2

    def d2(t):
        return -2.0 * a * a * np.tanh(a * t) / np.cosh(a * t) ** 2

    def inv(r):
        r = np.clip(np.asarray(r, dtype=float), -1.0 + 1e-15, 1.0 - 1e-15)
        return np.arctanh(r) / a

    return Fn1D(
        spec=f"tanh:{a:g}",
        fn=lambda t: np.tanh(a * t),
        d1=d1,
        d2=d2,
        inverse=inv,
        bounded=True,
        increasing=a > 0,
    )


def _atan(a: float) -> Fn1D:
    def inv(r):
        r = np.clip(np.asarray(r, dtype=float), -np.pi / 2 + 1e-12, np.pi / 2 - 1e-12)
        return np.tan(r) / a

    return Fn1D(
        spec=f"atan:{a:g}",
        fn=lambda t: np.arctan(a * t),
        d1=lambda t: a / (1.0 + (a * t) ** 2),
        d2=lambda t: -2.0 * a**3 * t / (1.0 + (a * t) ** 2) ** 2,
        inverse=inv,
        bounded=True,
        increasing=a > 0,
    )


def _gauss(amp: float, sigma: float) -> Fn1D:
    s2 = sigma * sigma

    def fn(t):
        return amp * np.exp(-(t * t) / (2.0 * s2))

    return Fn1D(
        spec=f"gauss:{amp:g},{sigma:g}",
        fn=fn,
        d1=lambda t: fn(t) * (-t / s2),
        d2=lambda t: fn(t) * (t * t / s2 - 1.0) / s2,
        bounded=True,
    )


def parse_fn1d(spec: str) -> Fn1D:
    """Parse a grammar string like ``tanh``, ``constant:2`` or ``poly:0,2,0,-2``."""
    spec = spec.strip()
    name, _, argstr = spec.partition(":")
    name = name.strip().lower()
    args = [float(a) for a in argstr.split(",")] if argstr.strip() else []
    if name == "constant":
        if len(args) != 1:
            raise ValueError(f"constant needs one parameter: {spec!r}")
        return _const(args[0])
    if name == "zero":
        return _const(0.0)
    if name == "linear":
        if not 1 <= len(args) <= 2:
            raise ValueError(f"linear needs 1 or 2 parameters: {spec!r}")
        return _linear(args[0], args[1] if len(args) == 2 else 0.0)
    if name == "poly":
        if not args:
            raise ValueError(f"poly needs coefficients: {spec!r}")
        return _poly(tuple(args))
    if name == "tanh":
        return _tanh(args[0] if args else 1.0)
    if name == "atan":
        return _atan(args[0] if args else 1.0)
    if name == "gauss":
        if len(args) != 2:
            raise ValueError(f"gauss needs amplitude and width: {spec!r}")
        return _gauss(args[0], args[1])
    raise ValueError(f"unknown function {name!r} in spec {spec!r}")


BUILTIN_NAMES = ("constant", "zero", "linear", "poly", "tanh", "atan", "gauss")


def as_x_function(fn: Fn1D) -> Callable[..., Array]:
    """Lift a 1-D builtin to an x-function of m coordinate arrays (acts on x1)."""

    def call(*xs: Array) -> Array:
        return fn(np.asarray(xs[0], dtype=float))

    return call


def as_u_function(fn: Fn1D) -> Callable[..., Array]:
    """Lift a 1-D builtin to an f(x, u) with no x-dependence."""

    def call(*args: Array) -> Array:
        u = args[-1]
        return fn(np.asarray(u, dtype=float)) * np.ones_like(args[0])

    return call
