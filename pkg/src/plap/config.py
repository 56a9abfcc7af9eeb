"""Sectioned key = value experiment configs (diff-friendly, hashable).

Sections: grid, model, solver, tolerances, output.  Lists are
comma-separated, extents use lo:hi pairs, functions use the grammar of
:mod:`plap.functions`.  Emission and parsing round-trip exactly.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .functions import parse_fn1d
from .grid import Grid, ScalarField
from .model import (
    Coefficients,
    ExampleSpec,
    ModelBundle,
    coefficients_from_specs,
    exact_example,
    nonlinearity_from_spec,
)
from .solver import SolverOptions


@dataclass(frozen=True)
class ExperimentConfig:
    m: int = 1
    n_minus_m: int = 1
    sizes: tuple[int, ...] = (129, 129)
    extents: tuple[tuple[float, float], ...] = ((-8.0, 8.0), (-8.0, 8.0))

    alpha: str = "constant:1"
    p: str = "constant:2"
    f: str = ""
    example_beta: str = ""
    example_gamma: str = ""
    example_omega: tuple[float, ...] = ()
    t0: float = 0.0

    eps_reg: float = 1e-8
    tol_residual: float = 1e-8
    max_iters: int = 80
    damping: float = 1.0
    continuation_steps: int = 4

    theta_grad: float = 0.0
    tol_stability: float = 1e-8
    tol_poincare: float = 1e-6
    tol_geom: float = 0.05

    out_dir: str = "out"
    figures: bool = True
    phi_count: int = 20
    growth_radii: tuple[float, ...] = ()

    def has_example(self) -> bool:
        return bool(self.example_gamma)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def emit(cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    buf.write("[grid]\n")
    buf.write(f"m = {cfg.m}\n")
    buf.write(f"n_minus_m = {cfg.n_minus_m}\n")
    buf.write(f"sizes = {', '.join(str(s) for s in cfg.sizes)}\n")
    buf.write(f"extents = {', '.join(f'{_fmt(a)}:{_fmt(b)}' for a, b in cfg.extents)}\n")
    buf.write("\n[model]\n")
    buf.write(f"alpha = {cfg.alpha}\n")
    buf.write(f"p = {cfg.p}\n")
    if cfg.f:
        buf.write(f"f = {cfg.f}\n")
    if cfg.example_beta:
        buf.write(f"example.beta = {cfg.example_beta}\n")
    if cfg.example_gamma:
        buf.write(f"example.gamma = {cfg.example_gamma}\n")
    if cfg.example_omega:
        buf.write(f"example.omega = {', '.join(_fmt(w) for w in cfg.example_omega)}\n")
    buf.write(f"t0 = {_fmt(cfg.t0)}\n")
    buf.write("\n[solver]\n")
    buf.write(f"eps_reg = {_fmt(cfg.eps_reg)}\n")
    buf.write(f"tol_residual = {_fmt(cfg.tol_residual)}\n")
    buf.write(f"max_iters = {cfg.max_iters}\n")
    buf.write(f"damping = {_fmt(cfg.damping)}\n")
    buf.write(f"continuation_steps = {cfg.continuation_steps}\n")
    buf.write("\n[tolerances]\n")
    buf.write(f"theta_grad = {_fmt(cfg.theta_grad)}\n")
    buf.write(f"tol_stability = {_fmt(cfg.tol_stability)}\n")
    buf.write(f"tol_poincare = {_fmt(cfg.tol_poincare)}\n")
    buf.write(f"tol_geom = {_fmt(cfg.tol_geom)}\n")
    buf.write("\n[output]\n")
    buf.write(f"dir = {cfg.out_dir}\n")
    buf.write(f"figures = {'true' if cfg.figures else 'false'}\n")
    buf.write(f"phi_count = {cfg.phi_count}\n")
    if cfg.growth_radii:
        buf.write(f"growth_radii = {', '.join(_fmt(r) for r in cfg.growth_radii)}\n")
    return buf.getvalue()


def parse(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(delimiters=("=",), inline_comment_prefixes=("#",))
    cp.read_string(text)

    def get(section, key, fallback=None):
        return cp.get(section, key, fallback=fallback)

    sizes = tuple(int(s.strip()) for s in get("grid", "sizes").split(","))
    extents = tuple(
        tuple(float(v) for v in pair.split(":")) for pair in get("grid", "extents").split(",")
    )
    omega_raw = get("model", "example.omega", fallback="")
    omega = tuple(float(v) for v in omega_raw.split(",")) if omega_raw.strip() else ()
    radii_raw = get("output", "growth_radii", fallback="")
    radii = tuple(float(v) for v in radii_raw.split(",")) if radii_raw.strip() else ()

    cfg = ExperimentConfig(
        m=int(get("grid", "m")),
        n_minus_m=int(get("grid", "n_minus_m")),
        sizes=sizes,
        extents=extents,
        alpha=get("model", "alpha", fallback="constant:1").strip(),
        p=get("model", "p", fallback="constant:2").strip(),
        f=get("model", "f", fallback="").strip(),
        example_beta=get("model", "example.beta", fallback="").strip(),
        example_gamma=get("model", "example.gamma", fallback="").strip(),
        example_omega=omega,
        t0=float(get("model", "t0", fallback="0")),
        eps_reg=float(get("solver", "eps_reg", fallback="1e-8")),
        tol_residual=float(get("solver", "tol_residual", fallback="1e-8")),
        max_iters=int(get("solver", "max_iters", fallback="80")),
        damping=float(get("solver", "damping", fallback="1")),
        continuation_steps=int(get("solver", "continuation_steps", fallback="4")),
        theta_grad=float(get("tolerances", "theta_grad", fallback="0")),
        tol_stability=float(get("tolerances", "tol_stability", fallback="1e-8")),
        tol_poincare=float(get("tolerances", "tol_poincare", fallback="1e-6")),
        tol_geom=float(get("tolerances", "tol_geom", fallback="0.05")),
        out_dir=get("output", "dir", fallback="out").strip(),
        figures=get("output", "figures", fallback="true").strip().lower() in ("1", "true", "yes"),
        phi_count=int(get("output", "phi_count", fallback="20")),
        growth_radii=radii,
    )
    for spec in filter(None, [cfg.alpha, cfg.p, cfg.f, cfg.example_beta, cfg.example_gamma]):
        parse_fn1d(spec)
    return cfg


def load(path: str | Path) -> ExperimentConfig:
    return parse(Path(path).read_text(encoding="utf-8"))


def save(path: str | Path, cfg: ExperimentConfig) -> None:
    Path(path).write_text(emit(cfg), encoding="utf-8")


def build_grid(cfg: ExperimentConfig) -> Grid:
    return Grid(m=cfg.m, n_minus_m=cfg.n_minus_m, extents=cfg.extents, sizes=cfg.sizes)


def build_coefficients(cfg: ExperimentConfig) -> Coefficients:
    return coefficients_from_specs(cfg.alpha, cfg.p)


def build_model(cfg: ExperimentConfig, grid: Grid | None = None) -> tuple[ModelBundle, ScalarField | None]:
    """Model bundle plus the exact layer solution when one is configured."""
    if grid is None:
        grid = build_grid(cfg)
    coeff = build_coefficients(cfg)
    if cfg.has_example():
        beta = parse_fn1d(cfg.example_beta or "constant:1")
        gamma = parse_fn1d(cfg.example_gamma)
        omega = np.asarray(cfg.example_omega if cfg.example_omega else (1.0,) * grid.n_minus_m)
        spec = ExampleSpec(beta=beta, gamma=gamma, omega=omega, coefficients=coeff, t0=cfg.t0)
        u_exact, bundle = exact_example(spec, grid)
        return bundle, u_exact
    f_spec = cfg.f or "zero"
    bundle = ModelBundle(coeff, nonlinearity_from_spec(f_spec, t0=cfg.t0), grid)
    return bundle, None


def build_solver_options(cfg: ExperimentConfig) -> SolverOptions:
    return SolverOptions(
        eps_reg=cfg.eps_reg,
        tol_residual=cfg.tol_residual,
        max_iters=cfg.max_iters,
        damping=cfg.damping,
        continuation_steps=cfg.continuation_steps,
    )


def theta_or_none(cfg: ExperimentConfig) -> float | None:
    return cfg.theta_grad if cfg.theta_grad > 0 else None
