"""Command-line entry point: reproducible experiment pipelines.

Subcommands: solve, stability, geometry, verify-poincare, energy-growth,
make-example, pipeline.  Report paths write CSV (frozen column layout, see
docs/formats.md) plus a matplotlib figure next to each CSV.  Exit codes:
0 ok, 1 usage, 2 non-convergence, 3 acceptance failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, config as cfgmod, fieldio, plots
from .geometry import compute_geometry, verify_curvature_identity
from .grid import ScalarField
from .poincare import cutoff_phi, energy_growth, random_phi_suite, verify_poincare
from .solver import solve
from .stability import quadratic_form, smallest_eigenpair, _start_vector

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_CONVERGENCE = 2
EXIT_ACCEPTANCE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _outdir(args, cfg) -> Path:
    out = Path(getattr(args, "out", None) or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _limit_threads(n: int | None) -> None:
    if not n:
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=n)
    except Exception:
        print(f"note: could not limit BLAS threads to {n}", file=sys.stderr)


def _load_config(args) -> cfgmod.ExperimentConfig:
    if not getattr(args, "config", None):
        raise SystemExit(EXIT_USAGE)
    return cfgmod.load(args.config)


def cmd_make_example(args) -> int:
    cfg = _load_config(args)
    if not cfg.has_example():
        print("error: config has no example.* section", file=sys.stderr)
        return EXIT_USAGE
    grid = cfgmod.build_grid(cfg)
    bundle, u_exact = cfgmod.build_model(cfg, grid)
    if bundle.nonlinearity.bounded is False:
        print("note: configured nonlinearity is not bounded; the continuum theory assumes f, f_u bounded", file=sys.stderr)
    out = Path(args.out or Path(cfg.out_dir) / "example.fld")
    out.parent.mkdir(parents=True, exist_ok=True)
    fieldio.write_field(out, u_exact)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _load_config(args)
    grid = cfgmod.build_grid(cfg)
    bundle, u_exact = cfgmod.build_model(cfg, grid)
    boundary = u_exact if u_exact is not None else ScalarField(grid, np.zeros(grid.shape))
    options = cfgmod.build_solver_options(cfg)
    u, report = solve(bundle, boundary, options=options)

    out = Path(args.out or Path(cfg.out_dir) / "solution.fld")
    out.parent.mkdir(parents=True, exist_ok=True)
    fieldio.write_field(out, u)
    outdir = out.parent
    _write_csv(
        outdir / "solve.csv",
        ["iterations", "final_residual_norm", "converged", "eps_used"],
        [[report.iterations, report.final_residual_norm, report.converged, report.eps_used]],
    )
    _write_csv(
        outdir / "solve_trace.csv",
        ["iterate", "energy"],
        [[i, e] for i, e in enumerate(report.energy_trace)],
    )
    if cfg.figures:
        plots.save_energy_trace(outdir / "solve_trace.png", report.energy_trace)
        plots.save_field_image(outdir / "solution.png", grid, u.values, "solution")
    if u_exact is not None:
        err = float(np.max(np.abs(u.values - u_exact.values)))
        print(f"max |u - u_exact| = {err:.6e}")
    print(f"converged={report.converged} iterations={report.iterations} residual={report.final_residual_norm:.3e}")
    return EXIT_OK if report.converged else EXIT_NO_CONVERGENCE


def cmd_stability(args) -> int:
    cfg = _load_config(args)
    u = fieldio.read_field(args.infile)
    bundle, _ = cfgmod.build_model(cfg, u.grid)
    form = quadratic_form(u, bundle)
    lam, xi, iters, res, ok = smallest_eigenpair(form, _start_vector(u))
    verdict = "unconverged" if not ok else ("stable" if lam >= -cfg.tol_stability * (1 + abs(lam)) else "unstable")
    outdir = _outdir(args, cfg)
    _write_csv(
        outdir / "stability.csv",
        ["lambda_min", "iterations", "residual", "verdict"],
        [[lam, iters, res, verdict]],
    )
    if cfg.figures:
        plots.save_eigenfunction(outdir / "stability.png", u.grid, xi, lam)
    print(f"lambda_min={lam:.9g} verdict={verdict}")
    return EXIT_OK if ok else EXIT_NO_CONVERGENCE


def cmd_geometry(args) -> int:
    cfg = _load_config(args)
    u = fieldio.read_field(args.infile)
    geo = compute_geometry(u, theta_grad=cfgmod.theta_or_none(cfg))
    defect = verify_curvature_identity(u, geo=geo)
    outdir = _outdir(args, cfg)
    grid = u.grid
    for name, arr in (("S", geo.S), ("T", geo.T), ("U", geo.U), ("Ksq", geo.Ksq)):
        fieldio.write_field(outdir / f"geometry_{name}.fld", ScalarField(grid, arr))
    fieldio.write_field(outdir / "geometry_mask.fld", ScalarField(grid, geo.region.mask.astype(float)))

    interior_n = int(grid.interior_mask().sum())
    rows = []
    for name, arr in (
        ("S", geo.S),
        ("T", geo.T),
        ("U", geo.U),
        ("Ksq", geo.Ksq),
        ("tangential_grad_sq", geo.tangential_grad_sq),
    ):
        m = geo.region.mask
        rows.append([name, float(arr[m].min()) if m.any() else 0.0, float(arr[m].max()) if m.any() else 0.0])
    _write_csv(outdir / "geometry_summary.csv", ["field", "min_on_R", "max_on_R"], rows)
    _write_csv(
        outdir / "geometry_diagnostics.csv",
        ["identity_defect", "mask_points", "core_points", "degenerate_fraction", "theta_grad", "eps_smooth"],
        [[
            defect,
            geo.region.num_points,
            geo.core.num_points,
            1.0 - geo.region.num_points / max(interior_n, 1),
            geo.theta_grad,
            geo.eps_smooth,
        ]],
    )
    if cfg.figures:
        plots.save_geometry_panel(outdir / "geometry.png", grid, geo)
    print(f"region points={geo.region.num_points} identity defect={defect:.3e}")
    return EXIT_OK


def _phi_suite_from_spec(spec: str, grid, count: int, seed: int):
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "random":
        n = int(rest) if rest.strip() else count
        return random_phi_suite(grid, n, seed)
    if kind == "cutoff":
        radii = [float(r) for r in rest.split(",") if r.strip()]
        suite = []
        for r in radii:
            fld, _ = cutoff_phi(grid, r)
            suite.append((f"cutoff(R={r:g})", fld))
        return suite
    raise ValueError(f"unknown phi suite spec {spec!r} (use random:<n> or cutoff:<r1,r2,...>)")


def cmd_verify_poincare(args) -> int:
    cfg = _load_config(args)
    u = fieldio.read_field(args.infile)
    bundle, _ = cfgmod.build_model(cfg, u.grid)
    geo = compute_geometry(u, theta_grad=cfgmod.theta_or_none(cfg))
    suite = _phi_suite_from_spec(args.phis, u.grid, cfg.phi_count, args.seed)
    reports = verify_poincare(u, bundle, suite, geo=geo, tol_stability=cfg.tol_stability)
    outdir = _outdir(args, cfg)
    _write_csv(
        outdir / "poincare.csv",
        ["phi", "lhs", "rhs", "slack", "term_S", "term_K", "term_L", "term_T", "hypothesis_ok"],
        [
            [r.phi_descriptor, r.lhs, r.rhs, r.slack, r.term_S, r.term_K, r.term_L, r.term_T, r.hypothesis_ok]
            for r in reports
        ],
    )
    if cfg.figures:
        plots.save_slack_chart(outdir / "poincare.png", reports)
    failing = [
        r
        for r in reports
        if r.hypothesis_ok and r.slack < -cfg.tol_poincare * (abs(r.lhs) + abs(r.rhs) + 1.0)
    ]
    print(f"{len(reports)} reports, {len(failing)} violations")
    return EXIT_ACCEPTANCE if failing else EXIT_OK


def cmd_energy_growth(args) -> int:
    cfg = _load_config(args)
    u = fieldio.read_field(args.infile)
    bundle, _ = cfgmod.build_model(cfg, u.grid)
    if args.radii:
        radii = [float(r) for r in args.radii.split(",")]
    elif cfg.growth_radii:
        radii = list(cfg.growth_radii)
    else:
        print("error: no radii given (use --radii r1,r2,... or config growth_radii)", file=sys.stderr)
        return EXIT_USAGE
    report = energy_growth(u, bundle, radii, bound_kind=args.bound)
    outdir = _outdir(args, cfg)
    _write_csv(outdir / "growth.csv", ["radius", "energy"], [[r, e] for r, e in zip(report.radii, report.energies)])
    dat = "\n".join(f"{_fmt(r)} {_fmt(e)}" for r, e in zip(report.radii, report.energies)) + "\n"
    (outdir / "growth.dat").write_text(dat, encoding="ascii")
    _write_csv(
        outdir / "growth_summary.csv",
        ["fitted_slope", "bound_kind", "bound_exponent", "satisfied", "slope_defined"],
        [[report.fitted_slope, report.bound_kind, report.bound_exponent, report.satisfied, report.slope_defined]],
    )
    if cfg.figures:
        plots.save_growth_loglog(outdir / "growth.png", report.radii, report.energies, report.fitted_slope, report.bound_exponent)
    print(f"slope={report.fitted_slope:.4f} vs {report.bound_kind} (exponent {report.bound_exponent:g}): satisfied={report.satisfied}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _load_config(args)
    outdir = Path(cfg.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": f"plap {__version__}",
        "config_sha256": hashlib.sha256(cfgmod.emit(cfg).encode()).hexdigest(),
        "stages": {},
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }

    def record(stage: str, *paths: Path):
        manifest["stages"][stage] = {"outputs": {p.name: _sha256(p) for p in paths if p.exists()}}
        (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="ascii")

    stage = "make-model"
    try:
        grid = cfgmod.build_grid(cfg)
        bundle, u_exact = cfgmod.build_model(cfg, grid)
        record(stage)

        stage = "solve"
        boundary = u_exact if u_exact is not None else ScalarField(grid, np.zeros(grid.shape))
        u, srep = solve(bundle, boundary, options=cfgmod.build_solver_options(cfg))
        fieldio.write_field(outdir / "solution.fld", u)
        _write_csv(
            outdir / "solve.csv",
            ["iterations", "final_residual_norm", "converged", "eps_used"],
            [[srep.iterations, srep.final_residual_norm, srep.converged, srep.eps_used]],
        )
        _write_csv(outdir / "solve_trace.csv", ["iterate", "energy"], [[i, e] for i, e in enumerate(srep.energy_trace)])
        if cfg.figures:
            plots.save_energy_trace(outdir / "solve_trace.png", srep.energy_trace)
            plots.save_field_image(outdir / "solution.png", grid, u.values, "solution")
        record(stage, outdir / "solution.fld", outdir / "solve.csv", outdir / "solve_trace.csv")
        if not srep.converged:
            print(f"pipeline failed at stage {stage}: solver did not converge", file=sys.stderr)
            return EXIT_NO_CONVERGENCE

        stage = "stability"
        form = quadratic_form(u, bundle)
        lam, xi, iters, res, ok = smallest_eigenpair(form, _start_vector(u))
        verdict = "unconverged" if not ok else ("stable" if lam >= -cfg.tol_stability * (1 + abs(lam)) else "unstable")
        _write_csv(outdir / "stability.csv", ["lambda_min", "iterations", "residual", "verdict"], [[lam, iters, res, verdict]])
        if cfg.figures:
            plots.save_eigenfunction(outdir / "stability.png", grid, xi, lam)
        record(stage, outdir / "stability.csv")
        if not ok:
            print(f"pipeline failed at stage {stage}: eigensolver stagnated", file=sys.stderr)
            return EXIT_NO_CONVERGENCE

        stage = "geometry"
        geo = compute_geometry(u, theta_grad=cfgmod.theta_or_none(cfg))
        defect = verify_curvature_identity(u, geo=geo)
        for name, arr in (("S", geo.S), ("T", geo.T), ("U", geo.U), ("Ksq", geo.Ksq)):
            fieldio.write_field(outdir / f"geometry_{name}.fld", ScalarField(grid, arr))
        rows = [
            [name, float(arr[geo.region.mask].min()) if geo.region.num_points else 0.0,
             float(arr[geo.region.mask].max()) if geo.region.num_points else 0.0]
            for name, arr in (("S", geo.S), ("T", geo.T), ("U", geo.U), ("Ksq", geo.Ksq), ("tangential_grad_sq", geo.tangential_grad_sq))
        ]
        _write_csv(outdir / "geometry_summary.csv", ["field", "min_on_R", "max_on_R"], rows)
        if cfg.figures:
            plots.save_geometry_panel(outdir / "geometry.png", grid, geo)
        record(stage, outdir / "geometry_summary.csv", *[outdir / f"geometry_{n}.fld" for n in ("S", "T", "U", "Ksq")])

        stage = "verify-poincare"
        suite = random_phi_suite(grid, cfg.phi_count, args.seed)
        reports = verify_poincare(u, bundle, suite, geo=geo, tol_stability=cfg.tol_stability)
        _write_csv(
            outdir / "poincare.csv",
            ["phi", "lhs", "rhs", "slack", "term_S", "term_K", "term_L", "term_T", "hypothesis_ok"],
            [[r.phi_descriptor, r.lhs, r.rhs, r.slack, r.term_S, r.term_K, r.term_L, r.term_T, r.hypothesis_ok] for r in reports],
        )
        if cfg.figures:
            plots.save_slack_chart(outdir / "poincare.png", reports)
        record(stage, outdir / "poincare.csv")

        stage = "energy-growth"
        growth_ok = True
        if cfg.growth_radii:
            grep = energy_growth(u, bundle, list(cfg.growth_radii), bound_kind="R2")
            _write_csv(outdir / "growth.csv", ["radius", "energy"], [[r, e] for r, e in zip(grep.radii, grep.energies)])
            (outdir / "growth.dat").write_text(
                "\n".join(f"{_fmt(r)} {_fmt(e)}" for r, e in zip(grep.radii, grep.energies)) + "\n", encoding="ascii"
            )
            _write_csv(
                outdir / "growth_summary.csv",
                ["fitted_slope", "bound_kind", "bound_exponent", "satisfied", "slope_defined"],
                [[grep.fitted_slope, grep.bound_kind, grep.bound_exponent, grep.satisfied, grep.slope_defined]],
            )
            if cfg.figures:
                plots.save_growth_loglog(outdir / "growth.png", grep.radii, grep.energies, grep.fitted_slope, grep.bound_exponent)
            record(stage, outdir / "growth.csv", outdir / "growth.dat", outdir / "growth_summary.csv")
            growth_ok = grep.slope_defined
    except Exception as exc:  # pragma: no cover - defensive
        print(f"pipeline failed at stage {stage}: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE

    slack_ok = all(
        (not r.hypothesis_ok) or r.slack >= -cfg.tol_poincare * (abs(r.lhs) + abs(r.rhs) + 1.0) for r in reports
    )
    geo_ok = True
    if geo.core.num_points:
        scale_S = 1.0 + float(np.max(np.abs(geo.S[geo.core.mask])))
        scale_T = 1.0 + float(np.max(np.abs(geo.T[geo.core.mask])))
        geo_ok = (
            float(np.min(geo.S[geo.core.mask])) >= -cfg.tol_geom * scale_S
            and float(np.min(geo.T[geo.core.mask])) >= -cfg.tol_geom * scale_T
        )
    if not (slack_ok and geo_ok and growth_ok and verdict != "unconverged"):
        print("pipeline acceptance checks failed", file=sys.stderr)
        return EXIT_ACCEPTANCE
    print(f"pipeline ok: lambda_min={lam:.6g} ({verdict}), {len(reports)} Poincare reports, identity defect={defect:.3e}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="plap", description="degenerate p(x)-Laplace laboratory")
    parser.add_argument("--version", action="version", version=f"plap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, infile=False, out=False, radii=False, phis=False):
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, default=0, help="seed for random test-function suites")
        p.add_argument("--threads", type=int, default=0, help="limit BLAS threads (best effort)")
        if infile:
            p.add_argument("--in", dest="infile", required=True, help="input field dump")
        if out:
            p.add_argument("--out", help="output path (field dump or directory)")
        if radii:
            p.add_argument("--radii", help="comma-separated ball radii")
            p.add_argument("--bound", default="R2", choices=["R2", "Rn-1", "Rn-sigma"], help="growth bound to classify against")
        if phis:
            p.add_argument("--phis", default="random:20", help="test function suite: random:<n> or cutoff:<r1,r2,...>")

    common(sub.add_parser("solve", help="solve the Dirichlet problem"), out=True)
    common(sub.add_parser("stability", help="minimal Rayleigh quotient of a field"), infile=True, out=True)
    common(sub.add_parser("geometry", help="level-set geometry fields of a field"), infile=True, out=True)
    common(sub.add_parser("verify-poincare", help="check the weighted Poincare inequality"), infile=True, out=True, phis=True)
    common(sub.add_parser("energy-growth", help="energy growth over balls"), infile=True, out=True, radii=True)
    common(sub.add_parser("make-example", help="sample an exact layer solution"), out=True)
    common(sub.add_parser("pipeline", help="run the full experiment pipeline"))
    return parser


_COMMANDS = {
    "solve": cmd_solve,
    "stability": cmd_stability,
    "geometry": cmd_geometry,
    "verify-poincare": cmd_verify_poincare,
    "energy-growth": cmd_energy_growth,
    "make-example": cmd_make_example,
    "pipeline": cmd_pipeline,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    _limit_threads(args.threads)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
