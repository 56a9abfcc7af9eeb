"""Figure rendering for the CLI report paths (written next to the CSVs)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .grid import Grid

plt.rcParams.update(
    {
        "figure.figsize": (5.6, 4.2),
        "font.size": 9,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "savefig.dpi": 130,
    }
)


def _plane(grid: Grid, values: np.ndarray) -> tuple[np.ndarray, tuple[float, float, float, float], str, str]:
    """A 2-D view of a field: the full plane for n = 2, a middle slice otherwise."""
    if grid.n == 2:
        plane = values
        ax_h, ax_v = 0, 1
    else:
        idx = tuple(s // 2 for s in grid.shape[: grid.n - 2])
        plane = values[idx]
        ax_h, ax_v = grid.n - 2, grid.n - 1
    lo_h, hi_h = grid.extents[ax_h]
    lo_v, hi_v = grid.extents[ax_v]
    names = [f"x{i + 1}" for i in range(grid.m)] + [f"y{j + 1}" for j in range(grid.n_minus_m)]
    return plane, (lo_v, hi_v, lo_h, hi_h), names[ax_v], names[ax_h]


def save_field_image(path: str | Path, grid: Grid, values: np.ndarray, title: str) -> None:
    plane, extent, xlabel, ylabel = _plane(grid, values)
    fig, ax = plt.subplots()
    im = ax.imshow(plane, origin="lower", extent=extent, aspect="auto", cmap="viridis")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(False)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def save_energy_trace(path: str | Path, trace) -> None:
    fig, ax = plt.subplots()
    ax.plot(range(len(trace)), trace, "o-", ms=3)
    ax.set_xlabel("accepted iterate")
    ax.set_ylabel("discrete energy")
    ax.set_title("solver energy trace")
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def save_growth_loglog(path: str | Path, radii, energies, slope: float, exponent: float) -> None:
    radii = np.asarray(radii, dtype=float)
    energies = np.asarray(energies, dtype=float)
    fig, ax = plt.subplots()
    ax.loglog(radii, energies, "o-", label=f"fitted slope {slope:.3f}")
    if np.all(energies > 0):
        ref = energies[0] * (radii / radii[0]) ** exponent
        ax.loglog(radii, ref, "--", label=f"slope {exponent:g} reference")
    ax.set_xlabel("R")
    ax.set_ylabel("energy on B_R")
    ax.set_title("energy growth")
    ax.legend()
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def save_slack_chart(path: str | Path, reports) -> None:
    slacks = [r.slack for r in reports]
    fig, ax = plt.subplots()
    colors = ["tab:blue" if r.hypothesis_ok else "tab:gray" for r in reports]
    ax.bar(range(len(slacks)), slacks, color=colors)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("test function")
    ax.set_ylabel("rhs - lhs")
    ax.set_title("weighted Poincare slack per test function")
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def save_geometry_panel(path: str | Path, grid: Grid, geo) -> None:
    fields = [("S", geo.S), ("T", geo.T), ("K^2", geo.Ksq), ("|grad_L |grad_y u||^2", geo.tangential_grad_sq)]
    fig, axes = plt.subplots(2, 2, figsize=(8.5, 6.5))
    for ax, (name, arr) in zip(axes.ravel(), fields):
        plane, extent, xlabel, ylabel = _plane(grid, arr)
        im = ax.imshow(plane, origin="lower", extent=extent, aspect="auto", cmap="magma")
        fig.colorbar(im, ax=ax)
        ax.set_title(name)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(False)
    fig.tight_layout()
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def save_eigenfunction(path: str | Path, grid: Grid, xi_interior: np.ndarray, lam: float) -> None:
    full = np.zeros(grid.num_points)
    full[grid.interior_mask().ravel()] = xi_interior
    save_field_image(path, grid, full.reshape(grid.shape), f"minimizing test function (lambda_min = {lam:.6g})")


def save_profile(path: str | Path, coords: np.ndarray, values: np.ndarray, title: str) -> None:
    fig, ax = plt.subplots()
    ax.plot(coords, values, "-")
    ax.set_xlabel("fiber coordinate")
    ax.set_ylabel("u")
    ax.set_title(title)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
