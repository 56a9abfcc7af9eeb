"""Finite-difference laboratory for degenerate p(x)-Laplace problems."""

from .grid import (
    Grid,
    Region,
    ScalarField,
    VectorField,
    annulus_region,
    ball_region,
    full_region,
    gradient,
    hessian,
    integrate,
    interior_region,
)
from .model import (
    Coefficients,
    ExampleSpec,
    ModelBundle,
    Nonlinearity,
    counterexample_appendix,
    exact_example,
)
from .operator import EnergyReport, assemble_B, energy, first_variation, residual, second_variation, weak_pairing

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "Region",
    "ScalarField",
    "VectorField",
    "annulus_region",
    "ball_region",
    "full_region",
    "gradient",
    "hessian",
    "integrate",
    "interior_region",
    "Coefficients",
    "ExampleSpec",
    "ModelBundle",
    "Nonlinearity",
    "counterexample_appendix",
    "exact_example",
    "EnergyReport",
    "assemble_B",
    "energy",
    "first_variation",
    "residual",
    "second_variation",
    "weak_pairing",
    "__version__",
]
