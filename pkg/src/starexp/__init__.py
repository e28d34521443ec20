"""Exact star exponentials and star products from Lie algebra realizations.

The package is layered: :mod:`starexp.fps` (truncated series over the
Gaussian rationals), :mod:`starexp.expr` (spec-file expressions),
:mod:`starexp.weyl` (normal-ordered differential operators),
:mod:`starexp.realization` (realization grids and their checks),
:mod:`starexp.kcalc` (the K and D series, coproducts) and
:mod:`starexp.numeric` (floating-point cross-checks).
"""

__version__ = "0.1.0"

from .fps import GaussRational, I, SeriesVector, TruncatedSeries, compose, invert_formal_map
from .realization import Realization, StructureConstants, builtin_realization, validate_phi_system
from .expr import load_realization_spec, parse_expression
from .weyl import WeylElement, check_lie_homomorphism
from .kcalc import (
    a_sequence,
    coproduct_momenta,
    d_series,
    k_series_formal_solution,
    k_series_realization,
    normal_ordered_exp,
    verify_integral_recursion,
)

__all__ = [
    "GaussRational",
    "I",
    "SeriesVector",
    "TruncatedSeries",
    "compose",
    "invert_formal_map",
    "Realization",
    "StructureConstants",
    "builtin_realization",
    "validate_phi_system",
    "load_realization_spec",
    "parse_expression",
    "WeylElement",
    "check_lie_homomorphism",
    "a_sequence",
    "coproduct_momenta",
    "d_series",
    "k_series_formal_solution",
    "k_series_realization",
    "normal_ordered_exp",
    "verify_integral_recursion",
]
