"""Numerical laboratory for fractional Hardy inequalities on planar domains."""

from .core import (
    Bracket,
    InfeasibleParameters,
    Params,
    bracket_sum,
    choose_exponents,
    proof_identities,
    validate_exponents,
)

__version__ = "0.1.0"

__all__ = [
    "Bracket",
    "InfeasibleParameters",
    "Params",
    "bracket_sum",
    "choose_exponents",
    "proof_identities",
    "validate_exponents",
]
