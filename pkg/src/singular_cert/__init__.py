"""Certified multiplicity structure of isolated singular roots of polynomial systems."""

from .polycore import DualElement, Polynomial, to_exact, to_float
from .parsing import parse_polynomial, parse_system

__version__ = "0.1.0"

__all__ = [
    "DualElement",
    "Polynomial",
    "parse_polynomial",
    "parse_system",
    "to_exact",
    "to_float",
]
