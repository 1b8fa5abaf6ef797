"""Exact probability parsing and formatting helpers."""

from __future__ import annotations

from fractions import Fraction


def parse_probability(value) -> Fraction:
    """Parse an exact probability from ``"num/den"``, a decimal string, or a number.

    Decimal strings are read as exact decimals (``"0.1"`` becomes 1/10).
    Floats are accepted but go through their shortest decimal repr first;
    prefer strings in config files.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not probabilities")
    if isinstance(value, Fraction):
        q = value
    elif isinstance(value, int):
        q = Fraction(value)
    elif isinstance(value, float):
        q = Fraction(str(value))
    elif isinstance(value, str):
        q = Fraction(value.strip())
    else:
        raise TypeError(f"cannot parse a probability from {type(value).__name__}")
    if not 0 <= q <= 1:
        raise ValueError(f"probability {q} outside [0, 1]")
    return q


def format_rational(q: Fraction) -> str:
    """Render a rational as ``num/den``, or just ``num`` for integers."""
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def format_float(x: float) -> str:
    """Render a float with 12 significant digits."""
    return f"{x:.12g}"
