"""Exact rationals, extended reals and the bit-precision measure.

Rationals are :class:`fractions.Fraction` values. ``Fraction`` already keeps
itself in lowest terms with a positive denominator and represents zero as
``0/1``, so no wrapper type is needed. Extended reals are plain Python floats,
which carry ``-inf``/``inf`` and satisfy ``math.exp(-math.inf) == 0.0``.
"""

from __future__ import annotations

import enum
import math
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Iterable, Union

Rational = Fraction
Scalar = Union[Fraction, float]

NEG_INF = -math.inf
POS_INF = math.inf


class Mode(str, enum.Enum):
    """Arithmetic used along a computation path."""

    EXACT = "exact"
    FLOAT = "float"


def parse_rational(text: str) -> Fraction:
    """Parse ``"p/q"`` or a finite decimal such as ``"0.4"`` or ``"1e-3"``.

    Decimals are read in base 10 exactly, never through a binary float.
    """
    if not isinstance(text, str):
        raise TypeError(f"rational must be given as a string, got {type(text).__name__}")
    s = text.strip()
    if not s:
        raise ValueError("empty rational")
    if "/" in s:
        num, _, den = s.partition("/")
        try:
            p, q = int(num), int(den)
        except ValueError:
            raise ValueError(f"malformed rational {text!r}") from None
        if q == 0:
            raise ValueError(f"zero denominator in {text!r}")
        return Fraction(p, q)
    try:
        d = Decimal(s)
    except InvalidOperation:
        raise ValueError(f"malformed rational {text!r}") from None
    if not d.is_finite():
        raise ValueError(f"rational must be finite, got {text!r}")
    return Fraction(d)


def format_rational(x: Fraction) -> str:
    """Canonical ``p/q`` form in lowest terms (integers get ``/1``)."""
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def as_mode(x: Scalar, mode: Mode) -> Scalar:
    if mode is Mode.EXACT:
        if isinstance(x, float):
            raise TypeError("refusing to convert a float into an exact rational")
        return Fraction(x)
    return float(x)


def _ceil_log2(n: int) -> int:
    # ceil(log2 0) := 0 by convention; ceil(log2 1) = 0
    if n <= 1:
        return 0
    return (n - 1).bit_length()


def precision_of(x: Fraction) -> int:
    """Bits needed for ``x = p/q`` in lowest terms: ceil(log2 p) + ceil(log2 q).

    Negative values are measured through ``|p|`` so that bias entries such as
    ``-1`` can be scored too.
    """
    x = Fraction(x)
    return _ceil_log2(abs(x.numerator)) + _ceil_log2(x.denominator)


def vector_precision(h: Iterable[Fraction]) -> int:
    return max((precision_of(v) for v in h), default=0)


def fmt_float(x: float) -> str:
    """17 significant digits, enough to round-trip a float64."""
    return format(float(x), ".17g")


def fmt_value(x: Scalar) -> str:
    """Report formatting: rationals as ``p/q`` (bare integers), floats as decimals."""
    if isinstance(x, Fraction):
        return str(x)
    return fmt_float(x)
