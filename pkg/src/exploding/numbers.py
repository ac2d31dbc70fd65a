"""Scalar conversion for the two arithmetic modes.

Rational mode stores every value as ``gmpy2.mpq``; float mode uses Python
floats. Inputs may be ints, floats, ``Fraction``/``mpq`` values or strings such
as ``"3/4"`` or ``"0.25"``.
"""

from fractions import Fraction

from gmpy2 import mpq

RATIONAL = "rational"
FLOAT = "float"
MODES = (RATIONAL, FLOAT)

_MPQ = type(mpq(0))


def is_rational_input(x):
    if isinstance(x, bool):
        return False
    return isinstance(x, (int, Fraction, _MPQ, str))


def infer_mode(values):
    """Rational unless some input is a float."""
    return RATIONAL if all(is_rational_input(v) for v in values) else FLOAT


def to_rational(x):
    if isinstance(x, bool):
        raise TypeError(f"not a number: {x!r}")
    if isinstance(x, _MPQ):
        return x
    if isinstance(x, (int, Fraction)):
        return mpq(x)
    if isinstance(x, float):
        # read floats as the decimal they print as, not their binary expansion
        return mpq(Fraction(repr(x)))
    if isinstance(x, str):
        return mpq(Fraction(x.strip()))
    raise TypeError(f"not a number: {x!r}")


def to_float(x):
    if isinstance(x, str):
        return float(Fraction(x.strip()))
    return float(x)


def convert(values, mode):
    if mode == RATIONAL:
        return tuple(to_rational(v) for v in values)
    if mode == FLOAT:
        return tuple(to_float(v) for v in values)
    raise ValueError(f"unknown arithmetic mode {mode!r}")


def is_exact(x):
    return isinstance(x, _MPQ)


def dump(x):
    """JSON/CSV representation: ``"p/q"`` for rationals, plain float otherwise."""
    if isinstance(x, _MPQ):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, int) and not isinstance(x, bool):
        return f"{x}/1"
    return float(x)
