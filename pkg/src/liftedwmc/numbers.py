"""Exact signed rational arithmetic helpers.

All counting in this package is done with arbitrary-precision rationals
(`fractions.Fraction`), never floats: Skolemization introduces weight -1,
so values may be negative and log-space tricks are off the table.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction

# The package-wide exact number type.
SignedRational = Fraction

_DECIMAL_RE = re.compile(r"^[+-]?(\d+)(\.(\d+))?$")
_RATIO_RE = re.compile(r"^([+-]?\d+)/(\d+)$")


def parse_rational(text: str) -> Fraction:
    """Parse "3", "-1", "3/10" or "0.3" into an exact Fraction."""
    text = text.strip()
    m = _RATIO_RE.match(text)
    if m:
        den = int(m.group(2))
        if den == 0:
            raise ValueError(f"zero denominator in rational {text!r}")
        return Fraction(int(m.group(1)), den)
    m = _DECIMAL_RE.match(text)
    if m:
        if m.group(2):
            frac_digits = m.group(3)
            return Fraction(int(text.replace(".", "")), 10 ** len(frac_digits))
        return Fraction(int(text))
    raise ValueError(f"malformed rational literal {text!r}")


def format_rational(value: Fraction) -> str:
    """Render as "p/q", or "p" when the denominator is 1."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def decimal_string(value: Fraction, digits: int = 15) -> str:
    """Decimal rendering with the given number of significant digits.

    Display-only: all comparisons elsewhere use the exact value.
    """
    if value == 0:
        return "0"
    sign = "-" if value < 0 else ""
    v = abs(value)
    # exp = floor(log10(v)) by exact integer comparison.
    exp = len(str(v.numerator)) - len(str(v.denominator))
    while Fraction(10) ** exp > v:
        exp -= 1
    while Fraction(10) ** (exp + 1) <= v:
        exp += 1
    scaled = v / Fraction(10) ** (exp - digits + 1)
    d = int(scaled + Fraction(1, 2))
    if len(str(d)) > digits:  # rounding overflowed, e.g. 999.9 -> 1000
        d //= 10
        exp += 1
    s = str(d).rstrip("0") or "0"
    if -4 <= exp < digits:
        if exp >= 0:
            whole = s[: exp + 1].ljust(exp + 1, "0")
            frac = s[exp + 1 :]
            return sign + whole + ("." + frac if frac else "")
        return sign + "0." + "0" * (-exp - 1) + s
    mantissa = s[0] + ("." + s[1:] if len(s) > 1 else "")
    return f"{sign}{mantissa}e{exp:+d}"


def binomial(n: int, k: int) -> int:
    """Exact binomial coefficient, 0 outside the valid range."""
    if k < 0 or k > n or n < 0:
        return 0
    return math.comb(n, k)


def falling_factorial(n: int, k: int) -> int:
    """n * (n-1) * ... * (n-k+1); the number of injections of k slots into n."""
    out = 1
    for i in range(k):
        out *= n - i
        if out == 0:
            return 0
    return out
