"""Binary floating-point values as (significand, exponent) pairs.

A value ``(m, e)`` in format ``(p, e_min)`` denotes ``m * 2**e`` with
``|m| < 2**p`` and ``e >= -e_min``.  Everything here is exact integer or
rational arithmetic; the host FPU is never consulted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

Rational = Union[int, Fraction]


@dataclass(frozen=True)
class FloatFormat:
    name: str
    precision: int
    emin: int
    emax: int

    @property
    def max_value(self) -> Fraction:
        return Fraction((1 << self.precision) - 1) * Fraction(2) ** self.emax

    @property
    def min_subnormal(self) -> Fraction:
        return Fraction(1, 1 << self.emin)

    @property
    def c_type(self) -> str:
        return "float" if self.precision == 24 else "double"

    def __repr__(self) -> str:
        return f"FloatFormat({self.name!r}, p={self.precision}, emin={self.emin})"


SINGLE = FloatFormat("single", 24, 149, 104)
DOUBLE = FloatFormat("double", 53, 1074, 971)

FORMATS = {"single": SINGLE, "double": DOUBLE}


def get_format(name: str) -> FloatFormat:
    try:
        return FORMATS[name]
    except KeyError:
        raise ValueError(f"unknown float format {name!r}") from None


def _ilog2(n: int, d: int) -> int:
    """floor(log2(n/d)) for positive integers."""
    k = n.bit_length() - d.bit_length()
    if k >= 0:
        if n < (d << k):
            k -= 1
    elif (n << -k) < d:
        k -= 1
    return k


def _round_half_even(n: int, d: int) -> int:
    q, r = divmod(n, d)
    twice = 2 * r
    if twice > d or (twice == d and q & 1):
        q += 1
    return q


def _pow2(k: int) -> Fraction:
    return Fraction(1 << k) if k >= 0 else Fraction(1, 1 << -k)


@dataclass(frozen=True, order=False)
class FloatVal:
    """A float in canonical form: ``m`` odd (or zero with ``e == 0``)."""

    m: int
    e: int
    fmt: FloatFormat = DOUBLE

    def __post_init__(self):
        m, e = self.m, self.e
        if m == 0:
            if e != 0:
                object.__setattr__(self, "e", 0)
            return
        if abs(m) >= (1 << self.fmt.precision):
            raise ValueError(f"significand {m} too wide for {self.fmt.name}")
        if e < -self.fmt.emin:
            raise ValueError(f"exponent {e} below minimum for {self.fmt.name}")
        tz = (m & -m).bit_length() - 1
        if tz:
            object.__setattr__(self, "m", m >> tz)
            object.__setattr__(self, "e", e + tz)

    @property
    def value(self) -> Fraction:
        return self.m * _pow2(self.e)

    def __float__(self) -> float:
        return math.ldexp(float(self.m), self.e)

    def __repr__(self) -> str:
        return f"FloatVal({self.m}, {self.e}, {self.fmt.name})"

    def __str__(self) -> str:
        return repr(float(self)) if self.fmt is DOUBLE else f"{float(self)!r}f"

    def is_zero(self) -> bool:
        return self.m == 0

    def sign(self) -> int:
        return (self.m > 0) - (self.m < 0)

    @classmethod
    def from_float(cls, x: float, fmt: FloatFormat = DOUBLE) -> "FloatVal":
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r} has no (m, e) form")
        n, d = x.as_integer_ratio()
        return round_dyadic(n, 1 - d.bit_length(), fmt)

    # arithmetic, each correctly rounded to nearest-even in self.fmt

    def __neg__(self) -> "FloatVal":
        return FloatVal(-self.m, self.e, self.fmt)

    def __abs__(self) -> "FloatVal":
        return FloatVal(abs(self.m), self.e, self.fmt)

    def __add__(self, other: "FloatVal") -> "FloatVal":
        e = min(self.e, other.e)
        m = (self.m << (self.e - e)) + (other.m << (other.e - e))
        return round_dyadic(m, e, self.fmt)

    def __sub__(self, other: "FloatVal") -> "FloatVal":
        return self + (-other)

    def __mul__(self, other: "FloatVal") -> "FloatVal":
        return round_dyadic(self.m * other.m, self.e + other.e, self.fmt)

    def __truediv__(self, other: "FloatVal") -> "FloatVal":
        if other.m == 0:
            raise ZeroDivisionError("float division by zero")
        if self.m == 0:
            return self
        a, b = abs(self.m), abs(other.m)
        # at least p + 2 quotient bits, then a sticky bit for the remainder
        k = max(self.fmt.precision + 2 + b.bit_length() - a.bit_length(), 0)
        q, r = divmod(a << k, b)
        m = (q << 1) | (r != 0)
        if (self.m < 0) != (other.m < 0):
            m = -m
        return round_dyadic(m, self.e - other.e - k - 1, self.fmt)

    def _cmp_key(self, other) -> tuple[Fraction, Fraction]:
        if isinstance(other, FloatVal):
            return self.value, other.value
        return self.value, Fraction(other)

    def __lt__(self, other) -> bool:
        a, b = self._cmp_key(other)
        return a < b

    def __le__(self, other) -> bool:
        a, b = self._cmp_key(other)
        return a <= b

    def __gt__(self, other) -> bool:
        a, b = self._cmp_key(other)
        return a > b

    def __ge__(self, other) -> bool:
        a, b = self._cmp_key(other)
        return a >= b


def R(v: FloatVal) -> Fraction:
    """The real number a float denotes."""
    return v.value


def _check_range(a: Fraction, fmt: FloatFormat) -> None:
    if a > fmt.max_value:
        raise OverflowError(f"{float(a):g} exceeds the {fmt.name} range")


def round_dyadic(m: int, e: int, fmt: FloatFormat) -> FloatVal:
    """Round ``m * 2**e`` to nearest, ties to even."""
    if m == 0:
        return FloatVal(0, 0, fmt)
    neg = m < 0
    a = -m if neg else m
    shift = max(a.bit_length() - fmt.precision, -fmt.emin - e)
    if shift > 0:
        q = a >> shift
        rem = a - (q << shift)
        half = 1 << (shift - 1)
        if rem > half or (rem == half and q & 1):
            q += 1
        a, e = q, e + shift
        if a.bit_length() > fmt.precision:
            a >>= 1
            e += 1
    if a and e + a.bit_length() - 1 > fmt.emax + fmt.precision - 1:
        raise OverflowError(f"result exceeds the {fmt.name} range")
    return FloatVal(-a if neg else a, e, fmt)


def round_nearest(r: Rational, fmt: FloatFormat = DOUBLE) -> FloatVal:
    """The float of ``fmt`` closest to ``r`` (ties to even)."""
    r = Fraction(r)
    if r == 0:
        return FloatVal(0, 0, fmt)
    n, d = abs(r.numerator), r.denominator
    k = _ilog2(n, d)
    e = max(k - (fmt.precision - 1), -fmt.emin)
    # m = round(n / d / 2**e)
    if e >= 0:
        m = _round_half_even(n, d << e)
    else:
        m = _round_half_even(n << -e, d)
    if m.bit_length() > fmt.precision:
        m >>= 1
        e += 1
    val = FloatVal(m if r > 0 else -m, e, fmt)
    _check_range(abs(val.value), fmt)
    return val


def round_up(r: Rational, fmt: FloatFormat = DOUBLE) -> FloatVal:
    """Smallest float of ``fmt`` that is ``>= r``."""
    v = round_nearest(r, fmt)
    if v.value >= r:
        return v
    return next_up(v)


def next_up(v: FloatVal) -> FloatVal:
    fmt = v.fmt
    if v.m == 0:
        return FloatVal(1, -fmt.emin, fmt)
    step = ulp(v.value, fmt) if v.m > 0 else _ulp_below(-v.value, fmt)
    return round_nearest(v.value + step, fmt)


def _ulp_below(a: Fraction, fmt: FloatFormat) -> Fraction:
    """Gap between positive float ``a`` and its predecessor."""
    k = _ilog2(a.numerator, a.denominator)
    if a == _pow2(k):
        k -= 1
    return _pow2(max(k - (fmt.precision - 1), -fmt.emin))


def ulp(r: Rational, fmt: FloatFormat = DOUBLE) -> Fraction:
    """Spacing of the floats in the binade containing ``|r|``.

    For ``|r|`` in ``[2**k, 2**(k+1))`` this is ``2**(k - p + 1)``, floored
    at the subnormal spacing ``2**-e_min``.
    """
    a = abs(Fraction(r))
    if a == 0:
        return _pow2(-fmt.emin)
    _check_range(a, fmt)
    k = _ilog2(a.numerator, a.denominator)
    return _pow2(max(k - (fmt.precision - 1), -fmt.emin))


def ulp_exponent(a: Fraction, fmt: FloatFormat) -> int:
    """log2 of ``ulp(a)``; no range check (callers handle overflow)."""
    if a == 0:
        return -fmt.emin
    k = _ilog2(a.numerator, a.denominator)
    return max(k - (fmt.precision - 1), -fmt.emin)


def to_float_value(x, fmt: FloatFormat) -> FloatVal:
    """Coerce an int/Fraction/FloatVal to a float of ``fmt`` exactly.

    Integers entering float arithmetic must be representable; a silent
    rounding here would break the zero-error treatment of integer terms.
    """
    if isinstance(x, FloatVal):
        return x
    v = round_nearest(x, fmt)
    if v.value != x:
        raise ValueError(f"integer {x} is not representable in {fmt.name}")
    return v


# Error bound functions.  The symbolic helpers live in ``symbolic`` and
# are imported lazily to keep this module free of AST dependencies.

SUPPORTED_OPS = ("+", "-", "*", "/", "neg", "abs")


def err_bound(op: str, args, fmt: FloatFormat = DOUBLE):
    """Symbolic bound on the accumulated error of a float operation.

    ``args`` is a list of ``(r, e)`` pairs of symbolic expressions: the
    real value of each operand and a bound on the operand's error.  For
    ``/`` the result carries a side condition ``|r2| > e2`` which callers
    read from :func:`division_side_condition`.
    """
    from . import symbolic as S

    if op not in SUPPORTED_OPS:
        raise ValueError(f"no error bound for operator {op!r}")
    if op in ("neg", "abs"):
        ((_, e),) = args
        return e
    (r1, e1), (r2, e2) = args

    def rounding(mag):
        # an exactly-zero result is representable and incurs no rounding
        if S.is_zero(mag):
            return S.const(0)
        return S.mul(S.const(Fraction(1, 2)), S.ulp(mag, fmt))

    if op == "+":
        return S.add(S.add(e1, e2), rounding(S.add(S.add(S.abs_(S.add(r1, r2)), e1), e2)))
    if op == "-":
        return S.add(S.add(e1, e2), rounding(S.add(S.add(S.abs_(S.sub(r1, r2)), e1), e2)))
    a1, a2 = S.abs_(r1), S.abs_(r2)
    if op == "*":
        prop = S.add(S.add(S.mul(a1, e2), S.mul(a2, e1)), S.mul(e1, e2))
        return S.add(prop, rounding(S.mul(S.add(a1, e1), S.add(a2, e2))))
    # division
    num = S.add(S.mul(a1, e2), S.mul(a2, e1))
    den = S.sub(S.mul(r2, r2), S.mul(e2, a2))
    return S.add(S.div(num, den), rounding(S.div(S.add(a1, e1), S.sub(a2, e2))))


def division_side_condition(r2, e2):
    """The symbolic quantity ``|r2| - e2`` that must stay positive."""
    from . import symbolic as S

    return S.sub(S.abs_(r2), e2)
