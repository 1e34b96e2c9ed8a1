import math
import random
from fractions import Fraction

import pytest

from fpstable import symbolic as S
from fpstable.fpmodel import (
    DOUBLE, SINGLE, FloatVal, R, division_side_condition, err_bound, next_up, round_nearest,
    round_up, ulp,
)
from fpstable.lang import show
from fpstable.lang.ast import Var


def test_ulp_values():
    assert ulp(Fraction(1000)) == Fraction(1, 2 ** 43)
    assert ulp(Fraction(1)) == Fraction(1, 2 ** 52)
    assert ulp(Fraction(1), SINGLE) == Fraction(1, 2 ** 23)
    # below the normal range the spacing is the smallest subnormal
    assert ulp(Fraction(0)) == Fraction(1, 2 ** 1074)
    assert ulp(Fraction(1, 2 ** 1060)) == Fraction(1, 2 ** 1074)


def test_ulp_is_constant_on_binades():
    for k in (-20, 0, 7, 52):
        lo = Fraction(2) ** k
        assert ulp(lo) == ulp(2 * lo - Fraction(1, 2 ** 200))
        assert ulp(2 * lo) == 2 * ulp(lo)


def test_tenth():
    v = round_nearest(Fraction(1, 10))
    assert (v.m, v.e) == (3602879701896397, -55)
    assert R(v) - Fraction(1, 10) == Fraction(1, 180143985094819840)
    assert round_up(Fraction(1, 10)) == v
    assert float(next_up(v)) == math.nextafter(0.1, 1.0)


def test_ties_to_even_in_the_subnormal_range():
    assert round_nearest(Fraction(1, 2 ** 1075)).m == 0
    assert round_nearest(Fraction(3, 2 ** 1076)) == FloatVal(1, -1074)


def test_canonical_form():
    assert FloatVal(12, 3) == FloatVal(3, 5)
    assert FloatVal(0, 9) == FloatVal(0, 0)
    with pytest.raises(ValueError):
        FloatVal(1, -1075)


def _const(x):
    return S.const(Fraction(x))


def test_err_bound_shapes():
    a, b, ea, eb = Var("a"), Var("b"), Var("ea"), Var("eb")
    assert show(err_bound("*", [(a, ea), (b, eb)])) == (
        "abs(a) * eb + abs(b) * ea + ea * eb + 0.5 * ulp_double((abs(a) + ea) * (abs(b) + eb))")
    assert show(err_bound("/", [(a, ea), (b, eb)])) == (
        "(abs(a) * eb + abs(b) * ea) / (b * b - eb * abs(b)) "
        "+ 0.5 * ulp_double((abs(a) + ea) / (abs(b) - eb))")
    assert show(division_side_condition(b, eb)) == "abs(b) - eb"
    assert err_bound("neg", [(a, ea)]) == ea


def test_err_bound_constants():
    # two unit errors on 1 + 1: carried errors plus half an ulp of |2| + 2
    one = (_const(1), _const(1))
    assert err_bound("+", [one, one]).value == 2 + Fraction(1, 2 ** 51)
    # exact 1 + 1: only the rounding term, half an ulp of 2 in the binade sense
    unit = (_const(1), _const(0))
    assert err_bound("+", [unit, unit]).value == Fraction(math.ulp(2.0)) / 2 == Fraction(1, 2 ** 52)
    exact = (_const(3), _const(0))
    assert err_bound("*", [exact, exact]).value == Fraction(1, 2 ** 50)


def test_exactly_zero_result_has_no_rounding_term():
    zero = (_const(0), _const(0))
    assert err_bound("+", [zero, zero]).value == 0


@pytest.mark.parametrize("fmt", [DOUBLE, SINGLE])
def test_division_and_conversion_match_exact_rounding(fmt):
    rng = random.Random(7)
    for _ in range(3000):
        a = rng.choice([-1, 1]) * rng.getrandbits(fmt.precision) * Fraction(2) ** rng.randint(-90, 40)
        b = rng.choice([-1, 1]) * (rng.getrandbits(fmt.precision) | 1) * Fraction(2) ** rng.randint(-90, 40)
        x, y = round_nearest(a, fmt), round_nearest(b, fmt)
        assert x / y == round_nearest(R(x) / R(y), fmt)
        assert x * y == round_nearest(R(x) * R(y), fmt)
        assert x + y == round_nearest(R(x) + R(y), fmt)
        if fmt is DOUBLE:
            assert FloatVal.from_float(float(x)) == x


def test_machine_division_agrees():
    rng = random.Random(11)
    for _ in range(2000):
        p, q = rng.uniform(-1e6, 1e6), rng.uniform(-1e3, 1e3)
        got = FloatVal.from_float(p) / FloatVal.from_float(q)
        assert float(got) == p / q
