import random
from fractions import Fraction

import pytest

from exprgen import random_box, random_expr, random_point
from fpstable import symbolic as S
from fpstable.fpmodel import DOUBLE, ulp
from fpstable.lang import parse_expr
from fpstable.lang.ast import Var
from fpstable.optimizer import (
    BnBConfig, Interval, eval_interval, eval_point, interval_ulp, maximize, to_box,
)


def test_square_is_nonnegative():
    assert eval_interval(parse_expr("x * x - x"), to_box({"x": (-1, 1)})) == Interval(-1, 2)


def test_ulp_enclosure_uses_the_step_function():
    iv = interval_ulp(Interval(Fraction(1), Fraction(3)), DOUBLE)
    assert (iv.lo, iv.hi) == (ulp(Fraction(1)), ulp(Fraction(3)))
    e = S.ulp(Var("x"), DOUBLE)
    assert eval_interval(e, to_box({"x": (-3, 1)})).hi == ulp(Fraction(3))


def test_random_enclosures_are_sound():
    rng = random.Random(3)
    checked = 0
    while checked < 2000:
        e, box = random_expr(rng), random_box(rng)
        try:
            iv = eval_interval(e, to_box(box))
        except ZeroDivisionError:
            continue
        for _ in range(20):
            pt = random_point(rng, box)
            try:
                v = eval_point(e, pt)
            except ZeroDivisionError:
                continue
            assert iv.lo <= v <= iv.hi
            checked += 1


def test_parabola_maximum():
    cfg = BnBConfig(abs_tol=Fraction(1, 10 ** 7), rel_tol=Fraction(0), max_depth=40)
    res = maximize(parse_expr("x * (1 - x)"), to_box({"x": (0, 1)}), cfg)
    assert res.status == "tolerance"
    assert res.lower <= Fraction(1, 4) <= res.upper
    assert res.upper - res.lower <= Fraction(1, 10 ** 6)


def test_depth_refines_monotonically():
    e = parse_expr("x * (1 - x) + y * x")
    box = to_box({"x": (0, 1), "y": (-1, 1)})
    uppers = [maximize(e, box, BnBConfig(abs_tol=Fraction(1, 10 ** 12), rel_tol=Fraction(0),
                                         max_depth=d)).upper for d in range(0, 14)]
    assert all(a >= b for a, b in zip(uppers, uppers[1:]))
    assert uppers[-1] < uppers[0]


def test_zero_divisor_is_reported_unbounded():
    res = maximize(parse_expr("1 / x"), to_box({"x": (-1, 1)}))
    assert res.status == "unbounded"
    with pytest.raises(ZeroDivisionError):
        eval_interval(parse_expr("1 / x"), to_box({"x": (-1, 1)}))


def test_results_are_deterministic():
    e = parse_expr("abs(x * y - 0.3) / (y + 3)")
    box = to_box({"x": (-2, 2), "y": (-1, 1)})
    assert maximize(e, box) == maximize(e, box)


def test_config_validation():
    with pytest.raises(ValueError):
        BnBConfig(rel_tol=Fraction(0))
    with pytest.raises(ValueError):
        BnBConfig(max_depth=-1)
