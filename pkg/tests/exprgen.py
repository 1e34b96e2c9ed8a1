"""Random arithmetic expressions and boxes for the optimizer checks."""

import random
from fractions import Fraction

from fpstable import symbolic as S
from fpstable.fpmodel import DOUBLE, SINGLE
from fpstable.lang.ast import Num, Op, Var

VARS = ("x", "y")


def random_expr(rng: random.Random, depth: int = 3):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.6:
            return Var(rng.choice(VARS))
        return Num(Fraction(rng.randint(-40, 40), rng.choice([1, 2, 3, 10])))
    r = rng.random()
    if r < 0.1:
        return Op("neg", (random_expr(rng, depth - 1),))
    if r < 0.2:
        return Op("abs", (random_expr(rng, depth - 1),))
    if r < 0.27:
        return S.ulp(random_expr(rng, depth - 1), rng.choice([DOUBLE, SINGLE]))
    op = rng.choice(["+", "-", "*", "*", "/"])
    return Op(op, (random_expr(rng, depth - 1), random_expr(rng, depth - 1)))


def random_box(rng: random.Random):
    box = {}
    for v in VARS:
        lo = Fraction(rng.randint(-200, 200), rng.choice([1, 4, 100]))
        box[v] = (lo, lo + Fraction(rng.randint(0, 400), rng.choice([1, 8, 1000])))
    return box


def random_point(rng: random.Random, box):
    pt = {}
    for v, (lo, hi) in box.items():
        k = rng.randint(0, 4)
        if k == 0:
            pt[v] = lo
        elif k == 1:
            pt[v] = hi
        else:
            pt[v] = lo + (hi - lo) * Fraction(rng.getrandbits(30), 2 ** 30)
    return pt
