"""Interval enclosures and branch-and-bound maximization of error expressions.

All endpoints are exact rationals (``Fraction``) or the float infinities,
so no outward rounding is needed: every operation is computed exactly.
``ulp`` is a monotone step function of ``|x|`` and is enclosed by its
values at the smallest and largest magnitude in the interval.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Union

from gmpy2 import mpq

from .fpmodel import FloatVal, round_up, ulp_exponent
from .lang.ast import ErrOf, Num, Op, Ulp, Var, Warn

INF = math.inf
Bound = Union[Fraction, float]


class UnboundedError(ArithmeticError):
    """An enclosure could not be made finite (e.g. division by an interval holding 0)."""


def _mul(a: Bound, b: Bound) -> Bound:
    # 0 * inf is 0 here: the zero endpoint is attained exactly
    if a == 0 or b == 0:
        return Fraction(0)
    return a * b


def _recip(b: Bound) -> Fraction:
    return Fraction(0) if b in (INF, -INF) else 1 / Fraction(b)


def _pow2(k: int) -> Fraction:
    return Fraction(1 << k) if k >= 0 else Fraction(1, 1 << -k)


@dataclass(frozen=True)
class Interval:
    lo: Bound
    hi: Bound

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x) -> "Interval":
        x = Fraction(x)
        return cls(x, x)

    @property
    def bounded(self) -> bool:
        return self.lo != -INF and self.hi != INF

    @property
    def width(self) -> Bound:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        if not self.bounded:
            raise UnboundedError("midpoint of an unbounded interval")
        return (self.lo + self.hi) / 2

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def __add__(self, o: "Interval") -> "Interval":
        return Interval(self.lo + o.lo, self.hi + o.hi)

    def __sub__(self, o: "Interval") -> "Interval":
        return Interval(self.lo - o.hi, self.hi - o.lo)

    def __mul__(self, o: "Interval") -> "Interval":
        ps = [_mul(a, b) for a in (self.lo, self.hi) for b in (o.lo, o.hi)]
        return Interval(min(ps), max(ps))

    def __truediv__(self, o: "Interval") -> "Interval":
        if o.lo <= 0 <= o.hi:
            raise ZeroDivisionError("divisor interval contains 0")
        # same formula for an all-negative divisor
        return self * Interval(_recip(o.hi), _recip(o.lo))

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __abs__(self) -> "Interval":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval(Fraction(0), max(-self.lo, self.hi))

    def hull(self, o: "Interval") -> "Interval":
        return Interval(min(self.lo, o.lo), max(self.hi, o.hi))

    def meet(self, o: "Interval") -> Optional["Interval"]:
        lo, hi = max(self.lo, o.lo), min(self.hi, o.hi)
        return Interval(lo, hi) if lo <= hi else None

    def __repr__(self) -> str:
        def f(b):
            return str(b) if isinstance(b, float) else f"{float(b):.6g}"
        return f"[{f(self.lo)}, {f(self.hi)}]"


ENTIRE = Interval(-INF, INF)


def interval_max(items) -> Interval:
    items = list(items)
    return Interval(max(i.lo for i in items), max(i.hi for i in items))


def interval_ulp(x: Interval, fmt) -> Interval:
    a = abs(x)
    lo = _pow2(ulp_exponent(Fraction(a.lo), fmt))
    hi = INF if a.hi == INF else _pow2(ulp_exponent(Fraction(a.hi), fmt))
    return Interval(lo, hi)


Box = Mapping[str, Interval]


def err_key(name: str) -> str:
    """Box key under which the error placeholder of ``name`` is looked up."""
    return f"err({name})"


def eval_interval(e, box: Box) -> Interval:
    """Enclosure of the real value of ``e`` over ``box``.

    Raises ``ZeroDivisionError`` when a divisor's enclosure contains 0 and
    ``KeyError`` when a variable has no entry.
    """
    if isinstance(e, Num):
        return Interval.point(e.exact)
    if isinstance(e, Var):
        return box[e.name]
    if isinstance(e, ErrOf):
        return box[err_key(e.name)]
    if isinstance(e, Ulp):
        return interval_ulp(eval_interval(e.arg, box), e.fmt)
    if isinstance(e, Op):
        args = [eval_interval(a, box) for a in e.args]
        op = e.op
        if op == "+":
            return args[0] + args[1]
        if op == "-":
            return args[0] - args[1]
        if op == "*":
            if e.args[0] == e.args[1]:
                # squares are nonnegative; the generic product loses that
                a = abs(args[0])
                return a * a
            return args[0] * args[1]
        if op == "/":
            return args[0] / args[1]
        if op == "neg":
            return -args[0]
        if op == "abs":
            return abs(args[0])
        if op == "max":
            return interval_max(args)
    if isinstance(e, Warn):
        raise ValueError("the warning has no numeric value")
    raise TypeError(f"cannot enclose {type(e).__name__}")


def eval_point(e, env: Mapping[str, Fraction]) -> Fraction:
    """Exact rational value of ``e`` at a point."""
    if isinstance(e, Num):
        return e.exact
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, ErrOf):
        return env[err_key(e.name)]
    if isinstance(e, Ulp):
        return _pow2(ulp_exponent(abs(eval_point(e.arg, env)), e.fmt))
    if isinstance(e, Op):
        xs = [eval_point(a, env) for a in e.args]
        op = e.op
        if op == "+":
            return xs[0] + xs[1]
        if op == "-":
            return xs[0] - xs[1]
        if op == "*":
            return xs[0] * xs[1]
        if op == "/":
            return xs[0] / xs[1]
        if op == "neg":
            return -xs[0]
        if op == "abs":
            return abs(xs[0])
        if op == "max":
            return max(xs)
    raise TypeError(f"cannot evaluate {type(e).__name__}")


def _round_up(b: Bound, fmt) -> Bound:
    if b in (INF, -INF):
        return b
    if b > fmt.max_value:
        return INF
    if b < -fmt.max_value:
        return -fmt.max_value
    return round_up(b, fmt).value


def round_interval(x: Interval, fmt) -> Interval:
    """Smallest interval with float endpoints of ``fmt`` containing ``x``."""
    return Interval(-_round_up(-x.lo, fmt), _round_up(x.hi, fmt))


# ---------------------------------------------------------------------------
# branch and bound


@dataclass(frozen=True)
class BnBConfig:
    abs_tol: Fraction = Fraction(0)
    rel_tol: Fraction = Fraction(1, 100)
    max_depth: int = 24
    max_boxes: int = 200_000
    rule: str = "widest"

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0 or (self.abs_tol == 0 and self.rel_tol == 0):
            raise ValueError("tolerances must be nonnegative and not both zero")
        if self.max_depth < 0:
            raise ValueError("depth must be nonnegative")
        if self.rule != "widest":
            raise ValueError(f"unknown bisection rule {self.rule!r}")


DEFAULT_CONFIG = BnBConfig()


@dataclass
class BnBResult:
    upper: Bound
    lower: Fraction
    status: str  # "tolerance", "depth", "budget" or "unbounded"
    boxes: int
    argmax: dict = field(default_factory=dict)

    @property
    def enclosure(self) -> Interval:
        return Interval(self.lower, self.upper)


# Fast path for the search: the expression is compiled once into closures
# over gmpy2 rationals, boxes are tuples of (lo, hi) pairs.  Arithmetic
# stays exact, so the results agree with ``eval_interval``/``eval_point``.


def _mpq_ulp(a, fmt):
    # a >= 0
    if a == 0:
        k = -fmt.emin
    else:
        n, d = int(a.numerator), int(a.denominator)
        k = n.bit_length() - d.bit_length()
        if (n << -k if k < 0 else n) < (d << k if k > 0 else d):
            k -= 1
        k = max(k - (fmt.precision - 1), -fmt.emin)
    return mpq(1 << k) if k >= 0 else mpq(1, 1 << -k)


def _frac(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


def _imul(al, ah, bl, bh):
    ps = (al * bl, al * bh, ah * bl, ah * bh)
    return min(ps), max(ps)


def _isq(al, ah):
    # squares are nonnegative; the generic product loses that
    al, ah = _iabs(al, ah)
    return al * al, ah * ah


def _idiv(al, ah, bl, bh):
    if bl <= 0 <= bh:
        raise ZeroDivisionError("divisor interval contains 0")
    return _imul(al, ah, 1 / bh, 1 / bl)


def _iabs(al, ah):
    if al >= 0:
        return al, ah
    if ah <= 0:
        return -ah, -al
    return mpq(0), max(-al, ah)


def _iulp(al, ah, fmt):
    al, ah = _iabs(al, ah)
    return _mpq_ulp(al, fmt), _mpq_ulp(ah, fmt)


def _compile(e, names: dict):
    """Straight-line ``(point_fn, interval_fn)`` over positional arguments.

    Shared subterms are evaluated once: error expressions repeat the same
    pieces many times.  Intervals are kept as separate lo/hi locals.
    """
    index: dict = {}
    lines_p: list[str] = []
    lines_i: list[str] = []
    consts: dict = {}

    def emit(n) -> int:
        if n in index:
            return index[n]
        if isinstance(n, Num):
            k = len(consts)
            consts[f"c{k}"] = mpq(n.exact.numerator, n.exact.denominator)
            code_p = [f"c{k}"]
            code_i = (f"c{k}", f"c{k}")
        elif isinstance(n, (Var, ErrOf)):
            i = names[n.name if isinstance(n, Var) else err_key(n.name)]
            code_p = [f"x[{i}]"]
            code_i = (f"b[{i}][0]", f"b[{i}][1]")
        elif isinstance(n, Ulp):
            a = emit(n.arg)
            fk = f"f{len(consts)}"
            consts[fk] = n.fmt
            code_p = [f"_ulp(abs(p{a}), {fk})"]
            code_i = f"_iulp(l{a}, h{a}, {fk})"
        elif isinstance(n, Op):
            args = [emit(a) for a in n.args]
            op = n.op
            if op in ("+", "-", "*", "/"):
                a, c = args
                code_p = [f"p{a} {op} p{c}"]
                if op == "+":
                    code_i = (f"l{a} + l{c}", f"h{a} + h{c}")
                elif op == "-":
                    code_i = (f"l{a} - h{c}", f"h{a} - l{c}")
                elif op == "*" and a == c:
                    code_i = f"_isq(l{a}, h{a})"
                elif op == "*":
                    code_i = f"_imul(l{a}, h{a}, l{c}, h{c})"
                else:
                    code_i = f"_idiv(l{a}, h{a}, l{c}, h{c})"
            elif op == "neg":
                (a,) = args
                code_p = [f"-p{a}"]
                code_i = (f"-h{a}", f"-l{a}")
            elif op == "abs":
                (a,) = args
                code_p = [f"abs(p{a})"]
                code_i = f"_iabs(l{a}, h{a})"
            elif op == "max":
                code_p = [f"max({', '.join(f'p{a}' for a in args)})"]
                code_i = (f"max({', '.join(f'l{a}' for a in args)})",
                          f"max({', '.join(f'h{a}' for a in args)})")
            else:
                raise TypeError(f"cannot compile operator {op}")
        else:
            raise TypeError(f"cannot compile {type(n).__name__}")
        k = len(index)
        index[n] = k
        lines_p.append(f"    p{k} = {code_p[0]}")
        if isinstance(code_i, tuple):
            lines_i.append(f"    l{k} = {code_i[0]}")
            lines_i.append(f"    h{k} = {code_i[1]}")
        else:
            lines_i.append(f"    l{k}, h{k} = {code_i}")
        return k

    top = emit(e)
    src = ("def point(x):\n" + "\n".join(lines_p) + f"\n    return p{top}\n"
           "def encl(b):\n" + "\n".join(lines_i) + f"\n    return (l{top}, h{top})\n")
    env = dict(consts, _ulp=_mpq_ulp, _iulp=_iulp, _imul=_imul, _isq=_isq, _idiv=_idiv,
               _iabs=_iabs, mpq=mpq)
    exec(compile(src, "<error-expression>", "exec"), env)
    return env["point"], env["encl"]


def _corners(b):
    """Midpoint first, then corners: error maxima tend to sit on the boundary."""
    yield tuple((lo + hi) / 2 for lo, hi in b)
    if len(b) <= 4:
        yield from itertools.product(*b)
    else:
        yield tuple(lo for lo, _ in b)
        yield tuple(hi for _, hi in b)


def maximize(e, box: Mapping[str, Interval], cfg: BnBConfig = DEFAULT_CONFIG) -> BnBResult:
    """Rigorous upper bound on ``max e`` over ``box`` by best-first bisection.

    The returned ``upper`` is never below the true maximum; ``lower`` is a
    value actually attained (at a box midpoint or corner).  Refinement is
    monotone: raising ``max_depth`` never increases ``upper``.
    """
    keys = sorted(box)
    for k in keys:
        if not box[k].bounded:
            raise UnboundedError(f"variable {k} has an unbounded range")
    point, encl = _compile(e, {k: i for i, k in enumerate(keys)})
    root = tuple((mpq(box[k].lo), mpq(box[k].hi)) for k in keys)
    scale = [(hi - lo) if hi > lo else mpq(1) for lo, hi in root]
    lower, arg = None, None

    def upper_of(b):
        try:
            return encl(b)[1]
        except ZeroDivisionError:
            return INF

    def sample(b):
        nonlocal lower, arg
        for pt in _corners(b):
            try:
                v = point(pt)
            except ZeroDivisionError:
                continue
            if lower is None or v > lower:
                lower, arg = v, pt

    sample(root)
    heap = [(-upper_of(root), 0, 0, root)]
    counter = explored = 1

    def done(u, status):
        lo = _frac(lower) if lower is not None else Fraction(0)
        up = u if u == INF else _frac(u)
        where = {k: _frac(x) for k, x in zip(keys, arg)} if arg is not None else {}
        return BnBResult(up, min(lo, up), status, explored, where)

    while True:
        neg_u, _, depth, b = heapq.heappop(heap)
        u = -neg_u
        if u != INF and lower is not None:
            gap = u - lower
            if gap <= cfg.abs_tol or gap <= cfg.rel_tol * abs(u):
                return done(u, "tolerance")
        if depth >= cfg.max_depth:
            return done(u, "unbounded" if u == INF else "depth")
        if explored >= cfg.max_boxes:
            return done(u, "unbounded" if u == INF else "budget")
        if not b:
            return done(u, "unbounded" if u == INF else "tolerance")
        # widest relative to the initial box, so that every variable gets refined
        i = max(range(len(b)), key=lambda j: ((b[j][1] - b[j][0]) / scale[j], -j))
        lo, hi = b[i]
        if lo == hi:
            return done(u, "unbounded" if u == INF else "tolerance")
        m = (lo + hi) / 2
        for half in ((lo, m), (m, hi)):
            child = b[:i] + (half,) + b[i + 1:]
            cu = min(upper_of(child), u)
            sample(child)
            heapq.heappush(heap, (-cu, counter, depth + 1, child))
            counter += 1
            explored += 1


def to_box(ranges: Mapping[str, tuple]) -> dict[str, Interval]:
    return {k: Interval(Fraction(lo), Fraction(hi)) for k, (lo, hi) in ranges.items()}


def float_of_bound(b: Bound, fmt) -> Union[FloatVal, float]:
    """Smallest float of ``fmt`` at or above ``b``, or ``inf``."""
    if b == INF or b > fmt.max_value:
        return INF
    return round_up(Fraction(b), fmt)


__all__ = [
    "BnBConfig", "BnBResult", "DEFAULT_CONFIG", "ENTIRE", "INF", "Interval", "UnboundedError",
    "err_key", "eval_interval", "eval_point", "float_of_bound", "interval_max", "interval_ulp",
    "maximize", "round_interval", "to_box",
]
