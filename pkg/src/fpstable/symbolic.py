"""Smart constructors for symbolic real expressions.

These build the same ``Expr`` nodes as the program AST but fold constants
and drop neutral elements, which keeps error expressions readable.
"""

from __future__ import annotations

from fractions import Fraction

from . import fpmodel
from .lang.ast import ErrOf, Expr, Num, Op, Ulp, Var, Warn


def const(v) -> Num:
    if isinstance(v, Fraction) and v.denominator == 1:
        v = int(v)
    return Num(v)


def _c(e: Expr):
    """The exact value of a numeric leaf, else None."""
    if isinstance(e, Num):
        return e.exact
    return None


def is_zero(e: Expr) -> bool:
    return isinstance(e, Num) and e.exact == 0


def is_warn(e: Expr) -> bool:
    return isinstance(e, Warn)


def add(a: Expr, b: Expr) -> Expr:
    if is_warn(a) or is_warn(b):
        return Warn()
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None:
        return const(ca + cb)
    return Op("+", (a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if is_warn(a) or is_warn(b):
        return Warn()
    if is_zero(b):
        return a
    if is_zero(a):
        return neg(b)
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None:
        return const(ca - cb)
    return Op("-", (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if is_warn(a) or is_warn(b):
        return Warn()
    if is_zero(a) or is_zero(b):
        return Num(0)
    ca, cb = _c(a), _c(b)
    if ca == 1:
        return b
    if cb == 1:
        return a
    if ca is not None and cb is not None:
        return const(ca * cb)
    return Op("*", (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if is_warn(a) or is_warn(b):
        return Warn()
    ca, cb = _c(a), _c(b)
    if cb == 1:
        return a
    if ca is not None and cb:
        return const(ca / cb)
    return Op("/", (a, b))


def neg(a: Expr) -> Expr:
    if is_warn(a):
        return a
    ca = _c(a)
    if ca is not None:
        return const(-ca)
    if isinstance(a, Op) and a.op == "neg":
        return a.args[0]
    return Op("neg", (a,))


def abs_(a: Expr) -> Expr:
    if is_warn(a):
        return a
    ca = _c(a)
    if ca is not None:
        return const(abs(ca))
    while isinstance(a, Op) and a.op == "neg":
        a = a.args[0]
    if isinstance(a, Op) and a.op == "abs":
        return a
    if isinstance(a, (ErrOf, Ulp)):
        return a
    return Op("abs", (a,))


def ulp(a: Expr, fmt) -> Expr:
    ca = _c(a)
    if ca is not None:
        return const(fpmodel.ulp(ca, fmt))
    return Ulp(a, fmt)


def maximum(items) -> Expr:
    """Symbolic max, with duplicates and dominated zero constants removed."""
    seen = []
    best_const = None
    for e in items:
        if isinstance(e, Op) and e.op == "max":
            parts = e.args
        else:
            parts = (e,)
        for p in parts:
            cp = _c(p)
            if cp is not None:
                best_const = cp if best_const is None else max(best_const, cp)
            elif p not in seen:
                seen.append(p)
    if best_const is not None and (best_const != 0 or not seen):
        seen.append(const(best_const))
    if not seen:
        raise ValueError("max of an empty selection")
    if len(seen) == 1:
        return seen[0]
    return Op("max", tuple(seen))


def canonical(e):
    """Normal form used when comparing expressions structurally.

    ``|a - b|`` and ``|b - a|`` coincide, ``0 - a`` becomes ``-a`` and
    the absolute value ignores a negation under it.  Commutative operands
    are sorted by their printed form.
    """
    from .lang.printer import show

    if isinstance(e, (Num, Var, ErrOf, Warn)):
        return e
    if isinstance(e, Ulp):
        return Ulp(canonical(e.arg), e.fmt)
    if not isinstance(e, Op):
        return e
    args = tuple(canonical(a) for a in e.args)
    if e.op == "-":
        a, b = args
        if is_zero(a):
            return canonical(neg(b))
        if is_zero(b):
            return a
        return Op("-", args)
    if e.op == "neg":
        (a,) = args
        if isinstance(a, Op) and a.op == "neg":
            return a.args[0]
        return Op("neg", args)
    if e.op == "abs":
        (a,) = args
        while isinstance(a, Op) and a.op == "neg":
            a = a.args[0]
        if isinstance(a, Op) and a.op == "-":
            x, y = a.args
            if show(y) < show(x):
                a = Op("-", (y, x))
        return Op("abs", (a,))
    if e.op in ("+", "*", "max"):
        return Op(e.op, tuple(sorted(args, key=show)))
    return Op(e.op, args)


def vars_of(e) -> set[str]:
    from .lang.ast import walk

    return {n.name for n in walk(e) if isinstance(n, Var)}


def err_vars_of(e) -> set[str]:
    from .lang.ast import walk

    return {n.name for n in walk(e) if isinstance(n, ErrOf)}
