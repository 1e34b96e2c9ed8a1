"""Pretty printer producing the `.rnl` surface syntax.

``show`` is also the canonical print used to key error variables, so it
must be deterministic and injective on the trees we build.
"""

from __future__ import annotations

from fractions import Fraction

from ..fpmodel import FloatVal
from .ast import (
    And, BConst, Call, Decl, ErrOf, For, If, IsWarn, Let, Not, Num, Op, Or,
    Program, Rel, Ulp, Var, Warn,
)

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def fmt_number(v) -> str:
    if isinstance(v, FloatVal):
        x = float(v)
        s = repr(x)
        if "e" not in s and "." not in s:
            s += ".0"
        if Fraction(s) != v.value:
            # repr rounds to double; single values and wide ints stay exact
            return fmt_number(v.value)
        return s
    if type(v) is int:
        return str(v)
    return _fmt_fraction(v)


def _fmt_fraction(q: Fraction) -> str:
    d = q.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return "{%d/%d}" % (q.numerator, q.denominator)
    digits = max(twos, fives)
    scaled = q.numerator * 10 ** digits // q.denominator
    sign = "-" if scaled < 0 else ""
    s = str(abs(scaled)).rjust(digits + 1, "0")
    whole, frac = s[: len(s) - digits], s[len(s) - digits:]
    return f"{sign}{whole}.{frac or '0'}"


def _is_negative_literal(e) -> bool:
    return isinstance(e, Num) and e.exact < 0


def show(e, prec: int = 0) -> str:
    """Print an expression; ``prec`` is the binding strength of the context."""
    if isinstance(e, Num):
        s = fmt_number(e.value)
        return f"({s})" if prec > 0 and _is_negative_literal(e) else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, ErrOf):
        return f"err({e.name})"
    if isinstance(e, Warn):
        return "warn"
    if isinstance(e, Ulp):
        return f"ulp_{e.fmt.name}({show(e.arg)})"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(show(a) for a in e.args)})"
    if isinstance(e, Op):
        if e.op == "neg":
            (a,) = e.args
            inner = show(a, 3)
            if isinstance(a, Num) or inner.startswith("-"):
                inner = f"({show(a)})"
            return f"-{inner}"
        if e.op in ("abs", "max"):
            return f"{e.op}({', '.join(show(a) for a in e.args)})"
        p = _PREC[e.op]
        lhs = show(e.args[0], p)
        rhs = show(e.args[1], p + 1)
        s = f"{lhs} {e.op} {rhs}"
        return f"({s})" if p < prec else s
    if isinstance(e, (If, Let, For)):
        s = _show_stmt(e)
        return f"({s})" if prec > 0 else s
    return show_bool(e)


def _show_stmt(e) -> str:
    if isinstance(e, If):
        parts = []
        for i, (g, b) in enumerate(e.branches):
            kw = "if" if i == 0 else "elsif"
            parts.append(f"{kw} {show_bool(g)} then {show(b)}")
        parts.append(f"else {show(e.orelse)}")
        return " ".join(parts)
    if isinstance(e, Let):
        return f"let {e.name} = {show(e.value)} in {show(e.body)}"
    if isinstance(e, For):
        return (f"for {e.index} in {e.start} .. {e.stop} with {e.acc} = {show(e.init)} "
                f"do {show(e.body)}")
    raise TypeError(type(e))


def show_bool(b, prec: int = 0) -> str:
    if isinstance(b, BConst):
        return "true" if b.value else "false"
    if isinstance(b, Rel):
        return f"{show(b.lhs)} {b.op} {show(b.rhs)}"
    if isinstance(b, IsWarn):
        return f"is_warn({show(b.expr)})"
    if isinstance(b, Not):
        inner = show_bool(b.arg, 3)
        return f"not {inner}"
    if isinstance(b, And):
        s = " and ".join(show_bool(a, 2) for a in b.args)
        return f"({s})" if prec > 2 else s
    if isinstance(b, Or):
        s = " or ".join(show_bool(a, 1) for a in b.args)
        return f"({s})" if prec > 1 else s
    raise TypeError(f"not a Boolean expression: {b!r}")


def show_decl(d: Decl) -> str:
    return f"{d.name}({', '.join(d.params)}) = {show(d.body)}"


def show_program(p: Program) -> str:
    lines = []
    if p.fmt is not None:
        lines.append(f"format {p.fmt.name}")
    for v, lo, hi in p.ranges:
        lines.append(f"range {v} = {fmt_number(lo)} : {fmt_number(hi)}")
    lines.extend(show_decl(d) for d in p.decls)
    return "\n".join(lines) + "\n"
