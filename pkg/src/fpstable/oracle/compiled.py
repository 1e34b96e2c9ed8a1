"""Fast evaluators generated as Python source from a program.

The reference interpreters in ``interp`` are too slow for property runs
of a million samples.  This module translates each declaration into a
Python function over gmpy2 numbers: ``mpq`` for the real program and
``mpfr`` under a context matching the float format (precision, exponent
range, subnormals, nearest-even) for the float program.  MPFR rounds
every operation correctly, so results are bit-identical to the (m, e)
model; the test suite cross-checks the two on random inputs.

The warning is an exception inside generated code and ``OMEGA`` outside.
"""

from __future__ import annotations

import itertools
import struct
from fractions import Fraction
from typing import Callable, Sequence

import gmpy2
from gmpy2 import mpfr, mpq

from ..fpmodel import FloatFormat, FloatVal, round_nearest
from ..lang.ast import (
    And, BConst, Call, Decl, For, If, IsWarn, Let, Not, Num, Op, Or, Program, Rel, Var, Warn,
    is_int_typed,
)
from .interp import OMEGA, EvalError, site_numbers


class Warned(Exception):
    pass


def _raise_warn():
    raise Warned


def _is_warn(thunk) -> bool:
    try:
        thunk()
    except Warned:
        return True
    return False


def mpfr_context(fmt: FloatFormat) -> gmpy2.context:
    # mpfr keeps significands in [1/2, 1): its exponents are ours plus p
    return gmpy2.context(
        precision=fmt.precision,
        emin=-fmt.emin + 1,
        emax=fmt.emax + fmt.precision,
        subnormalize=True,
        round=gmpy2.RoundToNearest,
        trap_overflow=True,
        trap_divzero=True,
        trap_invalid=True,
    )


ARITH_ERRORS = (ZeroDivisionError, gmpy2.OverflowResultError, gmpy2.InvalidOperationError,
                OverflowError, EvalError)


class _Gen:
    def __init__(self, kind: str, consts: dict, sites: dict, int_vars=frozenset()):
        self.kind = kind
        self.consts = consts
        self.sites = sites
        self.lines: list[str] = []
        self.fresh = itertools.count()
        self.ints = set(int_vars)

    def tmp(self, stem="t") -> str:
        return f"{stem}{next(self.fresh)}"

    def emit(self, line: str, depth: int):
        self.lines.append("    " * depth + line)

    def const(self, n: Num) -> str:
        if n.is_int:
            return repr(n.value)
        if self.kind == "real":
            q = n.exact
            value = mpq(q.numerator, q.denominator)
        else:
            v = n.value if isinstance(n.value, FloatVal) else round_nearest(n.value, self.fmt)
            value = mpfr(float(v))
        key = f"K{len(self.consts)}"
        self.consts[key] = value
        return key

    def is_int(self, e, env) -> bool:
        ints = frozenset(k for k, v in env.items() if v[1])
        return is_int_typed(e, ints)

    def expr(self, n, env, depth, fname) -> str:
        """Python expression for ``n``; statements it needs are emitted first."""
        if isinstance(n, Num):
            return self.const(n)
        if isinstance(n, Var):
            return env[n.name][0]
        if isinstance(n, Op):
            xs = [self.expr(a, env, depth, fname) for a in n.args]
            exact = self.kind == "real" or self.is_int(n, env)
            op = n.op
            if op == "neg":
                return f"(-{xs[0]})"
            if op == "abs":
                return f"abs({xs[0]})"
            if op == "max":
                return f"max({', '.join(xs)})"
            if op == "/":
                return f"_div({xs[0]}, {xs[1]})"
            if exact:
                return f"({xs[0]} {op} {xs[1]})"
            return f"{ {'+': '_add', '-': '_sub', '*': '_mul'}[op]}({xs[0]}, {xs[1]})"
        if isinstance(n, Call):
            xs = [self.expr(a, env, depth, fname) for a in n.args]
            return f"F_{n.name}({', '.join(xs + ['tr'])})"
        if isinstance(n, Warn):
            return "_raise_warn()"
        if isinstance(n, Let):
            v = self.expr(n.value, env, depth, fname)
            name = self.tmp("v")
            self.emit(f"{name} = {v}", depth)
            inner = dict(env)
            inner[n.name] = (name, self.is_int(n.value, env))
            return self.expr(n.body, inner, depth, fname)
        if isinstance(n, If):
            out = self.tmp()
            site = self.sites[fname][id(n)]
            d = depth
            for k, (g, b) in enumerate(n.branches):
                cond = self.test(g, env, d, fname)
                self.emit(f"if {cond}:", d)
                self.emit(f"tr.append(({fname!r}, {site}, {k}))", d + 1)
                self.emit(f"{out} = {self.expr(b, env, d + 1, fname)}", d + 1)
                self.emit("else:", d)
                d += 1
            self.emit(f"tr.append(({fname!r}, {site}, {len(n.branches)}))", d)
            self.emit(f"{out} = {self.expr(n.orelse, env, d, fname)}", d)
            return out
        if isinstance(n, For):
            acc = self.tmp("acc")
            idx = self.tmp("i")
            self.emit(f"{acc} = {self.expr(n.init, env, depth, fname)}", depth)
            self.emit(f"for {idx} in range({n.start}, {n.stop + 1}):", depth)
            inner = dict(env)
            inner[n.index] = (idx, True)
            # the accumulator is integer only if init and body keep it so
            inner[n.acc] = (acc, False)
            body = self.expr(n.body, inner, depth + 1, fname)
            self.emit(f"{acc} = {body}", depth + 1)
            return acc
        raise TypeError(f"cannot compile {type(n).__name__}")

    def test(self, b, env, depth, fname) -> str:
        if isinstance(b, Rel):
            x = self.expr(b.lhs, env, depth, fname)
            y = self.expr(b.rhs, env, depth, fname)
            return f"({x} {b.op} {y})"
        if isinstance(b, (And, Or)):
            join = " and " if isinstance(b, And) else " or "
            return "(" + join.join(self.test(a, env, depth, fname) for a in b.args) + ")"
        if isinstance(b, Not):
            return f"(not {self.test(b.arg, env, depth, fname)})"
        if isinstance(b, BConst):
            return repr(b.value)
        if isinstance(b, IsWarn):
            lines = len(self.lines)
            inner = self.expr(b.expr, env, depth, fname)
            if len(self.lines) != lines:
                raise TypeError("is_warn over a statement-level expression is not compiled")
            return f"_is_warn(lambda: {inner})"
        raise TypeError(f"cannot compile {type(b).__name__}")


class Compiled:
    """All declarations of ``prog`` as Python callables.

    ``kind`` is ``"real"`` (exact mpq arithmetic) or ``"float"`` (mpfr in
    ``fmt``).  ``fn(name)`` returns a callable taking the arguments plus a
    trace list and raising ``Warned`` on the warning; ``run`` wraps it.
    """

    def __init__(self, prog: Program, kind: str, fmt: FloatFormat | None = None,
                 extra: Sequence[tuple[str, tuple, object]] = ()):
        if kind not in ("real", "float"):
            raise ValueError(kind)
        self.prog = prog
        self.kind = kind
        self.fmt = fmt or prog.fmt
        self.params = {d.name: d.params for d in prog.decls}
        consts: dict = {}
        sites = {}
        chunks = []
        decls = list(prog.decls)
        for name, params, body in extra:
            decls.append(Decl(name, params, body))
        for d in decls:
            sites[d.name] = site_numbers(d.body)
            g = _Gen(kind, consts, sites)
            g.fmt = self.fmt
            env = {p: (f"a{k}", False) for k, p in enumerate(d.params)}
            result = g.expr(d.body, env, 1, d.name)
            args = ", ".join([f"a{k}" for k in range(len(d.params))] + ["tr"])
            chunks.append(f"def F_{d.name}({args}):\n" + "\n".join(g.lines + [f"    return {result}"]))
        self.source = "\n\n".join(chunks) + "\n"
        ns: dict = dict(consts, _raise_warn=_raise_warn, _is_warn=_is_warn)
        if kind == "real":
            ns["_div"] = lambda a, b: mpq(a) / b
        else:
            ctx = mpfr_context(self.fmt)
            ns.update(_add=ctx.add, _sub=ctx.sub, _mul=ctx.mul, _div=ctx.div)
        exec(compile(self.source, f"<compiled {kind}>", "exec"), ns)
        self._ns = ns

    def fn(self, name: str) -> Callable:
        return self._ns[f"F_{name}"]

    def convert_in(self, x):
        """An input value in this backend's number type."""
        if type(x) is int:
            return x
        if self.kind == "real":
            if isinstance(x, FloatVal):
                x = x.value
            x = Fraction(x)
            return mpq(x.numerator, x.denominator)
        if isinstance(x, FloatVal):
            return mpfr(float(x))
        if isinstance(x, float):
            return mpfr(x)
        raise TypeError(f"float input must be a float or FloatVal, got {type(x).__name__}")

    def run(self, name: str, args, trace: list | None = None):
        """Value (or ``OMEGA``) of ``name`` at ``args``; arithmetic errors raise ``EvalError``."""
        tr = [] if trace is None else trace
        f = self.fn(name)
        try:
            return f(*[self.convert_in(a) for a in args], tr)
        except Warned:
            return OMEGA
        except ARITH_ERRORS as exc:
            raise EvalError(str(exc)) from exc


def to_fraction(x) -> Fraction:
    if type(x) is int:
        return Fraction(x)
    if isinstance(x, FloatVal):
        return x.value
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, type(mpq())):
        return Fraction(int(x.numerator), int(x.denominator))
    n, d = x.as_integer_ratio()
    return Fraction(int(n), int(d))


def float_bits(x) -> bytes:
    """Bit pattern of a float result, signed zero included."""
    return struct.pack(">d", float(x))


def to_floatval(x, fmt: FloatFormat) -> FloatVal:
    return round_nearest(to_fraction(x), fmt)


__all__ = ["ARITH_ERRORS", "Compiled", "Warned", "float_bits", "mpfr_context", "to_floatval",
           "to_fraction"]
