"""Reference evaluators: exact rationals for real programs, (m, e) floats for float ones.

Both walk the AST directly and record, for every conditional they decide,
the declaration, the conditional's pre-order index in that declaration and
the branch taken.  Comparing the two traces of a linked run is exactly the
instability test: the paths differ iff some guard was decided differently.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Union

from ..fpmodel import FloatFormat, FloatVal, round_dyadic, round_nearest
from ..lang.ast import (
    And, BConst, Call, For, If, IsWarn, Let, Not, Num, Op, Or, Program, Rel, Var, Warn, walk,
)


class Omega:
    """The warning result.  A singleton, never a float sentinel."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "warn"


OMEGA = Omega()


class EvalError(ArithmeticError):
    """Division by zero or overflow: the sample is outside the modelled domain."""


class _Warned(Exception):
    pass


Value = Union[int, Fraction, FloatVal, Omega]
Trace = list  # of (decl, site, branch)


def site_numbers(body) -> dict[int, int]:
    """Pre-order index of every conditional below ``body``, keyed by node id."""
    out: dict[int, int] = {}
    for n in walk(body):
        if isinstance(n, If):
            out[id(n)] = len(out)
    return out


_REL = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


class _Machine:
    def __init__(self, prog: Program):
        self.prog = prog
        self.decls = {d.name: d for d in prog.decls}
        self.sites = {d.name: site_numbers(d.body) for d in prog.decls}

    # arithmetic hooks
    def const(self, v):
        raise NotImplementedError

    def arith(self, op, args):
        raise NotImplementedError

    def number(self, v):
        return v.value if isinstance(v, FloatVal) else v

    def run(self, fname: str, args, trace: Trace) -> Value:
        d = self.decls[fname]
        if len(args) != len(d.params):
            raise TypeError(f"{fname} expects {len(d.params)} arguments")
        try:
            return self.ev(d.body, dict(zip(d.params, args)), fname, trace)
        except _Warned:
            return OMEGA

    def ev(self, n, env, fname, trace):
        if isinstance(n, Num):
            return self.const(n)
        if isinstance(n, Var):
            return env[n.name]
        if isinstance(n, Op):
            return self.arith(n.op, [self.ev(a, env, fname, trace) for a in n.args])
        if isinstance(n, Call):
            args = [self.ev(a, env, fname, trace) for a in n.args]
            d = self.decls[n.name]
            return self.ev(d.body, dict(zip(d.params, args)), n.name, trace)
        if isinstance(n, Let):
            inner = dict(env)
            inner[n.name] = self.ev(n.value, env, fname, trace)
            return self.ev(n.body, inner, fname, trace)
        if isinstance(n, If):
            site = self.sites[fname][id(n)]
            for k, (g, b) in enumerate(n.branches):
                if self.test(g, env, fname, trace):
                    trace.append((fname, site, k))
                    return self.ev(b, env, fname, trace)
            trace.append((fname, site, len(n.branches)))
            return self.ev(n.orelse, env, fname, trace)
        if isinstance(n, For):
            acc = self.ev(n.init, env, fname, trace)
            inner = dict(env)
            for k in range(n.start, n.stop + 1):
                inner[n.index] = k
                inner[n.acc] = acc
                acc = self.ev(n.body, inner, fname, trace)
            return acc
        if isinstance(n, Warn):
            raise _Warned
        raise TypeError(f"cannot evaluate {type(n).__name__}")

    def test(self, b, env, fname, trace) -> bool:
        if isinstance(b, Rel):
            x = self.number(self.ev(b.lhs, env, fname, trace))
            y = self.number(self.ev(b.rhs, env, fname, trace))
            return _REL[b.op](x, y)
        if isinstance(b, And):
            return all(self.test(a, env, fname, trace) for a in b.args)
        if isinstance(b, Or):
            return any(self.test(a, env, fname, trace) for a in b.args)
        if isinstance(b, Not):
            return not self.test(b.arg, env, fname, trace)
        if isinstance(b, BConst):
            return b.value
        if isinstance(b, IsWarn):
            try:
                self.ev(b.expr, env, fname, trace)
            except _Warned:
                return True
            return False
        raise TypeError(f"cannot evaluate {type(b).__name__}")


def _exact_op(op, xs):
    if op == "+":
        return xs[0] + xs[1]
    if op == "-":
        return xs[0] - xs[1]
    if op == "*":
        return xs[0] * xs[1]
    if op == "/":
        if xs[1] == 0:
            raise EvalError("division by zero")
        return Fraction(xs[0]) / xs[1]
    if op == "neg":
        return -xs[0]
    if op == "abs":
        return abs(xs[0])
    if op == "max":
        return max(xs)
    raise ValueError(op)


class RealMachine(_Machine):
    def const(self, n):
        return n.exact if not n.is_int else n.value

    def arith(self, op, args):
        return _exact_op(op, args)


class FloatMachine(_Machine):
    def __init__(self, prog: Program, fmt: FloatFormat):
        super().__init__(prog)
        self.fmt = fmt

    def const(self, n):
        v = n.value
        if type(v) is int or isinstance(v, FloatVal):
            return v
        return round_nearest(v, self.fmt)

    def arith(self, op, args):
        if all(type(a) is int for a in args) and op != "/":
            return _exact_op(op, args)
        try:
            if op in _DYADIC_OPS:
                # integer (m, e) arithmetic; the same value as rounding the exact result
                xs = [self._fv(a) for a in args]
                if None not in xs:
                    return _DYADIC_OPS[op](*xs)
            return round_nearest(_exact_op(op, [self.number(a) for a in args]), self.fmt)
        except OverflowError as exc:
            raise EvalError(str(exc)) from exc
        except ZeroDivisionError as exc:
            raise EvalError(str(exc)) from exc

    def _fv(self, a):
        if type(a) is not int:
            return a
        if abs(a) >= 1 << self.fmt.precision:
            return None
        return round_dyadic(a, 0, self.fmt)

    def test(self, b, env, fname, trace) -> bool:
        if isinstance(b, Rel):
            x = _dyadic(self.ev(b.lhs, env, fname, trace))
            y = _dyadic(self.ev(b.rhs, env, fname, trace))
            e = min(x[1], y[1])
            return _REL[b.op](x[0] << (x[1] - e), y[0] << (y[1] - e))
        return super().test(b, env, fname, trace)


def _dyadic(v) -> tuple[int, int]:
    if type(v) is int:
        return v, 0
    if isinstance(v, FloatVal):
        return v.m, v.e
    raise TypeError(f"not a float value: {v!r}")


_DYADIC_OPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "neg": lambda a: -a,
    "abs": lambda a: abs(a),
}


def eval_real_exact(prog: Program, fname: str, sigma: Mapping[str, object]) -> tuple[Value, Trace]:
    """Exact value of ``fname`` at the rational assignment ``sigma``, with its trace.

    ``sigma`` maps parameter names to ints or Fractions.  Raises
    ``EvalError`` on division by zero.
    """
    d = next(d for d in prog.decls if d.name == fname)
    trace: Trace = []
    args = [sigma[p] if type(sigma[p]) is int else Fraction(sigma[p]) for p in d.params]
    return RealMachine(prog).run(fname, args, trace), trace


def eval_float(prog: Program, fname: str, sigma: Mapping[str, object],
               fmt: FloatFormat | None = None) -> tuple[Value, Trace]:
    """Bit-exact float value of ``fname`` at ``sigma`` (FloatVals or ints)."""
    fmt = fmt or prog.fmt
    d = next(d for d in prog.decls if d.name == fname)
    trace: Trace = []
    args = []
    for p in d.params:
        x = sigma[p]
        if isinstance(x, float):
            x = FloatVal.from_float(x, fmt)
        args.append(x)
    return FloatMachine(prog, fmt).run(fname, args, trace), trace


def first_divergence(t1: Trace, t2: Trace):
    """Index of the first differing trace entry, or None when the traces agree."""
    for k, (a, b) in enumerate(zip(t1, t2)):
        if a != b:
            return k
    if len(t1) != len(t2):
        return min(len(t1), len(t2))
    return None


__all__ = [
    "EvalError", "FloatMachine", "OMEGA", "Omega", "RealMachine", "eval_float", "eval_real_exact",
    "first_divergence", "site_numbers",
]
