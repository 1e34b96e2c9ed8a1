"""Conditional error bounds: the path-sensitive round-off semantics.

A conditional error bound (CEB) ``<eta, eta~> -> (r, v~, e)_t`` says that
when the real path condition ``eta`` and the float path condition ``eta~``
both hold, the ideal real result is ``r``, the float result is ``v~`` and
``|r - v~| <= e``.  ``t`` is ``s`` when both computations took the same
branches and ``u`` otherwise.

Representation.  Real-side expressions (``rcond``, ``r``, ``e``) read
``Var(x)`` as the real value of parameter x and ``ErrOf(x)`` as its input
error.  Float-side expressions (``fcond``, ``v``) read ``Var(x)`` as the
float x~ and are never simplified, so that evaluating ``v`` in float
arithmetic reproduces the program's rounding exactly.  Conditions are
tuples read as conjunctions; a ``Call`` inside a condition stands for the
real (resp. float) function of that name.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional

from . import symbolic as S
from .fpmodel import DOUBLE, FloatFormat, FloatVal, err_bound
from .lang.ast import (
    FALSE, INT_CLOSED_OPS, NEGATE, TRUE, And, BConst, Call, ErrOf, Expr, If, IsWarn,
    Let, Not, Num, Op, Or, Program, Rel, Ulp, Var, Warn, desugar, is_int_typed,
    substitute, walk,
)
from .lang.convert import to_float_program
from .lang.printer import show, show_bool
from .optimizer import (
    ENTIRE, Interval, eval_interval, interval_max, interval_ulp, round_interval,
)

DEFAULT_CAP = 512


# ---------------------------------------------------------------------------
# the CEB record


@dataclass(frozen=True)
class CEB:
    rcond: tuple
    fcond: tuple
    r: Expr
    v: Expr
    e: Expr
    stable: bool = True

    @property
    def flag(self) -> str:
        return "s" if self.stable else "u"

    @property
    def is_warn(self) -> bool:
        return isinstance(self.r, Warn) or isinstance(self.v, Warn)

    def real_condition(self):
        return conj(self.rcond)

    def float_condition(self):
        return conj(self.fcond)

    def show(self) -> str:
        return (f"<{show_bool(self.real_condition())} | {show_bool(self.float_condition())}> -> "
                f"({show(self.r)}, {show(self.v)}, {show(self.e)})_{self.flag}")

    __str__ = show

    def to_json(self) -> dict:
        return {
            "realCond": show_bool(self.real_condition()),
            "fpCond": show_bool(self.float_condition()),
            "realExpr": show(self.r),
            "fpExpr": show(self.v),
            "errorExpr": show(self.e),
            "flag": self.flag,
        }


def conj(parts: Iterable) -> object:
    parts = tuple(parts)
    if not parts:
        return TRUE
    if len(parts) == 1:
        return parts[0]
    return And(parts)


def _flatten(parts: Iterable) -> tuple:
    out = []
    seen = set()
    for p in parts:
        if isinstance(p, And):
            sub = _flatten(p.args)
        elif p == TRUE:
            continue
        else:
            sub = (p,)
        for q in sub:
            if q not in seen:
                seen.add(q)
                out.append(q)
    return tuple(out)


def bool_not(b):
    """Negation pushed down to the sign tests (``a < 0`` becomes ``a >= 0``)."""
    if isinstance(b, Rel):
        return Rel(NEGATE[b.op], b.lhs, b.rhs)
    if isinstance(b, BConst):
        return BConst(not b.value)
    if isinstance(b, Not):
        return b.arg
    if isinstance(b, And):
        return Or(tuple(bool_not(a) for a in b.args))
    if isinstance(b, Or):
        return And(tuple(bool_not(a) for a in b.args))
    return Not(b)


def realize(node):
    """Real counterpart of a float expression: constants become exact reals.

    A float literal that was rounded from a real constant goes back to
    that constant, so real-side expressions describe the original real
    program rather than the rounded one.
    """
    if isinstance(node, Num):
        v = node.value
        if isinstance(v, FloatVal):
            return S.const(node.source if node.source is not None else v.value)
        return node
    if isinstance(node, (Var, ErrOf, Warn, BConst)):
        return node
    from .lang.ast import map_children

    return map_children(node, realize)


def _real_op(op: str, args):
    if op == "+":
        return S.add(*args)
    if op == "-":
        return S.sub(*args)
    if op == "*":
        return S.mul(*args)
    if op == "/":
        return S.div(*args)
    if op == "neg":
        return S.neg(args[0])
    if op == "abs":
        return S.abs_(args[0])
    if op == "max":
        return S.maximum(args)
    raise ValueError(op)


def subst_real(node, rmap: Mapping[str, Expr], emap: Mapping[str, Expr]):
    """Substitute on the real side and re-simplify."""
    if isinstance(node, Var):
        return rmap.get(node.name, node)
    if isinstance(node, ErrOf):
        return emap.get(node.name, node)
    if isinstance(node, (Num, Warn, BConst)):
        return node
    if isinstance(node, Op):
        return _real_op(node.op, [subst_real(a, rmap, emap) for a in node.args])
    if isinstance(node, Ulp):
        return S.ulp(subst_real(node.arg, rmap, emap), node.fmt)
    if isinstance(node, Call):
        return Call(node.name, tuple(subst_real(a, rmap, emap) for a in node.args))
    if isinstance(node, Rel):
        return Rel(node.op, subst_real(node.lhs, rmap, emap), subst_real(node.rhs, rmap, emap))
    if isinstance(node, And):
        return And(tuple(subst_real(a, rmap, emap) for a in node.args))
    if isinstance(node, Or):
        return Or(tuple(subst_real(a, rmap, emap) for a in node.args))
    if isinstance(node, Not):
        return Not(subst_real(node.arg, rmap, emap))
    if isinstance(node, IsWarn):
        return IsWarn(subst_real(node.expr, rmap, emap))
    raise TypeError(f"unexpected node {type(node).__name__} on the real side")


def subst_float(node, vmap: Mapping[str, Expr]):
    out = substitute(node, dict(vmap))
    if isinstance(node, Expr) and any(isinstance(n, Warn) for n in walk(out)):
        return Warn()
    return out


# ---------------------------------------------------------------------------
# satisfiability of path conditions


class Pruner:
    """Decides, conservatively, that a pair of path conditions is empty.

    Real-side and float-side variables live in separate name spaces: the
    semantics does not assume the float inputs are the rounded reals.
    """

    def __init__(self, ranges: Optional[Mapping[str, tuple]] = None, fmt: FloatFormat = DOUBLE):
        self.fmt = fmt
        self.real_box = {}
        self.float_box = {}
        for k, (lo, hi) in (ranges or {}).items():
            iv = Interval(Fraction(lo), Fraction(hi))
            self.real_box[k] = iv
            self.float_box[k] = round_interval(iv, fmt)

    def satisfiable(self, rcond: tuple, fcond: tuple) -> bool:
        return self._side_ok(rcond, self.real_box, None) and self._side_ok(fcond, self.float_box, self.fmt)

    def _side_ok(self, atoms: tuple, base: Mapping[str, Interval], fmt) -> bool:
        if not atoms:
            return True
        if any(a == FALSE for a in atoms):
            return False
        present = set(atoms)
        for a in atoms:
            if isinstance(a, Rel) and bool_not(a) in present:
                return False
        box = _contract(atoms, base)
        if box is None:
            return False
        for a in atoms:
            if _decide(a, box, fmt) is False:
                return False
        return True


# bounds with strictness: (lo, lo_strict, hi, hi_strict)
def _contract(atoms, base):
    bounds = {}

    def get(name):
        if name not in bounds:
            iv = base.get(name, ENTIRE)
            bounds[name] = [iv.lo, False, iv.hi, False]
        return bounds[name]

    for a in atoms:
        if not isinstance(a, Rel) or not (isinstance(a.rhs, Num) and a.rhs.exact == 0):
            continue
        lin = _linear_var(a.lhs)
        if lin is None:
            continue
        name, sign, c = lin  # lhs = sign * name - c
        op = a.op if sign > 0 else {"<": ">", "<=": ">=", ">": "<", ">=": "<="}[a.op]
        k = c * sign  # sign*x - c <op> 0  <=>  x <op'> c/sign
        b = get(name)
        if op in ("<", "<="):
            strict = op == "<"
            if k < b[2] or (k == b[2] and strict):
                b[2], b[3] = k, strict
        else:
            strict = op == ">"
            if k > b[0] or (k == b[0] and strict):
                b[0], b[1] = k, strict
    box = dict(base)
    for name, (lo, ls, hi, hs) in bounds.items():
        if lo > hi or (lo == hi and (ls or hs)):
            return None
        box[name] = Interval(lo, hi)
    return box


def _linear_var(e):
    """Match ``x``, ``x - c``, ``c - x`` and ``-x``: returns (x, sign, c) with e = sign*x - c."""
    if isinstance(e, Var):
        return e.name, 1, Fraction(0)
    if isinstance(e, Op):
        if e.op == "neg" and isinstance(e.args[0], Var):
            return e.args[0].name, -1, Fraction(0)
        if e.op == "-":
            a, b = e.args
            if isinstance(a, Var) and isinstance(b, Num):
                return a.name, 1, b.exact
            if isinstance(a, Num) and isinstance(b, Var):
                return b.name, -1, -a.exact
    return None


def _decide(b, box, fmt) -> Optional[bool]:
    """Three-valued truth of a condition over a box (None = unknown)."""
    if isinstance(b, BConst):
        return b.value
    if isinstance(b, Rel):
        if any(isinstance(n, (Call, Warn, IsWarn)) for n in walk(b)):
            return None
        try:
            lhs = float_interval(b.lhs, box, fmt) if fmt else eval_interval(b.lhs, _total(box, b.lhs))
            rhs = float_interval(b.rhs, box, fmt) if fmt else eval_interval(b.rhs, _total(box, b.rhs))
            d = lhs - rhs
        except (ZeroDivisionError, KeyError, OverflowError):
            return None
        op = b.op
        if op == "<":
            return True if d.hi < 0 else False if d.lo >= 0 else None
        if op == "<=":
            return True if d.hi <= 0 else False if d.lo > 0 else None
        if op == ">":
            return True if d.lo > 0 else False if d.hi <= 0 else None
        return True if d.lo >= 0 else False if d.hi < 0 else None
    if isinstance(b, And):
        vals = [_decide(a, box, fmt) for a in b.args]
        if any(v is False for v in vals):
            return False
        return True if all(v is True for v in vals) else None
    if isinstance(b, Or):
        vals = [_decide(a, box, fmt) for a in b.args]
        if any(v is True for v in vals):
            return True
        return False if all(v is False for v in vals) else None
    if isinstance(b, Not):
        v = _decide(b.arg, box, fmt)
        return None if v is None else not v
    return None


def _total(box, e):
    missing = {n.name for n in walk(e) if isinstance(n, Var)} - set(box)
    if not missing:
        return box
    out = dict(box)
    for m in missing:
        out[m] = ENTIRE
    return out


def float_interval(e, box: Mapping[str, Interval], fmt: FloatFormat) -> Interval:
    """Enclosure of a float expression's value: each operation rounds outward.

    Rounding to nearest is monotone, so rounding the exact image's
    endpoints outward to floats encloses every rounded result.
    """
    if isinstance(e, Num):
        return Interval.point(e.exact)
    if isinstance(e, Var):
        return box.get(e.name, ENTIRE)
    if isinstance(e, Op):
        args = [float_interval(a, box, fmt) for a in e.args]
        op = e.op
        if op == "neg":
            return -args[0]
        if op == "abs":
            return abs(args[0])
        if op == "max":
            return interval_max(args)
        exact = {"+": lambda a, b: a + b, "-": lambda a, b: a - b,
                 "*": lambda a, b: a * b, "/": lambda a, b: a / b}[op](*args)
        return round_interval(exact, fmt)
    if isinstance(e, Ulp):
        return interval_ulp(float_interval(e.arg, box, fmt), e.fmt)
    raise TypeError(f"cannot enclose {type(e).__name__}")


# ---------------------------------------------------------------------------
# the semantics


class SemanticsError(Exception):
    pass


@dataclass(frozen=True)
class FunctionSemantics:
    name: str
    params: tuple[str, ...]
    cebs: tuple[CEB, ...]

    def stable(self) -> tuple[CEB, ...]:
        return tuple(c for c in self.cebs if c.stable)


Interpretation = dict  # name -> FunctionSemantics, in declaration order


def _warn_ceb(rcond=(), fcond=(), stable=True) -> CEB:
    return CEB(tuple(rcond), tuple(fcond), Warn(), Warn(), Num(0), stable)


def canonical_order(cebs: Iterable[CEB]) -> tuple[CEB, ...]:
    uniq = {}
    for c in cebs:
        uniq.setdefault(c.show(), c)
    return tuple(uniq[k] for k in sorted(uniq))


class Evaluator:
    """Evaluates program expressions to CEB sets under an interpretation."""

    def __init__(self, interp: Mapping[str, FunctionSemantics], fmt: FloatFormat = DOUBLE,
                 pruner: Optional[Pruner] = None, cap: int = DEFAULT_CAP):
        self.interp = interp
        self.fmt = fmt
        self.pruner = pruner or Pruner(fmt=fmt)
        self.cap = cap

    def make(self, rcond, fcond, r, v, e, stable) -> Optional[CEB]:
        rc, fc = _flatten(rcond), _flatten(fcond)
        if not self.pruner.satisfiable(rc, fc):
            return None
        return CEB(rc, fc, r, v, e, stable)

    def propagate(self, b, bf, c: CEB) -> Optional[CEB]:
        """Conjoin ``b`` (real side) and ``bf`` (float side) onto ``c``."""
        return self.make(c.rcond + (b,), c.fcond + (bf,), c.r, c.v, c.e, c.stable)

    def eval(self, node) -> list[CEB]:
        out = self._eval(node)
        if len(out) > self.cap:
            out = merge_unstable(out)
        return out

    def _eval(self, node) -> list[CEB]:
        if isinstance(node, Num):
            v = node.value
            if isinstance(v, FloatVal):
                r = S.const(node.source if node.source is not None else v.value)
                return [CEB((), (), r, node, S.const(abs(r.exact - v.value)), True)]
            if type(v) is int:
                return [CEB((), (), node, node, Num(0), True)]
            # a real literal left in a float program rounds like any constant
            raise SemanticsError(f"real constant {v} in a float program; convert it first")
        if isinstance(node, Warn):
            return [_warn_ceb()]
        if isinstance(node, Var):
            return [CEB((), (), node, node, ErrOf(node.name), True)]
        if isinstance(node, Op):
            return self._op(node)
        if isinstance(node, Call):
            return self._call(node)
        if isinstance(node, Let):
            return self._let(node)
        if isinstance(node, If):
            return self._if(node)
        raise SemanticsError(f"cannot evaluate {type(node).__name__}; desugar loops first")

    def _op(self, node: Op) -> list[CEB]:
        out = []
        for combo in itertools.product(*(self.eval(a) for a in node.args)):
            rcond = sum((c.rcond for c in combo), ())
            fcond = sum((c.fcond for c in combo), ())
            stable = all(c.stable for c in combo)
            if any(c.is_warn for c in combo):
                c = self.make(rcond, fcond, Warn(), Warn(), Num(0), stable)
            else:
                r = _real_op(node.op, [c.r for c in combo])
                v = Op(node.op, tuple(c.v for c in combo))
                if node.op in INT_CLOSED_OPS and all(is_int_typed(c.v) for c in combo):
                    e = Num(0)
                else:
                    e = err_bound(node.op, [(c.r, c.e) for c in combo], self.fmt)
                c = self.make(rcond, fcond, r, v, e, stable)
            if c is not None:
                out.append(c)
        return out

    def _bind(self, c: CEB, names, args: tuple) -> Optional[CEB]:
        """Instantiate ``c`` with each name bound to the matching argument CEB."""
        rmap = {x: a.r for x, a in zip(names, args)}
        emap = {x: a.e for x, a in zip(names, args)}
        vmap = {x: a.v for x, a in zip(names, args)}
        rcond = tuple(subst_real(b, rmap, emap) for b in c.rcond)
        fcond = tuple(substitute(b, vmap) for b in c.fcond)
        for a in args:
            rcond += a.rcond
            fcond += a.fcond
        stable = c.stable and all(a.stable for a in args)
        if c.is_warn or any(a.is_warn for a in args):
            # arguments are checked for the warning before use
            return self.make(rcond, fcond, Warn(), Warn(), Num(0), stable)
        r = subst_real(c.r, rmap, emap)
        e = subst_real(c.e, rmap, emap)
        v = subst_float(c.v, vmap)
        return self.make(rcond, fcond, r, v, e, stable)

    def _call(self, node: Call) -> list[CEB]:
        fs = self.interp.get(node.name)
        if fs is None:
            raise SemanticsError(f"no interpretation for {node.name}")
        out = []
        argsets = [self.eval(a) for a in node.args]
        for args in itertools.product(*argsets):
            for c in fs.cebs:
                b = self._bind(c, fs.params, args)
                if b is not None:
                    out.append(b)
        return out

    def _let(self, node: Let) -> list[CEB]:
        values = self.eval(node.value)
        body = self.eval(node.body)
        out = []
        for a in values:
            for c in body:
                b = self._bind(c, (node.name,), (a,))
                if b is not None:
                    out.append(b)
        return out

    def _if(self, node: If) -> list[CEB]:
        fguards = list(node.guards)
        rguards = [realize(g) for g in fguards]
        n = len(fguards)

        def prefix(guards, i):
            neg = [bool_not(g) for g in guards[:i]]
            return tuple(neg + ([guards[i]] if i < n else []))

        bodies = [self.eval(b) for b in node.bodies]
        out = []
        for i, cebs in enumerate(bodies):
            rp, fp = prefix(rguards, i), prefix(fguards, i)
            for c in cebs:
                p = self.make(c.rcond + rp, c.fcond + fp, c.r, c.v, c.e, c.stable)
                if p is not None:
                    out.append(p)
        # real flow through branch i, float flow through branch j
        for i, j in itertools.permutations(range(n + 1), 2):
            rp, fp = prefix(rguards, i), prefix(fguards, j)
            for ci in bodies[i]:
                if not ci.stable:
                    continue
                for cj in bodies[j]:
                    if not cj.stable:
                        continue
                    if ci.is_warn or cj.is_warn:
                        r, v, e = ci.r, cj.v, Num(0)
                    else:
                        r, v = ci.r, cj.v
                        e = S.add(cj.e, S.abs_(S.sub(ci.r, cj.r)))
                    p = self.make(ci.rcond + rp, cj.fcond + fp, r, v, e, False)
                    if p is not None:
                        out.append(p)
        return out


def merge_unstable(cebs: list[CEB]) -> list[CEB]:
    """Shrink a CEB set by merging unstable entries with equal results.

    Merged entries take the disjunction of their conditions and the max of
    their errors, which keeps the overall error sound.
    """
    stable = [c for c in cebs if c.stable]
    groups: dict = {}
    for c in cebs:
        if not c.stable:
            groups.setdefault((show(c.r), show(c.v)), []).append(c)
    merged = []
    for group in groups.values():
        if len(group) == 1:
            merged.append(group[0])
            continue
        rc = _disj([conj(c.rcond) for c in group])
        fc = _disj([conj(c.fcond) for c in group])
        err = S.maximum(c.e for c in group)
        merged.append(CEB((rc,) if rc != TRUE else (), (fc,) if fc != TRUE else (),
                          group[0].r, group[0].v, err, False))
    return stable + merged


def _disj(parts):
    uniq = []
    for p in parts:
        if p == TRUE:
            return TRUE
        if p not in uniq:
            uniq.append(p)
    return uniq[0] if len(uniq) == 1 else Or(tuple(uniq))


def eval_expr(node, interp: Mapping[str, FunctionSemantics], fmt: FloatFormat = DOUBLE,
              ranges: Optional[Mapping[str, tuple]] = None, cap: int = DEFAULT_CAP) -> tuple[CEB, ...]:
    ev = Evaluator(interp, fmt, Pruner(ranges, fmt), cap)
    return canonical_order(ev.eval(desugar(node)))


def propagate_condition(b, bf, c: CEB, ranges=None, fmt: FloatFormat = DOUBLE) -> Optional[CEB]:
    return Evaluator({}, fmt, Pruner(ranges, fmt)).propagate(b, bf, c)


def program_fixpoint(prog: Program, ranges: Optional[Mapping[str, tuple]] = None,
                     cap: int = DEFAULT_CAP, fmt: Optional[FloatFormat] = None) -> Interpretation:
    """Least fixpoint of the consequence operator.

    Calls only reach earlier declarations, so one pass in declaration order
    already reaches it.  ``ranges`` defaults to the program's own ranges
    and only serves to prune path conditions.
    """
    fmt = fmt or prog.fmt or DOUBLE
    if not prog.is_float:
        prog = to_float_program(prog, fmt)
    if ranges is None:
        ranges = prog.range_map
    interp: Interpretation = {}
    ev = Evaluator(interp, fmt, Pruner(ranges, fmt), cap)
    for d in prog.decls:
        cebs = canonical_order(ev.eval(desugar(d.body)))
        interp[d.name] = FunctionSemantics(d.name, d.params, cebs)
    return interp


def overall_error(cebs: Iterable[CEB], mode: str = "all") -> Expr:
    """Symbolic max of the errors of the selected CEBs (warnings excluded)."""
    if mode not in ("all", "stable-only"):
        raise ValueError(f"unknown mode {mode!r}")
    sel = [c.e for c in cebs if not c.is_warn and (mode == "all" or c.stable)]
    if not sel:
        raise SemanticsError("no conditional error bound selected")
    return S.maximum(sel)


def interpretation_to_json(interp: Interpretation) -> dict:
    return {name: {"params": list(fs.params), "cebs": [c.to_json() for c in fs.cebs]}
            for name, fs in interp.items()}


def dumps(interp: Interpretation) -> str:
    return json.dumps(interpretation_to_json(interp), indent=2)


__all__ = [
    "CEB", "DEFAULT_CAP", "Evaluator", "FunctionSemantics", "Interpretation", "Pruner",
    "SemanticsError", "bool_not", "canonical_order", "dumps", "eval_expr", "float_interval",
    "interpretation_to_json", "merge_unstable", "overall_error", "program_fixpoint",
    "propagate_condition", "realize", "subst_real",
]


