"""Expression trees for real, floating-point and symbolic programs.

One node hierarchy serves all three roles.  Whether ``Op('+', ...)`` means
exact or rounded addition is decided by the context that evaluates it:
a real program, a float program, or the real/float side of a conditional
error bound.  ``Var(x)`` likewise stands for the float variable x̃ on the
float side and for its real counterpart on the real side.

Numeric leaves hold an ``int`` (exact integer, zero rounding error), a
``Fraction`` (real constant) or a ``FloatVal`` (float constant).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Optional, Union

from ..fpmodel import FloatFormat, FloatVal

Number = Union[int, Fraction, FloatVal]

ARITH_OPS = ("+", "-", "*", "/", "neg", "abs", "max")
UNARY_OPS = ("neg", "abs")
REL_OPS = ("<", "<=", ">", ">=")
INT_CLOSED_OPS = ("+", "-", "*", "neg", "abs")

FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<="}
NEGATE = {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}


class Expr:
    """Base class of arithmetic and program expressions."""

    __slots__ = ()

    def children(self) -> tuple["Expr", ...]:
        return ()


class BoolExpr:
    """Base class of Boolean expressions."""

    __slots__ = ()

    def children(self) -> tuple:
        return ()


@dataclass(frozen=True, eq=False)
class Num(Expr):
    value: Number
    # exact real constant this float literal was rounded from, if any
    source: Optional[Fraction] = None

    def __post_init__(self):
        v = self.value
        if isinstance(v, bool) or not isinstance(v, (int, Fraction, FloatVal)):
            raise TypeError(f"bad numeric literal {v!r}")

    @property
    def is_int(self) -> bool:
        return type(self.value) is int

    @property
    def exact(self) -> Fraction:
        v = self.value
        return v.value if isinstance(v, FloatVal) else Fraction(v)

    def _key(self):
        v = self.value
        if isinstance(v, FloatVal):
            return ("f", v.m, v.e, v.fmt.name)
        return ("i" if type(v) is int else "q", v)

    def __eq__(self, other):
        return isinstance(other, Num) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable name must be nonempty")


@dataclass(frozen=True)
class Op(Expr):
    op: str
    args: tuple[Expr, ...]

    def __post_init__(self):
        if self.op not in ARITH_OPS:
            raise ValueError(f"unknown operator {self.op!r}")
        want = 1 if self.op in UNARY_OPS else 2
        if self.op == "max":
            if len(self.args) < 1:
                raise ValueError("max needs at least one operand")
        elif len(self.args) != want:
            raise ValueError(f"{self.op} expects {want} operands, got {len(self.args)}")

    def children(self):
        return self.args


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple[Expr, ...]

    def children(self):
        return self.args


@dataclass(frozen=True)
class Let(Expr):
    name: str
    value: Expr
    body: Expr

    def children(self):
        return (self.value, self.body)


@dataclass(frozen=True)
class If(Expr):
    """``if g1 then b1 elsif g2 then b2 ... else orelse``."""

    branches: tuple[tuple[BoolExpr, Expr], ...]
    orelse: Expr
    site: int = field(default=-1, compare=False)

    def __post_init__(self):
        if not self.branches:
            raise ValueError("conditional needs at least one guarded branch")

    @property
    def guards(self) -> tuple[BoolExpr, ...]:
        return tuple(g for g, _ in self.branches)

    @property
    def bodies(self) -> tuple[Expr, ...]:
        return tuple(b for _, b in self.branches) + (self.orelse,)

    def children(self):
        return self.bodies


@dataclass(frozen=True)
class For(Expr):
    """Bounded loop: ``acc := init; for index in start..stop: acc := body``."""

    start: int
    stop: int
    init: Expr
    index: str
    acc: str
    body: Expr

    def __post_init__(self):
        if type(self.start) is not int or type(self.stop) is not int:
            raise ValueError("loop bounds must be integer literals")
        if self.start > self.stop:
            raise ValueError(f"empty loop range {self.start}..{self.stop}")
        if self.index == self.acc:
            raise ValueError("loop index and accumulator must differ")

    def children(self):
        return (self.init, self.body)


@dataclass(frozen=True)
class Warn(Expr):
    """The warning ω."""


@dataclass(frozen=True)
class ErrOf(Expr):
    """Error placeholder χ_e(x) of a parameter."""

    name: str


@dataclass(frozen=True)
class Ulp(Expr):
    arg: Expr
    fmt: FloatFormat

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class BConst(BoolExpr):
    value: bool


@dataclass(frozen=True)
class And(BoolExpr):
    args: tuple[BoolExpr, ...]

    def children(self):
        return self.args


@dataclass(frozen=True)
class Or(BoolExpr):
    args: tuple[BoolExpr, ...]

    def children(self):
        return self.args


@dataclass(frozen=True)
class Not(BoolExpr):
    arg: BoolExpr

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Rel(BoolExpr):
    op: str
    lhs: Expr
    rhs: Expr

    def __post_init__(self):
        if self.op not in REL_OPS:
            raise ValueError(f"unsupported relation {self.op!r}")

    def children(self):
        return (self.lhs, self.rhs)


@dataclass(frozen=True)
class IsWarn(BoolExpr):
    expr: Expr

    def children(self):
        return (self.expr,)


TRUE = BConst(True)
FALSE = BConst(False)
ZERO = Num(0)
WARN = Warn()


@dataclass(frozen=True)
class Decl:
    name: str
    params: tuple[str, ...]
    body: Expr


@dataclass(frozen=True)
class Program:
    decls: tuple[Decl, ...]
    fmt: Optional[FloatFormat] = None
    is_float: bool = False
    ranges: tuple[tuple[str, Fraction, Fraction], ...] = ()

    def __post_init__(self):
        names = [d.name for d in self.decls]
        if len(set(names)) != len(names):
            raise ValueError("duplicate declaration names")

    def decl(self, name: str) -> Decl:
        for d in self.decls:
            if d.name == name:
                return d
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(d.name == name for d in self.decls)

    @property
    def range_map(self) -> dict[str, tuple[Fraction, Fraction]]:
        return {v: (lo, hi) for v, lo, hi in self.ranges}


# ---------------------------------------------------------------------------
# generic traversal


def num(value) -> Num:
    if isinstance(value, float):
        value = Fraction(value)
    return Num(value)


def neg(e: Expr) -> Expr:
    return Op("neg", (e,))


def walk(node) -> Iterator:
    """Pre-order iteration over every Expr and BoolExpr below ``node``."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        if isinstance(n, If):
            kids = []
            for g, b in n.branches:
                kids.extend((g, b))
            kids.append(n.orelse)
        else:
            kids = list(n.children())
        stack.extend(reversed(kids))


def map_children(node, fn: Callable):
    """Rebuild ``node`` with ``fn`` applied to each direct child."""
    if isinstance(node, Op):
        return Op(node.op, tuple(fn(a) for a in node.args))
    if isinstance(node, Call):
        return Call(node.name, tuple(fn(a) for a in node.args))
    if isinstance(node, Let):
        return Let(node.name, fn(node.value), fn(node.body))
    if isinstance(node, If):
        return If(tuple((fn(g), fn(b)) for g, b in node.branches), fn(node.orelse), node.site)
    if isinstance(node, For):
        return For(node.start, node.stop, fn(node.init), node.index, node.acc, fn(node.body))
    if isinstance(node, Ulp):
        return Ulp(fn(node.arg), node.fmt)
    if isinstance(node, And):
        return And(tuple(fn(a) for a in node.args))
    if isinstance(node, Or):
        return Or(tuple(fn(a) for a in node.args))
    if isinstance(node, Not):
        return Not(fn(node.arg))
    if isinstance(node, Rel):
        return Rel(node.op, fn(node.lhs), fn(node.rhs))
    if isinstance(node, IsWarn):
        return IsWarn(fn(node.expr))
    return node


def free_vars(node) -> set[str]:
    """Variables not bound by an enclosing let or for."""
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Let):
        return free_vars(node.value) | (free_vars(node.body) - {node.name})
    if isinstance(node, For):
        return free_vars(node.init) | (free_vars(node.body) - {node.index, node.acc})
    out: set[str] = set()
    if isinstance(node, If):
        for g, b in node.branches:
            out |= free_vars(g) | free_vars(b)
        return out | free_vars(node.orelse)
    for c in node.children():
        out |= free_vars(c)
    return out


def substitute(node, mapping: dict[str, Expr], errs: Optional[dict[str, Expr]] = None):
    """Capture-avoiding enough for our use: bound names shadow the mapping.

    ``mapping`` replaces ``Var`` leaves, ``errs`` replaces ``ErrOf`` leaves.
    """
    if not mapping and not errs:
        return node
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, ErrOf):
        return errs.get(node.name, node) if errs else node
    if isinstance(node, Let):
        inner = {k: v for k, v in mapping.items() if k != node.name}
        return Let(node.name, substitute(node.value, mapping, errs), substitute(node.body, inner, errs))
    if isinstance(node, For):
        inner = {k: v for k, v in mapping.items() if k not in (node.index, node.acc)}
        return For(node.start, node.stop, substitute(node.init, mapping, errs), node.index, node.acc,
                   substitute(node.body, inner, errs))
    if isinstance(node, (Num, Warn, BConst)):
        return node
    return map_children(node, lambda c: substitute(c, mapping, errs))


def calls_in(node) -> list[Call]:
    return [n for n in walk(node) if isinstance(n, Call)]


def has_call(node) -> bool:
    return any(isinstance(n, Call) for n in walk(node))


def has_warn(node) -> bool:
    return any(isinstance(n, Warn) for n in walk(node))


def is_int_typed(e: Expr, int_vars: frozenset[str] = frozenset()) -> bool:
    """True when ``e`` is built from integer leaves with +, -, *, neg, abs.

    Such terms are evaluated exactly on both sides and carry no error.
    """
    if isinstance(e, Num):
        return e.is_int
    if isinstance(e, Var):
        return e.name in int_vars
    if isinstance(e, Op):
        return e.op in INT_CLOSED_OPS and all(is_int_typed(a, int_vars) for a in e.args)
    return False


def atoms(b: BoolExpr) -> list[Rel]:
    return [n for n in walk(b) if isinstance(n, Rel)]


def conj(parts) -> BoolExpr:
    flat = []
    for p in parts:
        if isinstance(p, And):
            flat.extend(p.args)
        elif p == TRUE:
            continue
        else:
            flat.append(p)
    if any(p == FALSE for p in flat):
        return FALSE
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(parts) -> BoolExpr:
    flat = []
    for p in parts:
        if isinstance(p, Or):
            flat.extend(p.args)
        elif p == FALSE:
            continue
        else:
            flat.append(p)
    if any(p == TRUE for p in flat):
        return TRUE
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def negate(b: BoolExpr) -> BoolExpr:
    if isinstance(b, Not):
        return b.arg
    if isinstance(b, BConst):
        return BConst(not b.value)
    return Not(b)


def desugar_for(loop: For) -> Expr:
    """Unroll a loop into nested lets, one per iteration.

    The accumulator of iteration k is bound to a fresh name so that the
    resulting tree has ``stop - start + 1`` copies of the body with the index
    replaced by the integer literal k.
    """
    used = {n.name for n in walk(loop) if isinstance(n, Var)} | {loop.acc, loop.index}
    names = []
    for k in range(loop.start, loop.stop + 1):
        base = f"{loop.acc}_{k - loop.start}"
        while base in used:
            base += "_"
        used.add(base)
        names.append(base)
    body = desugar(loop.body)
    result: Expr = Var(names[-1])
    for pos in range(len(names) - 1, -1, -1):
        k = loop.start + pos
        prev = desugar(loop.init) if pos == 0 else Var(names[pos - 1])
        inst = substitute(body, {loop.index: Num(k)})
        # each iteration consumes the previous accumulator
        result = Let(names[pos], Let(loop.acc, prev, inst), result)
    return result


def desugar(e: Expr) -> Expr:
    """Remove every For node from ``e``."""
    if isinstance(e, For):
        return desugar_for(e)
    if isinstance(e, (Num, Var, Warn, ErrOf, BConst)):
        return e
    return map_children(e, lambda c: desugar(c) if isinstance(c, Expr) else _desugar_bool(c))


def _desugar_bool(b):
    if isinstance(b, Expr):
        return desugar(b)
    return map_children(b, _desugar_bool)


def count_nodes(e, kind) -> int:
    return sum(1 for n in walk(e) if isinstance(n, kind))
