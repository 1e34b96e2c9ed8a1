"""Instrumenting float programs so that unstable tests raise a warning.

Every inexact guard ``phi`` is replaced by two strengthened tests,
``beta_plus(phi)`` and ``beta_minus(phi)``, which push each sign test
``a <op> 0`` away from zero by an error variable bounding the round-off
of ``a``.  When neither strengthened test holds the program returns the
warning.  Calls are preceded by a check that the callee did not warn,
and callee error variables are threaded through as extra arguments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

from .fpmodel import DOUBLE, FloatFormat
from .lang.ast import (
    FALSE, TRUE, WARN, And, BConst, Call, Decl, Expr, For, If, IsWarn, Let, Not, Num, Op,
    Or, Program, Rel, Var, Warn, conj, disj, free_vars, is_int_typed, substitute, walk,
)
from .lang.convert import to_float_program
from .lang.jsonio import program_to_json
from .lang.parser import normalize_relation
from .lang.printer import show, show_bool, show_decl


class TransformError(Exception):
    pass


# ---------------------------------------------------------------------------
# Boolean abstractions

EpsFn = Callable[[Expr], Expr]


def default_eps(a: Expr) -> Expr:
    """Placeholder error variable named after the guarded expression."""
    return Var(f"eps[{show(a)}]")


def sign_test(b: Rel) -> Rel:
    if isinstance(b.rhs, Num) and b.rhs.exact == 0:
        return b
    return normalize_relation(b.op, b.lhs, b.rhs)


def _neg(e: Expr) -> Expr:
    if isinstance(e, Num):
        return Num(-e.value) if e.is_int else Num(-e.exact)
    return Op("neg", (e,))


def beta_plus(phi, eps: EpsFn = default_eps):
    """Strengthening of ``phi`` that implies both the float and the real test."""
    if isinstance(phi, Rel):
        phi = sign_test(phi)
        a, e = phi.lhs, eps(phi.lhs)
        if phi.op in ("<", "<="):
            return Rel(phi.op, a, _neg(e))
        return Rel(phi.op, a, e)
    if isinstance(phi, BConst):
        return phi
    if isinstance(phi, And):
        return And(tuple(beta_plus(p, eps) for p in phi.args))
    if isinstance(phi, Or):
        return Or(tuple(beta_plus(p, eps) for p in phi.args))
    if isinstance(phi, Not):
        return beta_minus(phi.arg, eps)
    raise TransformError(f"cannot abstract {show_bool(phi)}")


_BETA_MINUS_OP = {"<=": ">", ">=": "<", "<": ">=", ">": "<="}


def beta_minus(phi, eps: EpsFn = default_eps):
    """Strengthening of ``not phi`` that implies both negated tests."""
    if isinstance(phi, Rel):
        phi = sign_test(phi)
        a, e = phi.lhs, eps(phi.lhs)
        op = _BETA_MINUS_OP[phi.op]
        if op in ("<", "<="):
            return Rel(op, a, _neg(e))
        return Rel(op, a, e)
    if isinstance(phi, BConst):
        return BConst(not phi.value)
    if isinstance(phi, And):
        return Or(tuple(beta_minus(p, eps) for p in phi.args))
    if isinstance(phi, Or):
        return And(tuple(beta_minus(p, eps) for p in phi.args))
    if isinstance(phi, Not):
        return beta_plus(phi.arg, eps)
    raise TransformError(f"cannot abstract {show_bool(phi)}")


def guard_atoms(phi) -> list[Expr]:
    """The expressions ``a`` of the sign tests in ``phi``, in order."""
    return [sign_test(n).lhs for n in walk(phi) if isinstance(n, Rel)]


def epsilon_vars(phi, int_vars: frozenset = frozenset()) -> list[str]:
    """Keys of the error variables the abstraction of ``phi`` introduces.

    Integer-valued sign tests are exact and need none.
    """
    out = []
    for a in guard_atoms(phi):
        k = show(a)
        if not is_int_typed(a, int_vars) and k not in out:
            out.append(k)
    return out


def is_exact_guard(phi, int_vars: frozenset = frozenset()) -> bool:
    return all(is_int_typed(a, int_vars) for a in guard_atoms(phi))


# ---------------------------------------------------------------------------
# transformed programs


@dataclass(frozen=True)
class ErrorVar:
    """Parameter ``name`` bounds ``|a~ - R(a~)|`` for the expression keyed ``key``."""

    name: str
    key: str
    expr: Optional[Expr]
    origin: str  # "guard" or "call"
    local: bool = False

    def contract(self) -> str:
        return f"|{self.key} - R({self.key})| <= {self.name}"


@dataclass(frozen=True)
class GuardRecord:
    decl: str
    site: int
    guard: object
    plus: object
    minus: object
    atoms: tuple  # (expression, error variable name or None)
    int_vars: frozenset = frozenset()


@dataclass(frozen=True)
class TransformedDecl:
    name: str
    params: tuple[str, ...]
    eps: tuple[ErrorVar, ...]
    body: Expr
    source: Decl
    # keys collected by the transformation proper: guard variables plus
    # callee variables of calls outside guards
    tau_keys: frozenset = frozenset()
    guards: tuple[GuardRecord, ...] = ()

    @property
    def eps_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.eps)

    @property
    def all_params(self) -> tuple[str, ...]:
        return self.params + self.eps_names

    @property
    def tau_vars(self) -> tuple[ErrorVar, ...]:
        return tuple(v for v in self.eps if v.key in self.tau_keys)

    def eps_by_key(self) -> dict[str, ErrorVar]:
        return {v.key: v for v in self.eps}

    def as_decl(self) -> Decl:
        return Decl(self.name, self.all_params, self.body)

    def show(self) -> str:
        return show_decl(self.as_decl())


@dataclass
class TransformedProgram:
    decls: tuple[TransformedDecl, ...]
    source: Program
    float_program: Program
    fmt: FloatFormat
    guards: tuple[GuardRecord, ...] = field(default=())

    def __getitem__(self, name: str) -> TransformedDecl:
        for d in self.decls:
            if d.name == name:
                return d
        raise KeyError(name)

    @property
    def program(self) -> Program:
        return Program(tuple(d.as_decl() for d in self.decls), self.fmt, True, self.source.ranges)

    def show(self) -> str:
        return "\n".join(d.show() for d in self.decls) + "\n"

    def error_params(self) -> dict:
        return {d.name: {v.name: v.key for v in d.eps} for d in self.decls}

    def to_json(self) -> dict:
        out = program_to_json(self.program)
        out["errorParams"] = self.error_params()
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


# ---------------------------------------------------------------------------
# the transformation


def _calls_postorder(node) -> list[Call]:
    """Distinct call subterms, innermost first."""
    out: list[Call] = []

    def go(n):
        if isinstance(n, If):
            for g, b in n.branches:
                go(g)
                go(b)
            go(n.orelse)
            return
        for c in n.children():
            go(c)
        if isinstance(n, Call) and n not in out:
            out.append(n)

    go(node)
    return out


def _guard_calls(guards) -> list[Call]:
    out: list[Call] = []
    for g in guards:
        for a in guard_atoms(g):
            for c in _calls_postorder(a):
                if c not in out:
                    out.append(c)
    return out


def call_eps_keys(call: Call, callee: TransformedDecl, int_vars: frozenset) -> list[tuple]:
    """Caller-side keys of the callee's error variables at ``call``.

    Each entry is ``(key, expr, local)``, or ``None`` when the instantiated
    expression is integer valued and the argument is the constant 0.
    """
    out = []
    binding = dict(zip(callee.params, call.args))
    for v in callee.eps:
        if v.local or v.expr is None:
            key = f"{call.name}({', '.join(show(a) for a in call.args)})/{v.key}"
            out.append((key, None, True))
            continue
        a = substitute(v.expr, binding)
        if is_int_typed(a, int_vars):
            out.append(None)
            continue
        out.append((show(a), a, False))
    return out


class _Collector:
    """First pass: the error variable keys of one declaration, in order."""

    def __init__(self, table: dict[str, TransformedDecl], params: tuple[str, ...]):
        self.table = table
        self.params = set(params)
        self.guard_keys: dict[str, tuple] = {}
        self.call_keys: dict[str, tuple] = {}
        self.tau_keys: set[str] = set()

    def _local(self, a: Expr) -> bool:
        return not free_vars(a) <= self.params

    def calls(self, node, ints, in_guard=False):
        for c in _calls_postorder(node):
            callee = self.table.get(c.name)
            if callee is None:
                raise TransformError(f"call to {c.name} before its transformation")
            for item in call_eps_keys(c, callee, ints):
                if item is None:
                    continue
                key, expr, local = item
                self.call_keys.setdefault(key, (expr, local or (expr is not None and self._local(expr))))
                if not in_guard:
                    self.tau_keys.add(key)

    def visit(self, node, ints: frozenset):
        if isinstance(node, (Num, Var, Warn)):
            return
        if isinstance(node, (Op, Call)):
            self.calls(node, ints)
            return
        if isinstance(node, Let):
            self.calls(node.value, ints)
            self.visit(node.body, ints - {node.name})
            return
        if isinstance(node, For):
            self.visit(node.body, (ints | {node.index}) - {node.acc})
            return
        if isinstance(node, If):
            guards = node.guards
            if not all(is_exact_guard(g, ints) for g in guards):
                for g in guards:
                    for a in guard_atoms(g):
                        if not is_int_typed(a, ints):
                            k = show(a)
                            self.guard_keys.setdefault(k, (a, self._local(a)))
                            self.tau_keys.add(k)
                    self.calls(g, ints, in_guard=True)
            for b in node.bodies:
                self.visit(b, ints)
            return
        raise TransformError(f"unexpected node {type(node).__name__}")

    def error_vars(self) -> tuple[ErrorVar, ...]:
        items = [(k, e, l, "guard") for k, (e, l) in self.guard_keys.items()]
        items += [(k, e, l, "call") for k, (e, l) in self.call_keys.items() if k not in self.guard_keys]
        n_guard = len(self.guard_keys)
        names = _eps_names(n_guard, self.params)
        names += _call_names(len(items) - n_guard, self.params | set(names))
        return tuple(ErrorVar(n, k, e, o, l) for n, (k, e, l, o) in zip(names, items))


def _eps_names(n: int, taken: set[str]) -> list[str]:
    for prefix in ("e", "eps", "err_"):
        names = [prefix] if n == 1 else [f"{prefix}{i}" for i in range(1, n + 1)]
        if not taken & set(names):
            return names
    raise TransformError("cannot name error variables without a collision")


def _call_names(n: int, taken: set[str]) -> list[str]:
    # variables inherited from callees: "e" when alone and free, else e1, e2, ...
    if n == 1 and "e" not in taken:
        return ["e"]
    pool = (f"e{i}" for i in range(1, 10 ** 6))
    return [next(c for c in pool if c not in taken) for _ in range(n)]


class _Builder:
    """Second pass: rebuild the body with the final error variable names."""

    def __init__(self, name: str, table: dict[str, TransformedDecl], eps: tuple[ErrorVar, ...]):
        self.name = name
        self.table = table
        self.by_key = {v.key: v.name for v in eps}
        self.guards: list[GuardRecord] = []
        self.site = 0

    def eps_for(self, a: Expr, ints: frozenset) -> Expr:
        if is_int_typed(a, ints):
            return Num(0)
        return Var(self.by_key[show(a)])

    def arith(self, e: Expr, ints: frozenset) -> Expr:
        if isinstance(e, Call):
            callee = self.table[e.name]
            extra = []
            for item in call_eps_keys(e, callee, ints):
                extra.append(Num(0) if item is None else Var(self.by_key[item[0]]))
            args = tuple(self.arith(a, ints) for a in e.args)
            return Call(e.name, args + tuple(extra))
        if isinstance(e, Op):
            return Op(e.op, tuple(self.arith(a, ints) for a in e.args))
        return e

    def checked(self, calls: list[Call], body: Expr, ints: frozenset) -> Expr:
        if not calls:
            return body
        test = disj(IsWarn(self.arith(c, ints)) for c in calls)
        return If(((test, WARN),), body)

    def stmt(self, node, ints: frozenset) -> Expr:
        if isinstance(node, (Num, Var, Warn)):
            return node
        if isinstance(node, (Op, Call)):
            return self.checked(_calls_postorder(node), self.arith(node, ints), ints)
        if isinstance(node, Let):
            inner = ints - {node.name}
            let = Let(node.name, self.arith(node.value, ints), self.stmt(node.body, inner))
            return self.checked(_calls_postorder(node.value), let, ints)
        if isinstance(node, For):
            body = self.stmt(node.body, (ints | {node.index}) - {node.acc})
            return For(node.start, node.stop, node.init, node.index, node.acc, body)
        if isinstance(node, If):
            return self.conditional(node, ints)
        raise TransformError(f"unexpected node {type(node).__name__}")

    def _eps_fn(self, ints):
        return lambda a: self.eps_for(a, ints)

    def _rebuild_atoms(self, phi, ints):
        """Give calls inside the guard their error arguments."""
        if isinstance(phi, Rel):
            r = sign_test(phi)
            return Rel(r.op, self.arith(r.lhs, ints), r.rhs)
        if isinstance(phi, (And, Or, Not)):
            from .lang.ast import map_children

            return map_children(phi, lambda p: self._rebuild_atoms(p, ints))
        return phi

    def conditional(self, node: If, ints: frozenset) -> Expr:
        site = self.site
        self.site += 1
        guards = node.guards
        exact = all(is_exact_guard(g, ints) for g in guards)
        if exact:
            branches = tuple((g, self.stmt(b, ints)) for g, b in node.branches)
            return If(branches, self.stmt(node.orelse, ints), node.site)
        # the error variable of an atom is keyed by the atom before call rewriting
        plus, minus = [], []
        for g in guards:
            keyed = {}

            def eps(a, keyed=keyed):
                return keyed[a]

            for a in guard_atoms(g):
                keyed[self.arith(a, ints)] = self.eps_for(a, ints)
            g2 = self._rebuild_atoms(g, ints)
            p, m = beta_plus(g2, eps), beta_minus(g2, eps)
            plus.append(p)
            minus.append(m)
            atoms = tuple((a, None if is_int_typed(a, ints) else self.by_key[show(a)])
                          for a in guard_atoms(g))
            self.guards.append(GuardRecord(self.name, site, g, p, m, atoms, ints))
        branches = []
        calls = _guard_calls(guards)
        if calls:
            branches.append((disj(IsWarn(self.arith(c, ints)) for c in calls), WARN))
        for i, (_, body) in enumerate(node.branches):
            branches.append((conj(minus[:i] + [plus[i]]), self.stmt(body, ints)))
        branches.append((conj(minus), self.stmt(node.orelse, ints)))
        return If(tuple(branches), WARN, node.site)


def transform_decl(d: Decl, table: dict[str, TransformedDecl]) -> TransformedDecl:
    col = _Collector(table, d.params)
    col.visit(d.body, frozenset())
    eps = col.error_vars()
    b = _Builder(d.name, table, eps)
    body = b.stmt(d.body, frozenset())
    return TransformedDecl(d.name, d.params, eps, body, d, frozenset(col.tau_keys), tuple(b.guards))


def transform_expr(node: Expr, table: Optional[dict[str, TransformedDecl]] = None,
                   params: tuple[str, ...] = ()) -> tuple[Expr, tuple[ErrorVar, ...]]:
    """Transform one float program expression; ``table`` holds the callees."""
    t = transform_decl(Decl("_", tuple(params), node), dict(table or {}))
    return t.body, t.eps


def transform_program(prog: Program, fmt: Optional[FloatFormat] = None) -> TransformedProgram:
    """Lower ``prog`` to floats (if needed) and instrument every declaration."""
    fmt = fmt or prog.fmt or DOUBLE
    fprog = prog if prog.is_float else to_float_program(prog, fmt)
    table: dict[str, TransformedDecl] = {}
    for d in fprog.decls:
        table[d.name] = transform_decl(d, table)
    decls = tuple(table[d.name] for d in fprog.decls)
    guards = tuple(g for d in decls for g in d.guards)
    return TransformedProgram(decls, prog, fprog, fmt, guards)


__all__ = [
    "ErrorVar", "GuardRecord", "TransformError", "TransformedDecl", "TransformedProgram",
    "beta_minus", "beta_plus", "call_eps_keys", "default_eps", "epsilon_vars", "guard_atoms",
    "is_exact_guard", "sign_test", "transform_decl", "transform_expr", "transform_program",
]
