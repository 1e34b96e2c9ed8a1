"""Well-formedness checks shared by every ingestion path."""

from __future__ import annotations

from .ast import (
    Call, ErrOf, Expr, For, If, IsWarn, Let, Num, Op, Program, Rel, Ulp, Var, Warn, walk,
)
from .parser import KEYWORDS


class WellFormednessError(Exception):
    pass


def check_program(prog: Program, allow_warn: bool = False) -> None:
    """Raise ``WellFormednessError`` unless ``prog`` is well formed.

    Calls must target an earlier declaration with matching arity, bodies
    may only mention their parameters and locally bound names, and guards
    are sign tests without equality.
    """
    arity: dict[str, int] = {}
    for d in prog.decls:
        if d.name in KEYWORDS:
            raise WellFormednessError(f"{d.name} is a reserved word")
        if len(set(d.params)) != len(d.params):
            raise WellFormednessError(f"{d.name}: parameters must be pairwise distinct")
        for p in d.params:
            if p in KEYWORDS:
                raise WellFormednessError(f"{d.name}: parameter {p} is a reserved word")
        _check_expr(d.body, set(d.params), arity, d.name, allow_warn)
        arity[d.name] = len(d.params)
    for v, lo, hi in prog.ranges:
        if lo > hi:
            raise WellFormednessError(f"empty range for {v}")


def _check_expr(e, scope: set[str], arity: dict[str, int], where: str, allow_warn: bool):
    if isinstance(e, Var):
        if e.name not in scope:
            raise WellFormednessError(f"{where}: free variable {e.name}")
        return
    if isinstance(e, Num):
        return
    if isinstance(e, Warn):
        if not allow_warn:
            raise WellFormednessError(f"{where}: warn is only allowed in transformed programs")
        return
    if isinstance(e, (ErrOf, Ulp)):
        raise WellFormednessError(f"{where}: symbolic node {type(e).__name__} in a program")
    if isinstance(e, Call):
        if e.name == where:
            raise WellFormednessError(f"{where}: recursive call (only for-loops may iterate)")
        if e.name not in arity:
            raise WellFormednessError(f"{where}: call to undeclared function {e.name}")
        if arity[e.name] != len(e.args):
            raise WellFormednessError(
                f"{where}: {e.name} expects {arity[e.name]} arguments, got {len(e.args)}")
        for a in e.args:
            _require_arith(a, where)
            _check_expr(a, scope, arity, where, allow_warn)
        return
    if isinstance(e, Op):
        for a in e.args:
            _require_arith(a, where)
            _check_expr(a, scope, arity, where, allow_warn)
        return
    if isinstance(e, Let):
        _require_arith(e.value, where)
        _check_expr(e.value, scope, arity, where, allow_warn)
        _check_expr(e.body, scope | {e.name}, arity, where, allow_warn)
        return
    if isinstance(e, For):
        if e.start > e.stop:
            raise WellFormednessError(f"{where}: loop bounds {e.start} > {e.stop}")
        if not isinstance(e.init, Num):
            raise WellFormednessError(f"{where}: loop accumulator must start at a literal")
        _check_expr(e.body, scope | {e.index, e.acc}, arity, where, allow_warn)
        return
    if isinstance(e, If):
        for g, b in e.branches:
            _check_bool(g, scope, arity, where, allow_warn)
            _check_expr(b, scope, arity, where, allow_warn)
        _check_expr(e.orelse, scope, arity, where, allow_warn)
        return
    raise WellFormednessError(f"{where}: unexpected node {type(e).__name__}")


def _check_bool(b, scope, arity, where, allow_warn):
    for n in walk(b):
        if isinstance(n, Rel):
            _require_arith(n.lhs, where)
            _require_arith(n.rhs, where)
            _check_expr(n.lhs, scope, arity, where, allow_warn)
            _check_expr(n.rhs, scope, arity, where, allow_warn)
        elif isinstance(n, IsWarn):
            if not allow_warn:
                raise WellFormednessError(f"{where}: is_warn only allowed in transformed programs")
            _check_expr(n.expr, scope, arity, where, allow_warn)
        elif isinstance(n, Expr):
            # expressions below a Rel were handled with it
            continue


def is_arith(e) -> bool:
    """Arithmetic expressions: literals, variables, operators and calls."""
    if isinstance(e, (Num, Var)):
        return True
    if isinstance(e, (Op, Call)):
        return all(is_arith(a) for a in e.args)
    return False


def _require_arith(e, where: str) -> None:
    if not is_arith(e):
        raise WellFormednessError(
            f"{where}: operands, arguments, let values and comparisons must be arithmetic "
            "expressions (no if, let, for or warn inside them)")
