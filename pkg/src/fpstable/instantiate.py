"""Numeric values for error variables and overall error bounds.

An error variable bounds ``|a~ - R(a~)|`` for a guard expression ``a``.
Its value is the largest stable-path error of ``a`` over the input box,
across every place the variable is used: the guards of its own function
and, for threaded variables, the guards of the callee at each call.
Unstable paths need no bound because the transformed program has
already returned a warning on them.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from . import symbolic as S
from .fpmodel import FloatFormat, FloatVal
from .lang.ast import Call, ErrOf, For, If, Let, Num, Op, Var, Warn, desugar, free_vars, is_int_typed
from .lang.printer import show
from .optimizer import (
    DEFAULT_CONFIG, INF, BnBConfig, BnBResult, UnboundedError, float_of_bound, maximize, to_box,
)
from .semantics import (
    CEB, Evaluator, Interpretation, Pruner, canonical_order, program_fixpoint, subst_real,
)
from .transform import TransformedProgram, _calls_postorder, call_eps_keys, guard_atoms, is_exact_guard

MODES = ("rounded-input", "linked")


class UnresolvedRangeError(ValueError):
    """A parameter has no input range in numeric mode."""


def seed(name: str, mode: str, fmt: FloatFormat):
    """Input error of parameter ``name``: half an ulp of its real value, or 0."""
    if mode == "linked":
        return Num(0)
    if mode != "rounded-input":
        raise ValueError(f"unknown stability mode {mode!r}")
    return S.mul(S.const(Fraction(1, 2)), S.ulp(Var(name), fmt))


def seed_env(params, mode: str, fmt: FloatFormat) -> dict[str, list[CEB]]:
    return {x: [CEB((), (), Var(x), Var(x), seed(x, mode, fmt), True)] for x in params}


def seeded_error(e, params, mode: str, fmt: FloatFormat):
    """Replace the error placeholders of ``params`` by their seeds."""
    return subst_real(e, {}, {x: seed(x, mode, fmt) for x in params})


def _stable(cebs) -> list[CEB]:
    return list(canonical_order(c for c in cebs if c.stable and not c.is_warn))


class _Walker:
    def __init__(self, tprog: TransformedProgram, interp: Interpretation, fmt: FloatFormat,
                 pruner: Pruner):
        self.tprog = tprog
        self.ev = Evaluator(interp, fmt, pruner)
        self.memo: dict = {}

    def eval_env(self, node, env) -> list[CEB]:
        cebs = self.ev.eval(desugar(node))
        names = sorted(free_vars(node) & set(env))
        if not names:
            return _stable(cebs)
        out = []
        for c in cebs:
            for combo in itertools.product(*(env[n] for n in names)):
                b = self.ev._bind(c, names, combo)
                if b is not None:
                    out.append(b)
        return _stable(out)

    def collect(self, fname: str, env) -> dict[str, list]:
        """Stable errors of every guard expression reached from ``fname``."""
        memo_key = (fname, tuple((k, tuple(c.show() for c in env[k])) for k in sorted(env)))
        if memo_key in self.memo:
            return self.memo[memo_key]
        td = self.tprog[fname]
        out: dict[str, list] = defaultdict(list)
        self._walk(td.source.body, dict(env), frozenset(), out)
        self.memo[memo_key] = out
        return out

    def _calls(self, node, env, ints, out):
        for c in _calls_postorder(node):
            callee = self.tprog[c.name]
            if not callee.eps:
                continue
            args = [self.eval_env(a, env) for a in c.args]
            sub = self.collect(c.name, dict(zip(callee.params, args)))
            for v, item in zip(callee.eps, call_eps_keys(c, callee, ints)):
                if item is not None:
                    out[item[0]].extend(sub.get(v.key, ()))

    def _walk(self, node, env, ints, out):
        if isinstance(node, (Num, Var, Warn)):
            return
        if isinstance(node, (Op, Call)):
            self._calls(node, env, ints, out)
            return
        if isinstance(node, Let):
            self._calls(node.value, env, ints, out)
            inner = dict(env)
            inner[node.name] = self.eval_env(node.value, env)
            self._walk(node.body, inner, ints - {node.name}, out)
            return
        if isinstance(node, For):
            acc = self.eval_env(node.init, env)
            body_ints = (ints | {node.index}) - {node.acc}
            for k in range(node.start, node.stop + 1):
                inner = dict(env)
                inner[node.index] = [CEB((), (), Num(k), Num(k), Num(0), True)]
                inner[node.acc] = acc
                self._walk(node.body, inner, body_ints, out)
                acc = self.eval_env(node.body, inner)
            return
        if isinstance(node, If):
            if not all(is_exact_guard(g, ints) for g in node.guards):
                for g in node.guards:
                    for a in guard_atoms(g):
                        if not is_int_typed(a, ints):
                            out[show(a)].extend(c.e for c in self.eval_env(a, env))
                    self._calls(g, env, ints, out)
            for b in node.bodies:
                self._walk(b, env, ints, out)
            return
        raise TypeError(f"unexpected node {type(node).__name__}")


@dataclass
class Instantiation:
    """Numeric error variables, per declaration, plus how they were obtained."""

    values: dict = field(default_factory=dict)  # decl -> name -> FloatVal
    exact: dict = field(default_factory=dict)  # decl -> name -> Fraction upper bound
    symbolic: dict = field(default_factory=dict)  # decl -> name -> list of error expressions
    status: dict = field(default_factory=dict)  # decl -> name -> BnB status
    mode: str = "rounded-input"

    def args(self, decl: str) -> tuple:
        return tuple(self.values[decl].values())

    def to_json(self) -> dict:
        return {d: {n: {"value": float(v), "bound": str(self.exact[d][n]),
                        "status": self.status[d][n]}
                    for n, v in vals.items()}
                for d, vals in self.values.items()}


def _box_for(params, ranges: Mapping[str, tuple], where: str):
    missing = [p for p in params if p not in ranges]
    if missing:
        raise UnresolvedRangeError(f"{where}: no input range for {', '.join(missing)}")
    return to_box({p: ranges[p] for p in params})


def _maximize_all(exprs, box, cfg) -> tuple[Fraction, str]:
    best, status = Fraction(0), "tolerance"
    seen = set()
    for e in exprs:
        k = show(e)
        if k in seen:
            continue
        seen.add(k)
        try:
            res = maximize(e, box, cfg)
        except ZeroDivisionError as exc:
            raise UnboundedError(str(exc)) from exc
        if res.upper == INF:
            raise UnboundedError(f"error expression {k} is unbounded over the box")
        if res.upper > best:
            best = Fraction(res.upper)
        if res.status != "tolerance":
            status = res.status
    return best, status


def instantiate_errors(tprog: TransformedProgram, ranges: Optional[Mapping[str, tuple]] = None,
                       fmt: Optional[FloatFormat] = None, cfg: BnBConfig = DEFAULT_CONFIG,
                       mode: str = "rounded-input",
                       interp: Optional[Interpretation] = None) -> Instantiation:
    """Sound numeric values for every error parameter of ``tprog``.

    Raises ``UnresolvedRangeError`` when a parameter of a declaration with
    error variables has no range and ``UnboundedError`` when an error
    expression cannot be bounded over the box.
    """
    fmt = fmt or tprog.fmt
    if ranges is None:
        ranges = tprog.source.range_map
    fprog = tprog.float_program
    pruner = Pruner(fprog.range_map, fmt)
    if interp is None:
        interp = program_fixpoint(fprog, fmt=fmt)
    walker = _Walker(tprog, interp, fmt, pruner)
    inst = Instantiation(mode=mode)
    for td in tprog.decls:
        inst.values[td.name], inst.exact[td.name] = {}, {}
        inst.symbolic[td.name], inst.status[td.name] = {}, {}
        if not td.eps:
            continue
        box = _box_for(td.params, ranges, td.name)
        errs = walker.collect(td.name, seed_env(td.params, mode, fmt))
        for v in td.eps:
            exprs = errs.get(v.key, [])
            bound, status = _maximize_all(exprs, box, cfg)
            val = float_of_bound(bound, fmt)
            if not isinstance(val, FloatVal):
                raise UnboundedError(f"{td.name}: {v.name} overflows {fmt.name}")
            inst.values[td.name][v.name] = val
            inst.exact[td.name][v.name] = bound
            inst.symbolic[td.name][v.name] = exprs
            inst.status[td.name][v.name] = status
    return inst


@dataclass
class FunctionBound:
    name: str
    mode: str
    stable: Optional[Fraction]  # None when unbounded
    overall: Optional[Fraction]
    stable_status: str = "tolerance"
    overall_status: str = "tolerance"

    def stable_float(self, fmt: FloatFormat):
        return INF if self.stable is None else float_of_bound(self.stable, fmt)


def error_bounds(interp: Interpretation, ranges: Mapping[str, tuple], fmt: FloatFormat,
                 cfg: BnBConfig = DEFAULT_CONFIG, mode: str = "rounded-input",
                 only: Optional[set] = None, overall: bool = False) -> dict[str, FunctionBound]:
    """Numeric overall errors per function over stable paths.

    With ``overall`` the bound over all non-warning paths is computed too;
    it is left ``None`` otherwise.
    """
    out = {}
    for name, fs in interp.items():
        if only is not None and name not in only:
            continue
        box = _box_for(fs.params, ranges, name)
        res = {"overall": (None, "skipped")}
        choices = [("stable", [c for c in fs.cebs if c.stable])]
        if overall:
            choices.append(("overall", list(fs.cebs)))
        for label, sel in choices:
            exprs = [seeded_error(c.e, fs.params, mode, fmt) for c in sel if not c.is_warn]
            try:
                res[label] = _maximize_all(exprs, box, cfg) if exprs else (Fraction(0), "tolerance")
            except UnboundedError:
                res[label] = (None, "unbounded")
        out[name] = FunctionBound(name, mode, res["stable"][0], res["overall"][0],
                                  res["stable"][1], res["overall"][1])
    return out


__all__ = [
    "FunctionBound", "Instantiation", "MODES", "UnresolvedRangeError", "error_bounds",
    "instantiate_errors", "seed", "seed_env", "seeded_error",
]
