"""C emission of transformed programs, with contracts and verification conditions.

Each transformed function becomes a C function returning a tagged record
``{int warning; T value;}``.  The warning is reached by ``goto``: calls are
hoisted into temporaries and their flag is checked right away, as the
transformed program's explicit warning tests prescribe.  The generated code
follows the AST operation by operation, so with strict IEEE evaluation
(``-ffp-contract=off``, no fast-math, SSE arithmetic) it computes the same
bits as the float evaluators.

Contracts are written in an ACSL-like dialect inside comments; the
verification-condition text is the authoritative artifact.
"""

from __future__ import annotations

import ctypes
import hashlib
import itertools
import os
import re
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from .fpmodel import FloatFormat, FloatVal, round_nearest
from .instantiate import (
    FunctionBound, Instantiation, UnresolvedRangeError, error_bounds, instantiate_errors,
)
from .lang.ast import (
    And, BConst, Call, ErrOf, For, If, IsWarn, Let, Not, Num, Op, Or, Program, Rel, Ulp, Var,
    Warn, desugar, is_int_typed, substitute, walk,
)
from .lang.printer import fmt_number, show
from .optimizer import DEFAULT_CONFIG, INF, BnBConfig
from .semantics import Interpretation, SemanticsError, overall_error, program_fixpoint
from .transform import TransformedProgram


class CodegenError(Exception):
    pass


C_KEYWORDS = frozenset("""
auto break case char const continue default do double else enum extern float for goto if
inline int long register restrict return short signed sizeof static struct switch typedef
union unsigned void volatile while _Bool _Complex _Imaginary main fabs fabsf llabs fp_result
res warned
""".split())


def _unique(base: str, taken: set) -> str:
    name = re.sub(r"\W", "_", base)
    if not name or name[0].isdigit():
        name = "v_" + name
    while name in taken or name in C_KEYWORDS or name.startswith("__"):
        name += "_"
    taken.add(name)
    return name


@dataclass
class Names:
    """C and logic identifiers for every declaration and parameter."""

    tau: dict = field(default_factory=dict)  # decl -> C function
    num: dict = field(default_factory=dict)  # decl -> numeric wrapper
    real: dict = field(default_factory=dict)  # decl -> real logic function
    fp: dict = field(default_factory=dict)  # decl -> float logic function
    params: dict = field(default_factory=dict)  # decl -> source param -> C name
    reals: dict = field(default_factory=dict)  # decl -> input param -> name of its real value
    errs: dict = field(default_factory=dict)  # decl -> input param -> name of its input error

    @classmethod
    def build(cls, tprog: TransformedProgram) -> "Names":
        n = cls()
        taken: set = set()
        for d in tprog.decls:
            n.tau[d.name] = _unique(f"{d.name}_tau", taken)
            n.num[d.name] = _unique(f"{d.name}_num", taken)
            n.real[d.name] = _unique(f"{d.name}_real", taken)
            n.fp[d.name] = _unique(f"{d.name}_fp", taken)
        for d in tprog.decls:
            local = set(taken)
            n.params[d.name] = {p: _unique(p, local) for p in d.all_params}
            n.reals[d.name] = {p: _unique(f"{p}_r", local) for p in d.params}
            n.errs[d.name] = {p: _unique(f"e_{p}", local) for p in d.params}
        return n

    def all_identifiers(self) -> list[str]:
        out = [*self.tau.values(), *self.num.values(), *self.real.values(), *self.fp.values()]
        for table in (self.params, self.reals, self.errs):
            for m in table.values():
                out.extend(m.values())
        return out


@dataclass
class EmitPlan:
    """Everything emission needs besides the transformed program.

    ``eps`` holds the numeric error values per declaration, ``bounds`` the
    numeric stable-only overall error and ``symbolic`` its symbolic form.
    In symbolic mode only ``symbolic`` is used.
    """

    fmt: FloatFormat
    mode: str = "numeric"
    eps: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    symbolic: dict = field(default_factory=dict)
    ranges: dict = field(default_factory=dict)
    stability: str = "rounded-input"
    unit: str = "program"
    names: Optional[Names] = None

    def check(self, tprog: TransformedProgram) -> None:
        if self.mode not in ("numeric", "symbolic"):
            raise CodegenError(f"unknown emission mode {self.mode!r}")
        if self.names is None:
            self.names = Names.build(tprog)
        if self.mode == "numeric":
            for d in tprog.decls:
                missing = [v for v in d.eps_names if v not in self.eps.get(d.name, {})]
                if missing:
                    raise CodegenError(f"{d.name}: no value for {', '.join(missing)}")


def make_plan(tprog: TransformedProgram, mode: str = "numeric",
              ranges: Optional[Mapping[str, tuple]] = None,
              interp: Optional[Interpretation] = None, inst: Optional[Instantiation] = None,
              bounds: Optional[Mapping[str, FunctionBound]] = None,
              cfg: BnBConfig = DEFAULT_CONFIG, stability: str = "rounded-input",
              unit: str = "program") -> EmitPlan:
    """Run whatever analysis is missing and collect the emission inputs."""
    fmt = tprog.fmt
    ranges = dict(tprog.source.range_map if ranges is None else ranges)
    if interp is None:
        interp = program_fixpoint(tprog.float_program, ranges=tprog.source.range_map, fmt=fmt)
    plan = EmitPlan(fmt, mode, ranges=ranges, stability=stability, unit=unit)
    for name, fs in interp.items():
        try:
            plan.symbolic[name] = overall_error(fs.stable(), "stable-only")
        except SemanticsError:
            plan.symbolic[name] = None
    if mode == "numeric":
        if inst is None:
            inst = instantiate_errors(tprog, ranges, fmt, cfg, "rounded-input", interp)
        if bounds is None:
            bounds = error_bounds(interp, ranges, fmt, cfg, stability)
        plan.eps = {d: dict(v) for d, v in inst.values.items()}
        for name, b in bounds.items():
            plan.bounds[name] = None if b.stable is None else b.stable_float(fmt)
    plan.check(tprog)
    return plan


# ---------------------------------------------------------------------------
# literals


def c_float(v, fmt: FloatFormat) -> str:
    """Exact C literal for a value of ``fmt``."""
    if not isinstance(v, FloatVal):
        fv = round_nearest(Fraction(v), fmt)
        if fv.value != Fraction(v):
            raise CodegenError(f"{v} is not representable in {fmt.name}")
        v = fv
    x = float(v)
    if x == int(x) and abs(x) < 2 ** 53:
        s = f"{int(x)}.0"
    else:
        s = x.hex()
    suffix = "f" if fmt.precision == 24 else ""
    return f"({s}{suffix})" if x < 0 else s + suffix


def _dec(v) -> str:
    """Exact decimal or rational text of a number, for logic formulas."""
    if isinstance(v, FloatVal):
        v = v.value
    s = fmt_number(Fraction(v) if not isinstance(v, int) else v)
    if s.startswith("{"):
        n, d = s[1:-1].split("/")
        return f"({n}.0 / {d}.0)"
    return s


def _num_text(v) -> str:
    """Short round-trip text of a float value."""
    return repr(float(v))


# ---------------------------------------------------------------------------
# C functions


class _CFunction:
    """Statement generator for one transformed declaration."""

    def __init__(self, tprog: TransformedProgram, plan: EmitPlan, name: str):
        self.tprog = tprog
        self.plan = plan
        self.fmt = plan.fmt
        self.T = plan.fmt.c_type
        self.decl = tprog[name]
        self.names = plan.names
        self.lines: list[str] = []
        self.temps: dict[str, str] = {}
        self.taken = set(self.names.params[name].values()) | set(self.names.all_identifiers())
        self.labels = itertools.count()
        self.used_labels: set[str] = set()

    def temp(self, stem: str, ctype: str) -> str:
        name = _unique(f"{stem}{len(self.temps)}", self.taken)
        self.temps[name] = ctype
        return name

    def emit(self, line: str, depth: int):
        self.lines.append("    " * depth + line)

    def fabs(self) -> str:
        return "fabsf" if self.fmt.precision == 24 else "fabs"

    def is_int(self, e, env) -> bool:
        return is_int_typed(e, frozenset(k for k, (_, t) in env.items() if t == "int"))

    def as_float(self, code: str, kind: str) -> str:
        if kind != "int":
            return code
        m = re.fullmatch(r"\(?(-?\d+)LL\)?", code)
        if m:
            return c_float(int(m.group(1)), self.fmt)
        return f"(({self.T}){code})"

    def const(self, n: Num, want_float: bool = False) -> tuple[str, str]:
        if n.is_int and not want_float:
            return (f"{n.value}LL" if n.value >= 0 else f"({n.value}LL)"), "int"
        v = n.value
        if not isinstance(v, FloatVal):
            v = round_nearest(Fraction(v), self.fmt)
            if n.is_int and v.value != n.value:
                raise CodegenError(f"integer {n.value} is not exact in {self.fmt.name}")
        return c_float(v, self.fmt), "flt"

    # expressions -----------------------------------------------------------

    def expr(self, n, env, depth, target) -> tuple[str, str]:
        """C expression and its kind ("int" or "flt"); needed statements are emitted first."""
        if isinstance(n, Num):
            return self.const(n)
        if isinstance(n, Var):
            return env[n.name]
        if isinstance(n, Op):
            return self.op(n, env, depth, target)
        if isinstance(n, Call):
            args = [self.as_float(*self.expr(a, env, depth, target)) for a in n.args]
            callee = self.tprog[n.name]
            if len(args) != len(callee.all_params):
                raise CodegenError(f"call of {n.name} with {len(args)} arguments")
            t = self.temp("c", "fp_result")
            self.emit(f"{t} = {self.names.tau[n.name]}({', '.join(args)});", depth)
            self.emit(f"if ({t}.warning) goto {target};", depth)
            self.used_labels.add(target)
            return f"{t}.value", "flt"
        if isinstance(n, Warn):
            self.emit(f"goto {target};", depth)
            self.used_labels.add(target)
            return c_float(0, self.fmt), "flt"
        if isinstance(n, Let):
            code, kind = self.expr(n.value, env, depth, target)
            t = self.temp(f"{n.name}_", "long long" if kind == "int" else self.T)
            self.emit(f"{t} = {code};", depth)
            inner = dict(env)
            inner[n.name] = (t, kind)
            return self.expr(n.body, inner, depth, target)
        if isinstance(n, If):
            kind = "int" if self.is_int(n, env) else "flt"
            out = self.temp("r", "long long" if kind == "int" else self.T)
            d = depth
            for g, b in n.branches:
                cond = self.test(g, env, d, target)
                self.emit(f"if ({cond}) {{", d)
                self.assign(out, kind, b, env, d + 1, target)
                self.emit("} else {", d)
                d += 1
            self.assign(out, kind, n.orelse, env, d, target)
            for k in range(d - 1, depth - 1, -1):
                self.emit("}", k)
            return out, kind
        if isinstance(n, For):
            acc = self.temp(f"{n.acc}_", self.T)
            idx = self.temp(f"{n.index}_", "long long")
            init, k0 = self.expr(n.init, env, depth, target)
            self.emit(f"{acc} = {self.as_float(init, k0)};", depth)
            self.emit(f"for ({idx} = {n.start}LL; {idx} <= {n.stop}LL; {idx}++) {{", depth)
            inner = dict(env)
            inner[n.index] = (idx, "int")
            inner[n.acc] = (acc, "flt")
            body, kb = self.expr(n.body, inner, depth + 1, target)
            self.emit(f"{acc} = {self.as_float(body, kb)};", depth + 1)
            self.emit("}", depth)
            return acc, "flt"
        raise CodegenError(f"cannot emit {type(n).__name__}")

    def assign(self, out, kind, body, env, depth, target):
        code, k = self.expr(body, env, depth, target)
        if not isinstance(body, Warn):
            self.emit(f"{out} = {code if kind == 'int' else self.as_float(code, k)};", depth)

    def op(self, n: Op, env, depth, target) -> tuple[str, str]:
        exact = self.is_int(n, env)
        xs = []
        for a in n.args:
            if isinstance(a, Num) and not exact:
                xs.append(self.const(a, want_float=True))
            else:
                xs.append(self.expr(a, env, depth, target))
        if exact:
            c = [x for x, _ in xs]
            if n.op == "neg":
                return f"(-{c[0]})", "int"
            if n.op == "abs":
                return f"llabs({c[0]})", "int"
            return f"({c[0]} {n.op} {c[1]})", "int"
        c = [self.as_float(x, k) for x, k in xs]
        if n.op == "neg":
            return f"(-{c[0]})", "flt"
        if n.op == "abs":
            return f"{self.fabs()}({c[0]})", "flt"
        if n.op == "max":
            acc = c[0]
            for x in c[1:]:
                # first argument wins ties, as in the evaluators
                acc = f"(({x}) > ({acc}) ? ({x}) : ({acc}))"
            return acc, "flt"
        return f"({c[0]} {n.op} {c[1]})", "flt"

    # conditions ------------------------------------------------------------

    def test(self, b, env, depth, target) -> str:
        if isinstance(b, BConst):
            return "1" if b.value else "0"
        if isinstance(b, Rel):
            (x, kx), (y, ky) = (self.expr(a, env, depth, target) for a in (b.lhs, b.rhs))
            if kx != ky:
                x, y = self.as_float(x, kx), self.as_float(y, ky)
            return f"({x} {b.op} {y})"
        if isinstance(b, Not):
            return f"(!{self.test(b.arg, env, depth, target)})"
        if isinstance(b, IsWarn):
            flag = self.temp("w", "int")
            label = f"L{next(self.labels)}"
            self.emit(f"{flag} = 1;", depth)
            self.expr(b.expr, env, depth, label)
            self.emit(f"{flag} = 0;", depth)
            if label in self.used_labels:
                self.emit(f"{label}: ;", depth)
            return flag
        if isinstance(b, (And, Or)):
            return self.junction(b, env, depth, target)
        raise CodegenError(f"cannot emit {type(b).__name__}")

    def junction(self, b, env, depth, target) -> str:
        join = " && " if isinstance(b, And) else " || "
        first = self.test(b.args[0], env, depth, target)
        rest = []
        mark = len(self.lines)
        for a in b.args[1:]:
            start = len(self.lines)
            code = self.test(a, env, depth + 1, target)
            rest.append((code, self.lines[start:]))
            del self.lines[start:]
        del self.lines[mark:]
        if all(not stmts for _, stmts in rest):
            return "(" + join.join([first] + [c for c, _ in rest]) + ")"
        # later operands need statements: keep short-circuit order explicitly
        flag = self.temp("b", "int")
        self.emit(f"{flag} = {first};", depth)
        for code, stmts in rest:
            self.emit(f"if ({'' if isinstance(b, And) else '!'}{flag}) {{", depth)
            self.lines.extend(stmts)
            self.emit(f"{flag} = {code};", depth + 1)
            self.emit("}", depth)
        return flag

    # the whole function ----------------------------------------------------

    def signature(self) -> str:
        ps = self.names.params[self.decl.name]
        args = ", ".join(f"{self.T} {ps[p]}" for p in self.decl.all_params) or "void"
        return f"fp_result {self.names.tau[self.decl.name]}({args})"

    def render(self) -> str:
        d = self.decl
        ps = self.names.params[d.name]
        env = {p: (ps[p], "flt") for p in d.all_params}
        code, kind = self.expr(d.body, env, 1, "warned")
        body = self.lines
        out = [self.signature() + " {", f"    fp_result res = {{0, {c_float(0, self.fmt)}}};"]
        for t, ctype in self.temps.items():
            out.append(f"    {ctype} {t};")
        out.extend(body)
        if not isinstance(d.body, Warn):
            out.append(f"    res.value = {self.as_float(code, kind)};")
            out.append("    return res;")
        if "warned" in self.used_labels:
            out.append("warned:")
            out.append("    res.warning = 1;")
            out.append(f"    res.value = {c_float(0, self.fmt)};")
            out.append("    return res;")
        out.append("}")
        return "\n".join(out)


def _wrapper(tprog, plan: EmitPlan, name: str) -> str:
    d = tprog[name]
    T = plan.fmt.c_type
    ps = plan.names.params[name]
    args = ", ".join(f"{T} {ps[p]}" for p in d.params) or "void"
    vals = [ps[p] for p in d.params]
    vals += [c_float(plan.eps[name][v], plan.fmt) for v in d.eps_names]
    lines = [f"/* {name} with its error parameters bound to sound values */",
             f"fp_result {plan.names.num[name]}({args}) {{",
             f"    return {plan.names.tau[name]}({', '.join(vals)});",
             "}"]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# logic terms: the real program, the plain float program and error expressions


class _Logic:
    """Printer of expressions as logic terms.

    ``float_ops`` selects rounded operations; ``style`` is ``"acsl"`` or
    ``"vc"`` (the verification-condition notation).
    """

    def __init__(self, plan: EmitPlan, style: str, float_ops: bool, var_map: Mapping[str, str],
                 err_map: Mapping[str, str] = None, calls: Mapping[str, str] = None):
        self.plan = plan
        self.style = style
        self.float_ops = float_ops
        self.var_map = var_map
        self.err_map = err_map or {}
        self.calls = calls
        self.ints: frozenset = frozenset()

    def num(self, n: Num) -> str:
        if n.is_int:
            return str(n.value) if n.value >= 0 else f"({n.value})"
        v = n.value
        if not self.float_ops and n.source is not None:
            v = n.source
        if isinstance(v, FloatVal) and self.style == "acsl":
            return c_float(v, self.plan.fmt)
        s = _dec(v)
        return f"({s})" if s.startswith("-") else s

    def __call__(self, e, env=None) -> str:
        env = env or {}
        if isinstance(e, Num):
            return self.num(e)
        if isinstance(e, Var):
            return env.get(e.name, self.var_map.get(e.name, e.name))
        if isinstance(e, ErrOf):
            return self.err_map.get(e.name, f"err_{e.name}")
        if isinstance(e, Ulp):
            return f"ulp_{e.fmt.name}({self(e.arg, env)})"
        if isinstance(e, Warn):
            if self.style == "acsl":
                raise CodegenError("warn has no logic counterpart")
            return "warn"
        if isinstance(e, Call):
            args = ", ".join(self(a, env) for a in e.args)
            if self.calls is not None:
                return f"{self.calls[e.name]}({args})"
            return f"{e.name}({args})"
        if isinstance(e, Op):
            return self.op(e, env)
        if isinstance(e, Let):
            if self.style == "acsl":
                inner = dict(env)
                inner[e.name] = e.name
                return f"(\\let {e.name} = {self(e.value, env)}; {self(e.body, inner)})"
            return self(substitute(e.body, {e.name: e.value}), env)
        if isinstance(e, For):
            return self(desugar(e), env)
        if isinstance(e, If):
            out = self(e.orelse, env)
            for g, b in reversed(e.branches):
                out = f"({self.test(g, env)} ? {self(b, env)} : {out})"
            return out
        raise CodegenError(f"no logic term for {type(e).__name__}")

    def op(self, e: Op, env) -> str:
        xs = [self(a, env) for a in e.args]
        acsl = self.style == "acsl"
        if e.op == "neg":
            return f"(-{xs[0]})"
        if e.op == "abs":
            return f"\\abs({xs[0]})" if acsl else f"|{xs[0]}|"
        if e.op == "max":
            return ("\\max(" if acsl else "max(") + ", ".join(xs) + ")"
        rounded = self.float_ops and not is_int_typed(e, self.ints)
        if not rounded:
            return f"({xs[0]} {e.op} {xs[1]})"
        if acsl:
            return f"rnd({xs[0]} {e.op} {xs[1]})"
        return f"({xs[0]} {e.op}~ {xs[1]})"

    def test(self, b, env=None) -> str:
        env = env or {}
        acsl = self.style == "acsl"
        if isinstance(b, BConst):
            return ("\\true" if b.value else "\\false") if acsl else str(b.value).lower()
        if isinstance(b, Rel):
            return f"{self(b.lhs, env)} {b.op} {self(b.rhs, env)}"
        if isinstance(b, Not):
            return f"!({self.test(b.arg, env)})" if acsl else f"not ({self.test(b.arg, env)})"
        if isinstance(b, (And, Or)):
            if acsl:
                join = " && " if isinstance(b, And) else " || "
            else:
                join = " and " if isinstance(b, And) else " or "
            return "(" + join.join(self.test(a, env) for a in b.args) + ")"
        if isinstance(b, IsWarn):
            return f"{self(b.expr, env)} = warn"
        raise CodegenError(f"no logic formula for {type(b).__name__}")


def _let_values(body) -> dict:
    """Let-bound names outside loops, mapped to their values over the parameters."""
    out: dict = {}

    def visit(node, env):
        if isinstance(node, Let):
            visit(node.value, env)
            v = substitute(node.value, env)
            out.setdefault(node.name, v)
            inner = dict(env)
            inner[node.name] = v
            visit(node.body, inner)
            return
        if isinstance(node, For):
            visit(node.init, env)
            return
        for c in node.children():
            visit(c, env)

    visit(body, {})
    return out


def _eps_atom(tprog: TransformedProgram, name: str, var):
    """Float atom of an error variable over the parameters, or None for loop-local atoms."""
    if var.expr is None:
        return None
    fdecl = tprog.float_program.decl(name)
    atom = substitute(var.expr, _let_values(fdecl.body))
    free = {n.name for n in walk(atom) if isinstance(n, Var)}
    if not free <= set(fdecl.params):
        return None
    return atom


# ---------------------------------------------------------------------------
# ACSL-style annotations


def _range_text(plan: EmitPlan, p: str, v: str) -> Optional[str]:
    r = plan.ranges.get(p)
    if r is None:
        return None
    return f"{_dec(Fraction(r[0]))} <= {v} <= {_dec(Fraction(r[1]))}"


def _input_hyps(plan: EmitPlan, d, style: str) -> list[str]:
    """Range and input-rounding hypotheses over the real inputs."""
    ps = plan.names.params[d.name]
    rs = plan.names.reals[d.name]
    es = plan.names.errs[d.name]
    out = []
    for p in d.params:
        rng = _range_text(plan, p, rs[p])
        if rng:
            out.append(rng)
    absv = (lambda t: f"\\abs({t})") if style == "acsl" else (lambda t: f"|{t}|")
    for p in d.params:
        if plan.stability == "linked":
            out.append(f"{ps[p]} == {rs[p]}" if style == "acsl" else f"{ps[p]} = {rs[p]}")
        elif plan.mode == "symbolic":
            out.append(f"{absv(f'{ps[p]} - {rs[p]}')} <= {es[p]}")
        else:
            out.append(f"{absv(f'{ps[p]} - {rs[p]}')} <= ulp_{plan.fmt.name}({rs[p]}) / 2")
    return out


def _binders(plan: EmitPlan, d) -> list[str]:
    rs = plan.names.reals[d.name]
    names = [rs[p] for p in d.params]
    if plan.mode == "symbolic" and plan.stability != "linked":
        names += [plan.names.errs[d.name][p] for p in d.params]
    return names


def _bound_term(plan: EmitPlan, name: str, d, style: str) -> Optional[str]:
    if plan.mode == "numeric":
        b = plan.bounds.get(name)
        if b is None or b is INF:
            return None
        return c_float(b, plan.fmt) if style == "acsl" else _num_text(b)
    e = plan.symbolic.get(name)
    if e is None:
        return None
    pr = _Logic(plan, style, False, plan.names.reals[name], plan.names.errs[name])
    if plan.stability == "linked":
        e = substitute(e, {}, {p: Num(0) for p in d.params})
    return pr(e)


def _axiomatic(tprog: TransformedProgram, plan: EmitPlan) -> str:
    fmt = plan.fmt
    rnd = "\\round_float" if fmt.precision == 24 else "\\round_double"
    unit = re.sub(r"\W", "_", plan.unit)
    lines = [f"/*@ axiomatic {unit}_spec {{",
             f"  @   logic real rnd(real x) = {rnd}(\\NearestEven, x);",
             f"  @   logic real ulp_{fmt.name}(real x);",
             f"  @   axiom ulp_{fmt.name}_pos: \\forall real x; ulp_{fmt.name}(x) > 0;"]
    for d in tprog.source.decls:
        params = ", ".join(f"real {p}" for p in d.params)
        real = _Logic(plan, "acsl", False, {}, calls=plan.names.real)
        lines.append(f"  @   logic real {plan.names.real[d.name]}({params}) = {real(d.body)};")
    for d in tprog.float_program.decls:
        params = ", ".join(f"real {p}" for p in d.params)
        flt = _Logic(plan, "acsl", True, {}, calls=plan.names.fp)
        lines.append(f"  @   logic real {plan.names.fp[d.name]}({params}) = {flt(d.body)};")
    lines += ["  @ }", "  @*/"]
    return "\n".join(lines)


def _contract(tprog: TransformedProgram, plan: EmitPlan, name: str) -> str:
    d = tprog[name]
    ps = plan.names.params[name]
    rs = plan.names.reals[name]
    fmt = plan.fmt
    quant = ", ".join(f"real {b}" for b in _binders(plan, d))
    hyps = " && ".join(_input_hyps(plan, d, "acsl"))
    lines = []
    for p in d.params:
        r = plan.ranges.get(p)
        if r is not None:
            lo, hi = (round_nearest(Fraction(x), fmt) for x in r)
            lines.append(f"requires {c_float(lo, fmt)} <= {ps[p]} <= {c_float(hi, fmt)};")
    flt = _Logic(plan, "acsl", True, ps, calls=plan.names.fp)
    real = _Logic(plan, "acsl", False, rs, calls=plan.names.real)
    for v in d.eps:
        e = ps[v.name]
        atom = _eps_atom(tprog, name, v)
        if atom is None:
            lines.append(f"requires {e} >= 0;  // bounds the loop-local atom {v.key}")
            continue
        diff = f"\\abs({flt(atom)} - {real(atom)})"
        if d.params:
            lines.append(f"requires {e} >= 0 && \\forall {quant}; {hyps} ==> {diff} <= {e};")
        else:
            lines.append(f"requires {e} >= 0 && {diff} <= {e};")
    bound = _bound_term(plan, name, d, "acsl")
    call = f"{plan.names.real[name]}({', '.join(rs[p] for p in d.params)})"
    if bound is None:
        lines.append("// no stable path: the result carries no error claim")
    elif d.params:
        lines.append(f"ensures !\\result.warning ==> \\forall {quant}; {hyps} ==> "
                     f"\\abs(\\result.value - {call}) <= {bound};")
    else:
        lines.append(f"ensures !\\result.warning ==> \\abs(\\result.value - {call}) <= {bound};")
    return "/*@ " + "\n  @ ".join(lines) + "\n  @*/"


def emit_acsl(tprog: TransformedProgram, plan: EmitPlan) -> dict:
    """Annotation blocks: ``"axiomatic"`` plus one contract per declaration."""
    plan.check(tprog)
    out = {"axiomatic": _axiomatic(tprog, plan)}
    for d in tprog.decls:
        out[d.name] = _contract(tprog, plan, d.name)
    return out


# ---------------------------------------------------------------------------
# translation unit and header


def _guard_name(unit: str) -> str:
    return re.sub(r"\W", "_", unit).upper() + "_H"


def emit_header(tprog: TransformedProgram, plan: EmitPlan) -> str:
    plan.check(tprog)
    T = plan.fmt.c_type
    g = _guard_name(plan.unit)
    lines = [
        f"/* {plan.unit}: test-stable {plan.fmt.name} precision functions.",
        " *",
        " * Every function returns an fp_result.  When warning is nonzero the",
        " * floating-point control flow may differ from the real-valued one and",
        f" * value is meaningless (set to 0).  Otherwise value is the {T} result.",
        " * Error parameters must be at least the round-off of the guard",
        " * expressions they are named after; the *_num variants bind them.",
        " */",
        f"#ifndef {g}",
        f"#define {g}",
        "",
        "typedef struct {",
        "    int warning;",
        f"    {T} value;",
        "} fp_result;",
        "",
    ]
    for d in tprog.decls:
        lines.append(_CFunction(tprog, plan, d.name).signature() + ";")
    if plan.mode == "numeric":
        for d in tprog.decls:
            ps = plan.names.params[d.name]
            args = ", ".join(f"{T} {ps[p]}" for p in d.params) or "void"
            lines.append(f"fp_result {plan.names.num[d.name]}({args});")
    lines += ["", f"#endif /* {g} */", ""]
    return "\n".join(lines)


def emit_c(tprog: TransformedProgram, plan: EmitPlan, header: Optional[str] = None) -> str:
    """The translation unit, contracts included."""
    plan.check(tprog)
    acsl = emit_acsl(tprog, plan)
    lines = [f"/* Generated from {plan.unit}; compile with -std=c99 -ffp-contract=off "
             "-fno-fast-math. */",
             "#include <math.h>",
             "#include <stdlib.h>",
             f'#include "{header or plan.unit + ".h"}"',
             "",
             acsl["axiomatic"],
             ""]
    for d in tprog.decls:
        lines += [acsl[d.name], _CFunction(tprog, plan, d.name).render(), ""]
    if plan.mode == "numeric":
        for d in tprog.decls:
            lines += [_wrapper(tprog, plan, d.name), ""]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# verification conditions


class _Structure:
    """The structural formula of a transformed body, over a result variable."""

    def __init__(self, tprog, plan: EmitPlan, name: str, values: Mapping[str, str]):
        self.tprog = tprog
        self.plan = plan
        self.name = name
        ps = plan.names.params[name]
        var_map = {p: values.get(p, ps[p]) for p in tprog[name].all_params}
        self.pr = _Logic(plan, "vc", True, var_map, calls=plan.names.tau)
        self.binders: list[str] = []
        self.calls: dict[str, str] = {}
        self.call_defs: list[str] = []
        self.taken = set(plan.names.all_identifiers()) | {"res", "warn"}

    def fresh(self, base: str) -> str:
        v = _unique(base, self.taken)
        self.binders.append(v)
        return v

    def hoist(self, e, env):
        """Replace calls by result variables, defining each one once."""
        if isinstance(e, Call):
            args = tuple(self.hoist(a, env) for a in e.args)
            text = self.pr(Call(e.name, args), env)
            if text not in self.calls:
                v = self.fresh(f"res_{e.name}")
                self.calls[text] = v
                callee = self.tprog[e.name]
                self.call_defs.append(f"{v} = {text}")
                subst = ", ".join(f"{self.plan.names.params[e.name][p]} <- {self.pr(a, env)}"
                                  for p, a in zip(callee.all_params, args))
                self.call_defs.append(
                    f"phi_{self.plan.names.tau[e.name]}[{subst}, res <- {v}]")
            return Var(self.calls[text])
        if isinstance(e, Op):
            return Op(e.op, tuple(self.hoist(a, env) for a in e.args))
        return e

    def hoist_bool(self, b, env):
        if isinstance(b, Rel):
            return Rel(b.op, self.hoist(b.lhs, env), self.hoist(b.rhs, env))
        if isinstance(b, (And, Or)):
            return type(b)(tuple(self.hoist_bool(a, env) for a in b.args))
        if isinstance(b, Not):
            return Not(self.hoist_bool(b.arg, env))
        if isinstance(b, IsWarn):
            return IsWarn(self.hoist(b.expr, env))
        return b

    def formula(self, e, res: str, env, ints: frozenset) -> str:
        self.pr.ints = ints
        if isinstance(e, Warn):
            return f"{res} = warn"
        if isinstance(e, Let):
            v = self.fresh(e.name)
            val = self.pr(self.hoist(e.value, env), env)
            inner = dict(env)
            inner[e.name] = v
            ints2 = ints | {v} if is_int_typed(e.value, ints) else ints
            return f"({v} = {val} and {self.formula(e.body, res, inner, ints2)})"
        if isinstance(e, For):
            return self.formula(desugar(e), res, env, ints)
        if isinstance(e, If):
            out = self.formula(e.orelse, res, env, ints)
            for g, b in reversed(e.branches):
                self.pr.ints = ints
                t = self.pr.test(self.hoist_bool(g, env), env)
                body = self.formula(b, res, env, ints)
                out = f"(({t}) => {body}) and (not ({t}) => {out})"
                out = f"({out})"
            return out
        return f"{res} = {self.pr(self.hoist(e, env), env)}"


def _vc(tprog: TransformedProgram, plan: EmitPlan, name: str) -> str:
    d = tprog[name]
    ps = plan.names.params[name]
    rs = plan.names.reals[name]
    numeric = plan.mode == "numeric"
    values = {}
    if numeric:
        values = {v: _num_text(plan.eps[name][v]) for v in d.eps_names}
    st = _Structure(tprog, plan, name, values)
    phi = st.formula(d.body, "res", {}, frozenset())
    hyps = _input_hyps(plan, d, "vc")
    flt = _Logic(plan, "vc", True, {**ps, **values},
                 calls={f.name: f"{f.name}~" for f in tprog.decls})
    real = _Logic(plan, "vc", False, rs, calls=None)
    eps_lines = []
    for v in d.eps:
        e = values.get(v.name, ps[v.name])
        atom = _eps_atom(tprog, name, v)
        if not numeric:
            eps_lines.append(f"{e} >= 0")
        if atom is not None:
            eps_lines.append(f"|{flt(atom)} - {real(atom)}| <= {e}")
    bound = _bound_term(plan, name, d, "vc")
    call = f"{name}({', '.join(rs[p] for p in d.params)})"
    floats = [ps[p] for p in d.params] + ["res"] + st.binders
    reals = _binders(plan, d) + ([] if numeric else [ps[v] for v in d.eps_names])
    head = f"phi_{plan.names.tau[name]} :="
    quant = f"  forall {', '.join(floats)} in F"
    if reals:
        quant += f"; {', '.join(reals)} in R"
    body = hyps + eps_lines + st.call_defs + ["phi'"]
    concl = ("true" if bound is None else
             f"(res != warn => |res - {call}| <= {bound})")
    lines = [head, quant + ","]
    lines.append("      " + "\n    and ".join(body))
    lines.append(f"    => {concl}")
    lines.append(f"  where phi' := {phi}")
    if numeric and d.eps:
        subst = ", ".join(f"{v} <- {values[v]}" for v in d.eps_names)
        lines.append(f"  with {subst}")
    if bound is None:
        lines.append("  (no stable path: only warnings or unbounded errors)")
    return "\n".join(lines)


def emit_vcs(tprog: TransformedProgram, plan: EmitPlan) -> str:
    """One verification condition per transformed function.

    ``x ~op y`` is the rounded operation of the target format and ``warn``
    the warning result.
    """
    plan.check(tprog)
    conv = ("inputs are the nearest floats to the real arguments (rounded-input)"
            if plan.stability == "rounded-input" else
            "real and float inputs coincide (linked)")
    lines = [f"# verification conditions for {plan.unit} ({plan.fmt.name}, {plan.mode})",
             f"# {conv}",
             "# a op~ b is the rounded operation; ulp_" + plan.fmt.name + " is the unit in the "
             "last place", ""]
    for d in tprog.decls:
        lines += [_vc(tprog, plan, d.name), ""]
    return "\n".join(lines)


def vc_error_names(vc_text: str, tprog: TransformedProgram, plan: EmitPlan) -> dict:
    """Error parameters mentioned by each function's VC (symbolic mode)."""
    out = {}
    for block in vc_text.split("\n\n"):
        m = re.match(r"phi_(\w+) :=", block.strip())
        if not m:
            continue
        name = next(d for d, c in plan.names.tau.items() if c == m.group(1))
        ps = plan.names.params[name]
        words = set(re.findall(r"\b\w+\b", block))
        out[name] = {v for v in tprog[name].eps_names if ps[v] in words}
    return out


# ---------------------------------------------------------------------------
# files and native builds


@dataclass
class Emitted:
    c: str
    h: str
    vc: str

    def write(self, out_dir: str, unit: str) -> dict:
        os.makedirs(out_dir, exist_ok=True)
        paths = {}
        for ext, text in ((".c", self.c), (".h", self.h), (".vc.txt", self.vc)):
            path = os.path.join(out_dir, unit + ext)
            with open(path, "w") as fh:
                fh.write(text)
            paths[ext] = path
        return paths


def emit_all(tprog: TransformedProgram, plan: EmitPlan) -> Emitted:
    return Emitted(emit_c(tprog, plan), emit_header(tprog, plan), emit_vcs(tprog, plan))


C_FLAGS = ("-std=c99", "-O2", "-ffp-contract=off", "-fno-fast-math", "-fexcess-precision=standard")


def find_compiler() -> Optional[str]:
    for cc in (os.environ.get("CC"), "cc", "gcc", "clang"):
        if cc and shutil.which(cc):
            return cc
    return None


class Native:
    """A compiled translation unit loaded through ctypes."""

    def __init__(self, lib_path: str, tprog: TransformedProgram, plan: EmitPlan):
        self.lib = ctypes.CDLL(lib_path)
        self.plan = plan
        ct = ctypes.c_float if plan.fmt.precision == 24 else ctypes.c_double
        rec = type("fp_result", (ctypes.Structure,),
                   {"_fields_": [("warning", ctypes.c_int), ("value", ct)]})
        self.fns = {}
        for d in tprog.decls:
            f = getattr(self.lib, plan.names.tau[d.name])
            f.restype = rec
            f.argtypes = [ct] * len(d.all_params)
            self.fns[d.name] = f

    def __call__(self, name: str, *args) -> tuple[int, float]:
        r = self.fns[name](*args)
        return r.warning, r.value


def build_native(tprog: TransformedProgram, plan: EmitPlan, workdir: Optional[str] = None,
                 cc: Optional[str] = None) -> Native:
    """Compile the emitted unit as a shared library and load it."""
    cc = cc or find_compiler()
    if cc is None:
        raise CodegenError("no C compiler found")
    em = emit_all(tprog, plan)
    workdir = workdir or tempfile.mkdtemp(prefix="fpstable-")
    digest = hashlib.sha1(em.c.encode()).hexdigest()[:12]
    unit = plan.unit
    paths = em.write(workdir, unit)
    lib = os.path.join(workdir, f"lib{unit}-{digest}.so")
    flags = list(C_FLAGS)
    if "clang" in os.path.basename(cc):
        flags.remove("-fexcess-precision=standard")
    cmd = [cc, *flags, "-shared", "-fPIC", "-o", lib, paths[".c"], "-lm"]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise CodegenError(f"compilation failed:\n{proc.stderr}")
    return Native(lib, tprog, plan)


__all__ = [
    "C_FLAGS", "CodegenError", "EmitPlan", "Emitted", "Names", "Native", "build_native",
    "c_float", "emit_acsl", "emit_all", "emit_c", "emit_header", "emit_vcs", "find_compiler",
    "make_plan", "vc_error_names",
]
