"""Sampling check of the Boolean abstractions.

For a guard ``phi`` over sign-test atoms ``a_j`` and error values ``e_j``
with ``|a~_j - a_j| <= e_j`` (the premise), the strengthened tests must
satisfy::

    beta_plus(phi)  holds in floats  =>  phi holds in floats and in reals
    beta_minus(phi) holds in floats  =>  phi fails in floats and in reals

The guards are rewritten over placeholder atoms so that one compiled
predicate serves the float test, the real test and both strengthenings.
Premise failures are counted apart; an atom whose own evaluation took
an unstable path is expected to break the premise and is reported as such.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from gmpy2 import mpfr, mpq

from ..lang.ast import (
    And, BConst, Call, Decl, For, If, Let, Not, Num, Op, Or, Program, Rel, Var, is_int_typed,
    substitute, walk,
)
from ..lang.convert import _to_float
from ..lang.printer import show
from ..transform import beta_minus, beta_plus, guard_atoms, is_exact_guard, sign_test
from .compiled import ARITH_ERRORS, Compiled, Warned, to_fraction
from .harness import Harness
from .sampling import Sampler


@dataclass
class GuardCase:
    decl: str
    site: int
    index: int
    guard: object  # over placeholder atoms __a0, __a1, ...
    atoms: tuple  # real source atoms with lets substituted
    eps_names: tuple  # error variable per atom, None for integer atoms


def _placeholders(phi, table: dict):
    if isinstance(phi, Rel):
        r = sign_test(phi)
        k = table.setdefault(show(r.lhs), len(table))
        return Rel(r.op, Var(f"__a{k}"), Num(0))
    if isinstance(phi, And):
        return And(tuple(_placeholders(a, table) for a in phi.args))
    if isinstance(phi, Or):
        return Or(tuple(_placeholders(a, table) for a in phi.args))
    if isinstance(phi, Not):
        return Not(_placeholders(phi.arg, table))
    if isinstance(phi, BConst):
        return phi
    raise TypeError(f"unsupported guard node {type(phi).__name__}")


def guard_cases(tprog) -> tuple[list[GuardCase], int]:
    """Abstracted guards reachable outside loops, and the number skipped inside loops."""
    records = {}
    for g in tprog.guards:
        records.setdefault((g.decl, g.site), []).append(g)
    out: list[GuardCase] = []
    skipped = 0
    for d in tprog.source.decls:
        site = iter(range(10 ** 9))

        def visit(node, env, in_loop):
            nonlocal skipped
            if isinstance(node, Let):
                inner = dict(env)
                inner[node.name] = substitute(node.value, env)
                visit(node.body, inner, in_loop)
                return
            if isinstance(node, For):
                visit(node.body, env, True)
                return
            if isinstance(node, If):
                k = next(site)
                recs = records.get((d.name, k))
                if recs:
                    if in_loop:
                        skipped += len(recs)
                    else:
                        for i, (g, rec) in enumerate(zip(node.guards, recs)):
                            table: dict = {}
                            ph = _placeholders(g, table)
                            atoms = [None] * len(table)
                            for a in guard_atoms(g):
                                atoms[table[show(a)]] = substitute(a, env)
                            names = dict((show(a), n) for a, n in rec.atoms)
                            eps = tuple(names[show(_to_float(a, tprog.fmt))]
                                        for a in _ordered(g, table))
                            out.append(GuardCase(d.name, k, i, ph, tuple(atoms), eps))
                for b in node.bodies:
                    visit(b, env, in_loop)
                return
            for c in node.children():
                visit(c, env, in_loop)

        visit(d.body, {}, False)
    return out, skipped


def _ordered(g, table):
    inv = {k: None for k in range(len(table))}
    for a in guard_atoms(g):
        inv[table[show(a)]] = a
    return [inv[k] for k in range(len(table))]


@dataclass
class LemmaReport:
    samples: int = 0
    discarded: int = 0
    premise_failures: int = 0
    unstable_atoms: int = 0
    plus_true: int = 0
    minus_true: int = 0
    gap: int = 0
    plus_violations: int = 0
    minus_violations: int = 0
    # (decl, error variable) -> largest stable-path atom error seen, and its bound
    atom_error: dict = field(default_factory=dict)
    eps_violations: int = 0

    @property
    def violations(self) -> int:
        return self.plus_violations + self.minus_violations

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "discarded": self.discarded,
            "premiseFailures": self.premise_failures,
            "unstableAtoms": self.unstable_atoms,
            "plusTrue": self.plus_true,
            "minusTrue": self.minus_true,
            "neither": self.gap,
            "plusViolations": self.plus_violations,
            "minusViolations": self.minus_violations,
            "epsViolations": self.eps_violations,
            "atomError": {f"{d}.{v}": {"observed": float(o), "bound": float(b)}
                          for (d, v), (o, b) in self.atom_error.items()},
        }


class LemmaChecker:
    """Guard cases of one harness with their compiled atoms and predicates."""

    def __init__(self, harness: Harness):
        self.h = harness
        self.cases, self.skipped = guard_cases(harness.tprog)
        src = harness.tprog.source
        fmt = harness.fmt
        extra_r, extra_f, extra_p = [], [], []
        for c, case in enumerate(self.cases):
            params = src.decl(case.decl).params
            for j, a in enumerate(case.atoms):
                extra_r.append((f"__c{c}a{j}", params, a))
                extra_f.append((f"__c{c}a{j}", params, _to_float(a, fmt)))
            avars = tuple(f"__a{j}" for j in range(len(case.atoms)))
            evars = tuple(f"__e{j}" for j in range(len(case.atoms)))

            def eps(a, case=case):
                j = int(a.name[3:])
                return Num(0) if case.eps_names[j] is None else Var(f"__e{j}")

            for tag, phi in (("phi", case.guard), ("plus", beta_plus(case.guard, eps)),
                             ("minus", beta_minus(case.guard, eps))):
                extra_p.append((f"__c{c}{tag}", avars + evars, If(((phi, Num(1)),), Num(0))))
        self.real = Compiled(src, "real", extra=extra_r)
        self.flt = Compiled(harness.tprog.float_program, "float", fmt, extra=extra_f)
        self.pred = Compiled(Program((), fmt, True), "real", extra=extra_p)

    def check(self, n_per_case: int, seed: int = 0, bias: float = 0.5) -> LemmaReport:
        rep = LemmaReport()
        for c, case in enumerate(self.cases):
            self._case(c, case, n_per_case, seed * 7919 + c, bias, rep)
        return rep

    def _case(self, c, case: GuardCase, n: int, seed: int, bias: float, rep: LemmaReport):
        h = self.h
        params = h.tprog.source.decl(case.decl).params
        m = len(case.atoms)
        ra = [self.real.fn(f"__c{c}a{j}") for j in range(m)]
        fa = [self.flt.fn(f"__c{c}a{j}") for j in range(m)]
        phi, plus, minus = (self.pred.fn(f"__c{c}{t}") for t in ("phi", "plus", "minus"))
        vals = dict(zip(h.tprog[case.decl].eps_names, h.inst.args(case.decl)))
        eps_f = [mpfr(0) if e is None else mpfr(float(vals[e])) for e in case.eps_names]
        eps_q = [mpq(0) if e is None else mpq(to_fraction(vals[e])) for e in case.eps_names]
        keys = [(case.decl, e) for e in case.eps_names]
        best = [mpq(0)] * m
        smp = Sampler(params, h.ranges, h.fmt, h.mode, seed,
                      lambda k, xs: ra[k](*xs, []), m, bias)
        samples = smp.corners()[:n]
        samples += smp.batch(n - len(samples))
        for s in samples:
            xf = s.flt  # exact in every supported format; the context rounds each operation
            try:
                av_r, av_f, stable = [], [], True
                for j in range(m):
                    tr_r, tr_f = [], []
                    av_r.append(ra[j](*s.real, tr_r))
                    av_f.append(fa[j](*xf, tr_f))
                    stable = stable and tr_r == tr_f
            except (Warned, *ARITH_ERRORS):
                rep.discarded += 1
                continue
            rep.samples += 1
            errs = [abs(mpq(f) - r) for f, r in zip(av_f, av_r)]
            premise = all(e <= b for e, b in zip(errs, eps_q))
            if stable:
                for j, e in enumerate(errs):
                    if e > best[j]:
                        best[j] = e
                if not premise:
                    rep.eps_violations += 1
            if not premise:
                rep.premise_failures += 1
                if not stable:
                    rep.unstable_atoms += 1
                continue
            p = plus(*av_f, *eps_f, []) == 1
            q = minus(*av_f, *eps_f, []) == 1
            rep.plus_true += p
            rep.minus_true += q
            if not (p or q):
                rep.gap += 1
                continue
            f_holds = phi(*av_f, *eps_f, []) == 1
            r_holds = phi(*av_r, *eps_q, []) == 1
            if p and not (f_holds and r_holds):
                rep.plus_violations += 1
            if q and (f_holds or r_holds):
                rep.minus_violations += 1
        for j, k in enumerate(keys):
            if k[1] is None:
                continue
            old = rep.atom_error.get(k, (Fraction(0), to_fraction(eps_q[j])))
            rep.atom_error[k] = (max(old[0], to_fraction(best[j])), old[1])


# ---------------------------------------------------------------------------
# random guards


def _poly(rng: random.Random) -> str:
    terms = []
    for mono in ("x * x", "y * y", "x * y", "x", "y", ""):
        if rng.random() < 0.5:
            c = rng.choice(["1", "2", "3", "0.5", "0.1", "1.25", "7"])
            terms.append(c if not mono else f"{c} * {mono}")
    if not terms:
        terms.append("x")
    s = " + ".join(terms)
    return s.replace("+ -", "- ")


def _bool(rng: random.Random, depth: int) -> str:
    r = rng.random()
    if depth == 0 or r < 0.35:
        op = rng.choice(["<", "<=", ">", ">="])
        rhs = rng.choice(["0", "1", "2", "0.3", "y", "x"])
        return f"{_poly(rng)} {op} {rhs}"
    if r < 0.55:
        return f"not ({_bool(rng, depth - 1)})"
    join = " and " if r < 0.8 else " or "
    return "(" + join.join(_bool(rng, depth - 1) for _ in range(rng.randint(2, 3))) + ")"


def random_guard_program(seed: int, n_decls: int = 8) -> str:
    """Surface text of functions over ``x, y`` with random compound guards."""
    rng = random.Random(seed)
    lines = ["format double", "range x = -3:3", "range y = -3:3"]
    for k in range(n_decls):
        branches = rng.randint(1, 3)
        parts = []
        for b in range(branches):
            kw = "if" if b == 0 else "elsif"
            parts.append(f"{kw} {_bool(rng, 2)} then {b}")
        lines.append(f"g{k}(x, y) = " + " ".join(parts) + f" else {branches}")
    return "\n".join(lines) + "\n"


__all__ = ["GuardCase", "LemmaChecker", "LemmaReport", "guard_cases", "random_guard_program"]
