"""Differential runs of a real program, its float lowering and its instrumented form.

For every sample the harness evaluates

* the real program exactly (``mpq``), recording its branch trace,
* the float program bit-exactly, recording its branch trace,
* the transformed program with numeric error variables,

and checks the executable forms of the correctness statements: a
non-warning transformed result equals the float result bit for bit; a
divergent pair of traces forces a warning; and on stable paths the float
result is within the stable-only error bound of the real one.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional

from gmpy2 import mpfr, mpq

from ..fpmodel import DOUBLE, FloatFormat, FloatVal
from ..instantiate import Instantiation, error_bounds, instantiate_errors
from ..lang.ast import Decl, Program
from ..lang.convert import to_float_program
from ..optimizer import DEFAULT_CONFIG, BnBConfig
from ..semantics import program_fixpoint
from ..transform import TransformedProgram, transform_program
from .compiled import ARITH_ERRORS, Compiled, Warned, float_bits, to_fraction
from .interp import OMEGA, EvalError, eval_float, eval_real_exact, first_divergence
from .sampling import Sample, Sampler, boundary_exprs

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# single-input instability check on the reference interpreters


@dataclass
class DivergenceReport:
    inputs: dict
    real_result: object
    float_result: object
    real_trace: list
    float_trace: list
    first_divergence: Optional[int]

    @property
    def unstable(self) -> bool:
        return self.first_divergence is not None

    @property
    def site(self):
        if self.first_divergence is None:
            return None
        k = self.first_divergence
        t = self.float_trace if k < len(self.float_trace) else self.real_trace
        return t[k][:2]

    def to_json(self) -> dict:
        return {
            "inputs": {k: str(v) for k, v in self.inputs.items()},
            "real": str(self.real_result),
            "float": str(self.float_result),
            "realTrace": [list(t) for t in self.real_trace],
            "floatTrace": [list(t) for t in self.float_trace],
            "verdict": "unstable" if self.unstable else "stable",
            "site": list(self.site) if self.site else None,
        }


def detect_instability(prog: Program, fmt: FloatFormat, fname: str,
                       sigma_f: Mapping[str, object],
                       sigma_r: Optional[Mapping[str, object]] = None) -> DivergenceReport:
    """Run real and float versions of ``fname`` and compare their branch traces.

    ``prog`` is the real program.  Without ``sigma_r`` the real inputs are
    the values of the float inputs (linked assignment).
    """
    fprog = prog if prog.is_float else to_float_program(prog, fmt)
    flt = {k: v if isinstance(v, (FloatVal, int)) else FloatVal.from_float(float(v), fmt)
           for k, v in sigma_f.items()}
    if sigma_r is None:
        sigma_r = {k: (v if type(v) is int else v.value) for k, v in flt.items()}
    vr, tr = eval_real_exact(prog, fname, sigma_r)
    vf, tf = eval_float(fprog, fname, flt, fmt)
    return DivergenceReport(dict(flt), vr, vf, tr, tf, first_divergence(tr, tf))


# ---------------------------------------------------------------------------
# bulk runs


@dataclass
class FuzzReport:
    function: str
    mode: str
    samples: int = 0
    discarded: int = 0
    warnings: int = 0
    max_stable_error: Fraction = Fraction(0)
    bound: Optional[Fraction] = None
    instabilities: int = 0
    instability_examples: list = field(default_factory=list)
    thm2_violations: int = 0
    lemma2_misses: int = 0
    thm3_violations: int = 0
    stable_bound_violations: int = 0
    examples: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not (self.thm2_violations or self.lemma2_misses or self.thm3_violations
                    or self.stable_bound_violations)

    def merge(self, other: "FuzzReport") -> None:
        self.samples += other.samples
        self.discarded += other.discarded
        self.warnings += other.warnings
        self.max_stable_error = max(self.max_stable_error, other.max_stable_error)
        self.instabilities += other.instabilities
        room = 10 - len(self.instability_examples)
        self.instability_examples.extend(other.instability_examples[:max(room, 0)])
        self.thm2_violations += other.thm2_violations
        self.lemma2_misses += other.lemma2_misses
        self.thm3_violations += other.thm3_violations
        self.stable_bound_violations += other.stable_bound_violations
        for k, v in other.examples.items():
            self.examples.setdefault(k, v)
        self.seconds += other.seconds

    def to_json(self) -> dict:
        return {
            "function": self.function,
            "mode": self.mode,
            "samples": self.samples,
            "discarded": self.discarded,
            "warnings": self.warnings,
            "maxStableError": float(self.max_stable_error),
            "bound": None if self.bound is None else float(self.bound),
            "instabilityCount": self.instabilities,
            "instabilities": self.instability_examples,
            "thm2Violations": self.thm2_violations,
            "lemma2Misses": self.lemma2_misses,
            "thm3Violations": self.thm3_violations,
            "stableBoundViolations": self.stable_bound_violations,
            "counterexamples": self.examples,
            "seconds": round(self.seconds, 3),
        }


def _mpq_of(x) -> mpq:
    return x if type(x) is type(mpq()) else mpq(x)


class Harness:
    """Compiled evaluators and numeric parameters for one transformed program."""

    def __init__(self, tprog: TransformedProgram, inst: Instantiation, bounds: Mapping,
                 ranges: Mapping[str, tuple], mode: str = "rounded-input"):
        self.tprog = tprog
        self.fmt = tprog.fmt
        self.inst = inst
        self.bounds = dict(bounds)
        self.ranges = dict(ranges)
        self.mode = mode
        self.real = Compiled(tprog.source, "real")
        self.flt = Compiled(tprog.float_program, "float", self.fmt)
        self.tau = Compiled(tprog.program, "float", self.fmt)
        self._crossers: dict = {}

    @classmethod
    def build(cls, prog: Program, ranges: Optional[Mapping[str, tuple]] = None,
              fmt: Optional[FloatFormat] = None, mode: str = "rounded-input",
              cfg: BnBConfig = DEFAULT_CONFIG) -> "Harness":
        fmt = fmt or prog.fmt or DOUBLE
        ranges = dict(prog.range_map if ranges is None else ranges)
        tprog = transform_program(prog, fmt)
        interp = program_fixpoint(tprog.float_program, ranges=prog.range_map, fmt=fmt)
        inst = instantiate_errors(tprog, ranges, fmt, cfg, "rounded-input", interp)
        bounds = error_bounds(interp, ranges, fmt, cfg, mode)
        return cls(tprog, inst, {k: b.stable for k, b in bounds.items()}, ranges, mode)

    def _crosser(self, fname: str):
        if fname not in self._crossers:
            exprs = boundary_exprs(self.tprog.source, fname)
            params = self.tprog.source.decl(fname).params
            extra = [(f"__b{k}", params, e) for k, e in enumerate(exprs)]
            comp = Compiled(self.tprog.source, "real", extra=extra) if exprs else None
            fns = [comp.fn(f"__b{k}") for k in range(len(exprs))] if comp else []
            self._crossers[fname] = (lambda k, xs: fns[k](*xs, [])), len(fns)
        return self._crossers[fname]

    def sampler(self, fname: str, seed: int = 0, bias: float = 0.5) -> Sampler:
        params = self.tprog.source.decl(fname).params
        cross, n = self._crosser(fname)
        return Sampler(params, self.ranges, self.fmt, self.mode, seed, cross, n, bias)

    def eps_args(self, fname: str) -> tuple:
        return tuple(mpfr(float(v)) for v in self.inst.args(fname))

    def check(self, fname: str, samples: Iterable[Sample], report: Optional[FuzzReport] = None,
              bound: Optional[Fraction] = None) -> FuzzReport:
        rep = report or FuzzReport(fname, self.mode)
        if bound is None:
            bound = self.bounds.get(fname)
        rep.bound = bound
        qbound = None if bound is None else mpq(bound.numerator, bound.denominator)
        f_real, f_flt, f_tau = self.real.fn(fname), self.flt.fn(fname), self.tau.fn(fname)
        eps = self.eps_args(fname)
        started = time.perf_counter()
        best = mpq(0)
        for s in samples:
            xf = [mpfr(x) for x in s.flt]
            tr_r: list = []
            tr_f: list = []
            try:
                vr = f_real(*s.real, tr_r)
                vf = f_flt(*xf, tr_f)
                try:
                    vt = f_tau(*xf, *eps, [])
                except Warned:
                    vt = OMEGA
            except ARITH_ERRORS:
                rep.discarded += 1
                continue
            rep.samples += 1
            unstable = tr_r != tr_f
            if vt is OMEGA:
                rep.warnings += 1
            elif float_bits(vt) != float_bits(vf):
                rep.thm2_violations += 1
                rep.examples.setdefault("thm2", s.to_json())
            if unstable:
                rep.instabilities += 1
                if len(rep.instability_examples) < 10:
                    k = first_divergence(tr_r, tr_f)
                    t = tr_f if k < len(tr_f) else tr_r
                    rep.instability_examples.append({"input": s.to_json(), "site": list(t[k][:2])})
                if vt is not OMEGA:
                    rep.lemma2_misses += 1
                    rep.examples.setdefault("lemma2", s.to_json())
                continue
            err = abs(_mpq_of(vf) - vr)
            if err > best:
                best = err
            if qbound is not None and err > qbound:
                rep.stable_bound_violations += 1
                rep.examples.setdefault("bound", s.to_json())
                if vt is not OMEGA:
                    rep.thm3_violations += 1
        rep.max_stable_error = max(rep.max_stable_error, to_fraction(best))
        rep.seconds += time.perf_counter() - started
        return rep

    def fuzz(self, fname: str, n: int, seed: int = 0, bias: float = 0.5,
             batch: int = 4096) -> FuzzReport:
        """``n`` samples (corners first), half of them near guard sign changes by default."""
        smp = self.sampler(fname, seed, bias)
        rep = FuzzReport(fname, self.mode)
        first = smp.corners()[:n]
        self.check(fname, first, rep)
        left = n - len(first)
        while left > 0:
            k = min(batch, left)
            self.check(fname, smp.batch(k), rep)
            left -= k
        return rep


def differential_fuzz(prog: Program, fmt: Optional[FloatFormat] = None,
                      ranges: Optional[Mapping[str, tuple]] = None, n: int = 1000, seed: int = 0,
                      mode: str = "rounded-input", functions: Optional[Iterable[str]] = None,
                      cfg: BnBConfig = DEFAULT_CONFIG, bias: float = 0.5) -> dict[str, FuzzReport]:
    """Transform, instantiate and fuzz every function of ``prog``.

    Each function gets ``n`` samples with a seed derived from ``seed`` and
    its position, so reports do not depend on which functions are chosen.
    """
    h = Harness.build(prog, ranges, fmt, mode, cfg)
    names = [d.name for d in prog.decls]
    chosen = names if functions is None else list(functions)
    out = {}
    for name in chosen:
        out[name] = h.fuzz(name, n, seed * 1000003 + names.index(name), bias)
    return out


def fuzz_summary(reports: Mapping[str, FuzzReport]) -> dict:
    total = FuzzReport("*", next(iter(reports.values())).mode if reports else "rounded-input")
    for r in reports.values():
        total.merge(r)
    return {"schemaVersion": SCHEMA_VERSION,
            "functions": {k: r.to_json() for k, r in reports.items()},
            "total": {k: v for k, v in total.to_json().items()
                      if k not in ("function", "bound", "counterexamples")}}


def dumps(reports: Mapping[str, FuzzReport]) -> str:
    return json.dumps(fuzz_summary(reports), indent=2)


# ---------------------------------------------------------------------------
# targeted search for instabilities caused by underflow


def subnormal_product_candidates(fmt: FloatFormat, spread: int = 6, odd: Iterable[int] = (1, 3, 5, 7)):
    """Pairs ``(m1 * 2**-a, -(m2 * 2**-b))`` whose exact product sits near the underflow threshold.

    Their product rounds to zero in ``fmt`` when it is at most half the
    smallest subnormal, while its real sign stays negative.
    """
    top = fmt.emin + 1
    half = top // 2
    for t in range(top - spread, top + spread + 1):
        for a in range(half - 3, half + 4):
            b = t - a
            for m1 in odd:
                for m2 in odd:
                    x, y = Fraction(m1, 2 ** a), -Fraction(m2, 2 ** b)
                    try:
                        yield FloatVal.from_float(float(x), fmt), FloatVal.from_float(float(y), fmt)
                    except (ValueError, OverflowError):
                        continue


def search_witnesses(prog: Program, fname: str, fmt: FloatFormat, candidates) -> list[DivergenceReport]:
    """Every candidate input at which ``fname`` takes different real and float paths."""
    out = []
    d = prog.decl(fname)
    for vals in candidates:
        sigma = dict(zip(d.params, vals))
        if any(to_fraction(v) != to_fraction(float(v)) for v in vals):
            continue
        try:
            rep = detect_instability(prog, fmt, fname, sigma)
        except (EvalError, ZeroDivisionError, OverflowError):
            continue
        if rep.unstable:
            out.append(rep)
    return out


__all__ = [
    "DivergenceReport", "FuzzReport", "Harness", "SCHEMA_VERSION", "detect_instability",
    "differential_fuzz", "dumps", "fuzz_summary", "search_witnesses", "subnormal_product_candidates",
]
