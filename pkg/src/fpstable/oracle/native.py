"""Agreement of compiled C with the float evaluators."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping, Optional

from ..codegen import EmitPlan, Native
from ..fpmodel import FloatVal
from ..transform import TransformedProgram
from .compiled import ARITH_ERRORS, Compiled, Warned, float_bits, to_floatval
from .interp import OMEGA, EvalError, FloatMachine
from .sampling import Sampler, boundary_exprs


@dataclass
class AgreementReport:
    function: str
    samples: int = 0
    discarded: int = 0
    warnings: int = 0
    value_mismatches: int = 0  # against the (m, e) interpreter
    bit_mismatches: int = 0  # against the mpfr backend, signed zeros included
    examples: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.value_mismatches == 0 and self.bit_mismatches == 0

    def to_json(self) -> dict:
        return {"function": self.function, "samples": self.samples,
                "discarded": self.discarded, "warnings": self.warnings,
                "valueMismatches": self.value_mismatches, "bitMismatches": self.bit_mismatches,
                "examples": self.examples[:5], "seconds": round(self.seconds, 3)}


def compare_native(tprog: TransformedProgram, plan: EmitPlan, native: Native,
                   ranges: Mapping[str, tuple], n: int = 10_000, seed: int = 0,
                   functions: Optional[list] = None) -> dict[str, AgreementReport]:
    """Run every function on ``n`` inputs in C, in the interpreter and under mpfr.

    Half of the inputs lie a few ulps from a guard boundary so that
    warnings are exercised.  Error parameters take the plan's values
    (zero in symbolic mode).
    """
    fmt = plan.fmt
    prog = tprog.program
    machine = FloatMachine(prog, fmt)
    mp = Compiled(prog, "float", fmt)
    out = {}
    for k, d in enumerate(tprog.decls):
        if functions is not None and d.name not in functions:
            continue
        rep = AgreementReport(d.name)
        started = time.perf_counter()
        eps = [plan.eps.get(d.name, {}).get(v, FloatVal(0, 0, fmt)) for v in d.eps_names]
        eps_f = [float(e) for e in eps]
        f_mp = mp.fn(d.name)
        exprs = boundary_exprs(tprog.source, d.name)
        crossing = None
        if exprs:
            real = Compiled(tprog.source, "real",
                            extra=[(f"__b{j}", d.params, e) for j, e in enumerate(exprs)])
            fns = [real.fn(f"__b{j}") for j in range(len(exprs))]
            crossing = lambda j, xs, fns=fns: fns[j](*xs, [])
        smp = Sampler(d.params, ranges, fmt, "linked", seed * 1009 + k, crossing, len(exprs))
        samples = smp.corners()[:n]
        samples += smp.batch(n - len(samples))
        for s in samples:
            args = [*s.flt, *eps_f]
            try:
                ref = machine.run(d.name, [FloatVal.from_float(x, fmt) for x in s.flt] + eps, [])
            except EvalError:
                rep.discarded += 1
                continue
            try:
                bits = f_mp(*[mp.convert_in(x) for x in args], [])
            except Warned:
                bits = OMEGA
            except ARITH_ERRORS:
                rep.discarded += 1
                continue
            rep.samples += 1
            warning, value = native(d.name, *args)
            if ref is OMEGA:
                rep.warnings += 1
                ok_value = warning != 0
            else:
                ok_value = warning == 0 and FloatVal.from_float(value, fmt) == to_floatval(ref, fmt)
            ok_bits = (warning != 0) if bits is OMEGA else (
                warning == 0 and float_bits(value) == float_bits(bits))
            rep.value_mismatches += not ok_value
            rep.bit_mismatches += not ok_bits
            if not (ok_value and ok_bits) and len(rep.examples) < 5:
                rep.examples.append({"inputs": [x.hex() for x in s.flt],
                                     "c": [warning, float(value).hex()],
                                     "reference": "warn" if ref is OMEGA else float(ref).hex()})
        rep.seconds = time.perf_counter() - started
        out[d.name] = rep
    return out


__all__ = ["AgreementReport", "compare_native"]
