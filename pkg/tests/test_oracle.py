from fractions import Fraction

import pytest

from fpstable import benchmarks
from fpstable.fpmodel import DOUBLE, SINGLE, FloatVal, get_format, round_nearest
from fpstable.lang import parse_program, to_float_program
from fpstable.oracle import OMEGA, Compiled, EvalError, eval_float, eval_real_exact
from fpstable.oracle.compiled import to_fraction
from fpstable.oracle.harness import (
    Harness, detect_instability, differential_fuzz, fuzz_summary, search_witnesses,
    subnormal_product_candidates,
)
from fpstable.oracle.lemma import LemmaChecker, guard_cases, random_guard_program
from fpstable.oracle.sampling import Sampler, float_key, key_float

VWCV_RANGES = {"s": (Fraction(0), Fraction(1000)), "v": (Fraction(1), Fraction(200))}


def _samples(prog, name, fmt, n, seed):
    d = prog.decl(name)
    ranges = {p: prog.range_map.get(p, (Fraction(-50), Fraction(50))) for p in d.params}
    return Sampler(d.params, ranges, fmt, "linked", seed).batch(n)


@pytest.mark.parametrize("fmt_name", ["double", "single"])
@pytest.mark.parametrize("name", benchmarks.names())
def test_interpreters_agree_with_compiled_backends(name, fmt_name):
    fmt = get_format(fmt_name)
    prog = benchmarks.load(name)
    fprog = to_float_program(prog, fmt)
    real, flt = Compiled(prog, "real"), Compiled(fprog, "float", fmt)
    for k, d in enumerate(prog.decls):
        for s in _samples(prog, d.name, fmt, 60, k):
            sigma = dict(zip(d.params, s.flt))
            try:
                vr, tr = eval_real_exact(prog, d.name, {p: Fraction(x) for p, x in sigma.items()})
                vf, tf = eval_float(fprog, d.name, sigma, fmt)
            except EvalError:
                continue
            tr2, tf2 = [], []
            assert to_fraction(real.run(d.name, s.flt, tr2)) == vr
            assert to_fraction(flt.run(d.name, s.flt, tf2)) == to_fraction(vf)
            assert (tr2, tf2) == (tr, tf)


def test_float_semantics_round_each_operation():
    prog = to_float_program(parse_program("f(x) = x * 0.1 + 0.2"), DOUBLE)
    v, _ = eval_float(prog, "f", {"x": 3.0})
    assert float(v) == 3.0 * 0.1 + 0.2
    single = to_float_program(parse_program("f(x) = x * 0.1 + 0.2"), SINGLE)
    v, _ = eval_float(single, "f", {"x": FloatVal.from_float(3.0, SINGLE)}, SINGLE)
    assert v != FloatVal.from_float(3.0 * 0.1 + 0.2)


def test_division_by_zero_is_an_error():
    prog = parse_program("f(x) = 1 / x")
    with pytest.raises(EvalError):
        eval_real_exact(prog, "f", {"x": Fraction(0)})


def test_warn_value_is_omega():
    prog = parse_program("f(x, e) = if x < -e then 1 elsif x >= e then 2 else warn", check=False)
    prog = to_float_program(prog, DOUBLE)
    assert eval_float(prog, "f", {"x": 0.0, "e": 1.0})[0] is OMEGA


def test_subnormal_witness():
    prog = benchmarks.load("vwcv")
    rep = detect_instability(prog, DOUBLE, "tcoa", {"s": FloatVal(1, -538), "v": FloatVal(-1, -537)})
    assert rep.unstable
    assert rep.site == ("tcoa", 0)
    assert rep.real_result == Fraction(1, 2)
    assert to_fraction(rep.float_result) == 0


def test_witness_search():
    cands = list(subnormal_product_candidates(DOUBLE))
    found = search_witnesses(benchmarks.load("vwcv"), "tcoa", DOUBLE, cands)
    assert (len(cands), len(found)) == (1456, 357)
    # every witness multiplies to at most half the smallest subnormal
    for w in found:
        prod = abs(w.inputs["s"].value * w.inputs["v"].value)
        assert prod <= Fraction(1, 2 ** 1075)


def test_float_keys_step_by_ulps():
    for fmt in (DOUBLE, SINGLE):
        for x in (0.0, 1.0, -2.5, 5e-324 if fmt is DOUBLE else 1.401298464324817e-45):
            k = float_key(x, fmt)
            assert key_float(k, fmt) == x
            assert key_float(k + 1, fmt) > x and key_float(k - 1, fmt) < x


def test_rounded_input_samples_round_back():
    smp = Sampler(("x",), {"x": (Fraction(-3), Fraction(3))}, DOUBLE, "rounded-input", 5)
    for s in smp.batch(500):
        x, r = s.flt[0], s.real[0]
        assert float(round_nearest(to_fraction(r), DOUBLE)) == x
        assert -3 <= r <= 3


def test_sampler_is_reproducible():
    a = Sampler(("x", "y"), {"x": (0, 1), "y": (0, 1)}, DOUBLE, "rounded-input", 9).batch(50)
    b = Sampler(("x", "y"), {"x": (0, 1), "y": (0, 1)}, DOUBLE, "rounded-input", 9).batch(50)
    assert a == b


@pytest.mark.parametrize("name", benchmarks.names())
def test_differential_fuzz(name):
    ranges = VWCV_RANGES if name == "vwcv" else None
    reports = differential_fuzz(benchmarks.load(name), ranges=ranges, n=1500, seed=1)
    for rep in reports.values():
        assert rep.ok, rep.to_json()
        assert rep.samples > 0


def test_fuzz_reports_instabilities_and_warnings():
    reports = differential_fuzz(benchmarks.load("chain"), n=2000)
    h = reports["h"]
    assert h.instabilities > 0 and h.warnings >= h.instabilities
    assert fuzz_summary(reports)["schemaVersion"] == 1


def test_lemma_on_benchmarks():
    for name in ("chain", "horner", "quadratic", "regions"):
        checker = LemmaChecker(Harness.build(benchmarks.load(name)))
        rep = checker.check(500, seed=2)
        assert rep.violations == 0 and rep.eps_violations == 0
        assert rep.samples > 0 and rep.plus_true > 0 and rep.minus_true > 0


def test_lemma_on_random_guards():
    prog = parse_program(random_guard_program(4))
    checker = LemmaChecker(Harness.build(prog))
    assert len(checker.cases) >= len(prog.decls)
    rep = checker.check(200)
    assert rep.violations == 0


def test_guards_inside_loops_are_skipped():
    cases, skipped = guard_cases(Harness.build(benchmarks.load("loops")).tprog)
    assert cases == [] and skipped == 1
