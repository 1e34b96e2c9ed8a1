import re
from fractions import Fraction

import pytest

from fpstable import benchmarks
from fpstable.codegen import (
    CodegenError, EmitPlan, build_native, c_float, emit_acsl, emit_all, emit_c, emit_header,
    emit_vcs, find_compiler, make_plan, vc_error_names,
)
from fpstable.fpmodel import DOUBLE, SINGLE, FloatVal, round_nearest
from fpstable.lang import parse_program
from fpstable.oracle.native import compare_native
from fpstable.transform import transform_program

RANGES = {"s": (Fraction(0), Fraction(1000)), "v": (Fraction(1), Fraction(200))}
needs_cc = pytest.mark.skipif(find_compiler() is None, reason="no C compiler")


@pytest.fixture(scope="module")
def vwcv():
    tprog = transform_program(benchmarks.load("vwcv"))
    return tprog, make_plan(tprog, "numeric", RANGES)


def _function(c_text, name):
    start = c_text.index(f"fp_result {name}(")
    return c_text[start:c_text.index("\n}\n", start)]


def test_float_literals():
    assert c_float(round_nearest(Fraction(1, 10)), DOUBLE) == "0x1.999999999999ap-4"
    assert c_float(FloatVal(3, 0), DOUBLE) == "3.0"
    assert c_float(FloatVal(-3, 0), DOUBLE) == "(-3.0)"
    assert c_float(round_nearest(Fraction(1, 10), SINGLE), SINGLE).endswith("f")


def test_emission_is_deterministic(vwcv):
    tprog, plan = vwcv
    a, b = emit_all(tprog, plan), emit_all(tprog, make_plan(tprog, "numeric", RANGES))
    assert (a.c, a.h, a.vc) == (b.c, b.h, b.vc)


def test_tcoa_structure(vwcv):
    tprog, plan = vwcv
    body = _function(emit_c(tprog, plan), "tcoa_tau")
    assert body.startswith("fp_result tcoa_tau(double s, double v, double e)")
    assert "if (((s * v) < (-e)))" in body
    assert "if (((s * v) >= e))" in body
    assert body.count("goto warned;") == 1
    assert "res.warning = 1;" in body


def test_callee_warning_checked_before_use(vwcv):
    tprog, plan = vwcv
    body = _function(emit_c(tprog, plan), "vmd_tau")
    call = body.index("c3 = tcoa_tau(s, v, e);")
    check = body.index("if (c3.warning) goto warned;")
    use = body.index("c3.value")
    assert call < check < use


def test_header(vwcv):
    tprog, plan = vwcv
    h = emit_header(tprog, plan)
    assert "typedef struct {\n    int warning;\n    double value;\n} fp_result;" in h
    assert "fp_result vwcv_tau(double s, double v, double e1, double e2, double e3, double e);" in h
    assert "fp_result vmd_num(double s, double v);" in h


def test_constant_function():
    tprog = transform_program(benchmarks.load("basic"))
    plan = make_plan(tprog, "numeric")
    body = _function(emit_c(tprog, plan), "tenth_tau")
    assert "res.value = 0x1.999999999999ap-4;" in body
    assert "warned" not in body


def test_contracts_mention_every_error_parameter(vwcv):
    tprog, plan = vwcv
    acsl = emit_acsl(tprog, plan)
    assert "axiomatic" in acsl
    c = emit_c(tprog, plan)
    for d in tprog.decls:
        contract = acsl[d.name]
        sig = re.search(rf"fp_result {d.name}_tau\(([^)]*)\)", c).group(1)
        for e in d.eps_names:
            assert re.search(rf"requires {e} >= 0", contract)
            assert f"double {e}" in sig
        assert "ensures !\\result.warning ==>" in contract


def test_numeric_vcs_substitute_values(vwcv):
    tprog, plan = vwcv
    vc = emit_vcs(tprog, plan)
    block = vc.split("phi_tcoa_tau :=")[1].split("\n\n")[0]
    assert "|(s *~ v) - (s_r * v_r)| <= 4.0131453715730465e-11" in block
    assert "with e <- 4.0131453715730465e-11" in block
    assert "phi_tcoa_tau[s <- s, v <- v, e <- 4.0131453715730465e-11, res <- res_tcoa]" in vc


def test_symbolic_vcs(vwcv):
    tprog, _ = vwcv
    plan = make_plan(tprog, "symbolic", RANGES)
    vc = emit_vcs(tprog, plan)
    assert "s_r, v_r, e_s, e_v, e1, e2, e3, e in R" in vc
    assert "|s - s_r| <= e_s" in vc
    names = vc_error_names(vc, tprog, plan)
    assert names == {d.name: set(d.eps_names) for d in tprog.decls}


def test_numeric_mode_needs_every_value(vwcv):
    tprog, plan = vwcv
    partial = EmitPlan(plan.fmt, "numeric", {"tcoa": {}}, plan.bounds, plan.symbolic,
                       plan.ranges, plan.stability, plan.unit, plan.names)
    with pytest.raises(CodegenError):
        partial.check(tprog)


def test_short_circuit_keeps_order():
    prog = parse_program("g(x) = if x * x < 1 then 1 else 2\n"
                         "f(x) = if x > 0 or g(x) > 1 then 1 else 0")
    tprog = transform_program(prog)
    plan = make_plan(tprog, "numeric", {"x": (Fraction(-2), Fraction(2))})
    body = _function(emit_c(tprog, plan), "f_tau")
    # past the warning check, the callee runs only when the first operand is false
    guard = body[body.index("} else {"):]
    assert re.search(r"(b\d+) = \(x > e1\);\s+if \(!\1\) \{\s+c\d+ = g_tau\(x, e\);", guard)


@needs_cc
@pytest.mark.parametrize("fmt", [DOUBLE, SINGLE])
def test_native_agrees(tmp_path, fmt):
    for name in ("vwcv", "chain", "regions"):
        prog = benchmarks.load(name)
        ranges = RANGES if name == "vwcv" else prog.range_map
        tprog = transform_program(prog, fmt)
        plan = make_plan(tprog, "numeric", ranges)
        native = build_native(tprog, plan, str(tmp_path))
        for rep in compare_native(tprog, plan, native, ranges, n=400, seed=3).values():
            assert rep.ok, rep.to_json()
