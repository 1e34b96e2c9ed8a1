from fractions import Fraction

from fpstable import benchmarks
from fpstable.lang import parse_program, show, show_bool
from fpstable.semantics import (
    canonical_order, interpretation_to_json, overall_error, program_fixpoint,
)

DIV_ERR = ("(abs(s) * err(v) + abs(v) * err(s)) / (v * v - err(v) * abs(v)) "
           "+ 0.5 * ulp_double((abs(s) + err(s)) / (abs(v) - err(v)))")

TCOA = [
    # real test, float test, real result, float result, error, flag
    ("s * v < 0", "s * v < 0", "-(s / v)", "-(s / v)", DIV_ERR, "s"),
    ("s * v < 0", "s * v >= 0", "-(s / v)", "0", "abs(s / v)", "u"),
    ("s * v >= 0", "s * v < 0", "0", "-(s / v)", DIV_ERR + " + abs(s / v)", "u"),
    ("s * v >= 0", "s * v >= 0", "0", "0", "0", "s"),
]


def _rows(cebs):
    return [(show_bool(c.real_condition()), show_bool(c.float_condition()), show(c.r), show(c.v),
             show(c.e), c.flag) for c in canonical_order(cebs)]


def test_tcoa_has_four_cebs():
    interp = program_fixpoint(benchmarks.load("vwcv"))
    assert sorted(_rows(interp["tcoa"].cebs)) == sorted(TCOA)


def test_order_is_canonical():
    interp = program_fixpoint(benchmarks.load("vwcv"))
    cebs = interp["tcoa"].cebs
    assert _rows(cebs) == _rows(list(reversed(cebs)))


def test_declared_ranges_prune_unreachable_cebs():
    ranges = {"s": (Fraction(0), Fraction(1000)), "v": (Fraction(1), Fraction(200))}
    interp = program_fixpoint(benchmarks.load("vwcv"), ranges=ranges)
    assert _rows(interp["tcoa"].cebs) == [TCOA[3]]


def test_overall_error_modes():
    cebs = program_fixpoint(benchmarks.load("vwcv"))["tcoa"].cebs
    assert show(overall_error(cebs, "stable-only")) == DIV_ERR
    everything = show(overall_error(cebs))
    assert everything.startswith("max(") and "abs(s / v)" in everything


def test_calls_reuse_callee_semantics():
    interp = program_fixpoint(benchmarks.load("vwcv"))
    vmd = interp["vmd"].cebs
    assert len(vmd) == 4
    assert sum(not c.stable for c in vmd) == 2
    # the stable branch through the division carries the callee's division error
    stable_div = [c for c in vmd if c.stable and "s / v" in show(c.r)]
    assert stable_div and DIV_ERR in show(stable_div[0].e)


def test_exact_guard_still_has_unstable_pairs():
    prog = parse_program("f(x) = if x < 1 then 1 else 2")
    rows = _rows(program_fixpoint(prog)["f"].cebs)
    assert ("x - 1 < 0", "x - 1 >= 0", "1", "2", "1", "u") in rows
    assert len(rows) == 4


def test_json_dump():
    data = interpretation_to_json(program_fixpoint(benchmarks.load("vwcv")))
    assert data["tcoa"]["params"] == ["s", "v"]
    assert {c["flag"] for c in data["tcoa"]["cebs"]} == {"s", "u"}
