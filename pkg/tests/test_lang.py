from fractions import Fraction

import pytest

from fpstable import benchmarks
from fpstable.fpmodel import DOUBLE, SINGLE, FloatVal
from fpstable.lang import (
    ParseError, WellFormednessError, desugar, parse_expr, parse_program, program_from_json,
    program_to_json, show, show_program, to_float_program,
)
from fpstable.lang.ast import For, If
from fpstable.oracle import eval_real_exact


@pytest.mark.parametrize("name", benchmarks.names())
def test_benchmarks_round_trip(name):
    prog = benchmarks.load(name)
    assert parse_program(show_program(prog)) == prog
    assert program_from_json(program_to_json(prog)) == prog


def test_decimal_constants_are_exact_rationals():
    assert parse_expr("0.1").value == Fraction(1, 10)
    assert parse_expr("1.25e2").value == 125


def test_float_lowering_rounds_constants():
    prog = to_float_program(parse_program("f(x) = 0.1"), DOUBLE)
    num = prog.decls[0].body
    assert num.value == FloatVal(3602879701896397, -55)
    assert num.source == Fraction(1, 10)
    single = to_float_program(parse_program("f(x) = 0.1"), SINGLE).decls[0].body
    assert single.value.value == Fraction(13421773, 2 ** 27)


def test_precedence_and_unary_minus():
    assert show(parse_expr("-(a - b) * c")) == "-(a - b) * c"
    assert show(parse_expr("a - (b - c)")) == "a - (b - c)"
    assert show(parse_expr("a / b / c")) == "a / b / c"


def test_for_loops_sum():
    prog = parse_program(
        "f(n) = for i in 1..10 with acc = 0 do acc + i\n"
        "g(x) = for i in 1..4 with a = 0 do a + i * i\n")
    assert eval_real_exact(prog, "f", {"n": Fraction(0)})[0] == 55
    assert eval_real_exact(prog, "g", {"x": Fraction(0)})[0] == 30


def test_desugared_loop_agrees_with_loop():
    prog = parse_program("f(x) = for i in 1..3 with a = 1 do a * x + i")
    loop = prog.decls[0].body
    assert isinstance(loop, For)
    flat = desugar(loop)
    assert "for" not in show(flat)
    flat_prog = parse_program(f"f(x) = {show(flat)}", check=False)
    x = Fraction(3, 7)
    assert eval_real_exact(prog, "f", {"x": x})[0] == eval_real_exact(flat_prog, "f", {"x": x})[0]


def test_nary_if_keeps_branch_order():
    body = benchmarks.load("regions").decls[0].body.body
    assert isinstance(body, If)
    assert len(body.guards) == 3 and len(body.bodies) == 4


@pytest.mark.parametrize("text, err", [
    ("f(x) = x +", ParseError),
    ("f(x, x) = x", ParseError),
    ("f(x) = if x < 0 then 1", ParseError),
    ("f(x) = y", WellFormednessError),
    ("f(x) = g(x)", WellFormednessError),
    ("f(x) = warn", WellFormednessError),
])
def test_rejected_programs(text, err):
    with pytest.raises(err):
        parse_program(text)


def test_parse_error_has_position():
    with pytest.raises(ParseError, match=r"1:11"):
        parse_program("f(x) = x +")
