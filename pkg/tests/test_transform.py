from fpstable import benchmarks
from fpstable.lang import Warn, parse_bool, parse_program, show, show_bool
from fpstable.lang.ast import If, IsWarn, walk
from fpstable.transform import (
    beta_minus, beta_plus, epsilon_vars, is_exact_guard, sign_test, transform_program,
)

TCOA = "tcoa(s, v, e) = if s * v < -e then -(s / v) elsif s * v >= e then 0 else warn"
VMD = "vmd(s, v, e) = if is_warn(tcoa(s, v, e)) then warn else abs(s + tcoa(s, v, e) * v)"
VWCV = ("vwcv(s, v, e1, e2, e3, e) = if is_warn(tcoa(s, v, e)) then warn "
        "elsif abs(s) - 450 <= -e1 then 1 "
        "elsif abs(s) - 450 > e1 and tcoa(s, v, e) >= e2 and tcoa(s, v, e) - 35 <= -e3 then 1 "
        "elsif abs(s) - 450 > e1 and (tcoa(s, v, e) < -e2 or tcoa(s, v, e) - 35 > e3) then 0 "
        "else warn")


def _shown(tprog):
    return {d.name: f"{d.name}({', '.join(d.all_params)}) = {show(d.body)}" for d in tprog.decls}


def test_vwcv_transformation():
    tprog = transform_program(benchmarks.load("vwcv"))
    shown = _shown(tprog)
    assert shown["tcoa"] == TCOA
    assert shown["vmd"] == VMD
    assert shown["vwcv"] == VWCV


def test_error_variable_sets():
    tprog = transform_program(benchmarks.load("vwcv"))
    guard_vars = {d.name: {v.name for v in d.eps if v.origin == "guard"} for d in tprog.decls}
    assert guard_vars == {"tcoa": {"e"}, "vwcv": {"e1", "e2", "e3"}, "vmd": set()}
    # callers take the callee's variable for s * v
    assert tprog["vmd"].eps_names == ("e",)
    assert [v.key for v in tprog["vwcv"].eps if v.origin == "call"] == ["s * v"]


def test_warning_checks_come_first():
    tprog = transform_program(benchmarks.load("vwcv"))
    for name in ("vwcv", "vmd"):
        body = tprog[name].body
        assert isinstance(body, If)
        assert isinstance(body.guards[0], IsWarn) and isinstance(body.bodies[0], Warn)
    assert not any(isinstance(n, IsWarn) for n in walk(tprog["tcoa"].body))


def test_beta_abstractions():
    phi = parse_bool("x - 1 < 0 and (y > 0 or not (x * y <= 2))")
    assert show_bool(beta_plus(phi)) == (
        "x - 1 < -eps[x - 1] and (y > eps[y] or x * y - 2 > eps[x * y - 2])")
    assert show_bool(beta_minus(phi)) == (
        "x - 1 >= eps[x - 1] or y <= -eps[y] and x * y - 2 <= -eps[x * y - 2]")
    assert epsilon_vars(phi) == ["x - 1", "y", "x * y - 2"]


def test_sign_tests():
    assert show_bool(sign_test(parse_bool("x < y"))) == "x - y < 0"
    assert show_bool(sign_test(parse_bool("2 * x >= 1"))) == "2 * x - 1 >= 0"


def test_integer_guards_stay_exact():
    assert is_exact_guard(parse_bool("i < 3"), frozenset({"i"}))
    tprog = transform_program(benchmarks.load("loops"))
    assert tprog["alternate"].eps_names == ()
    assert "warn" not in show(tprog["alternate"].body)
    assert tprog["capped"].eps_names == ("e",)


def test_functions_without_tests_are_unchanged():
    tprog = transform_program(benchmarks.load("basic"))
    for d in tprog.decls:
        assert d.eps_names == ()
        assert show(d.body) == show(tprog.float_program.decl(d.name).body)


def test_each_call_site_gets_its_own_variable():
    prog = parse_program("f(x) = let a = x * x in if a < 2 then a else 0\n"
                         "g(y) = f(y) + f(y * 2)")
    tprog = transform_program(prog)
    assert tprog["g"].eps_names == ("e1", "e2")
    assert show(tprog["g"].body) == (
        "if is_warn(f(y, e1)) or is_warn(f(y * 2, e2)) then warn else f(y, e1) + f(y * 2, e2)")


def test_transform_is_deterministic():
    a = transform_program(benchmarks.load("regions"))
    b = transform_program(benchmarks.load("regions"))
    assert _shown(a) == _shown(b)
